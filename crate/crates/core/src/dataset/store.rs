//! Dataset directory: `manifest.json` plus `samples.bin`, a little-endian
//! record file holding patches, velocity features and labels.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{channel_count, PatchSample, Split, PATCH_AREA};
use crate::error::{Error, Result};
use crate::motion::{FourierConfig, FrequencyBank};
use crate::risk::SteadyDistribution;
use crate::world::Pose2;

pub const DATASET_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"TCDS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub version: u32,
    pub seed: u64,
    pub channels: Vec<String>,
    pub num_classes: u8,
    pub seq_len: usize,
    pub fourier: FourierConfig,
    pub frequencies: FrequencyBank,
    pub steady: SteadyDistribution,
    pub world: String,
    pub trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    meta: DatasetMeta,
    samples: usize,
    split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    /// Time-sorted within each trajectory, trajectories contiguous.
    pub samples: Vec<PatchSample>,
    pub split: Split,
}

impl Dataset {
    pub fn patch_len(&self) -> usize {
        channel_count(self.meta.num_classes) * PATCH_AREA
    }

    pub fn validate(&self) -> Result<()> {
        let (p, v) = (self.patch_len(), self.meta.frequencies.feature_len());
        for (i, s) in self.samples.iter().enumerate() {
            if s.patch.len() != p || s.velocity.len() != v {
                return Err(Error::Shape(format!("sample {i}: patch {} / velocity {}", s.patch.len(), s.velocity.len())));
            }
            if !(0.0..=1.0).contains(&s.label) {
                return Err(Error::invalid(format!("sample {i}: label {} outside [0, 1]", s.label)));
            }
        }
        for s in self.split.train.iter().chain(&self.split.val).chain(&self.split.test) {
            if s.start + s.len > self.samples.len() || s.len != self.meta.seq_len {
                return Err(Error::Shape(format!("sequence {s:?} does not fit {} samples", self.samples.len())));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        fs::create_dir_all(dir)?;
        let manifest = Manifest { meta: self.meta.clone(), samples: self.samples.len(), split: self.split.clone() };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

        let mut w = BufWriter::new(File::create(dir.join("samples.bin"))?);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(DATASET_VERSION)?;
        w.write_u64::<LittleEndian>(self.samples.len() as u64)?;
        w.write_u32::<LittleEndian>(self.patch_len() as u32)?;
        w.write_u32::<LittleEndian>(self.meta.frequencies.feature_len() as u32)?;
        for s in &self.samples {
            w.write_u32::<LittleEndian>(s.trajectory)?;
            for v in [s.t, s.pose.x, s.pose.y, s.pose.yaw, s.speed, s.yaw_rate, s.label] {
                w.write_f64::<LittleEndian>(v)?;
            }
            for &v in s.patch.iter().chain(&s.velocity) {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.json");
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
            .map_err(|e| Error::Parse { path: manifest_path.clone(), message: e.to_string() })?;
        if manifest.meta.version != DATASET_VERSION {
            return Err(Error::Parse {
                path: manifest_path,
                message: format!("dataset version {} is not supported", manifest.meta.version),
            });
        }
        let bin_path = dir.join("samples.bin");
        let bad = |m: &str| Error::Parse { path: bin_path.clone(), message: m.to_string() };
        let mut r = BufReader::new(File::open(&bin_path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC || r.read_u32::<LittleEndian>()? != DATASET_VERSION {
            return Err(bad("not a dataset sample file"));
        }
        let count = r.read_u64::<LittleEndian>()? as usize;
        let patch_len = r.read_u32::<LittleEndian>()? as usize;
        let vel_len = r.read_u32::<LittleEndian>()? as usize;
        if count != manifest.samples {
            return Err(bad("sample count differs from the manifest"));
        }
        let mut samples = Vec::with_capacity(count);
        let mut head = [0.0f64; 7];
        for _ in 0..count {
            let trajectory = r.read_u32::<LittleEndian>()?;
            r.read_f64_into::<LittleEndian>(&mut head)?;
            let mut patch = vec![0.0f32; patch_len];
            r.read_f32_into::<LittleEndian>(&mut patch)?;
            let mut velocity = vec![0.0f32; vel_len];
            r.read_f32_into::<LittleEndian>(&mut velocity)?;
            let [t, x, y, yaw, speed, yaw_rate, label] = head;
            samples.push(PatchSample { trajectory, t, pose: Pose2::new(x, y, yaw), speed, yaw_rate, label, patch, velocity });
        }
        let ds = Dataset { meta: manifest.meta, samples, split: manifest.split };
        ds.validate()?;
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{assemble_sequences, split_dataset};
    use super::*;
    use crate::motion::sample_frequencies;
    use crate::risk::GRAVITY;

    #[test]
    fn labels_round_trip_bit_exactly() {
        let fourier = FourierConfig { pairs: 2, ..FourierConfig::default() };
        let bank = sample_frequencies(&fourier).unwrap();
        let patch_len = channel_count(2) * PATCH_AREA;
        let samples: Vec<PatchSample> = (0..40)
            .map(|i| PatchSample {
                trajectory: i / 10,
                t: (i % 10) as f64 * 0.1,
                pose: Pose2::new(i as f64, 0.5, 0.1),
                speed: 0.7,
                yaw_rate: 0.05,
                label: (i as f64 * 0.0371).sin().abs() / 3.0_f64.sqrt(),
                patch: (0..patch_len).map(|k| k as f32 * 0.5).collect(),
                velocity: vec![0.25; bank.feature_len()],
            })
            .collect();
        let seqs = assemble_sequences(&samples, 5);
        let split = split_dataset(&seqs, [0.5, 0.25, 0.25], 1).unwrap();
        let ds = Dataset {
            meta: DatasetMeta {
                version: DATASET_VERSION,
                seed: 1,
                channels: super::super::channel_names(2),
                num_classes: 2,
                seq_len: 5,
                fourier,
                frequencies: bank,
                steady: SteadyDistribution::new(GRAVITY, 0.2, (0.0, 5.0)).unwrap(),
                world: "test".into(),
                trajectories: 4,
            },
            samples,
            split,
        };
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back, ds);
        for (a, b) in back.samples.iter().zip(&ds.samples) {
            assert_eq!(a.label.to_bits(), b.label.to_bits());
        }
        let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(manifest.contains("\"seed\": 1") && manifest.contains("occupancy"));
    }
}
