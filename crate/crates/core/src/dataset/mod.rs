//! Training data: heading-aligned 1 × 1 m patches cut from a global grid map
//! along driven trajectories, paired with velocity features and IMU labels,
//! then windowed into fixed-length sequences and split by trajectory.

mod odom;
pub mod patch;
mod store;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use odom::{OdomSample, OdomTrace};
pub use patch::{channel_count, channel_names, extract_patch, patch_at_cells, GEOMETRIC_CHANNELS, PATCH_AREA, PATCH_CELLS};
pub use store::{Dataset, DatasetMeta, DATASET_VERSION};

use crate::error::{Error, Result};
use crate::geometry::GridMap;
use crate::motion::{fourier_encode, FrequencyBank};
use crate::risk::{label_at, ImuTrace, SteadyDistribution};
use crate::world::Pose2;

pub const DEFAULT_SEQ_LEN: usize = 5;
/// Largest time step allowed inside a sequence, seconds.
pub const MAX_GAP: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub trajectory: u32,
    pub t: f64,
    pub pose: Pose2,
    pub speed: f64,
    pub yaw_rate: f64,
    pub label: f64,
    /// Channel-major `C × 10 × 10`.
    pub patch: Vec<f32>,
    /// Flattened `2m × 2` Fourier features.
    pub velocity: Vec<f32>,
}

/// `len` consecutive samples `start..start + len` of one trajectory; the
/// target is the label of the last one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceSample {
    pub trajectory: u32,
    pub start: usize,
    pub len: usize,
}

impl SequenceSample {
    pub fn last(&self) -> usize {
        self.start + self.len - 1
    }

    pub fn target(&self, samples: &[PatchSample]) -> f64 {
        samples[self.last()].label
    }

    pub fn elements<'a>(&self, samples: &'a [PatchSample]) -> &'a [PatchSample] {
        &samples[self.start..self.start + self.len]
    }
}

pub fn velocity_features(speed: f64, yaw_rate: f64, bank: &FrequencyBank) -> Vec<f32> {
    fourier_encode(speed, yaw_rate, bank).flatten().into_iter().map(|v| v as f32).collect()
}

/// One sample per odometry pose whose heading-aligned window lies inside
/// `map` with at least half its cells occupied and whose label is defined.
pub fn extract_patches(
    map: &GridMap,
    odom: &OdomTrace,
    imu: &ImuTrace,
    dist: &SteadyDistribution,
    bank: &FrequencyBank,
    trajectory: u32,
) -> Result<Vec<PatchSample>> {
    let samples: Vec<PatchSample> = odom
        .samples()
        .par_iter()
        .filter_map(|o| {
            let patch = extract_patch(map, [o.position[0], o.position[1]], o.yaw)?;
            let label = label_at(o.t, imu, dist).ok()?;
            let speed = o.speed();
            Some(PatchSample {
                trajectory,
                t: o.t,
                pose: Pose2::new(o.position[0], o.position[1], o.yaw),
                speed,
                yaw_rate: o.yaw_rate,
                label,
                patch,
                velocity: velocity_features(speed, o.yaw_rate, bank),
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(samples)
}

/// Sliding windows of `len` samples with stride one. Windows that cross a
/// trajectory boundary or a time step larger than [`MAX_GAP`] are skipped.
pub fn assemble_sequences(samples: &[PatchSample], len: usize) -> Vec<SequenceSample> {
    if len == 0 || samples.len() < len {
        return Vec::new();
    }
    // broken[i]: samples i and i + 1 cannot share a sequence.
    let broken: Vec<bool> = samples
        .windows(2)
        .map(|w| w[0].trajectory != w[1].trajectory || !(w[1].t > w[0].t && w[1].t - w[0].t <= MAX_GAP + 1e-9))
        .collect();
    let mut out = Vec::new();
    let mut run_start = 0;
    for end in 0..samples.len() {
        if end > 0 && broken[end - 1] {
            run_start = end;
        }
        if end + 1 - run_start >= len {
            out.push(SequenceSample { trajectory: samples[end].trajectory, start: end + 1 - len, len });
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<SequenceSample>,
    pub val: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
    /// Trajectory ids assigned to train, val and test.
    pub trajectories: [Vec<u32>; 3],
}

/// Largest-remainder apportionment of `n` items by `ratios`.
pub fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Assigns whole trajectories to train/val/test. Deterministic under `seed`.
pub fn split_dataset(sequences: &[SequenceSample], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if ratios.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let mut ids: Vec<u32> = sequences.iter().map(|s| s.trajectory).collect();
    ids.sort_unstable();
    ids.dedup();
    let wanted = ratios.iter().filter(|&&r| r > 0.0).count();
    if ids.len() < wanted {
        return Err(Error::invalid(format!("{} trajectories cannot fill {wanted} splits", ids.len())));
    }
    let mut counts = apportion(ids.len(), &ratios);
    // Every split with a positive ratio receives at least one trajectory.
    for i in 0..3 {
        if ratios[i] > 0.0 && counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut split = Split::default();
    let mut offset = 0;
    for (k, &n) in counts.iter().enumerate() {
        let mut part = ids[offset..offset + n].to_vec();
        part.sort_unstable();
        split.trajectories[k] = part;
        offset += n;
    }
    for s in sequences {
        let bucket = if split.trajectories[0].binary_search(&s.trajectory).is_ok() {
            &mut split.train
        } else if split.trajectories[1].binary_search(&s.trajectory).is_ok() {
            &mut split.val
        } else {
            &mut split.test
        };
        bucket.push(*s);
    }
    Ok(split)
}

/// Counts of low-cost (`target >= threshold`) and high-cost sequences.
pub fn label_balance(samples: &[PatchSample], sequences: &[SequenceSample], threshold: f64) -> (usize, usize) {
    let low = sequences.iter().filter(|s| s.target(samples) >= threshold).count();
    (low, sequences.len() - low)
}

/// Subsamples the majority side so that low-cost : high-cost sequences is
/// as close to `ratio : 1` as the counts allow. Order is preserved.
pub fn balance(
    samples: &[PatchSample],
    sequences: &[SequenceSample],
    ratio: f64,
    threshold: f64,
    seed: u64,
) -> Result<Vec<SequenceSample>> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::Config(format!("balance ratio must be > 0, got {ratio}")));
    }
    let (low, high) = label_balance(samples, sequences, threshold);
    let (keep_low, keep_high) = if high == 0 || low == 0 {
        (low, high)
    } else if low as f64 > ratio * high as f64 {
        (((ratio * high as f64).round() as usize).max(1), high)
    } else {
        (low, ((low as f64 / ratio).round() as usize).clamp(1, high))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |is_low: bool, keep: usize, rng: &mut ChaCha8Rng| {
        let mut idx: Vec<usize> =
            (0..sequences.len()).filter(|&i| (sequences[i].target(samples) >= threshold) == is_low).collect();
        idx.shuffle(rng);
        idx.truncate(keep);
        idx
    };
    let mut chosen = pick(true, keep_low, &mut rng);
    chosen.extend(pick(false, keep_high, &mut rng));
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| sequences[i]).collect())
}
