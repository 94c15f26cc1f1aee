//! Raster layout shared by grid maps, worlds and costmaps, plus the on-disk
//! raster-set format: a `meta.json` document and one little-endian `f64`
//! file per channel.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RASTER_FORMAT: &str = "travcost-raster";
pub const RASTER_VERSION: u32 = 1;

/// Axis-aligned cell lattice. Cell `(row, col)` spans
/// `[origin.x + col*res, origin.x + (col+1)*res)` along x and likewise for
/// rows along y. Storage is row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridLayout {
    pub fn new(origin: [f64; 2], resolution: f64, width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::invalid(format!("resolution must be > 0, got {resolution}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("grid must have at least one cell"));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Self { origin, resolution, width, height })
    }

    /// Square layout of `cells × cells` centered on `center`.
    pub fn centered(center: [f64; 2], resolution: f64, cells: usize) -> Result<Self> {
        let half = cells as f64 * resolution / 2.0;
        Self::new([center[0] - half, center[1] - half], resolution, cells, cells)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    /// Cell containing `(x, y)`, if inside the layout.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let cx = ((x - self.origin[0]) / self.resolution).floor();
        let cy = ((y - self.origin[1]) / self.resolution).floor();
        if cx < 0.0 || cy < 0.0 || !cx.is_finite() || !cy.is_finite() {
            return None;
        }
        let (col, row) = (cx as usize, cy as usize);
        (col < self.width && row < self.height).then_some((row, col))
    }

    pub fn index_of(&self, x: f64, y: f64) -> Option<usize> {
        self.cell_of(x, y).map(|(r, c)| self.index(r, c))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.resolution,
            self.origin[1] + (row as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn extent(&self) -> [f64; 2] {
        [self.width as f64 * self.resolution, self.height as f64 * self.resolution]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterMeta {
    pub format: String,
    pub version: u32,
    pub layout: GridLayout,
    /// Value written for cells that carry no data.
    pub nodata: f64,
    pub channels: Vec<String>,
}

impl RasterMeta {
    pub fn new(layout: GridLayout, nodata: f64, channels: &[&str]) -> Self {
        Self {
            format: RASTER_FORMAT.to_string(),
            version: RASTER_VERSION,
            layout,
            nodata,
            channels: channels.iter().map(|c| c.to_string()).collect(),
        }
    }
}

fn channel_file(channel: &str) -> String {
    format!("{channel}.f64")
}

pub fn write_raster_set(dir: &Path, meta: &RasterMeta, data: &[&[f64]]) -> Result<()> {
    if data.len() != meta.channels.len() {
        return Err(Error::Shape(format!(
            "{} channels declared, {} supplied",
            meta.channels.len(),
            data.len()
        )));
    }
    fs::create_dir_all(dir)?;
    for (name, values) in meta.channels.iter().zip(data) {
        if values.len() != meta.layout.len() {
            return Err(Error::Shape(format!(
                "channel {name}: {} values for {} cells",
                values.len(),
                meta.layout.len()
            )));
        }
        let mut w = BufWriter::new(fs::File::create(dir.join(channel_file(name)))?);
        for &v in values.iter() {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.flush()?;
    }
    let json = serde_json::to_string_pretty(meta)?;
    fs::write(dir.join("meta.json"), json + "\n")?;
    Ok(())
}

pub fn read_raster_set(dir: &Path) -> Result<(RasterMeta, Vec<Vec<f64>>)> {
    let meta_path = dir.join("meta.json");
    let meta: RasterMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| Error::Parse { path: meta_path.clone(), message: e.to_string() })?;
    if meta.format != RASTER_FORMAT || meta.version != RASTER_VERSION {
        return Err(Error::Parse {
            path: meta_path,
            message: format!("unsupported raster format {} v{}", meta.format, meta.version),
        });
    }
    let mut channels = Vec::with_capacity(meta.channels.len());
    for name in &meta.channels {
        let path = dir.join(channel_file(name));
        let mut bytes = Vec::new();
        BufReader::new(fs::File::open(&path)?).read_to_end(&mut bytes)?;
        if bytes.len() != meta.layout.len() * 8 {
            return Err(Error::Parse {
                path,
                message: format!("expected {} cells, file has {} bytes", meta.layout.len(), bytes.len()),
            });
        }
        let mut cursor = &bytes[..];
        let mut values = Vec::with_capacity(meta.layout.len());
        for _ in 0..meta.layout.len() {
            values.push(cursor.read_f64::<LittleEndian>()?);
        }
        channels.push(values);
    }
    Ok((meta, channels))
}
