//! Synthetic terrain standing in for the simulation worlds: a heightfield,
//! a semantic raster and a ground-truth roughness raster generated from a
//! [`TerrainSpec`], plus point-cloud rendering and traverse simulation.

mod noise;
pub mod render;
pub mod sim;
pub mod spec;

use std::fs;
use std::path::Path;

pub use render::{render_local_cloud, render_world_cloud, to_vehicle_frame, RenderParams};
pub use sim::{simulate_steady, simulate_traverse, SimParams, SpeedProfile, Traverse};
pub use spec::{BaseTerrain, ClassSpec, Region, Shape, TerrainSpec};

use crate::error::{Error, Result};
use crate::raster::{read_raster_set, write_raster_set, GridLayout, RasterMeta};
use crate::seeds;

const WORLD_CHANNELS: [&str; 3] = ["height", "class", "roughness"];

/// Planar vehicle pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    spec: TerrainSpec,
    layout: GridLayout,
    height: Vec<f64>,
    class: Vec<u8>,
    roughness: Vec<f64>,
}

pub fn generate_world(spec: &TerrainSpec) -> Result<World> {
    spec.validate()?;
    let res = spec.resolution;
    let width = (spec.extent[0] / res).round() as usize;
    let height_cells = (spec.extent[1] / res).round() as usize;
    let layout = GridLayout::new([0.0, 0.0], res, width, height_cells)?;
    let relief_seed = seeds::derive(spec.seed, "relief");
    let rough_seed = seeds::derive(spec.seed, "roughness");
    let class_ids: Vec<u8> = spec.regions.iter().map(|r| spec.class_id(&r.class).unwrap()).collect();

    let n = layout.len();
    let mut height = vec![0.0; n];
    let mut class = vec![0u8; n];
    let mut roughness = vec![0.0; n];
    for idx in 0..n {
        let (row, col) = layout.row_col(idx);
        let p = layout.cell_center(row, col);
        let base = &spec.base;
        let mut z = base.slope[0] * p[0] + base.slope[1] * p[1];
        if base.amplitude != 0.0 {
            z += base.amplitude * noise::fbm(p[0] / base.wavelength, p[1] / base.wavelength, base.octaves, relief_seed);
        }
        let mut owner = None;
        for (k, region) in spec.regions.iter().enumerate() {
            z += region.elevation_at(p);
            if region.shape.contains(p) {
                owner = Some(k);
            }
        }
        let k = owner.ok_or_else(|| Error::Config(format!("cell at {p:?} is not covered by any region")))?;
        let region = &spec.regions[k];
        let wobble = noise::fbm(p[0] / 3.0, p[1] / 3.0, 2, rough_seed);
        height[idx] = z;
        class[idx] = class_ids[k];
        roughness[idx] = (region.roughness * (1.0 + region.roughness_variation * wobble)).max(0.0);
    }
    Ok(World { spec: spec.clone(), layout, height, class, roughness })
}

impl World {
    pub fn spec(&self) -> &TerrainSpec {
        &self.spec
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn num_classes(&self) -> u8 {
        self.spec.classes.len() as u8
    }

    pub fn heights(&self) -> &[f64] {
        &self.height
    }

    pub fn classes(&self) -> &[u8] {
        &self.class
    }

    pub fn roughness(&self) -> &[f64] {
        &self.roughness
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.layout.contains(x, y)
    }

    pub fn class_at(&self, x: f64, y: f64) -> Option<u8> {
        self.layout.index_of(x, y).map(|i| self.class[i])
    }

    pub fn roughness_at(&self, x: f64, y: f64) -> Option<f64> {
        self.layout.index_of(x, y).map(|i| self.roughness[i])
    }

    pub fn is_traversable_class(&self, class_id: u8) -> bool {
        self.spec.classes.get(class_id as usize).is_some_and(|c| c.traversable)
    }

    pub fn traversable_classes(&self) -> Vec<u8> {
        (0..self.num_classes()).filter(|&c| self.is_traversable_class(c)).collect()
    }

    pub fn untraversable_classes(&self) -> Vec<u8> {
        (0..self.num_classes()).filter(|&c| !self.is_traversable_class(c)).collect()
    }

    pub fn is_traversable_at(&self, x: f64, y: f64) -> bool {
        self.class_at(x, y).is_some_and(|c| self.is_traversable_class(c))
    }

    /// Bilinear interpolation between cell centers, clamped at the border.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let l = &self.layout;
        let fx = ((x - l.origin[0]) / l.resolution - 0.5).clamp(0.0, (l.width - 1) as f64);
        let fy = ((y - l.origin[1]) / l.resolution - 0.5).clamp(0.0, (l.height - 1) as f64);
        let (c0, r0) = (fx.floor() as usize, fy.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(l.width - 1), (r0 + 1).min(l.height - 1));
        let (tx, ty) = (fx - c0 as f64, fy - r0 as f64);
        let h = |r: usize, c: usize| self.height[l.index(r, c)];
        let top = h(r0, c0) * (1.0 - tx) + h(r0, c1) * tx;
        let bottom = h(r1, c0) * (1.0 - tx) + h(r1, c1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// Same terrain with every region of `class` made rougher by `factor`.
    pub fn with_scaled_roughness(&self, class: u8, factor: f64) -> World {
        let mut w = self.clone();
        for (r, &c) in w.roughness.iter_mut().zip(&w.class) {
            if c == class {
                *r *= factor;
            }
        }
        w
    }

    /// Writes `spec.toml` and the height/class/roughness raster set.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("spec.toml"), self.spec.to_toml()?)?;
        let class: Vec<f64> = self.class.iter().map(|&c| c as f64).collect();
        let meta = RasterMeta::new(self.layout, -9999.0, &WORLD_CHANNELS);
        write_raster_set(dir, &meta, &[&self.height, &class, &self.roughness])
    }

    pub fn load(dir: &Path) -> Result<World> {
        let spec = TerrainSpec::from_toml(&fs::read_to_string(dir.join("spec.toml"))?)?;
        let (meta, ch) = read_raster_set(dir)?;
        if meta.channels != WORLD_CHANNELS {
            return Err(Error::Parse { path: dir.to_path_buf(), message: "not a world raster set".into() });
        }
        let mut ch = ch.into_iter();
        let height = ch.next().unwrap();
        let class = ch.next().unwrap().into_iter().map(|c| c as u8).collect();
        let roughness = ch.next().unwrap();
        Ok(World { spec, layout: meta.layout, height, class, roughness })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_spec(roughness: f64) -> TerrainSpec {
        TerrainSpec {
            name: "flat".into(),
            extent: [4.0, 3.0],
            resolution: 0.1,
            seed: 5,
            classes: spec::stock_classes(),
            base: BaseTerrain::default(),
            regions: vec![Region {
                class: "ground".into(),
                shape: Shape::Everywhere,
                roughness,
                roughness_variation: 0.0,
                elevation: 0.0,
            }],
        }
    }

    #[test]
    fn flat_spec_gives_constant_heightfield() {
        let w = generate_world(&flat_spec(0.0)).unwrap();
        assert_eq!((w.layout().width, w.layout().height), (40, 30));
        assert!(w.heights().iter().all(|&h| h == 0.0));
        assert!(w.roughness().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn generation_is_seeded() {
        let spec = TerrainSpec::stock("hill", 3).unwrap();
        let a = generate_world(&spec).unwrap();
        let b = generate_world(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_world(&TerrainSpec::stock("hill", 4).unwrap()).unwrap();
        assert_ne!(a.heights(), c.heights());
    }

    #[test]
    fn two_region_areas_match_cell_counts() {
        let mut spec = flat_spec(0.1);
        spec.regions.push(Region {
            class: "grass".into(),
            shape: Shape::Rect { min: [1.0, 0.5], max: [3.0, 2.0] },
            roughness: 1.0,
            roughness_variation: 0.0,
            elevation: 0.0,
        });
        let w = generate_world(&spec).unwrap();
        let grass = spec.class_id("grass").unwrap();
        let count = w.classes().iter().filter(|&&c| c == grass).count();
        let expected = (2.0 * 1.5 / 0.01) as usize;
        // Within one row/column of cells of the analytic area.
        assert!(count.abs_diff(expected) <= 20 + 15, "{count} vs {expected}");
        assert_eq!(w.classes().len() - count, 1200 - count);
        assert_eq!(w.class_at(2.0, 1.0), Some(grass));
        assert_eq!(w.class_at(0.5, 1.0), Some(0));
    }

    #[test]
    fn later_regions_take_priority() {
        let mut spec = flat_spec(0.0);
        for class in ["grass", "rock"] {
            spec.regions.push(Region {
                class: class.into(),
                shape: Shape::Circle { center: [2.0, 1.5], radius: 1.0 },
                roughness: 1.0,
                roughness_variation: 0.0,
                elevation: 0.0,
            });
        }
        let w = generate_world(&spec).unwrap();
        assert_eq!(w.class_at(2.0, 1.5), spec.class_id("rock"));
    }

    #[test]
    fn heightfield_is_continuous() {
        let w = generate_world(&TerrainSpec::stock("hill", 9).unwrap()).unwrap();
        let l = *w.layout();
        let mut worst: f64 = 0.0;
        for r in 0..l.height {
            for c in 1..l.width {
                worst = worst.max((w.heights()[l.index(r, c)] - w.heights()[l.index(r, c - 1)]).abs());
            }
        }
        // Steepest feature is a 1.5 m trunk bump over a 0.25 m radius.
        assert!(worst < 0.75, "largest neighbor jump {worst}");
    }

    #[test]
    fn save_load_round_trip() {
        let w = generate_world(&TerrainSpec::stock("forest", 2).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        w.save(dir.path()).unwrap();
        assert_eq!(World::load(dir.path()).unwrap(), w);
    }
}
