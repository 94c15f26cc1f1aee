use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Pose2, World};
use crate::error::{Error, Result};
use crate::geometry::{SemanticPoint, SemanticPointCloud};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderParams {
    /// Stratified samples per cell along each axis.
    pub samples_per_axis: usize,
    /// Half-width of the uniform vertical jitter per unit roughness, meters.
    pub jitter_per_roughness: f64,
    /// Emit canopy points above classes with a canopy height.
    pub canopy: bool,
    pub seed: u64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self { samples_per_axis: 2, jitter_per_roughness: 0.02, canopy: true, seed: 0 }
    }
}

/// Maps a world point into the gravity-aligned vehicle frame at `pose`,
/// with heights measured from `ground_z`.
pub fn to_vehicle_frame(p: [f64; 3], pose: &Pose2, ground_z: f64) -> [f64; 3] {
    let (s, c) = pose.yaw.sin_cos();
    let (dx, dy) = (p[0] - pose.x, p[1] - pose.y);
    [c * dx + s * dy, -s * dx + c * dy, p[2] - ground_z]
}

struct Surface<'a> {
    world: &'a World,
    params: &'a RenderParams,
    rng: ChaCha8Rng,
}

impl Surface<'_> {
    /// Surface points at world `(x, y)`: the ground sample plus an optional
    /// canopy point.
    fn sample(&mut self, x: f64, y: f64, out: &mut Vec<(f64, f64, f64, u8)>) {
        let Some(idx) = self.world.layout().index_of(x, y) else { return };
        let class = self.world.classes()[idx];
        let rho = self.world.roughness()[idx];
        let jitter = self.params.jitter_per_roughness * rho * self.rng.random_range(-1.0..=1.0);
        let z = self.world.height_at(x, y) + jitter;
        out.push((x, y, z, class));
        let canopy = self.world.spec().classes[class as usize].canopy;
        if canopy > 0.0 && self.params.canopy {
            out.push((x, y, z + canopy, class));
        }
    }
}

fn pose_seed(base: u64, pose: &Pose2) -> u64 {
    let h = pose.x.to_bits() ^ pose.y.to_bits().rotate_left(21) ^ pose.yaw.to_bits().rotate_left(42);
    seeds::derive_indexed(base, "render", h)
}

fn color(world: &World, class: u8) -> [u8; 3] {
    world.spec().classes[class as usize].color
}

/// Square `extent × extent` cloud around `pose`, expressed in the vehicle
/// frame. Every in-world cell of the vehicle-frame raster receives
/// `samples_per_axis²` ground points.
pub fn render_local_cloud(world: &World, pose: &Pose2, extent: f64, params: &RenderParams) -> Result<SemanticPointCloud> {
    if !world.contains(pose.x, pose.y) {
        return Err(Error::OutsideWorld { x: pose.x, y: pose.y });
    }
    let res = world.layout().resolution;
    let cells = (extent / res).round() as usize;
    let n = params.samples_per_axis.max(1);
    let sub = res / n as f64;
    let half = cells as f64 * res / 2.0;
    let ground = world.height_at(pose.x, pose.y);
    let (s, c) = pose.yaw.sin_cos();
    let mut surface = Surface { world, params, rng: ChaCha8Rng::seed_from_u64(pose_seed(params.seed, pose)) };
    let mut raw = Vec::with_capacity(cells * cells * n * n);
    for row in 0..cells {
        for col in 0..cells {
            for a in 0..n {
                for b in 0..n {
                    let u = -half + col as f64 * res + (b as f64 + surface.rng.random_range(0.05..0.95)) * sub;
                    let v = -half + row as f64 * res + (a as f64 + surface.rng.random_range(0.05..0.95)) * sub;
                    surface.sample(pose.x + c * u - s * v, pose.y + s * u + c * v, &mut raw);
                }
            }
        }
    }
    let points = raw
        .into_iter()
        .map(|(x, y, z, class)| SemanticPoint {
            position: to_vehicle_frame([x, y, z], pose, ground),
            class_id: class,
            rgb: color(world, class),
        })
        .collect();
    SemanticPointCloud::new(points, world.num_classes())
}

/// Cloud over the whole world in the world frame.
pub fn render_world_cloud(world: &World, params: &RenderParams) -> Result<SemanticPointCloud> {
    let layout = *world.layout();
    let n = params.samples_per_axis.max(1);
    let sub = layout.resolution / n as f64;
    let mut surface =
        Surface { world, params, rng: ChaCha8Rng::seed_from_u64(seeds::derive(params.seed, "render-world")) };
    let mut raw = Vec::with_capacity(layout.len() * n * n);
    for row in 0..layout.height {
        for col in 0..layout.width {
            let x0 = layout.origin[0] + col as f64 * layout.resolution;
            let y0 = layout.origin[1] + row as f64 * layout.resolution;
            for a in 0..n {
                for b in 0..n {
                    let x = x0 + (b as f64 + surface.rng.random_range(0.05..0.95)) * sub;
                    let y = y0 + (a as f64 + surface.rng.random_range(0.05..0.95)) * sub;
                    surface.sample(x, y, &mut raw);
                }
            }
        }
    }
    let points = raw
        .into_iter()
        .map(|(x, y, z, class)| SemanticPoint { position: [x, y, z], class_id: class, rgb: color(world, class) })
        .collect();
    SemanticPointCloud::new(points, world.num_classes())
}

#[cfg(test)]
mod tests {
    use super::super::{generate_world, spec::stock_classes, BaseTerrain, Region, Shape, TerrainSpec};
    use super::*;
    use crate::raster::GridLayout;

    fn world(rho: f64) -> World {
        generate_world(&TerrainSpec {
            name: "flat".into(),
            extent: [20.0, 20.0],
            resolution: 0.1,
            seed: 1,
            classes: stock_classes(),
            base: BaseTerrain::default(),
            regions: vec![
                Region { class: "ground".into(), shape: Shape::Everywhere, roughness: rho, roughness_variation: 0.0, elevation: 0.0 },
                Region {
                    class: "grass".into(),
                    shape: Shape::Rect { min: [12.0, 0.0], max: [20.0, 20.0] },
                    roughness: rho,
                    roughness_variation: 0.0,
                    elevation: 0.0,
                },
            ],
        })
        .unwrap()
    }

    #[test]
    fn flat_world_points_within_jitter_bound() {
        let w = world(0.5);
        let params = RenderParams::default();
        let cloud = render_local_cloud(&w, &Pose2::new(10.0, 10.0, 0.3), 10.0, &params).unwrap();
        let bound = params.jitter_per_roughness * 0.5 + 1e-12;
        assert!(cloud.points().iter().all(|p| p.z().abs() <= bound));
    }

    #[test]
    fn every_local_cell_gets_four_points() {
        let w = world(0.0);
        let cloud = render_local_cloud(&w, &Pose2::new(10.0, 10.0, 0.7), 10.0, &RenderParams::default()).unwrap();
        let layout = GridLayout::centered([0.0, 0.0], 0.1, 100).unwrap();
        let mut counts = vec![0usize; layout.len()];
        for p in cloud.points() {
            counts[layout.index_of(p.position[0], p.position[1]).unwrap()] += 1;
        }
        assert!(counts.iter().all(|&n| n >= 4), "min {}", counts.iter().min().unwrap());
    }

    #[test]
    fn classes_follow_the_semantic_raster() {
        let w = world(0.0);
        let pose = Pose2::new(10.0, 10.0, 0.0);
        let cloud = render_local_cloud(&w, &pose, 10.0, &RenderParams::default()).unwrap();
        for p in cloud.points().iter().step_by(97) {
            let wx = pose.x + p.position[0];
            let wy = pose.y + p.position[1];
            assert_eq!(Some(p.class_id), w.class_at(wx, wy));
        }
        assert!(render_local_cloud(&w, &Pose2::new(-1.0, 3.0, 0.0), 10.0, &RenderParams::default()).is_err());
    }

    #[test]
    fn edge_pose_leaves_outside_cells_empty() {
        let w = world(0.0);
        let cloud = render_local_cloud(&w, &Pose2::new(1.0, 10.0, 0.0), 10.0, &RenderParams::default()).unwrap();
        assert!(cloud.points().iter().all(|p| p.position[0] >= -1.0));
    }
}
