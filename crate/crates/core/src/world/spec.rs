//! Terrain specifications and the two stock scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub name: String,
    pub traversable: bool,
    /// Height of overhanging structure (tree crowns) rendered above the
    /// surface; zero for none.
    #[serde(default)]
    pub canopy: f64,
    #[serde(default)]
    pub color: [u8; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseTerrain {
    /// Peak amplitude of the smooth noise relief, meters.
    pub amplitude: f64,
    /// Wavelength of the first noise octave, meters.
    pub wavelength: f64,
    pub octaves: u32,
    /// Constant gradient `(dz/dx, dz/dy)`.
    pub slope: [f64; 2],
}

impl Default for BaseTerrain {
    fn default() -> Self {
        Self { amplitude: 0.0, wavelength: 10.0, octaves: 3, slope: [0.0, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Everywhere,
    Rect { min: [f64; 2], max: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
    /// Capsule around the segment `from`–`to`.
    Strip { from: [f64; 2], to: [f64; 2], width: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Shape {
    /// Signed depth of `p` inside the shape (positive inside), used both
    /// for membership and for shaping elevation bumps.
    pub fn depth(&self, p: [f64; 2]) -> f64 {
        match self {
            Shape::Everywhere => f64::INFINITY,
            Shape::Rect { min, max } => {
                let dx = (p[0] - min[0]).min(max[0] - p[0]);
                let dy = (p[1] - min[1]).min(max[1] - p[1]);
                dx.min(dy)
            }
            Shape::Circle { center, radius } => radius - (p[0] - center[0]).hypot(p[1] - center[1]),
            Shape::Strip { from, to, width } => width / 2.0 - segment_distance(p, *from, *to),
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let edge = (0..n)
                    .map(|i| segment_distance(p, vertices[i], vertices[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min);
                if point_in_polygon(p, vertices) {
                    edge
                } else {
                    -edge
                }
            }
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.depth(p) >= 0.0
    }

    /// Scale from 0 at the boundary to 1 deep inside, continuous in `p`.
    fn profile(&self, p: [f64; 2]) -> f64 {
        let d = self.depth(p);
        if d <= 0.0 {
            return 0.0;
        }
        let half = match self {
            Shape::Everywhere => return 1.0,
            Shape::Circle { radius, .. } => *radius,
            Shape::Strip { width, .. } => width / 2.0,
            Shape::Rect { min, max } => ((max[0] - min[0]).min(max[1] - min[1]) / 2.0).min(0.5),
            Shape::Polygon { .. } => 0.5,
        };
        match self {
            // Dome: 1 - (r/R)^2 expressed through the depth.
            Shape::Circle { .. } | Shape::Strip { .. } => {
                let r = (half - d) / half;
                1.0 - r * r
            }
            _ => (d / half).min(1.0),
        }
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p[0] - a[0] - t * vx).hypot(p[1] - a[1] - t * vy)
}

fn point_in_polygon(p: [f64; 2], v: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        if (v[i][1] > p[1]) != (v[j][1] > p[1])
            && p[0] < (v[j][0] - v[i][0]) * (p[1] - v[i][1]) / (v[j][1] - v[i][1]) + v[i][0]
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub class: String,
    pub shape: Shape,
    /// Roughness coefficient ρ.
    pub roughness: f64,
    /// Relative spatial variation of ρ inside the region, in `[0, 1]`.
    #[serde(default)]
    pub roughness_variation: f64,
    /// Height of the bump the region adds to the terrain, meters.
    #[serde(default)]
    pub elevation: f64,
}

impl Region {
    pub(crate) fn elevation_at(&self, p: [f64; 2]) -> f64 {
        if self.elevation == 0.0 {
            0.0
        } else {
            self.elevation * self.shape.profile(p)
        }
    }
}

/// Procedural terrain description. Regions are painted in list order, so a
/// later region overrides the class and roughness of earlier ones where
/// they overlap; elevations add up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainSpec {
    pub name: String,
    pub extent: [f64; 2],
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    pub seed: u64,
    pub classes: Vec<ClassSpec>,
    #[serde(default)]
    pub base: BaseTerrain,
    pub regions: Vec<Region>,
}

fn default_resolution() -> f64 {
    0.1
}

impl TerrainSpec {
    pub fn class_id(&self, name: &str) -> Option<u8> {
        self.classes.iter().position(|c| c.name == name).map(|i| i as u8)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("terrain spec {:?}: {m}", self.name)));
        if !(self.extent[0] > 0.0 && self.extent[1] > 0.0) {
            return bad("extent must be positive".into());
        }
        if !(self.resolution > 0.0) {
            return bad("resolution must be positive".into());
        }
        if self.classes.is_empty() || self.classes.len() > 64 {
            return bad("between 1 and 64 classes are required".into());
        }
        for r in &self.regions {
            if self.class_id(&r.class).is_none() {
                return bad(format!("region refers to unknown class {:?}", r.class));
            }
            if !(r.roughness >= 0.0) || !r.roughness.is_finite() {
                return bad(format!("roughness must be finite and >= 0, got {}", r.roughness));
            }
            if !(0.0..=1.0).contains(&r.roughness_variation) || !r.elevation.is_finite() {
                return bad("roughness_variation must lie in [0, 1] and elevation be finite".into());
            }
            let ok = match &r.shape {
                Shape::Circle { radius, .. } => *radius > 0.0,
                Shape::Strip { width, .. } => *width > 0.0,
                Shape::Rect { min, max } => min[0] < max[0] && min[1] < max[1],
                Shape::Polygon { vertices } => vertices.len() >= 3,
                Shape::Everywhere => true,
            };
            if !ok {
                return bad("degenerate region shape".into());
            }
        }
        if !self.regions.iter().any(|r| r.shape == Shape::Everywhere) {
            return bad("one region must cover the whole extent (shape kind = \"everywhere\")".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn stock(name: &str, seed: u64) -> Result<Self> {
        match name {
            "forest" => Ok(stock_forest(seed)),
            "hill" => Ok(stock_hill(seed)),
            other => Err(Error::Config(format!("unknown stock world {other:?} (expected hill or forest)"))),
        }
    }
}

pub const STOCK_EXTENT: f64 = 40.0;
/// The stock trail runs along this y coordinate.
pub const STOCK_TRAIL_Y: f64 = 20.0;
/// Obstacle-free margin at both x ends of the stock worlds.
pub const STOCK_MARGIN: f64 = 4.5;

pub fn stock_classes() -> Vec<ClassSpec> {
    let c = |name: &str, traversable: bool, canopy: f64, color: [u8; 3]| ClassSpec {
        name: name.to_string(),
        traversable,
        canopy,
        color,
    };
    vec![
        c("ground", true, 0.0, [140, 110, 80]),
        c("trail", true, 0.0, [200, 180, 140]),
        c("grass", true, 0.0, [60, 160, 60]),
        c("bush", false, 0.0, [30, 100, 40]),
        c("rock", false, 0.0, [120, 120, 120]),
        c("tree", false, 3.0, [90, 60, 30]),
        c("trunk", false, 0.0, [110, 80, 50]),
    ]
}

struct Scatter {
    rng: ChaCha8Rng,
}

impl Scatter {
    fn point(&mut self) -> [f64; 2] {
        loop {
            let p = [
                self.rng.random_range(STOCK_MARGIN..STOCK_EXTENT - STOCK_MARGIN),
                self.rng.random_range(1.0..STOCK_EXTENT - 1.0),
            ];
            if (p[1] - STOCK_TRAIL_Y).abs() > 2.5 {
                return p;
            }
        }
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }
}

fn region(class: &str, shape: Shape, roughness: f64, variation: f64, elevation: f64) -> Region {
    Region { class: class.into(), shape, roughness, roughness_variation: variation, elevation }
}

fn scatter_clutter(spec: &mut TerrainSpec, s: &mut Scatter, counts: [usize; 5], grass: (f64, f64, f64)) {
    let [grass_n, bush_n, rock_n, tree_n, trunk_n] = counts;
    let (gr_lo, gr_hi, grass_rho) = grass;
    for _ in 0..grass_n {
        let (center, radius) = (s.point(), s.range(gr_lo, gr_hi));
        spec.regions.push(region("grass", Shape::Circle { center, radius }, grass_rho, 0.5, 0.0));
    }
    for _ in 0..bush_n {
        let (center, radius) = (s.point(), s.range(0.5, 0.9));
        spec.regions.push(region("bush", Shape::Circle { center, radius }, 2.0, 0.0, 0.6));
    }
    for _ in 0..rock_n {
        let (center, radius) = (s.point(), s.range(0.3, 0.6));
        spec.regions.push(region("rock", Shape::Circle { center, radius }, 3.0, 0.0, 0.35));
    }
    for _ in 0..tree_n {
        let (center, radius) = (s.point(), s.range(0.25, 0.4));
        spec.regions.push(region("tree", Shape::Circle { center, radius }, 3.0, 0.0, 1.5));
    }
    for _ in 0..trunk_n {
        let from = s.point();
        let angle = s.range(0.0, std::f64::consts::PI);
        let len = s.range(2.0, 4.0);
        let mut to = [from[0] + len * angle.cos(), from[1] + len * angle.sin()];
        to[0] = to[0].clamp(STOCK_MARGIN, STOCK_EXTENT - STOCK_MARGIN);
        to[1] = to[1].clamp(1.0, STOCK_EXTENT - 1.0);
        if (to[1] - STOCK_TRAIL_Y).abs() <= 2.5 || (from[1] - STOCK_TRAIL_Y).signum() != (to[1] - STOCK_TRAIL_Y).signum() {
            to = [from[0] + len * angle.cos(), from[1]];
            to[0] = to[0].clamp(STOCK_MARGIN, STOCK_EXTENT - STOCK_MARGIN);
        }
        spec.regions.push(region("trunk", Shape::Strip { from, to, width: 0.5 }, 3.0, 0.0, 0.4));
    }
}

fn stock_base(name: &str, seed: u64, base: BaseTerrain, ground_rho: f64) -> TerrainSpec {
    let mut spec = TerrainSpec {
        name: name.into(),
        extent: [STOCK_EXTENT, STOCK_EXTENT],
        resolution: 0.1,
        seed,
        classes: stock_classes(),
        base,
        regions: vec![region("ground", Shape::Everywhere, ground_rho, 0.5, 0.0)],
    };
    spec.regions.push(region(
        "trail",
        Shape::Strip { from: [-1.0, STOCK_TRAIL_Y], to: [STOCK_EXTENT + 1.0, STOCK_TRAIL_Y], width: 2.0 },
        0.05,
        0.2,
        0.0,
    ));
    spec
}

/// Flat forest floor with high grass, stones, bushes, trees and fallen
/// trunks; mostly low-cost terrain.
pub fn stock_forest(seed: u64) -> TerrainSpec {
    let base = BaseTerrain { amplitude: 0.15, wavelength: 12.0, octaves: 2, slope: [0.0, 0.0] };
    let mut spec = stock_base("forest", seed, base, 0.2);
    let mut s = Scatter { rng: ChaCha8Rng::seed_from_u64(seeds::derive(seed, "stock-forest")) };
    scatter_clutter(&mut spec, &mut s, [12, 10, 12, 18, 5], (1.5, 3.5, 1.4));
    spec
}

/// Steep relief with large high-grass fields, bushes, rocks and trees.
pub fn stock_hill(seed: u64) -> TerrainSpec {
    let base = BaseTerrain { amplitude: 2.0, wavelength: 14.0, octaves: 3, slope: [0.12, 0.05] };
    let mut spec = stock_base("hill", seed, base, 0.3);
    let mut s = Scatter { rng: ChaCha8Rng::seed_from_u64(seeds::derive(seed, "stock-hill")) };
    scatter_clutter(&mut spec, &mut s, [12, 12, 14, 14, 0], (2.5, 4.5, 1.6));
    spec
}
