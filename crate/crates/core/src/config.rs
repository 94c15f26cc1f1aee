//! Pipeline configuration, read from TOML. Unknown keys are rejected and
//! every section falls back to its defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::PlannerParams;
use crate::geometry::GeometryParams;
use crate::model::ModelConfig;
use crate::motion::FourierConfig;
use crate::risk::SteadyWindow;
use crate::world::render::RenderParams;
use crate::world::sim::SimParams;

/// Name of the resolved config written next to each stage's outputs.
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub world_dir: PathBuf,
    pub dataset_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub reports_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            world_dir: "out/world".into(),
            dataset_dir: "out/dataset".into(),
            checkpoint: "out/model.json".into(),
            reports_dir: "out/reports".into(),
        }
    }
}

impl Paths {
    /// Relative paths are taken relative to `root`.
    pub fn rooted(&self, root: &Path) -> Paths {
        let j = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { root.join(p) };
        Paths {
            world_dir: j(&self.world_dir),
            dataset_dir: j(&self.dataset_dir),
            checkpoint: j(&self.checkpoint),
            reports_dir: j(&self.reports_dir),
        }
    }
}

/// Either a stock scenario or a terrain spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub stock: Option<String>,
    pub spec: Option<PathBuf>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { stock: Some("forest".into()), spec: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelConfig {
    /// Terrain roughness of the reference run the steady distribution is
    /// fitted on.
    pub reference_roughness: f64,
    pub reference_speed: f64,
    pub reference_duration: f64,
    /// Part of the reference run the distribution is fitted on.
    pub window: SteadyWindow,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            reference_roughness: 6.0,
            reference_speed: 1.0,
            reference_duration: 30.0,
            window: SteadyWindow::Interval { start: 0.0, end: 30.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectConfig {
    pub routes: usize,
    /// Minimum straight-line distance between route start and goal.
    pub min_route_length: f64,
    /// Obstacle clearance of the planned routes, meters.
    pub clearance: f64,
    pub min_speed: [f64; 2],
    pub max_speed: [f64; 2],
    /// Range of the speed oscillation period, seconds.
    pub period: [f64; 2],
    /// Range of the lateral weave amplitude around the planned route,
    /// meters. Zero drives the route as planned.
    pub weave: [f64; 2],
    /// Range of the weave wavelength along the route, meters.
    pub weave_wavelength: [f64; 2],
    pub seq_len: usize,
    pub ratios: [f64; 3],
    /// Low-cost to high-cost ratio to subsample the training split to.
    pub balance: Option<f64>,
    pub balance_threshold: f64,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            routes: 24,
            min_route_length: 20.0,
            clearance: 0.5,
            min_speed: [0.3, 0.7],
            max_speed: [1.2, 1.8],
            period: [4.0, 12.0],
            weave: [0.0, 0.0],
            weave_wavelength: [4.0, 8.0],
            seq_len: 5,
            ratios: [0.8, 0.1, 0.1],
            balance: None,
            balance_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostmapConfig {
    pub stride: f64,
    /// Speed and yaw rate the global costmap is predicted at.
    pub speed: f64,
    pub yaw_rate: f64,
}

impl Default for CostmapConfig {
    fn default() -> Self {
        Self { stride: 0.2, speed: 1.0, yaw_rate: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    /// Stock scenario of the held-out world; defaults to the training one.
    pub stock: Option<String>,
    /// Class names counted as traversable; empty uses the world's flags.
    pub traversable: Vec<String>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { stock: None, traversable: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    /// Start and goal drawn anywhere on traversable terrain.
    CrossCountry,
    /// Start and goal beside the straight trail, on the same side, so the
    /// direct line runs parallel to it.
    Corridor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub stock: String,
    pub kind: TrialKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavigateConfig {
    pub trials: usize,
    pub speed: f64,
    pub min_distance: f64,
    pub planner: PlannerParams,
    pub scenarios: Vec<Scenario>,
}

impl Default for NavigateConfig {
    fn default() -> Self {
        Self {
            trials: 8,
            speed: 1.0,
            min_distance: 20.0,
            planner: PlannerParams { inflation: 0.3, ..PlannerParams::default() },
            scenarios: vec![
                Scenario { name: "forest".into(), stock: "forest".into(), kind: TrialKind::CrossCountry },
                Scenario { name: "corridor".into(), stock: "forest".into(), kind: TrialKind::Corridor },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblateConfig {
    pub seeds: Vec<u64>,
    /// Epoch cap for the ablation runs; `None` keeps `model.epochs`.
    pub epochs: Option<usize>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self { seeds: vec![0, 1, 2], epochs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Global seed; every random stream is derived from it by name.
    pub seed: u64,
    pub paths: Paths,
    pub world: WorldConfig,
    pub geometry: GeometryParams,
    pub render: RenderParams,
    pub sim: SimParams,
    pub labels: LabelConfig,
    pub fourier: FourierConfig,
    pub collect: CollectConfig,
    pub model: ModelConfig,
    pub costmap: CostmapConfig,
    pub evaluate: EvaluateConfig,
    pub navigate: NavigateConfig,
    pub ablate: AblateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            paths: Paths::default(),
            world: WorldConfig::default(),
            geometry: GeometryParams::default(),
            render: RenderParams { canopy: false, ..RenderParams::default() },
            sim: SimParams::default(),
            labels: LabelConfig::default(),
            fourier: FourierConfig::default(),
            collect: CollectConfig::default(),
            model: ModelConfig::default(),
            costmap: CostmapConfig::default(),
            evaluate: EvaluateConfig::default(),
            navigate: NavigateConfig::default(),
            ablate: AblateConfig::default(),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn range_ok(r: [f64; 2]) -> bool {
    r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1]
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Writes the resolved configuration into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(RESOLVED_CONFIG), self.to_toml()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.sim.validate().map_err(|e| Error::Config(format!("sim: {e}")))?;
        self.fourier.validate()?;
        self.model.validate()?;
        check(self.world.stock.is_some() != self.world.spec.is_some(), || {
            "world: set exactly one of `stock` and `spec`".into()
        })?;
        check(self.render.samples_per_axis >= 2, || "render.samples_per_axis must be >= 2".into())?;
        let l = &self.labels;
        check(l.reference_roughness >= 0.0 && l.reference_speed >= 0.0 && l.reference_duration > 0.0, || {
            "labels: reference roughness and speed must be >= 0, duration > 0".into()
        })?;
        let c = &self.collect;
        check(c.routes >= 1, || "collect.routes must be >= 1".into())?;
        check(range_ok(c.min_speed) && range_ok(c.max_speed) && range_ok(c.period), || {
            "collect speed and period ranges must be positive and ordered".into()
        })?;
        check(c.weave[0] >= 0.0 && c.weave[0] <= c.weave[1] && range_ok(c.weave_wavelength), || {
            "collect.weave must be ordered and >= 0, weave_wavelength positive and ordered".into()
        })?;
        check(c.min_speed[1] <= c.max_speed[0], || "collect.min_speed must lie below collect.max_speed".into())?;
        check(c.seq_len == self.model.seq_len, || {
            format!("collect.seq_len ({}) must equal model.seq_len ({})", c.seq_len, self.model.seq_len)
        })?;
        check(c.ratios.iter().all(|r| *r >= 0.0) && (c.ratios.iter().sum::<f64>() - 1.0).abs() < 1e-9, || {
            format!("collect.ratios {:?} must be non-negative and sum to 1", c.ratios)
        })?;
        check(c.min_route_length > 0.0 && c.clearance >= 0.0, || "collect route length and clearance".into())?;
        check(self.costmap.speed >= 0.0 && self.costmap.stride > 0.0, || "costmap.stride and speed".into())?;
        let n = &self.navigate;
        check(n.trials >= 1 && n.speed > 0.0 && n.min_distance > 0.0, || "navigate.trials, speed, min_distance".into())?;
        check(n.planner.weight >= 0.0 && n.planner.inflation >= 0.0, || "navigate.planner weight and inflation".into())?;
        check(!self.ablate.seeds.is_empty(), || "ablate.seeds must not be empty".into())?;
        Ok(())
    }
}
