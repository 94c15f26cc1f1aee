//! Planner-in-the-loop trials in the synthetic world.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costmap::CostMap;
use crate::error::{Error, Result};
use crate::eval::planner::{plan_path, PlannerParams};
use crate::risk::{risk_level, SteadyDistribution};
use crate::seeds;
use crate::world::sim::{simulate_traverse, SimParams, SpeedProfile};
use crate::world::World;

/// The vehicle gets this many times the straight-line travel time.
pub const TIME_BUDGET_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub start: [f64; 2],
    pub goal: [f64; 2],
}

impl TrialSpec {
    pub fn euclidean(&self) -> f64 {
        (self.goal[0] - self.start[0]).hypot(self.goal[1] - self.start[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub spec: TrialSpec,
    pub success: bool,
    /// False when the planner found no path; the vehicle never moved.
    pub planned: bool,
    pub collision: bool,
    /// Driven positions at the odometry rate.
    pub trajectory: Vec<[f64; 2]>,
    pub path_length: f64,
    pub euclidean: f64,
    pub steps: usize,
    pub time: f64,
    /// Risk level of every IMU frame.
    pub alphas: Vec<f64>,
}

impl TrialResult {
    pub fn norm_length(&self) -> f64 {
        self.path_length / self.euclidean
    }
}

/// Plans on `costmap` and drives the plan through the simulator. The
/// trial succeeds when the goal is reached inside the time budget without
/// entering an untraversable cell.
pub fn run_trial(
    world: &World,
    costmap: &CostMap,
    spec: TrialSpec,
    planner: &PlannerParams,
    speed: f64,
    sim: &SimParams,
    dist: &SteadyDistribution,
) -> Result<TrialResult> {
    let euclidean = spec.euclidean();
    if !(euclidean > 0.0) {
        return Err(Error::invalid("start and goal coincide"));
    }
    let failed = |planned| TrialResult {
        spec,
        success: false,
        planned,
        collision: false,
        trajectory: vec![spec.start],
        path_length: 0.0,
        euclidean,
        steps: 0,
        time: 0.0,
        alphas: Vec::new(),
    };
    let plan = match plan_path(costmap, spec.start, spec.goal, planner) {
        Ok(p) => p,
        Err(Error::NoPath) => return Ok(failed(false)),
        Err(e) => return Err(e),
    };
    let mut points = plan.points;
    points[0] = spec.start;
    *points.last_mut().unwrap() = spec.goal;
    points.dedup();
    if points.len() < 2 {
        points.push(spec.goal);
    }
    let params = SimParams { max_duration: Some(TIME_BUDGET_FACTOR * euclidean / speed), ..*sim };
    let tr = simulate_traverse(world, &points, &SpeedProfile::Constant { speed }, &params)?;
    let alphas: Vec<f64> = tr.imu.samples().iter().map(|s| risk_level(s.a_z(), dist)).collect();
    Ok(TrialResult {
        spec,
        success: tr.reached_goal && tr.collision.is_none(),
        planned: true,
        collision: tr.collision.is_some(),
        trajectory: tr.odom.samples().iter().map(|o| [o.position[0], o.position[1]]).collect(),
        path_length: tr.path_length(),
        euclidean,
        steps: tr.imu.len(),
        time: tr.duration(),
        alphas,
    })
}

/// Runs every trial in parallel; trial `i` uses simulator seed
/// `derive_indexed(seed, "trial", i)`.
pub fn run_trials(
    world: &World,
    costmap: &CostMap,
    specs: &[TrialSpec],
    planner: &PlannerParams,
    speed: f64,
    sim: &SimParams,
    dist: &SteadyDistribution,
) -> Result<Vec<TrialResult>> {
    specs
        .par_iter()
        .enumerate()
        .map(|(i, &spec)| {
            let sim = SimParams { seed: seeds::derive_indexed(sim.seed, "trial", i as u64), ..*sim };
            run_trial(world, costmap, spec, planner, speed, &sim, dist)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationMetrics {
    pub trials: usize,
    /// Percent of trials that reached the goal.
    pub success_rate: f64,
    /// Mean path length over Euclidean distance, successful trials only.
    pub norm_length: Option<f64>,
    /// Total time of these trials over total time of the reference trials,
    /// summed over trials both sets completed.
    pub rel_time: Option<f64>,
    /// Mean α over every IMU frame of every trial.
    pub mean_stability: Option<f64>,
}

/// `reference` pairs with `trials` by index; it is the method the time
/// ratio is expressed against.
pub fn navigation_metrics(trials: &[TrialResult], reference: &[TrialResult]) -> Result<NavigationMetrics> {
    if trials.is_empty() {
        return Err(Error::invalid("no trials"));
    }
    if trials.len() != reference.len() {
        return Err(Error::Shape(format!("{} trials against {} reference trials", trials.len(), reference.len())));
    }
    let ok: Vec<&TrialResult> = trials.iter().filter(|t| t.success).collect();
    let norm_length = (!ok.is_empty()).then(|| ok.iter().map(|t| t.norm_length()).sum::<f64>() / ok.len() as f64);
    let (mut mine, mut theirs) = (0.0, 0.0);
    for (a, b) in trials.iter().zip(reference) {
        if a.success && b.success {
            mine += a.time;
            theirs += b.time;
        }
    }
    let rel_time = (theirs > 0.0).then(|| mine / theirs);
    let frames: usize = trials.iter().map(|t| t.alphas.len()).sum();
    let mean_stability = (frames > 0).then(|| trials.iter().flat_map(|t| &t.alphas).sum::<f64>() / frames as f64);
    Ok(NavigationMetrics {
        trials: trials.len(),
        success_rate: 100.0 * ok.len() as f64 / trials.len() as f64,
        norm_length,
        rel_time,
        mean_stability,
    })
}

/// Costmap that is 1 on traversable classes and 0 elsewhere.
pub fn semantic_costmap(world: &World) -> Result<CostMap> {
    let values = world.classes().iter().map(|&c| Some(if world.is_traversable_class(c) { 1.0 } else { 0.0 })).collect();
    CostMap::new(*world.layout(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::GRAVITY;
    use crate::world::spec::{BaseTerrain, Region, Shape, TerrainSpec};
    use crate::world::{generate_world, spec::stock_classes};

    fn flat_world() -> World {
        let spec = TerrainSpec {
            name: "flat".into(),
            extent: [12.0, 6.0],
            resolution: 0.1,
            seed: 3,
            classes: stock_classes(),
            base: BaseTerrain { amplitude: 0.0, wavelength: 10.0, octaves: 1, slope: [0.0, 0.0] },
            regions: vec![Region {
                class: "ground".into(),
                shape: Shape::Everywhere,
                roughness: 0.0,
                roughness_variation: 0.0,
                elevation: 0.0,
            }],
        };
        generate_world(&spec).unwrap()
    }

    fn dist() -> SteadyDistribution {
        SteadyDistribution::new(GRAVITY, 0.05, (0.0, 1.0)).unwrap()
    }

    fn trial(success: bool, time: f64, alphas: Vec<f64>) -> TrialResult {
        TrialResult {
            spec: TrialSpec { start: [0.0, 0.0], goal: [1.0, 0.0] },
            success,
            planned: true,
            collision: false,
            trajectory: vec![],
            path_length: 1.0,
            euclidean: 1.0,
            steps: alphas.len(),
            time,
            alphas,
        }
    }

    #[test]
    fn all_successes_give_full_rate() {
        let trials: Vec<_> = (0..8).map(|_| trial(true, 2.0, vec![1.0; 3])).collect();
        let m = navigation_metrics(&trials, &trials).unwrap();
        assert_eq!(m.success_rate, 100.0);
        assert_eq!(m.rel_time, Some(1.0));
        assert_eq!(m.mean_stability, Some(1.0));
        assert_eq!(m.norm_length, Some(1.0));
    }

    #[test]
    fn rel_time_uses_common_successes_only() {
        let a = vec![trial(true, 3.0, vec![]), trial(true, 100.0, vec![]), trial(false, 0.0, vec![])];
        let b = vec![trial(true, 2.0, vec![]), trial(false, 0.0, vec![]), trial(true, 5.0, vec![])];
        assert_eq!(navigation_metrics(&a, &b).unwrap().rel_time, Some(1.5));
        let none = vec![trial(false, 0.0, vec![]); 3];
        let m = navigation_metrics(&none, &b).unwrap();
        assert_eq!((m.rel_time, m.norm_length, m.mean_stability), (None, None, None));
        assert!(navigation_metrics(&[], &[]).is_err());
    }

    #[test]
    fn straight_trial_on_flat_ground() {
        let w = flat_world();
        let cm = semantic_costmap(&w).unwrap();
        let spec = TrialSpec { start: [1.05, 3.05], goal: [10.95, 3.05] };
        let r = run_trial(&w, &cm, spec, &PlannerParams::default(), 1.0, &SimParams::default(), &dist()).unwrap();
        assert!(r.success);
        assert!(r.path_length >= r.euclidean - SimParams::default().goal_tolerance);
        assert!((r.norm_length() - 1.0).abs() <= 0.05, "{}", r.norm_length());
        assert_eq!(r.alphas.len(), r.steps);
    }

    #[test]
    fn blocked_plan_is_a_failure_without_motion() {
        let w = flat_world();
        let layout = *w.layout();
        let values = (0..layout.len()).map(|i| Some(if layout.row_col(i).1 == 60 { 0.0 } else { 1.0 })).collect();
        let cm = CostMap::new(layout, values).unwrap();
        let spec = TrialSpec { start: [1.05, 3.05], goal: [10.95, 3.05] };
        let r = run_trial(&w, &cm, spec, &PlannerParams::default(), 1.0, &SimParams::default(), &dist()).unwrap();
        assert!(!r.success && !r.planned);
        assert!(r.alphas.is_empty());
    }

    #[test]
    fn stationary_frames_at_the_mean_are_fully_stable() {
        let r = trial(true, 1.0, vec![risk_level(GRAVITY, &dist()); 10]);
        assert_eq!(navigation_metrics(&[r.clone()], &[r]).unwrap().mean_stability, Some(1.0));
    }

    #[test]
    fn trials_are_reproducible() {
        let w = flat_world();
        let cm = CostMap::uniform(*w.layout(), 1.0).unwrap();
        let specs = [TrialSpec { start: [1.05, 1.05], goal: [10.0, 5.0] }, TrialSpec { start: [2.0, 5.0], goal: [9.0, 1.0] }];
        let p = PlannerParams::default();
        let a = run_trials(&w, &cm, &specs, &p, 1.0, &SimParams::default(), &dist()).unwrap();
        let b = run_trials(&w, &cm, &specs, &p, 1.0, &SimParams::default(), &dist()).unwrap();
        assert_eq!(a, b);
    }
}
