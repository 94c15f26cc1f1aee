//! End-to-end stages: world generation, data collection, training,
//! costmap prediction, evaluation, navigation trials and ablation.
//!
//! Every stage draws its randomness from `config.seed` through a named
//! sub-seed. Seed fields inside config sections act as replica indices
//! mixed into that sub-seed.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, Scenario, TrialKind};
use crate::costmap::{build_local_map, predict_costmap, CostMap};
use crate::dataset::{
    assemble_sequences, balance, channel_names, extract_patches, split_dataset, Dataset, DatasetMeta, PatchSample,
    DATASET_VERSION,
};
use crate::error::{Error, Result};
use crate::eval::report::{ablation_medians, ablation_table, costmap_table, navigation_table, roc_points, AblationRow};
use crate::eval::{
    binarize_ground_truth, costmap_metrics, navigation_metrics, plan_path, run_trials, semantic_costmap, CostmapMetrics,
    NavigationMetrics, PlannerParams, TrialResult, TrialSpec,
};
use crate::geometry::{build_grid_map_with, GridMap, SemanticPointCloud};
use crate::model::{evaluate_mse, train, ModelConfig, Network, TrainData, TrainOutcome};
use crate::motion::{sample_frequencies, FourierConfig};
use crate::risk::{fit_steady_distribution, SteadyDistribution};
use crate::seeds::{derive, derive_indexed};
use crate::world::render::{render_local_cloud, render_world_cloud, RenderParams};
use crate::world::sim::{simulate_steady, simulate_traverse, SimParams, SpeedProfile};
use crate::world::spec::{TerrainSpec, STOCK_EXTENT, STOCK_MARGIN, STOCK_TRAIL_Y};
use crate::world::{generate_world, Pose2, World};

fn sim_params(cfg: &PipelineConfig, name: &str) -> SimParams {
    SimParams { seed: derive_indexed(cfg.seed, name, cfg.sim.seed), ..cfg.sim }
}

fn render_params(cfg: &PipelineConfig) -> RenderParams {
    RenderParams { seed: derive_indexed(cfg.seed, "render", cfg.render.seed), ..cfg.render }
}

pub fn fourier_config(cfg: &PipelineConfig) -> FourierConfig {
    FourierConfig { seed: derive_indexed(cfg.seed, "fourier", cfg.fourier.seed), ..cfg.fourier }
}

pub fn model_config(cfg: &PipelineConfig, replica: u64) -> ModelConfig {
    ModelConfig { seed: derive_indexed(cfg.seed, "model", replica), ..cfg.model.clone() }
}

/// Terrain spec of the training world, or of a held-out world when
/// `heldout` is set (same scenario, different seed).
pub fn terrain_spec(cfg: &PipelineConfig, stock: Option<&str>, heldout: bool) -> Result<TerrainSpec> {
    let seed = derive(cfg.seed, if heldout { "heldout-world" } else { "world" });
    match (stock.or(cfg.world.stock.as_deref()), &cfg.world.spec) {
        (Some(name), _) => TerrainSpec::stock(name, seed),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)?;
            let mut spec = TerrainSpec::from_toml(&text)
                .map_err(|e| Error::Parse { path: path.clone(), message: e.to_string() })?;
            if heldout {
                spec.seed = seed;
            }
            Ok(spec)
        }
        (None, None) => Err(Error::Config("world: set `stock` or `spec`".into())),
    }
}

pub fn generate(cfg: &PipelineConfig, out_dir: &Path) -> Result<World> {
    let world = generate_world(&terrain_spec(cfg, None, false)?)?;
    world.save(out_dir)?;
    cfg.write_resolved(out_dir)?;
    Ok(world)
}

/// Loads the world from `dir`, generating it first when absent.
pub fn load_or_generate(cfg: &PipelineConfig, dir: &Path) -> Result<World> {
    if dir.join("spec.toml").exists() {
        World::load(dir)
    } else {
        generate(cfg, dir)
    }
}

/// Steady distribution fitted on a simulated reference run.
pub fn steady_distribution(cfg: &PipelineConfig) -> Result<SteadyDistribution> {
    let l = &cfg.labels;
    let trace = simulate_steady(l.reference_roughness, l.reference_speed, l.reference_duration, &sim_params(cfg, "steady"))?;
    fit_steady_distribution(&trace, l.window)
}

/// Grid map of the whole world from a canopy-free render, on the world's
/// own layout.
pub fn global_map(world: &World, cfg: &PipelineConfig) -> Result<GridMap> {
    let cloud = render_world_cloud(world, &render_params(cfg))?;
    build_grid_map_with(&cloud, f64::INFINITY, Some(*world.layout()), &cfg.geometry)
}

fn untraversable_ids(world: &World) -> Vec<u8> {
    world.untraversable_classes()
}

/// Cells that are traversable and at least `clearance` from any
/// untraversable cell.
fn clear_cells(world: &World, clearance: f64) -> Vec<bool> {
    let cm = semantic_costmap(world).expect("class raster matches its layout");
    let params = PlannerParams { obstacle_threshold: 0.5, inflation: clearance, ..PlannerParams::default() };
    crate::eval::planner::passable_mask(&cm, &params)
}

fn random_clear_point(world: &World, clear: &[bool], rng: &mut ChaCha8Rng, x: [f64; 2], y: [f64; 2]) -> Option<[f64; 2]> {
    let layout = world.layout();
    for _ in 0..1000 {
        let p = [rng.random_range(x[0]..x[1]), rng.random_range(y[0]..y[1])];
        if let Some(i) = layout.index_of(p[0], p[1]) {
            if clear[i] {
                let (r, c) = layout.row_col(i);
                return Some(layout.cell_center(r, c));
            }
        }
    }
    None
}

fn interior(world: &World, margin: f64) -> ([f64; 2], [f64; 2]) {
    let l = world.layout();
    let e = l.extent();
    ([l.origin[0] + margin, l.origin[0] + e[0] - margin], [l.origin[1] + margin, l.origin[1] + e[1] - margin])
}

/// Collision-free route between random clear points at least
/// `min_length` apart, planned on the ground-truth semantic map.
fn random_route(world: &World, clear_map: &CostMap, clear: &[bool], min_length: f64, rng: &mut ChaCha8Rng) -> Result<Vec<[f64; 2]>> {
    let (x, y) = interior(world, 1.0);
    let params = PlannerParams { weight: 0.0, obstacle_threshold: 0.5, inflation: 0.0 };
    for _ in 0..200 {
        let (Some(a), Some(b)) =
            (random_clear_point(world, clear, rng, x, y), random_clear_point(world, clear, rng, x, y))
        else {
            continue;
        };
        if (a[0] - b[0]).hypot(a[1] - b[1]) < min_length {
            continue;
        }
        match plan_path(clear_map, a, b, &params) {
            Ok(p) => return Ok(p.points),
            Err(Error::NoPath) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::invalid(format!("no route of {min_length} m found between clear cells")))
}

/// Resamples `route` every `WEAVE_STEP` meters and shifts each point
/// sideways by `amplitude * sin(2π s / wavelength + phase)`. Points whose
/// shifted position is not clear stay on the route.
fn weave_route(route: &[[f64; 2]], world: &World, clear: &[bool], amplitude: f64, wavelength: f64, phase: f64) -> Vec<[f64; 2]> {
    const WEAVE_STEP: f64 = 0.25;
    let mut pts = vec![route[0]];
    let mut s_at = vec![0.0];
    let mut s = 0.0;
    let mut next = WEAVE_STEP;
    for w in route.windows(2) {
        let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        while next <= s + len {
            let f = (next - s) / len;
            pts.push([w[0][0] + f * (w[1][0] - w[0][0]), w[0][1] + f * (w[1][1] - w[0][1])]);
            s_at.push(next);
            next += WEAVE_STEP;
        }
        s += len;
    }
    let last = *route.last().unwrap();
    if pts.last() != Some(&last) {
        pts.push(last);
        s_at.push(s);
    }
    let n = pts.len();
    let layout = world.layout();
    (0..n)
        .map(|i| {
            // Fade the weave in and out so both ends stay put.
            let fade = (s_at[i] / 2.0).min((s - s_at[i]) / 2.0).clamp(0.0, 1.0);
            let (a, b) = (pts[i.saturating_sub(2)], pts[(i + 2).min(n - 1)]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let norm = dx.hypot(dy);
            if fade == 0.0 || norm == 0.0 {
                return pts[i];
            }
            let off = fade * amplitude * (std::f64::consts::TAU * s_at[i] / wavelength + phase).sin();
            let q = [pts[i][0] - off * dy / norm, pts[i][1] + off * dx / norm];
            match layout.index_of(q[0], q[1]) {
                Some(k) if clear[k] => q,
                _ => pts[i],
            }
        })
        .collect()
}

fn speed_profile(cfg: &PipelineConfig, rng: &mut ChaCha8Rng) -> SpeedProfile {
    let c = &cfg.collect;
    let pick = |r: [f64; 2], rng: &mut ChaCha8Rng| if r[0] < r[1] { rng.random_range(r[0]..r[1]) } else { r[0] };
    SpeedProfile::Sinusoid {
        min: pick(c.min_speed, rng),
        max: pick(c.max_speed, rng),
        period: pick(c.period, rng),
        phase: rng.random_range(0.0..std::f64::consts::TAU),
    }
}

/// Drives `collect.routes` random routes and turns them into a split
/// dataset. Routes that produce no usable patch are dropped.
pub fn collect_dataset(world: &World, cfg: &PipelineConfig) -> Result<Dataset> {
    let c = &cfg.collect;
    if c.routes == 0 {
        return Err(Error::Config("collect.routes must be >= 1".into()));
    }
    let dist = steady_distribution(cfg)?;
    let fourier = fourier_config(cfg);
    let bank = sample_frequencies(&fourier)?;
    let map = global_map(world, cfg)?;
    let clear = clear_cells(world, c.clearance);
    let clear_map = CostMap::new(*world.layout(), clear.iter().map(|&ok| Some(if ok { 1.0 } else { 0.0 })).collect())?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, "routes"));
    let mut samples: Vec<PatchSample> = Vec::new();
    let mut used = 0;
    for r in 0..c.routes {
        let mut route = random_route(world, &clear_map, &clear, c.min_route_length, &mut rng)?;
        let profile = speed_profile(cfg, &mut rng);
        if c.weave[1] > 0.0 {
            let amp = if c.weave[0] < c.weave[1] { rng.random_range(c.weave[0]..c.weave[1]) } else { c.weave[0] };
            let wl = c.weave_wavelength;
            let wavelength = if wl[0] < wl[1] { rng.random_range(wl[0]..wl[1]) } else { wl[0] };
            route = weave_route(&route, world, &clear, amp, wavelength, rng.random_range(0.0..std::f64::consts::TAU));
        }
        let sim = SimParams { seed: derive_indexed(cfg.seed, "collect-sim", r as u64), ..sim_params(cfg, "collect") };
        let tr = simulate_traverse(world, &route, &profile, &sim)?;
        match extract_patches(&map, &tr.odom, &tr.imu, &dist, &bank, r as u32) {
            Ok(s) => {
                samples.extend(s);
                used += 1;
            }
            Err(Error::EmptyDataset) => continue,
            Err(e) => return Err(e),
        }
    }
    let seqs = assemble_sequences(&samples, c.seq_len);
    let mut split = split_dataset(&seqs, c.ratios, derive(cfg.seed, "split"))?;
    if let Some(ratio) = c.balance {
        split.train = balance(&samples, &split.train, ratio, c.balance_threshold, derive(cfg.seed, "balance"))?;
    }
    let meta = DatasetMeta {
        version: DATASET_VERSION,
        seed: cfg.seed,
        channels: channel_names(world.num_classes()),
        num_classes: world.num_classes(),
        seq_len: c.seq_len,
        fourier,
        frequencies: bank,
        steady: dist,
        world: world.spec().name.clone(),
        trajectories: used,
    };
    let ds = Dataset { meta, samples, split };
    ds.validate()?;
    Ok(ds)
}

pub fn collect(cfg: &PipelineConfig, world_dir: &Path, out_dir: &Path) -> Result<Dataset> {
    let world = load_or_generate(cfg, world_dir)?;
    let ds = collect_dataset(&world, cfg)?;
    ds.save(out_dir)?;
    cfg.write_resolved(out_dir)?;
    Ok(ds)
}

pub fn train_on(ds: &Dataset, config: &ModelConfig) -> Result<TrainOutcome> {
    train(&TrainData::from_dataset(ds), config)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
    pub test_loss: Option<f64>,
    pub train_sequences: usize,
    pub val_sequences: usize,
    pub test_sequences: usize,
}

/// Trains on the dataset in `dataset_dir`; writes the checkpoint, the loss
/// curve and a summary next to it.
pub fn train_stage(cfg: &PipelineConfig, dataset_dir: &Path, checkpoint: &Path) -> Result<(TrainOutcome, TrainSummary)> {
    let ds = Dataset::load(dataset_dir)?;
    let out = train_on(&ds, &model_config(cfg, cfg.model.seed))?;
    let test_loss = if ds.split.test.is_empty() { None } else { Some(evaluate_mse(&out.network, &ds.samples, &ds.split.test)?) };
    out.network.save(checkpoint)?;
    let dir = checkpoint.parent().map(Path::to_path_buf).unwrap_or_default();
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    out.curve.save(&loss_curve_path(checkpoint))?;
    let summary = TrainSummary {
        best_epoch: out.best_epoch,
        best_val_loss: out.best_val_loss,
        test_loss,
        train_sequences: ds.split.train.len(),
        val_sequences: ds.split.val.len(),
        test_sequences: ds.split.test.len(),
    };
    fs::write(dir.join(format!("{stem}.summary.json")), serde_json::to_string_pretty(&summary)?)?;
    cfg.write_resolved(&dir)?;
    Ok((out, summary))
}

/// Costmap of a whole world at the configured nominal speed.
pub fn predict_global(net: &Network, world: &World, cfg: &PipelineConfig) -> Result<CostMap> {
    let map = global_map(world, cfg)?;
    predict_costmap(net, &map, cfg.costmap.speed, cfg.costmap.yaw_rate, &untraversable_ids(world), cfg.costmap.stride)
}

/// Costmap of the 10 × 10 m window around `pose`, in the vehicle frame.
pub fn predict_local(net: &Network, world: &World, pose: &Pose2, cfg: &PipelineConfig) -> Result<CostMap> {
    let cloud = render_local_cloud(world, pose, crate::costmap::LOCAL_EXTENT, &RenderParams { canopy: true, ..render_params(cfg) })?;
    predict_cloud(net, &cloud, &untraversable_ids(world), cfg)
}

/// Costmap from a recorded vehicle-frame cloud.
pub fn predict_cloud(net: &Network, cloud: &SemanticPointCloud, untraversable: &[u8], cfg: &PipelineConfig) -> Result<CostMap> {
    let map = build_local_map(cloud, &cfg.geometry)?;
    predict_costmap(net, &map, cfg.costmap.speed, cfg.costmap.yaw_rate, untraversable, cfg.costmap.stride)
}

pub fn write_costmap(cm: &CostMap, dir: &Path) -> Result<()> {
    cm.save(dir)?;
    cm.save_png(&dir.join("costmap.png"))
}

fn traversable_ids(world: &World, cfg: &PipelineConfig) -> Result<Vec<u8>> {
    if cfg.evaluate.traversable.is_empty() {
        return Ok(world.traversable_classes());
    }
    cfg.evaluate
        .traversable
        .iter()
        .map(|n| world.spec().class_id(n).ok_or_else(|| Error::Config(format!("evaluate.traversable: unknown class {n:?}"))))
        .collect()
}

/// Scores `cm` against the binarized class raster of `world`.
pub fn score_costmap(cm: &CostMap, world: &World, cfg: &PipelineConfig) -> Result<CostmapMetrics> {
    let classes: Vec<Option<u8>> = world.classes().iter().map(|&c| Some(c)).collect();
    let gt = binarize_ground_truth(*world.layout(), &classes, &traversable_ids(world, cfg)?)?;
    costmap_metrics(cm, &gt)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub rows: Vec<(String, CostmapMetrics)>,
    pub costmap: CostMap,
}

/// Learned costmap, with and without the semantic override, against the
/// semantic-only and uniform references on a held-out world.
pub fn evaluate_model(net: &Network, cfg: &PipelineConfig) -> Result<Evaluation> {
    let world = generate_world(&terrain_spec(cfg, cfg.evaluate.stock.as_deref(), true)?)?;
    let map = global_map(&world, cfg)?;
    let c = &cfg.costmap;
    let ours = predict_costmap(net, &map, c.speed, c.yaw_rate, &untraversable_ids(&world), c.stride)?;
    let geometric = predict_costmap(net, &map, c.speed, c.yaw_rate, &[], c.stride)?;
    let semantic = semantic_costmap(&world)?;
    let uniform = CostMap::uniform(*world.layout(), 1.0)?;
    let rows = vec![
        ("ours".to_string(), score_costmap(&ours, &world, cfg)?),
        ("ours_no_override".to_string(), score_costmap(&geometric, &world, cfg)?),
        ("semantic".to_string(), score_costmap(&semantic, &world, cfg)?),
        ("uniform".to_string(), score_costmap(&uniform, &world, cfg)?),
    ];
    Ok(Evaluation { rows, costmap: ours })
}

pub fn evaluate_stage(cfg: &PipelineConfig, checkpoint: &Path, reports: &Path) -> Result<Evaluation> {
    let net = Network::load(checkpoint)?;
    let ev = evaluate_model(&net, cfg)?;
    fs::create_dir_all(reports)?;
    fs::write(reports.join("costmap_metrics.txt"), costmap_table(&ev.rows))?;
    for (name, m) in &ev.rows {
        fs::write(reports.join(format!("roc_{name}.txt")), roc_points(&m.roc))?;
    }
    write_costmap(&ev.costmap, &reports.join("heldout_costmap"))?;
    cfg.write_resolved(reports)?;
    Ok(ev)
}

/// Start and goal pairs for one scenario, all reachable on the ground
/// truth map.
pub fn trial_specs(world: &World, kind: TrialKind, n: usize, min_distance: f64, seed: u64) -> Result<Vec<TrialSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clear = clear_cells(world, 1.0);
    let truth = semantic_costmap(world)?;
    let params = PlannerParams { obstacle_threshold: 0.5, ..PlannerParams::default() };
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n {
            return Err(Error::invalid(format!("could not place {n} trials with {min_distance} m separation")));
        }
        let (a, b) = match kind {
            TrialKind::CrossCountry => {
                let (x, y) = interior(world, 1.5);
                match (random_clear_point(world, &clear, &mut rng, x, y), random_clear_point(world, &clear, &mut rng, x, y)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => continue,
                }
            }
            TrialKind::Corridor => {
                if world.layout().extent()[0] < STOCK_EXTENT {
                    return Err(Error::Config("corridor trials need a stock world".into()));
                }
                let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let y = |rng: &mut ChaCha8Rng| STOCK_TRAIL_Y + side * rng.random_range(1.4..2.2);
                let a = [rng.random_range(STOCK_MARGIN..STOCK_MARGIN + 6.0), y(&mut rng)];
                let b = [rng.random_range(STOCK_EXTENT - STOCK_MARGIN - 6.0..STOCK_EXTENT - STOCK_MARGIN), y(&mut rng)];
                let snap = |p: [f64; 2]| world.layout().cell_of(p[0], p[1]).map(|(r, c)| (world.layout().index(r, c), world.layout().cell_center(r, c)));
                match (snap(a), snap(b)) {
                    (Some((i, a)), Some((j, b))) if clear[i] && clear[j] => if rng.random::<bool>() { (b, a) } else { (a, b) },
                    _ => continue,
                }
            }
        };
        let spec = TrialSpec { start: a, goal: b };
        if spec.euclidean() < min_distance {
            continue;
        }
        if plan_path(&truth, a, b, &params).is_ok() {
            out.push(spec);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub methods: Vec<(String, NavigationMetrics)>,
    pub trials: Vec<(String, Vec<TrialResult>)>,
}

/// Runs one scenario with the learned, semantic-only and uniform
/// costmaps. Every method sees the same trials and simulator seeds; times
/// are relative to the learned costmap.
pub fn navigate_scenario(net: &Network, scenario: &Scenario, cfg: &PipelineConfig) -> Result<ScenarioOutcome> {
    let world = generate_world(&terrain_spec(cfg, Some(&scenario.stock), true)?)?;
    let n = &cfg.navigate;
    let specs = trial_specs(&world, scenario.kind, n.trials, n.min_distance, derive(cfg.seed, &format!("trials-{}", scenario.name)))?;
    let dist = steady_distribution(cfg)?;
    let sim = sim_params(cfg, &format!("navigate-{}", scenario.name));
    let maps = [
        ("ours", predict_global(net, &world, cfg)?),
        ("semantic", semantic_costmap(&world)?),
        ("uniform", CostMap::uniform(*world.layout(), 1.0)?),
    ];
    let mut trials = Vec::new();
    for (name, cm) in &maps {
        trials.push((name.to_string(), run_trials(&world, cm, &specs, &n.planner, n.speed, &sim, &dist)?));
    }
    let reference = trials[0].1.clone();
    let methods = trials
        .iter()
        .map(|(name, t)| Ok((name.clone(), navigation_metrics(t, &reference)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioOutcome { scenario: scenario.name.clone(), methods, trials })
}

pub fn navigate_stage(cfg: &PipelineConfig, checkpoint: &Path, reports: &Path) -> Result<Vec<ScenarioOutcome>> {
    let net = Network::load(checkpoint)?;
    let mut out = Vec::new();
    for s in &cfg.navigate.scenarios {
        out.push(navigate_scenario(&net, s, cfg)?);
    }
    fs::create_dir_all(reports)?;
    let rows: Vec<(String, String, NavigationMetrics)> = out
        .iter()
        .flat_map(|o| o.methods.iter().map(move |(m, v)| (o.scenario.clone(), m.clone(), v.clone())))
        .collect();
    fs::write(reports.join("navigation.txt"), navigation_table(&rows))?;
    for o in &out {
        for (method, trials) in &o.trials {
            let dir = reports.join("trajectories").join(&o.scenario).join(method);
            fs::create_dir_all(&dir)?;
            for (i, t) in trials.iter().enumerate() {
                let mut text = format!("# success {} collision {} time {:.2}\n# x y\n", t.success, t.collision, t.time);
                for p in &t.trajectory {
                    text.push_str(&format!("{:.4} {:.4}\n", p[0], p[1]));
                }
                fs::write(dir.join(format!("trial_{i}.txt")), text)?;
            }
        }
    }
    cfg.write_resolved(reports)?;
    Ok(out)
}

/// The full model and the two ablations.
pub fn ablation_variants(base: &ModelConfig) -> Vec<(&'static str, ModelConfig)> {
    vec![
        ("full", base.clone()),
        ("no_omega", ModelConfig { use_omega: false, ..base.clone() }),
        ("no_lstm", ModelConfig { use_recurrent: false, ..base.clone() }),
    ]
}

/// Trains every variant once per configured seed.
pub fn ablate_dataset(ds: &Dataset, cfg: &PipelineConfig) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for &s in &cfg.ablate.seeds {
        let mut base = model_config(cfg, s);
        if let Some(e) = cfg.ablate.epochs {
            base.epochs = e;
        }
        for (name, mc) in ablation_variants(&base) {
            let out = train_on(ds, &mc)?;
            rows.push(AblationRow { variant: name.into(), seed: s, val_loss: out.best_val_loss });
        }
    }
    Ok(rows)
}

pub fn ablate_stage(cfg: &PipelineConfig, dataset_dir: &Path, reports: &Path) -> Result<Vec<AblationRow>> {
    let ds = Dataset::load(dataset_dir)?;
    let rows = ablate_dataset(&ds, cfg)?;
    fs::create_dir_all(reports)?;
    let mut text = ablation_table(&rows);
    let med = ablation_medians(&rows);
    if let Some((_, full)) = med.iter().find(|(n, _)| n == "full") {
        for (n, m) in med.iter().filter(|(n, _)| n != "full") {
            text.push_str(&format!("full <= {n}: {}\n", full <= m));
        }
    }
    fs::write(reports.join("ablation.txt"), text)?;
    cfg.write_resolved(reports)?;
    Ok(rows)
}

/// Loss curve file written next to `checkpoint`.
pub fn loss_curve_path(checkpoint: &Path) -> PathBuf {
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    checkpoint.with_file_name(format!("{stem}.loss.txt"))
}
