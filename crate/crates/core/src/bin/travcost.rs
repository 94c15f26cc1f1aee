use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use travcost::config::PipelineConfig;
use travcost::error::Error;
use travcost::eval::report::{ablation_table, costmap_table, navigation_table};
use travcost::geometry::SemanticPointCloud;
use travcost::model::Network;
use travcost::pipeline;
use travcost::world::{Pose2, World};

#[derive(Parser)]
#[command(name = "travcost", version, about = "Learned traversability costmaps from IMU-supervised terrain patches")]
struct Cli {
    /// Pipeline config (TOML). Defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Directory relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    root: PathBuf,
    /// Overrides the global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a world and write its rasters.
    Generate {
        /// Terrain spec file, overriding the configured world.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, conflicts_with = "spec")]
        stock: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drive random routes and build a labelled dataset.
    Collect {
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        routes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the traversability model.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict a costmap: around a pose, from a recorded cloud, or over the
    /// whole world.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        world: Option<PathBuf>,
        /// Vehicle pose "x,y,yaw".
        #[arg(long, value_parser = parse_pose, conflicts_with = "cloud")]
        pose: Option<Pose2>,
        /// Vehicle-frame cloud file ("x y z class" per line).
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the model's costmap on a held-out world.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Planner-in-the-loop navigation trials.
    Navigate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the full model and its ablations over several seeds.
    Ablate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pose(s: &str) -> Result<Pose2, String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, yaw] => Ok(Pose2::new(*x, *y, *yaw)),
        [x, y] => Ok(Pose2::new(*x, *y, 0.0)),
        _ => Err("expected x,y,yaw".into()),
    }
}

fn or(p: Option<PathBuf>, default: &Path) -> PathBuf {
    p.unwrap_or_else(|| default.to_path_buf())
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let paths = cfg.paths.rooted(&cli.root);
    match cli.command {
        Command::Generate { spec, stock, out } => {
            if spec.is_some() || stock.is_some() {
                cfg.world.spec = spec;
                cfg.world.stock = stock;
            }
            cfg.validate()?;
            let out = or(out, &paths.world_dir);
            let w = pipeline::generate(&cfg, &out)?;
            let l = w.layout();
            println!("world {:?}: {} x {} cells at {} m -> {}", w.spec().name, l.width, l.height, l.resolution, out.display());
        }
        Command::Collect { world, routes, out } => {
            if let Some(r) = routes {
                cfg.collect.routes = r;
            }
            cfg.validate()?;
            let out = or(out, &paths.dataset_dir);
            let ds = pipeline::collect(&cfg, &or(world, &paths.world_dir), &out)?;
            println!(
                "{} samples from {} trajectories; sequences train {} / val {} / test {} -> {}",
                ds.samples.len(),
                ds.meta.trajectories,
                ds.split.train.len(),
                ds.split.val.len(),
                ds.split.test.len(),
                out.display()
            );
        }
        Command::Train { dataset, epochs, out } => {
            if let Some(e) = epochs {
                cfg.model.epochs = e;
            }
            cfg.validate()?;
            let out = or(out, &paths.checkpoint);
            let (_, s) = pipeline::train_stage(&cfg, &or(dataset, &paths.dataset_dir), &out)?;
            println!(
                "best epoch {:?}: val mse {:.5}, test mse {} -> {}",
                s.best_epoch,
                s.best_val_loss,
                s.test_loss.map_or("n/a".into(), |t| format!("{t:.5}")),
                out.display()
            );
        }
        Command::Predict { checkpoint, world, pose, cloud, speed, out } => {
            if let Some(v) = speed {
                cfg.costmap.speed = v;
            }
            cfg.validate()?;
            let net = Network::load(&or(checkpoint, &paths.checkpoint))?;
            let world_dir = or(world, &paths.world_dir);
            let cm = match (pose, cloud) {
                (_, Some(path)) => {
                    let num_classes = (net.input.channels - travcost::dataset::GEOMETRIC_CHANNELS.len()) as u8;
                    let cloud = SemanticPointCloud::load(&path, num_classes)?;
                    let untrav = if world_dir.join("spec.toml").exists() { World::load(&world_dir)?.untraversable_classes() } else { Vec::new() };
                    pipeline::predict_cloud(&net, &cloud, &untrav, &cfg)?
                }
                (Some(p), None) => pipeline::predict_local(&net, &World::load(&world_dir)?, &p, &cfg)?,
                (None, None) => pipeline::predict_global(&net, &World::load(&world_dir)?, &cfg)?,
            };
            let out = or(out, &paths.reports_dir.join("costmap"));
            pipeline::write_costmap(&cm, &out)?;
            cfg.write_resolved(&out)?;
            println!(
                "{} cells present, mean value {} -> {}",
                cm.present_count(),
                cm.mean_present().map_or("n/a".into(), |m| format!("{m:.4}")),
                out.display()
            );
        }
        Command::Evaluate { checkpoint, out } => {
            let out = or(out, &paths.reports_dir);
            let ev = pipeline::evaluate_stage(&cfg, &or(checkpoint, &paths.checkpoint), &out)?;
            print!("{}", costmap_table(&ev.rows));
        }
        Command::Navigate { checkpoint, trials, out } => {
            if let Some(t) = trials {
                cfg.navigate.trials = t;
            }
            cfg.validate()?;
            let out = or(out, &paths.reports_dir);
            let res = pipeline::navigate_stage(&cfg, &or(checkpoint, &paths.checkpoint), &out)?;
            let rows: Vec<_> = res
                .iter()
                .flat_map(|o| o.methods.iter().map(move |(m, v)| (o.scenario.clone(), m.clone(), v.clone())))
                .collect();
            print!("{}", navigation_table(&rows));
        }
        Command::Ablate { dataset, epochs, out } => {
            if epochs.is_some() {
                cfg.ablate.epochs = epochs;
            }
            cfg.validate()?;
            let out = or(out, &paths.reports_dir);
            let rows = pipeline::ablate_stage(&cfg, &or(dataset, &paths.dataset_dir), &out)?;
            print!("{}", ablation_table(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::Parse { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
