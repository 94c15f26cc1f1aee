//! Trains a quick model, then drives along the forest trail producing a
//! local costmap every half second with the streaming engine.

use travcost::config::PipelineConfig;
use travcost::costmap::CostmapEngine;
use travcost::pipeline::{collect_dataset, model_config, terrain_spec, train_on};
use travcost::world::generate_world;
use travcost::world::render::{render_local_cloud, RenderParams};
use travcost::world::spec::STOCK_TRAIL_Y;
use travcost::world::Pose2;

fn main() -> travcost::Result<()> {
    let mut cfg = PipelineConfig::default();
    cfg.collect.routes = 8;
    cfg.model.epochs = 3;
    let world = generate_world(&terrain_spec(&cfg, None, false)?)?;
    let ds = collect_dataset(&world, &cfg)?;
    let net = train_on(&ds, &model_config(&cfg, 0))?.network;

    let mut engine = CostmapEngine::new(net, world.untraversable_classes(), cfg.geometry);
    let speed = 1.0;
    let mut last = None;
    for k in 0..6 {
        let pose = Pose2::new(8.0 + 0.5 * k as f64 * speed, STOCK_TRAIL_Y + 1.0, 0.0);
        let cloud = render_local_cloud(&world, &pose, 10.0, &RenderParams::default())?;
        let cm = engine.step(&cloud, speed, 0.0)?;
        println!(
            "t={:.1}s  {} cells  mean value {:.3}",
            0.5 * k as f64,
            cm.present_count(),
            cm.mean_present().unwrap_or(f64::NAN)
        );
        last = Some(cm);
    }
    let path = std::env::temp_dir().join("travcost-local-costmap.png");
    last.expect("six frames").save_png(&path)?;
    println!("last costmap written to {}", path.display());
    Ok(())
}
