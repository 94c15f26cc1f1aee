//! Collects a small labelled dataset on the forest world and prints the
//! label distribution of each split.

use travcost::config::PipelineConfig;
use travcost::pipeline::{collect_dataset, terrain_spec};
use travcost::world::generate_world;

fn main() -> travcost::Result<()> {
    let mut cfg = PipelineConfig::default();
    cfg.collect.routes = 6;
    let world = generate_world(&terrain_spec(&cfg, None, false)?)?;
    let ds = collect_dataset(&world, &cfg)?;
    println!("{} samples from {} routes, channels {:?}", ds.samples.len(), ds.meta.trajectories, ds.meta.channels);
    for (name, seqs) in [("train", &ds.split.train), ("val", &ds.split.val), ("test", &ds.split.test)] {
        let t: Vec<f64> = seqs.iter().map(|s| s.target(&ds.samples)).collect();
        let mean = t.iter().sum::<f64>() / t.len().max(1) as f64;
        println!("{name:<5} {:>5} sequences, mean label {mean:.3}", t.len());
    }
    let dir = std::env::temp_dir().join("travcost-dataset");
    ds.save(&dir)?;
    println!("dataset written to {}", dir.display());
    Ok(())
}
