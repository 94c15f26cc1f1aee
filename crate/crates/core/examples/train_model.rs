//! Checks gradients on a tiny network, then trains a small model on a
//! freshly collected dataset and saves the checkpoint.

use travcost::config::PipelineConfig;
use travcost::model::{gradient_check, evaluate_mse, InputShape, ModelConfig, Network, Normalization};
use travcost::motion::{sample_frequencies, FourierConfig};
use travcost::pipeline::{collect_dataset, model_config, terrain_spec, train_on};
use travcost::world::generate_world;

fn main() -> travcost::Result<()> {
    let bank = sample_frequencies(&FourierConfig { pairs: 2, ..FourierConfig::default() })?;
    let input = InputShape { channels: 3, cells: 10, velocity_len: bank.feature_len() };
    let net = Network::new(ModelConfig::tiny(), input, bank, Normalization::identity(3))?;
    let patch: Vec<f32> = (0..input.patch_len()).map(|i| ((i * 37 % 101) as f32) / 101.0).collect();
    let vel = vec![0.3f32; input.velocity_len];
    let steps = net.config.seq_len;
    let report = gradient_check(&net, &vec![patch.as_slice(); steps], &vec![vel.as_slice(); steps], 0.7, 1e-6)?;
    println!("gradient check: max relative error {:.2e}", report.max_rel_error);

    let mut cfg = PipelineConfig::default();
    cfg.collect.routes = 8;
    cfg.model.epochs = 5;
    let world = generate_world(&terrain_spec(&cfg, None, false)?)?;
    let ds = collect_dataset(&world, &cfg)?;
    let out = train_on(&ds, &model_config(&cfg, 0))?;
    for e in &out.curve.0 {
        println!("epoch {:>2}: train {:.5}  val {:.5}", e.epoch, e.train_loss, e.val_loss);
    }
    println!("test mse {:.5}", evaluate_mse(&out.network, &ds.samples, &ds.split.test)?);
    let path = std::env::temp_dir().join("travcost-model.json");
    out.network.save(&path)?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}
