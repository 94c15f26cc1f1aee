//! Scores a noisy copy of the semantic costmap against the binarized
//! class raster, printing the metric table and the first ROC points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use travcost::costmap::CostMap;
use travcost::eval::report::{costmap_table, roc_points};
use travcost::eval::{binarize_ground_truth, costmap_metrics, semantic_costmap};
use travcost::world::generate_world;
use travcost::world::spec::TerrainSpec;

fn main() -> travcost::Result<()> {
    let world = generate_world(&TerrainSpec::stock("forest", 9)?)?;
    let classes: Vec<Option<u8>> = world.classes().iter().map(|&c| Some(c)).collect();
    let gt = binarize_ground_truth(*world.layout(), &classes, &world.traversable_classes())?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let clean = semantic_costmap(&world)?;
    let noisy: Vec<Option<f64>> = clean
        .values()
        .iter()
        .map(|v| v.map(|v| (0.8 * v + 0.1 + rng.random_range(-0.5..0.5)).clamp(0.0, 1.0)))
        .collect();
    let noisy = CostMap::new(*world.layout(), noisy)?;
    let rows = vec![
        ("semantic".to_string(), costmap_metrics(&clean, &gt)?),
        ("noisy".to_string(), costmap_metrics(&noisy, &gt)?),
    ];
    print!("{}", costmap_table(&rows));
    let roc = roc_points(&rows[1].1.roc);
    println!("{}", roc.lines().take(6).collect::<Vec<_>>().join("\n"));
    Ok(())
}
