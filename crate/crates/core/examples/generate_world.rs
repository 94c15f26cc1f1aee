//! Generates both stock worlds, prints their class make-up and writes the
//! forest rasters to a temporary directory.

use travcost::world::generate_world;
use travcost::world::spec::TerrainSpec;

fn main() -> travcost::Result<()> {
    for name in ["forest", "hill"] {
        let world = generate_world(&TerrainSpec::stock(name, 42)?)?;
        let mut counts = vec![0usize; world.num_classes() as usize];
        for &c in world.classes() {
            counts[c as usize] += 1;
        }
        let n = world.classes().len() as f64;
        println!("{name}: {} x {} cells", world.layout().width, world.layout().height);
        for (class, count) in world.spec().classes.iter().zip(&counts) {
            let flag = if class.traversable { "" } else { " (untraversable)" };
            println!("  {:<6} {:>5.1}%{flag}", class.name, 100.0 * *count as f64 / n);
        }
        let (lo, hi) = world.heights().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &h| (a.min(h), b.max(h)));
        println!("  height range {lo:.2} .. {hi:.2} m");
    }
    let dir = std::env::temp_dir().join("travcost-world");
    generate_world(&TerrainSpec::stock("forest", 42)?)?.save(&dir)?;
    println!("forest rasters written to {}", dir.display());
    Ok(())
}
