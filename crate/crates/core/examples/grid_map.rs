//! Renders the local point cloud around a pose in the hill world and
//! summarizes the geometric features of the resulting grid map.

use travcost::costmap::{build_local_map, LOCAL_EXTENT};
use travcost::geometry::GeometryParams;
use travcost::world::render::{render_local_cloud, RenderParams};
use travcost::world::spec::TerrainSpec;
use travcost::world::{generate_world, Pose2};

fn main() -> travcost::Result<()> {
    let world = generate_world(&TerrainSpec::stock("hill", 5)?)?;
    let pose = Pose2::new(20.0, 14.0, 0.4);
    let cloud = render_local_cloud(&world, &pose, LOCAL_EXTENT, &RenderParams::default())?;
    let map = build_local_map(&cloud, &GeometryParams::default())?;
    println!("{} points -> {} of {} cells occupied", cloud.len(), map.occupied_count(), map.layout().len());

    let cells: Vec<_> = map.cells().iter().flatten().collect();
    let stat = |name: &str, f: &dyn Fn(&travcost::geometry::CellFeatures) -> f64| {
        let v: Vec<f64> = cells.iter().map(|c| f(c)).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("{name:<12} mean {mean:8.4}  max {max:8.4}");
    };
    stat("slope (deg)", &|c| c.slope);
    stat("flatness", &|c| c.flatness);
    stat("height diff", &|c| c.height_diff);
    let dir = std::env::temp_dir().join("travcost-gridmap");
    map.save(&dir)?;
    println!("grid map written to {}", dir.display());
    Ok(())
}
