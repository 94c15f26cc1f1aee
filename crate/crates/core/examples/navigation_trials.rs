//! Plans and drives trials across the forest world on the semantic and
//! uniform costmaps and prints the navigation table.

use travcost::config::TrialKind;
use travcost::costmap::CostMap;
use travcost::eval::report::navigation_table;
use travcost::eval::{navigation_metrics, run_trials, semantic_costmap, PlannerParams};
use travcost::pipeline::trial_specs;
use travcost::risk::SteadyDistribution;
use travcost::world::generate_world;
use travcost::world::sim::SimParams;
use travcost::world::spec::TerrainSpec;

fn main() -> travcost::Result<()> {
    let world = generate_world(&TerrainSpec::stock("forest", 21)?)?;
    let specs = trial_specs(&world, TrialKind::CrossCountry, 6, 20.0, 4)?;
    let dist = SteadyDistribution::new(travcost::risk::GRAVITY, 0.5, (0.0, 5.0))?;
    let planner = PlannerParams { inflation: 0.3, ..PlannerParams::default() };
    let sim = SimParams::default();
    let semantic = run_trials(&world, &semantic_costmap(&world)?, &specs, &planner, 1.0, &sim, &dist)?;
    let uniform = run_trials(&world, &CostMap::uniform(*world.layout(), 1.0)?, &specs, &planner, 1.0, &sim, &dist)?;
    let rows = vec![
        ("forest".to_string(), "semantic".to_string(), navigation_metrics(&semantic, &semantic)?),
        ("forest".to_string(), "uniform".to_string(), navigation_metrics(&uniform, &semantic)?),
    ];
    print!("{}", navigation_table(&rows));
    Ok(())
}
