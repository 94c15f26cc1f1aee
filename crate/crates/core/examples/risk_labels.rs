//! Fits the steady acceleration distribution on a reference run and labels
//! traverses over terrain of increasing roughness.

use travcost::risk::{fit_steady_distribution, label_at, risk_level, SteadyWindow};
use travcost::world::sim::{simulate_steady, SimParams};

fn main() -> travcost::Result<()> {
    let params = SimParams::default();
    let reference = simulate_steady(6.0, 1.0, 30.0, &params)?;
    let dist = fit_steady_distribution(&reference, SteadyWindow::Interval { start: 0.0, end: 30.0 })?;
    println!("steady fit: mean {:.4} m/s², std {:.4} m/s²", dist.mean, dist.std);
    println!("alpha at the mean: {}", risk_level(dist.mean, &dist));

    println!("{:>9} {:>6} {:>10}", "roughness", "speed", "mean label");
    for rho in [0.0, 0.5, 1.5, 3.0] {
        for speed in [0.5, 1.5] {
            let p = SimParams { seed: 11, ..params };
            let trace = simulate_steady(rho, speed, 20.0, &p)?;
            let labels: Vec<f64> = (1..200).map(|i| label_at(i as f64 * 0.1, &trace, &dist)).collect::<Result<_, _>>()?;
            println!("{rho:>9.1} {speed:>6.1} {:>10.3}", labels.iter().sum::<f64>() / labels.len() as f64);
        }
    }
    Ok(())
}
