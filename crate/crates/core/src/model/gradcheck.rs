use super::config::LayerGroup;
use super::network::Network;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error over all parameters.
    pub max_rel_error: f64,
    /// Largest relative error within each layer group present.
    pub per_group: Vec<(LayerGroup, f64)>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Compares the analytic gradient of the squared error against central
/// differences with step `eps`. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(net: &Network, patches: &[&[f32]], velocities: &[&[f32]], target: f64, eps: f64) -> Result<GradCheckReport> {
    let mut analytic = vec![0.0; net.params.len()];
    net.accumulate_gradient(patches, velocities, target, 1.0, &mut analytic)?;
    let mut probe = net.clone();
    let mut numeric = vec![0.0; net.params.len()];
    for i in 0..net.params.len() {
        if net.config.frozen.iter().any(|g| net.layout.group_ranges(*g).any(|r| r.contains(&i))) {
            continue;
        }
        let base = net.params[i];
        probe.params[i] = base + eps;
        let up = (probe.forward(patches, velocities)? - target).powi(2);
        probe.params[i] = base - eps;
        let down = (probe.forward(patches, velocities)? - target).powi(2);
        probe.params[i] = base;
        numeric[i] = (up - down) / (2.0 * eps);
    }
    let rel = |i: usize| {
        let (a, n) = (analytic[i], numeric[i]);
        (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
    };
    let mut per_group = Vec::new();
    for g in LayerGroup::ALL {
        let worst = net.layout.group_ranges(g).flatten().map(rel).fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
        if let Some(w) = worst {
            per_group.push((g, w));
        }
    }
    let max_rel_error = per_group.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_error, per_group, analytic, numeric })
}
