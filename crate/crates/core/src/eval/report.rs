//! Plain-text report tables.

use std::fmt::Write;

use crate::eval::metrics::{CostmapMetrics, RocPoint};
use crate::eval::navigation::NavigationMetrics;

fn opt(v: Option<f64>, digits: usize) -> String {
    v.filter(|v| v.is_finite()).map_or_else(|| "n/a".to_string(), |v| format!("{v:.digits$}"))
}

fn num(v: f64, digits: usize) -> String {
    opt(Some(v), digits)
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

/// Costmap quality per method: traversable-cell accuracy, overall accuracy
/// (both percent), AUC and MSE.
pub fn costmap_table(rows: &[(String, CostmapMetrics)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, m)| {
            vec![name.clone(), num(m.trav_acc, 2), num(m.all_acc, 2), opt(m.auc, 4), num(m.mse, 4), m.cells.to_string()]
        })
        .collect();
    table(&["method", "trav_acc", "all_acc", "auc", "mse", "cells"], &body)
}

/// Navigation per scenario and method: success rate (percent), normalized
/// length, relative time and mean stability.
pub fn navigation_table(rows: &[(String, String, NavigationMetrics)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(scenario, method, m)| {
            vec![
                scenario.clone(),
                method.clone(),
                m.trials.to_string(),
                num(m.success_rate, 1),
                opt(m.norm_length, 3),
                opt(m.rel_time, 3),
                opt(m.mean_stability, 4),
            ]
        })
        .collect();
    table(&["scenario", "method", "trials", "success", "norm_length", "rel_time", "stability"], &body)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub seed: u64,
    pub val_loss: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median validation loss per variant, in first-seen order.
pub fn ablation_medians(rows: &[AblationRow]) -> Vec<(String, f64)> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.variant.as_str()) {
            names.push(&r.variant);
        }
    }
    names
        .into_iter()
        .map(|n| (n.to_string(), median(rows.iter().filter(|r| r.variant == n).map(|r| r.val_loss).collect())))
        .collect()
}

/// One column per seed plus the median, losses in units of 1e-2.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut header = vec!["variant".to_string()];
    header.extend(seeds.iter().map(|s| format!("seed {s}")));
    header.push("median".into());
    let body: Vec<Vec<String>> = ablation_medians(rows)
        .into_iter()
        .map(|(name, med)| {
            let mut row = vec![name.clone()];
            for s in &seeds {
                let v = rows.iter().find(|r| r.variant == name && r.seed == *s).map(|r| 100.0 * r.val_loss);
                row.push(opt(v, 3));
            }
            row.push(num(100.0 * med, 3));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    format!("val loss (x1e-2)\n{}", table(&header, &body))
}

/// "fpr tpr threshold" per line, for plotting.
pub fn roc_points(roc: &[RocPoint]) -> String {
    let mut s = String::from("# fpr tpr threshold\n");
    for p in roc {
        let _ = writeln!(s, "{:.6} {:.6} {}", p.fpr, p.tpr, p.threshold);
    }
    s
}
