use serde::{Deserialize, Serialize};

use crate::costmap::CostMap;
use crate::error::{Error, Result};
use crate::raster::GridLayout;

/// Cells are traversable (`Some(true)`), not (`Some(false)`) or unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGroundTruth {
    pub layout: GridLayout,
    pub values: Vec<Option<bool>>,
}

pub fn binarize_ground_truth(layout: GridLayout, semantic: &[Option<u8>], traversable: &[u8]) -> Result<BinaryGroundTruth> {
    if semantic.len() != layout.len() {
        return Err(Error::Shape(format!("{} classes for a {}-cell layout", semantic.len(), layout.len())));
    }
    let values = semantic.iter().map(|c| c.map(|c| traversable.contains(&c))).collect();
    Ok(BinaryGroundTruth { layout, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC by sweeping the threshold over every distinct score, highest first.
/// A cell is called positive when `score >= threshold`. Tied scores move
/// together, which gives them half credit under the trapezoid rule.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Vec<RocPoint> {
    let p = positive.iter().filter(|&&b| b).count() as f64;
    let n = positive.len() as f64 - p;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        out.push(RocPoint {
            fpr: if n > 0.0 { fp / n } else { 0.0 },
            tpr: if p > 0.0 { tp / p } else { 0.0 },
            threshold: s,
        });
    }
    out
}

pub fn auc_from_roc(roc: &[RocPoint]) -> f64 {
    roc.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

/// Area under the ROC curve; `None` when one class is missing.
pub fn auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let p = positive.iter().filter(|&&b| b).count();
    if p == 0 || p == positive.len() {
        return None;
    }
    Some(auc_from_roc(&roc_curve(scores, positive)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostmapMetrics {
    /// Percent of traversable cells predicted above 0.5.
    pub trav_acc: f64,
    /// Percent of all compared cells classified correctly at 0.5.
    pub all_acc: f64,
    pub auc: Option<f64>,
    pub mse: f64,
    pub cells: usize,
    pub roc: Vec<RocPoint>,
}

/// Predictions above 0.5 count as traversable. Cells absent in either
/// raster are ignored.
pub fn costmap_metrics(costmap: &CostMap, gt: &BinaryGroundTruth) -> Result<CostmapMetrics> {
    if costmap.layout() != &gt.layout {
        return Err(Error::Shape("costmap and ground truth are not aligned".into()));
    }
    let (scores, labels): (Vec<f64>, Vec<bool>) =
        costmap.values().iter().zip(&gt.values).filter_map(|(v, g)| Some(((*v)?, (*g)?))).unzip();
    if scores.is_empty() {
        return Err(Error::Undefined("no cell is present in both the costmap and the ground truth".into()));
    }
    let n = scores.len() as f64;
    let correct = scores.iter().zip(&labels).filter(|(s, l)| (**s > 0.5) == **l).count() as f64;
    let trav: Vec<f64> = scores.iter().zip(&labels).filter(|(_, l)| **l).map(|(s, _)| *s).collect();
    let trav_acc = if trav.is_empty() {
        f64::NAN
    } else {
        100.0 * trav.iter().filter(|s| **s > 0.5).count() as f64 / trav.len() as f64
    };
    let mse = scores.iter().zip(&labels).map(|(s, l)| (s - if *l { 1.0 } else { 0.0 }).powi(2)).sum::<f64>() / n;
    let roc = roc_curve(&scores, &labels);
    Ok(CostmapMetrics {
        trav_acc,
        all_acc: 100.0 * correct / n,
        auc: auc(&scores, &labels),
        mse,
        cells: scores.len(),
        roc,
    })
}
