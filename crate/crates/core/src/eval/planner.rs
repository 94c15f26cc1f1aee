//! Costmap-weighted shortest paths on the 8-connected cell grid.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::costmap::CostMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    /// Penalty weight `w` on `1 - value`.
    pub weight: f64,
    /// Cells with value at or below this are impassable.
    pub obstacle_threshold: f64,
    /// Cells within this distance of an impassable cell are also
    /// impassable, meters.
    pub inflation: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self { weight: 5.0, obstacle_threshold: 0.05, inflation: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    /// `(row, col)` from start to goal.
    pub cells: Vec<(usize, usize)>,
    /// Cell centers in map coordinates.
    pub points: Vec<[f64; 2]>,
    pub cost: f64,
    pub length: f64,
}

#[derive(Debug, PartialEq)]
struct Entry {
    f: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Cost of the move between two adjacent cells with values `a` and `b`.
pub fn edge_cost(step: f64, a: f64, b: f64, weight: f64) -> f64 {
    step * (1.0 + weight * (1.0 - 0.5 * (a + b)))
}

/// Passability of every cell after thresholding and inflation.
pub fn passable_mask(costmap: &CostMap, params: &PlannerParams) -> Vec<bool> {
    let layout = costmap.layout();
    let base: Vec<bool> = costmap.values().iter().map(|v| v.is_some_and(|v| v > params.obstacle_threshold)).collect();
    let r = (params.inflation / layout.resolution).floor() as isize;
    if r <= 0 {
        return base;
    }
    let mut out = base.clone();
    for (i, &ok) in base.iter().enumerate() {
        if ok {
            continue;
        }
        let (row, col) = layout.row_col(i);
        for dr in -r..=r {
            for dc in -r..=r {
                if dr * dr + dc * dc > r * r {
                    continue;
                }
                let (rr, cc) = (row as isize + dr, col as isize + dc);
                if rr >= 0 && cc >= 0 && (rr as usize) < layout.height && (cc as usize) < layout.width {
                    out[layout.index(rr as usize, cc as usize)] = false;
                }
            }
        }
    }
    out
}

/// A* from `start` to `goal` (map coordinates). Edge weight is
/// `step × (1 + w (1 - mean endpoint value))`; the straight-line distance
/// is an admissible heuristic since every edge costs at least its length.
pub fn plan_path(costmap: &CostMap, start: [f64; 2], goal: [f64; 2], params: &PlannerParams) -> Result<PlannedPath> {
    let layout = *costmap.layout();
    let passable = passable_mask(costmap, params);
    let locate = |p: [f64; 2], what: &str| -> Result<usize> {
        let i = layout.index_of(p[0], p[1]).ok_or_else(|| Error::invalid(format!("{what} {p:?} is outside the costmap")))?;
        if costmap.values()[i].is_none() {
            return Err(Error::invalid(format!("{what} {p:?} lies on an absent cell")));
        }
        if !passable[i] {
            return Err(Error::invalid(format!("{what} {p:?} is blocked")));
        }
        Ok(i)
    };
    let s = locate(start, "start")?;
    let g = locate(goal, "goal")?;
    let res = layout.resolution;
    let (gr, gc) = layout.row_col(g);
    let h = |i: usize| {
        let (r, c) = layout.row_col(i);
        res * ((r as f64 - gr as f64).hypot(c as f64 - gc as f64))
    };
    let n = layout.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Entry { f: h(s), index: s });
    while let Some(Entry { index: u, .. }) = heap.pop() {
        if closed[u] {
            continue;
        }
        closed[u] = true;
        if u == g {
            break;
        }
        let (r, c) = layout.row_col(u);
        let vu = costmap.values()[u].unwrap();
        for (dr, dc) in NEIGHBORS {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            if rr < 0 || cc < 0 || rr as usize >= layout.height || cc as usize >= layout.width {
                continue;
            }
            let v = layout.index(rr as usize, cc as usize);
            if !passable[v] || closed[v] {
                continue;
            }
            let step = if dr != 0 && dc != 0 { res * std::f64::consts::SQRT_2 } else { res };
            let nd = dist[u] + edge_cost(step, vu, costmap.values()[v].unwrap(), params.weight);
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Entry { f: nd + h(v), index: v });
            }
        }
    }
    if !dist[g].is_finite() {
        return Err(Error::NoPath);
    }
    let mut cells = vec![layout.row_col(g)];
    let mut cur = g;
    while cur != s {
        cur = prev[cur];
        cells.push(layout.row_col(cur));
    }
    cells.reverse();
    let points: Vec<[f64; 2]> = cells.iter().map(|&(r, c)| layout.cell_center(r, c)).collect();
    let length = points.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
    Ok(PlannedPath { cells, points, cost: dist[g], length })
}

/// Cost of an explicit cell path under the same edge weights.
pub fn path_cost(costmap: &CostMap, cells: &[(usize, usize)], weight: f64) -> f64 {
    let res = costmap.layout().resolution;
    cells
        .windows(2)
        .map(|w| {
            let diag = w[0].0 != w[1].0 && w[0].1 != w[1].1;
            let step = if diag { res * std::f64::consts::SQRT_2 } else { res };
            edge_cost(step, costmap.get(w[0].0, w[0].1).unwrap(), costmap.get(w[1].0, w[1].1).unwrap(), weight)
        })
        .sum()
}
