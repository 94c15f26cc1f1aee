//! Robot-centric costmaps: a 10 × 10 m local grid map is swept with
//! overlapping 1 × 1 m patches on a 0.2 m lattice, each patch is scored by
//! the network, scores are averaged per cell, empty cells are masked and
//! known-untraversable classes are forced to 0.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use image::{ImageBuffer, LumaA};
use rayon::prelude::*;

use crate::dataset::{patch_at_cells, velocity_features, PATCH_CELLS};
use crate::error::{Error, Result};
use crate::geometry::{build_grid_map_with, GeometryParams, GridMap, SemanticPointCloud};
use crate::model::Network;
use crate::raster::{read_raster_set, write_raster_set, GridLayout, RasterMeta};

pub const LOCAL_EXTENT: f64 = 10.0;
pub const SWEEP_STRIDE: f64 = 0.2;
/// On-disk value of cells without a cost.
pub const ABSENT: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMap {
    layout: GridLayout,
    values: Vec<Option<f64>>,
}

impl CostMap {
    pub fn new(layout: GridLayout, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Shape(format!("{} values for a {}-cell layout", values.len(), layout.len())));
        }
        if let Some(v) = values.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("cost {v} outside [0, 1]")));
        }
        Ok(Self { layout, values })
    }

    /// Every cell present with value `v`.
    pub fn uniform(layout: GridLayout, v: f64) -> Result<Self> {
        Self::new(layout, vec![Some(v); layout.len()])
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[self.layout.index(row, col)]
    }

    pub fn at(&self, x: f64, y: f64) -> Option<f64> {
        self.layout.index_of(x, y).and_then(|i| self.values[i])
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().flatten().count()
    }

    pub fn mean_present(&self) -> Option<f64> {
        let n = self.present_count();
        (n > 0).then(|| self.values.iter().flatten().sum::<f64>() / n as f64)
    }

    pub fn to_raster(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(ABSENT)).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = RasterMeta::new(self.layout, ABSENT, &["value"]);
        write_raster_set(dir, &meta, &[&self.to_raster()])
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (meta, mut ch) = read_raster_set(dir)?;
        if meta.channels != ["value"] {
            return Err(Error::Parse { path: dir.to_path_buf(), message: "not a costmap raster".into() });
        }
        let values = ch.remove(0).into_iter().map(|v| (v >= 0.0).then_some(v)).collect();
        Self::new(meta.layout, values)
    }

    /// 8-bit gray plus alpha; 0 maps to black, 1 to white, absent cells are
    /// transparent. The top image row is the cell row with the largest y.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let (w, h) = (self.layout.width as u32, self.layout.height as u32);
        let img = ImageBuffer::from_fn(w, h, |x, y| {
            let row = (h - 1 - y) as usize;
            match self.get(row, x as usize) {
                Some(v) => LumaA([(v * 255.0).round() as u8, 255]),
                None => LumaA([0, 0]),
            }
        });
        img.save(path)?;
        Ok(())
    }
}

/// 100 × 100 grid map centered on the vehicle from a vehicle-frame cloud.
pub fn build_local_map(cloud: &SemanticPointCloud, params: &GeometryParams) -> Result<GridMap> {
    let cells = (LOCAL_EXTENT / params.resolution).round() as usize;
    let layout = GridLayout::centered([0.0, 0.0], params.resolution, cells)?;
    build_grid_map_with(cloud, 0.0, Some(layout), params)
}

/// Top-left cell of a patch; the patch covers the next 10 × 10 cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Footprint {
    pub row: usize,
    pub col: usize,
}

impl Footprint {
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..PATCH_CELLS).flat_map(move |i| (0..PATCH_CELLS).map(move |j| (self.row + i, self.col + j)))
    }
}

pub fn stride_cells(layout: &GridLayout, stride: f64) -> Result<usize> {
    let s = (stride / layout.resolution).round();
    if s < 1.0 || ((s * layout.resolution) - stride).abs() > 1e-9 {
        return Err(Error::invalid(format!("stride {stride} is not a whole number of cells")));
    }
    Ok(s as usize)
}

/// Lattice positions whose window fits in the layout, row-major.
pub fn lattice(layout: &GridLayout, stride_cells: usize) -> Vec<Footprint> {
    let span = |n: usize| if n >= PATCH_CELLS { (0..=n - PATCH_CELLS).step_by(stride_cells).collect() } else { Vec::new() };
    let cols: Vec<usize> = span(layout.width);
    span(layout.height).into_iter().flat_map(|row| cols.iter().map(move |&col| Footprint { row, col })).collect()
}

/// Patches on the sweep lattice that pass the occupancy threshold.
pub fn sweep_patches(map: &GridMap, stride: f64) -> Result<Vec<(Vec<f32>, Footprint)>> {
    let s = stride_cells(map.layout(), stride)?;
    Ok(lattice(map.layout(), s)
        .into_par_iter()
        .filter_map(|f| patch_at_cells(map, f.row, f.col).map(|p| (p, f)))
        .collect())
}

/// Per-cell mean of the covering patch values. Cells no patch covers and
/// cells unoccupied in `map` are absent.
pub fn aggregate(patch_costs: &[(f64, Footprint)], map: &GridMap) -> CostMap {
    let layout = *map.layout();
    let n = layout.len();
    let mut sum = vec![0.0; n];
    let mut count = vec![0u32; n];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (v, f) in patch_costs {
        for (r, c) in f.cells() {
            if r >= layout.height || c >= layout.width {
                continue;
            }
            let i = layout.index(r, c);
            sum[i] += v;
            count[i] += 1;
            lo[i] = lo[i].min(*v);
            hi[i] = hi[i].max(*v);
        }
    }
    let values = (0..n)
        .map(|i| (count[i] > 0 && map.is_occupied(i)).then(|| (sum[i] / count[i] as f64).clamp(lo[i], hi[i])))
        .collect();
    CostMap { layout, values }
}

/// Sets every present cell whose dominant class is in `classes` to 0.
pub fn apply_semantic_override(costmap: &CostMap, map: &GridMap, classes: &[u8]) -> CostMap {
    let mut out = costmap.clone();
    if classes.is_empty() {
        return out;
    }
    for (i, v) in out.values.iter_mut().enumerate() {
        if let (Some(_), Some(cell)) = (v.as_ref(), map.cells()[i].as_ref()) {
            if classes.contains(&cell.class_id) {
                *v = Some(0.0);
            }
        }
    }
    out
}

fn score(net: &Network, history: &[&[f64]]) -> Result<f64> {
    net.readout(history)
}

/// Stateless prediction: every patch starts from a cold buffer.
pub fn predict_costmap(net: &Network, map: &GridMap, speed: f64, yaw_rate: f64, untraversable: &[u8], stride: f64) -> Result<CostMap> {
    let velocity = velocity_features(speed, yaw_rate, &net.frequencies);
    let patches = sweep_patches(map, stride)?;
    let costs: Vec<(f64, Footprint)> = patches
        .par_iter()
        .map(|(p, f)| {
            let e = net.embed_step(p, &velocity)?;
            let history = vec![e.as_slice(); net.config.seq_len];
            Ok((score(net, &history)?, *f))
        })
        .collect::<Result<_>>()?;
    Ok(apply_semantic_override(&aggregate(&costs, map), map, untraversable))
}

/// Frame-by-frame costmap producer keeping the last `seq_len` embeddings
/// of every lattice position.
#[derive(Debug, Clone)]
pub struct CostmapEngine {
    net: Network,
    untraversable: Vec<u8>,
    geometry: GeometryParams,
    stride: f64,
    buffers: HashMap<Footprint, VecDeque<Vec<f64>>>,
}

impl CostmapEngine {
    pub fn new(net: Network, untraversable: Vec<u8>, geometry: GeometryParams) -> Self {
        Self { net, untraversable, geometry, stride: SWEEP_STRIDE, buffers: HashMap::new() }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn reset(&mut self) {
        self.buffers.clear();
    }

    /// Costmap for one vehicle-frame cloud and the current measured speed
    /// and yaw rate.
    pub fn step(&mut self, cloud: &SemanticPointCloud, speed: f64, yaw_rate: f64) -> Result<CostMap> {
        let map = build_local_map(cloud, &self.geometry)?;
        self.step_map(&map, speed, yaw_rate)
    }

    pub fn step_map(&mut self, map: &GridMap, speed: f64, yaw_rate: f64) -> Result<CostMap> {
        let velocity = velocity_features(speed, yaw_rate, &self.net.frequencies);
        let patches = sweep_patches(map, self.stride)?;
        let net = &self.net;
        let embeddings: Vec<Vec<f64>> = patches.par_iter().map(|(p, _)| net.embed_step(p, &velocity)).collect::<Result<_>>()?;
        let len = net.config.seq_len;
        let mut next = HashMap::with_capacity(patches.len());
        for ((_, f), e) in patches.iter().zip(embeddings) {
            let mut buf = self.buffers.remove(f).unwrap_or_default();
            if buf.is_empty() {
                buf.extend(std::iter::repeat_n(e, len));
            } else {
                buf.push_back(e);
                while buf.len() > len {
                    buf.pop_front();
                }
            }
            next.insert(*f, buf);
        }
        self.buffers = next;
        let costs: Vec<(f64, Footprint)> = patches
            .par_iter()
            .map(|(_, f)| {
                let history: Vec<&[f64]> = self.buffers[f].iter().map(Vec::as_slice).collect();
                Ok((score(&self.net, &history)?, *f))
            })
            .collect::<Result<_>>()?;
        Ok(apply_semantic_override(&aggregate(&costs, map), map, &self.untraversable))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CellFeatures, SemanticPoint};
    use proptest::prelude::*;

    fn cell(class_id: u8) -> CellFeatures {
        CellFeatures {
            class_id,
            point_count: 4,
            mean_height: 0.0,
            slope: 0.0,
            flatness: 0.0,
            height_diff: 0.0,
            normal: [0.0, 0.0, 1.0],
            normal_fallback: false,
        }
    }

    fn full_map() -> GridMap {
        let layout = GridLayout::centered([0.0, 0.0], 0.1, 100).unwrap();
        GridMap::from_cells(layout, 3, vec![Some(cell(0)); layout.len()]).unwrap()
    }

    #[test]
    fn full_map_has_2116_patches() {
        let patches = sweep_patches(&full_map(), 0.2).unwrap();
        assert_eq!(patches.len(), 46 * 46);
        // Lattice oracle: centers 0.5 m .. 9.5 m from the map corner.
        let centers: Vec<f64> = (0..46).map(|k| 0.5 + 0.2 * k as f64).collect();
        for (_, f) in &patches {
            let cx = (f.col as f64 + 5.0) * 0.1;
            assert!(centers.iter().any(|c| (c - cx).abs() < 1e-9));
        }
    }

    #[test]
    fn empty_map_has_no_patches() {
        let layout = GridLayout::centered([0.0, 0.0], 0.1, 100).unwrap();
        let map = GridMap::from_cells(layout, 3, vec![None; layout.len()]).unwrap();
        assert!(sweep_patches(&map, 0.2).unwrap().is_empty());
    }

    #[test]
    fn constant_patches_give_constant_map() {
        let map = full_map();
        let costs: Vec<(f64, Footprint)> = sweep_patches(&map, 0.2).unwrap().into_iter().map(|(_, f)| (0.7, f)).collect();
        let cm = aggregate(&costs, &map);
        assert_eq!(cm.present_count(), 10_000);
        assert!(cm.values().iter().all(|v| *v == Some(0.7)));
    }

    #[test]
    fn two_patch_average() {
        let map = full_map();
        let costs = [(0.2, Footprint { row: 0, col: 0 }), (0.6, Footprint { row: 0, col: 2 })];
        let cm = aggregate(&costs, &map);
        assert_eq!(cm.get(0, 5), Some(0.4));
        assert_eq!(cm.get(0, 0), Some(0.2));
        assert_eq!(cm.get(0, 11), Some(0.6));
        assert_eq!(cm.get(0, 12), None);
    }

    #[test]
    fn unoccupied_cells_are_absent() {
        let layout = GridLayout::centered([0.0, 0.0], 0.1, 100).unwrap();
        let mut cells = vec![Some(cell(0)); layout.len()];
        cells[layout.index(3, 3)] = None;
        let map = GridMap::from_cells(layout, 3, cells).unwrap();
        let costs: Vec<(f64, Footprint)> = sweep_patches(&map, 0.2).unwrap().into_iter().map(|(_, f)| (0.9, f)).collect();
        let cm = aggregate(&costs, &map);
        assert_eq!(cm.get(3, 3), None);
        assert_eq!(cm.get(3, 4), Some(0.9));
    }

    #[test]
    fn override_rules() {
        let layout = GridLayout::new([0.0, 0.0], 0.1, 3, 1).unwrap();
        let map = GridMap::from_cells(layout, 5, vec![Some(cell(4)), Some(cell(2)), None]).unwrap();
        let cm = CostMap::new(layout, vec![Some(0.8), Some(0.6), None]).unwrap();
        let out = apply_semantic_override(&cm, &map, &[4]);
        assert_eq!(out.values(), &[Some(0.0), Some(0.6), None]);
        assert_eq!(apply_semantic_override(&cm, &map, &[]), cm);
        assert_eq!(apply_semantic_override(&out, &map, &[4]), out);
    }

    #[test]
    fn local_map_is_100_by_100() {
        let pts: Vec<SemanticPoint> = (0..200)
            .flat_map(|i| (0..200).map(move |j| SemanticPoint::new(-5.0 + 0.05 * i as f64 + 0.025, -5.0 + 0.05 * j as f64 + 0.025, 0.0, 0)))
            .filter(|p| p.position[0] < 0.0)
            .collect();
        let cloud = SemanticPointCloud::new(pts, 3).unwrap();
        let map = build_local_map(&cloud, &GeometryParams::default()).unwrap();
        assert_eq!((map.layout().width, map.layout().height), (100, 100));
        // Nothing ahead of the vehicle.
        assert!(map.at(2.0, 0.0).is_none());
        assert!(map.cells().iter().flatten().all(|c| c.slope.abs() < 1e-9));
    }

    #[test]
    fn export_round_trip() {
        let layout = GridLayout::new([1.0, 2.0], 0.1, 4, 3).unwrap();
        let cm = CostMap::new(layout, vec![Some(0.0), Some(1.0), None, Some(0.25), None, Some(0.5), Some(0.75), Some(0.1), Some(0.2), None, Some(0.3), Some(0.4)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        cm.save(dir.path()).unwrap();
        assert_eq!(CostMap::load(dir.path()).unwrap(), cm);
        let png = dir.path().join("c.png");
        cm.save_png(&png).unwrap();
        let img = image::open(&png).unwrap().to_luma_alpha8();
        assert_eq!(img.get_pixel(1, 2).0, [255, 255]);
        assert_eq!(img.get_pixel(2, 2).0, [0, 0]);
    }

    proptest! {
        #[test]
        fn aggregate_within_covering_bounds(values in proptest::collection::vec(0.0..=1.0f64, 25)) {
            let layout = GridLayout::new([0.0, 0.0], 0.1, 18, 18).unwrap();
            let map = GridMap::from_cells(layout, 1, vec![Some(cell(0)); layout.len()]).unwrap();
            let feet = lattice(&layout, 2);
            prop_assert_eq!(feet.len(), 25);
            let costs: Vec<(f64, Footprint)> = values.iter().copied().zip(feet.iter().copied()).collect();
            let cm = aggregate(&costs, &map);
            for r in 0..18 {
                for c in 0..18 {
                    let covering: Vec<f64> = costs.iter().filter(|(_, f)| f.cells().any(|x| x == (r, c))).map(|(v, _)| *v).collect();
                    let v = cm.get(r, c).unwrap();
                    let lo = covering.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = covering.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(lo <= v && v <= hi);
                }
            }
        }
    }
}
