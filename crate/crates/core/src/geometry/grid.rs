use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cloud::SemanticPointCloud;
use super::features::{flatness, height_difference, slope, surface_normal};
use super::octree::SpatialIndex;
use crate::error::{Error, Result};
use crate::raster::{read_raster_set, write_raster_set, GridLayout, RasterMeta};

pub const DEFAULT_RESOLUTION: f64 = 0.1;
pub const OVERHEAD_CLEARANCE: f64 = 2.0;
pub const NORMAL_WINDOW: f64 = 0.5;

const NODATA: f64 = -9999.0;
const GRID_CHANNELS: [&str; 11] = [
    "occupied",
    "class",
    "point_count",
    "mean_height",
    "slope",
    "flatness",
    "height_diff",
    "normal_x",
    "normal_y",
    "normal_z",
    "normal_fallback",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryParams {
    pub resolution: f64,
    /// Points higher than this above the vehicle are dropped.
    pub overhead_clearance: f64,
    /// Side length of the square PCA neighborhood.
    pub normal_window: f64,
    pub leaf_capacity: usize,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            overhead_clearance: OVERHEAD_CLEARANCE,
            normal_window: NORMAL_WINDOW,
            leaf_capacity: 32,
        }
    }
}

impl GeometryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::Config(format!("geometry.resolution must be > 0, got {}", self.resolution)));
        }
        if !(self.normal_window > 0.0) || !(self.overhead_clearance >= 0.0) {
            return Err(Error::Config("geometry windows must be positive".into()));
        }
        if self.leaf_capacity == 0 {
            return Err(Error::Config("geometry.leaf_capacity must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFeatures {
    pub class_id: u8,
    pub point_count: u32,
    pub mean_height: f64,
    pub slope: f64,
    pub flatness: f64,
    pub height_diff: f64,
    pub normal: [f64; 3],
    /// PCA failed and the normal fell back to vertical.
    pub normal_fallback: bool,
}

/// Robot- or world-centric raster of semantic and geometric terrain
/// features. Unoccupied cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    layout: GridLayout,
    num_classes: u8,
    cells: Vec<Option<CellFeatures>>,
}

impl GridMap {
    pub fn from_cells(layout: GridLayout, num_classes: u8, cells: Vec<Option<CellFeatures>>) -> Result<Self> {
        if cells.len() != layout.len() {
            return Err(Error::Shape(format!("{} cells for a {}-cell layout", cells.len(), layout.len())));
        }
        Ok(Self { layout, num_classes, cells })
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn cells(&self) -> &[Option<CellFeatures>] {
        &self.cells
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&CellFeatures> {
        self.cells[self.layout.index(row, col)].as_ref()
    }

    pub fn at(&self, x: f64, y: f64) -> Option<&CellFeatures> {
        self.layout.index_of(x, y).and_then(|i| self.cells[i].as_ref())
    }

    pub fn is_occupied(&self, index: usize) -> bool {
        self.cells[index].is_some()
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let n = self.layout.len();
        let mut channels = vec![vec![NODATA; n]; GRID_CHANNELS.len()];
        for (i, cell) in self.cells.iter().enumerate() {
            channels[0][i] = cell.is_some() as u8 as f64;
            if let Some(c) = cell {
                channels[1][i] = c.class_id as f64;
                channels[2][i] = c.point_count as f64;
                channels[3][i] = c.mean_height;
                channels[4][i] = c.slope;
                channels[5][i] = c.flatness;
                channels[6][i] = c.height_diff;
                channels[7][i] = c.normal[0];
                channels[8][i] = c.normal[1];
                channels[9][i] = c.normal[2];
                channels[10][i] = c.normal_fallback as u8 as f64;
            }
        }
        let meta = RasterMeta::new(self.layout, NODATA, &GRID_CHANNELS);
        let refs: Vec<&[f64]> = channels.iter().map(|c| c.as_slice()).collect();
        write_raster_set(dir, &meta, &refs)?;
        std::fs::write(dir.join("classes.txt"), format!("{}\n", self.num_classes))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (meta, ch) = read_raster_set(dir)?;
        if meta.channels != GRID_CHANNELS {
            return Err(Error::Parse { path: dir.to_path_buf(), message: "not a grid map raster set".into() });
        }
        let num_classes: u8 = std::fs::read_to_string(dir.join("classes.txt"))?
            .trim()
            .parse()
            .map_err(|_| Error::Parse { path: dir.join("classes.txt"), message: "bad class count".into() })?;
        let cells = (0..meta.layout.len())
            .map(|i| {
                (ch[0][i] != 0.0).then(|| CellFeatures {
                    class_id: ch[1][i] as u8,
                    point_count: ch[2][i] as u32,
                    mean_height: ch[3][i],
                    slope: ch[4][i],
                    flatness: ch[5][i],
                    height_diff: ch[6][i],
                    normal: [ch[7][i], ch[8][i], ch[9][i]],
                    normal_fallback: ch[10][i] != 0.0,
                })
            })
            .collect();
        Self::from_cells(meta.layout, num_classes, cells)
    }
}

/// Modal class; ties go to the lowest class id.
pub fn dominant_class(classes: impl IntoIterator<Item = u8>, num_classes: u8) -> u8 {
    let mut counts = vec![0usize; num_classes.max(1) as usize];
    for c in classes {
        counts[c as usize] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u8
}

/// Builds a grid map whose extent is the bounding box of the retained
/// points, snapped to the resolution.
pub fn build_grid_map(cloud: &SemanticPointCloud, vehicle_z: f64, resolution: f64) -> Result<GridMap> {
    let params = GeometryParams { resolution, ..GeometryParams::default() };
    build_grid_map_with(cloud, vehicle_z, None, &params)
}

/// Builds a grid map over `layout` (or the data extent when `None`). Points
/// more than `overhead_clearance` above `vehicle_z` are discarded; points
/// outside a fixed layout still take part in normal estimation.
pub fn build_grid_map_with(
    cloud: &SemanticPointCloud,
    vehicle_z: f64,
    layout: Option<GridLayout>,
    params: &GeometryParams,
) -> Result<GridMap> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(Error::invalid("point cloud is empty"));
    }
    let ceiling = vehicle_z + params.overhead_clearance;
    let kept: Vec<usize> = (0..cloud.len()).filter(|&i| cloud.points()[i].z() <= ceiling).collect();
    if kept.is_empty() {
        return Err(Error::NoGroundPoints);
    }
    let points = cloud.points();

    let layout = match layout {
        Some(l) => l,
        None => {
            let res = params.resolution;
            let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &i in &kept {
                let [x, y, _] = points[i].position;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
            let origin = [(x0 / res).floor() * res, (y0 / res).floor() * res];
            let width = ((x1 - origin[0]) / res).floor() as usize + 1;
            let height = ((y1 - origin[1]) / res).floor() as usize + 1;
            GridLayout::new(origin, res, width, height)?
        }
    };

    // Bucket retained points by cell.
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); layout.len()];
    for (k, &i) in kept.iter().enumerate() {
        let [x, y, _] = points[i].position;
        if let Some(idx) = layout.index_of(x, y) {
            buckets[idx].push(k as u32);
        }
    }
    let positions: Vec<[f64; 3]> = kept.iter().map(|&i| points[i].position).collect();
    let index = SpatialIndex::build(&positions, params.leaf_capacity);
    let num_classes = cloud.num_classes();

    let cells: Vec<Option<CellFeatures>> = buckets
        .par_iter()
        .enumerate()
        .map(|(idx, members)| {
            if members.is_empty() {
                return Ok(None);
            }
            let (row, col) = layout.row_col(idx);
            let cell_pts: Vec<[f64; 3]> = members.iter().map(|&k| positions[k as usize]).collect();
            let class_id = dominant_class(members.iter().map(|&k| points[kept[k as usize]].class_id), num_classes);
            let mean_height = cell_pts.iter().map(|p| p[2]).sum::<f64>() / cell_pts.len() as f64;
            let (normal, normal_fallback) = match surface_normal(&index, layout.cell_center(row, col), params.normal_window) {
                Ok(n) => (n, false),
                Err(Error::DegenerateNeighborhood { .. }) => ([0.0, 0.0, 1.0], true),
                Err(e) => return Err(e),
            };
            Ok(Some(CellFeatures {
                class_id,
                point_count: cell_pts.len() as u32,
                mean_height,
                slope: slope(normal)?,
                flatness: flatness(&cell_pts, normal)?,
                height_diff: height_difference(&cell_pts, normal)?,
                normal,
                normal_fallback,
            }))
        })
        .collect::<Result<_>>()?;

    GridMap::from_cells(layout, num_classes, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cloud::SemanticPoint;

    fn cloud(points: Vec<SemanticPoint>) -> SemanticPointCloud {
        SemanticPointCloud::new(points, 8).unwrap()
    }

    #[test]
    fn single_point_single_cell() {
        let map = build_grid_map(&cloud(vec![SemanticPoint::new(0.05, 0.05, 0.0, 3)]), 0.0, 0.1).unwrap();
        assert_eq!((map.layout().width, map.layout().height), (1, 1));
        assert_eq!(map.occupied_count(), 1);
        let c = map.cell(0, 0).unwrap();
        assert_eq!((c.class_id, c.point_count), (3, 1));
        assert!(c.normal_fallback);
        assert_eq!(c.slope, 0.0);
    }

    #[test]
    fn overhead_points_are_excluded() {
        let pts = vec![SemanticPoint::new(0.05, 0.05, 0.0, 1), SemanticPoint::new(0.55, 0.05, 2.5, 2)];
        let map = build_grid_map(&cloud(pts), 0.0, 0.1).unwrap();
        assert_eq!(map.occupied_count(), 1);
        assert_eq!(map.layout().width, 1);

        let only_high = cloud(vec![SemanticPoint::new(0.0, 0.0, 2.5, 1)]);
        assert!(matches!(build_grid_map(&only_high, 0.0, 0.1), Err(Error::NoGroundPoints)));
        // The cutoff is relative to the vehicle.
        assert!(build_grid_map(&only_high, 1.0, 0.1).is_ok());
    }

    #[test]
    fn dominant_class_by_mode_with_low_tie_break() {
        let pts = [1u8, 1, 2, 3]
            .iter()
            .enumerate()
            .map(|(i, &c)| SemanticPoint::new(0.01 + 0.02 * i as f64, 0.05, 0.0, c))
            .collect();
        let map = build_grid_map(&cloud(pts), 0.0, 0.1).unwrap();
        assert_eq!(map.cell(0, 0).unwrap().class_id, 1);
        assert_eq!(dominant_class([4, 2, 4, 2], 8), 2);
    }

    #[test]
    fn plane_cells_have_zero_slope_and_every_point_is_binned() {
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                pts.push(SemanticPoint::new(0.025 + 0.05 * i as f64, 0.025 + 0.05 * j as f64, 0.3, 0));
            }
        }
        let map = build_grid_map(&cloud(pts), 0.0, 0.1).unwrap();
        assert_eq!(map.occupied_count(), 400);
        let total: u32 = map.cells().iter().flatten().map(|c| c.point_count).sum();
        assert_eq!(total, 1600);
        for c in map.cells().iter().flatten() {
            assert!(c.slope < 1e-6);
            assert!(c.flatness < 1e-12);
        }
    }

    #[test]
    fn grid_map_save_load_round_trip() {
        let pts: Vec<SemanticPoint> = (0..200)
            .map(|i| {
                let x = (i % 20) as f64 * 0.05;
                let y = (i / 20) as f64 * 0.05;
                SemanticPoint::new(x, y, 0.1 * x + 0.01 * ((i * 7) % 5) as f64, (i % 3) as u8)
            })
            .collect();
        let map = build_grid_map(&cloud(pts), 0.0, 0.1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        map.save(dir.path()).unwrap();
        assert_eq!(GridMap::load(dir.path()).unwrap(), map);
    }
}
