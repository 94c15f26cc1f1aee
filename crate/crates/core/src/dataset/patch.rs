use crate::geometry::{CellFeatures, GridMap};

/// Cells per patch side.
pub const PATCH_CELLS: usize = 10;
pub const PATCH_AREA: usize = PATCH_CELLS * PATCH_CELLS;
/// Patches with fewer occupied cells than this are not used.
pub const MIN_OCCUPIED: usize = PATCH_AREA / 2;

/// Geometric channels following the `K` one-hot class channels.
pub const GEOMETRIC_CHANNELS: [&str; 5] = ["slope", "flatness", "height_diff", "mean_height", "occupancy"];

pub fn channel_count(num_classes: u8) -> usize {
    num_classes as usize + GEOMETRIC_CHANNELS.len()
}

pub fn channel_names(num_classes: u8) -> Vec<String> {
    (0..num_classes)
        .map(|k| format!("class_{k}"))
        .chain(GEOMETRIC_CHANNELS.iter().map(|s| s.to_string()))
        .collect()
}

/// Channel-major `C × 10 × 10` tensor from a cell accessor, where `cell(i, j)`
/// returns the cell at patch row `i` (lateral axis) and column `j` (forward
/// axis). Heights are relative to the mean over occupied cells. Returns
/// `None` below the occupancy threshold.
pub fn assemble_patch<'a>(num_classes: u8, cell: impl Fn(usize, usize) -> Option<&'a CellFeatures>) -> Option<Vec<f32>> {
    let mut cells = [None; PATCH_AREA];
    let mut occupied = 0;
    let mut height_sum = 0.0;
    for i in 0..PATCH_CELLS {
        for j in 0..PATCH_CELLS {
            if let Some(c) = cell(i, j) {
                cells[i * PATCH_CELLS + j] = Some(c);
                occupied += 1;
                height_sum += c.mean_height;
            }
        }
    }
    if occupied < MIN_OCCUPIED {
        return None;
    }
    let mean_height = height_sum / occupied as f64;
    let k = num_classes as usize;
    let mut out = vec![0.0f32; channel_count(num_classes) * PATCH_AREA];
    for (p, c) in cells.iter().enumerate() {
        let Some(c) = c else { continue };
        out[c.class_id as usize * PATCH_AREA + p] = 1.0;
        let geo = [c.slope, c.flatness, c.height_diff, c.mean_height - mean_height, 1.0];
        for (g, v) in geo.iter().enumerate() {
            out[(k + g) * PATCH_AREA + p] = *v as f32;
        }
    }
    Some(out)
}

/// Patch centered at `center` with its forward axis along `yaw`, sampled
/// nearest-neighbor from `map`. `None` when any part of the 1 × 1 m window
/// falls outside the map or the window is under-occupied.
pub fn extract_patch(map: &GridMap, center: [f64; 2], yaw: f64) -> Option<Vec<f32>> {
    let layout = map.layout();
    let res = layout.resolution;
    let (s, c) = yaw.sin_cos();
    let to_world = |u: f64, v: f64| [center[0] + c * u - s * v, center[1] + s * u + c * v];
    let half = PATCH_CELLS as f64 * res / 2.0;
    let inside = |p: [f64; 2]| {
        let [w, h] = layout.extent();
        let (dx, dy) = (p[0] - layout.origin[0], p[1] - layout.origin[1]);
        (-1e-9..=w + 1e-9).contains(&dx) && (-1e-9..=h + 1e-9).contains(&dy)
    };
    if ![(-half, -half), (half, -half), (-half, half), (half, half)].into_iter().all(|(u, v)| inside(to_world(u, v))) {
        return None;
    }
    assemble_patch(map.num_classes(), |i, j| {
        let u = (j as f64 + 0.5) * res - half;
        let v = (i as f64 + 0.5) * res - half;
        let p = to_world(u, v);
        map.at(p[0], p[1])
    })
}

/// Patch over the axis-aligned block of cells starting at `(row, col)`.
pub fn patch_at_cells(map: &GridMap, row: usize, col: usize) -> Option<Vec<f32>> {
    let layout = map.layout();
    if row + PATCH_CELLS > layout.height || col + PATCH_CELLS > layout.width {
        return None;
    }
    assemble_patch(map.num_classes(), |i, j| map.cell(row + i, col + j))
}
