//! Grid maps built from semantic point clouds, with per-cell slope,
//! flatness and height difference.

pub mod cloud;
pub mod features;
pub mod grid;
pub mod octree;

pub use cloud::{SemanticPoint, SemanticPointCloud};
pub use features::{flatness, height_difference, pca_normal, slope, surface_normal};
pub use grid::{build_grid_map, build_grid_map_with, dominant_class, CellFeatures, GeometryParams, GridMap};
pub use octree::{Aabb, SpatialIndex};
