pub mod config;
pub mod costmap;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod motion;
pub mod pipeline;
pub mod raster;
pub mod risk;
pub mod seeds;
pub mod world;

pub use error::{Error, Result};
