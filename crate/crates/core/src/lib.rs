pub mod config;
pub mod diffusion;
pub mod error;
pub mod geom;
pub mod io;
pub mod metrics;
pub mod nnet;
pub mod field;
pub mod skeleton;

pub use error::{Error, Result};
pub use geom::{NormalizationTransform, Point3, PointCloud, SpatialIndex};
