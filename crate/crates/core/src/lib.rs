//! Progressive blur estimation and coarse/fine radiance fields for
//! reconstructing sharp scenes from blurry photographs.

pub mod blur;
pub mod checkpoint;
pub mod encoding;
pub mod error;
pub mod field;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod mlp;
pub mod optim;
pub mod raster;
pub mod real;
pub mod renderer;
pub mod scenes;
pub mod tensor;
pub mod trainer;
pub mod vec3;
pub mod verify;

pub use error::{Error, Result};
pub use real::Real;
pub use vec3::{Mat3, Vec3};
