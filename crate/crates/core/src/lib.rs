//! Minimizing closed geodesics on model surfaces: distance and cut-point
//! analysis, the uniform energy on k-tuples, 1/k-geodesic classification
//! and the oblate ellipsoid sweep.

pub mod distance;
pub mod energy;
pub mod error;
pub mod export;
pub mod geodesic;
pub mod classify;
pub(crate) mod ode;
pub(crate) mod polygon;
pub mod surfaces;
pub mod sweep;

pub use error::{Error, Result};
pub use nalgebra::Vector2;
pub use surfaces::{Sheet, SurfaceModel, SurfacePoint, TangentVector};
