//! Numerical core for inverse-boundary-problem machinery on transversally
//! anisotropic charts: geodesic ray transforms, Gaussian beam quasimodes,
//! WKB amplitudes, Carleman-inequality checks, boundary determination and
//! holonomy/gauge construction, at desk scale.

pub mod beam;
pub mod boundary;
pub mod carleman;
pub mod cgo;
pub mod dbar;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod grid;
pub mod holonomy;
pub mod par;
pub mod raytransform;

pub use error::{CoreError, Result};
pub use par::ExecMode;
