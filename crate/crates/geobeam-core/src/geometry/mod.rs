//! Charts, geodesic flow, simplicity verification, Fermi and polar normal
//! coordinates on transversal manifolds.

pub mod chart;
pub mod fermi;
pub mod geodesic;
pub mod polar;
pub mod simple;

pub use chart::{pt, validate_chart, Mat3, MetricChart, Pt};
pub use fermi::{fermi_coordinates, FermiFrame, FermiOptions};
pub use geodesic::{
    boundary_fan, integrate_geodesic, EntryClassification, GeodesicOptions, GeodesicPath,
    GeodesicSample,
};
pub use polar::{polar_normal_coords, PolarChart, PolarOptions};
pub use simple::{check_simple, SimplicityOptions, SimplicityReport};
