//! Gaussian beam quasimodes: Riccati phase Hessians, dbar-transport
//! amplitudes, certified residual bounds and concentration limits.

pub mod concentration;
pub mod phase;
pub mod quasimode;
pub mod residual;
pub mod riccati;

pub use concentration::{
    geodesic_limit, slice_integral, slice_integral_grid, Pairing, SliceSplit,
};
pub use phase::{build_phase, BeamPhase};
pub use quasimode::{
    assemble_quasimode, normalization_f0, smooth_step, tube_cutoff, BeamKind, BeamOptions,
    BeamSegment, GaussianBeam,
};
pub use residual::{residual_bound, ResidualReport};
pub use riccati::{min_eig_sym, solve_riccati, CMat, RiccatiSolution};
