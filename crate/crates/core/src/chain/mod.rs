//! Finite-state continuous-time Markov chains: validation, stationary law,
//! Dirichlet form, Green and resolvent solves, spectral gap and sector
//! constant.
//!
//! All inner products are `pi`-weighted. The form convention is
//! `E(u, v) = (-Q u, v)_pi = v^T diag(pi) (-Q) u`, so that `E(Gf, v) = (f, v)_pi`.

mod discretize;
mod form;
mod green;
mod model;
mod spectral;
mod stationary;

pub use discretize::{from_reversible_diffusion_2d, DiagonalDiffusion, GridSpec2d};
pub use form::{
    detailed_balance_defect, dirichlet_form, dual_generator, is_reversible, FormDecomposition,
};
pub(crate) use green::check_centered;
pub use green::{
    asymptotic_variance_exact, green_solve, resolvent_solve, GreenSolver, Observable, CENTER_TOL,
};
pub use model::{
    validate_model, validate_model_with_tol, CtmcModel, ModelFile, DEFAULT_ROW_SUM_TOL,
};
pub use spectral::{
    sector_constant, sector_constant_of, spectral_gap, SectorReport, SpectralReport, REVERSIBLE_TOL,
};
pub use stationary::{stationary_distribution, StationaryDistribution};
