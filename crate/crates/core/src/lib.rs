//! Two-level emitter driven by an exponentially shaped pulse in an arbitrary
//! photon-number state.
//!
//! Each coherent branch of the pulse's P-function is a driven, damped Bloch
//! problem with an exact Bessel-function solution. Expanding that solution in
//! the drive intensity gives coefficients 𝒞_K(ζ) against which any photon
//! statistics can be averaged through its factorial moments.
//!
//! Time is measured as κt throughout and ζ = e^{−κt/2}.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod blochsim;
pub mod error;
mod ode;
pub mod photonstats;
pub mod quadrature;
pub mod series;

pub use analytic::{bessel_jy, nbar_no_dissipation, single_photon_exact, wbar_exact, FrobeniusParams};
pub use blochsim::{
    rotate_phase, solve_branch, solve_branch_with, solve_drive, BlochState, BranchAmplitude, SolverOptions,
    SystemConfig, TimeGrid, Trajectory,
};
pub use error::{Error, Result};
pub use photonstats::{
    coherence_orders, coherent_average, coherent_average_series, fock_average, mixture_average,
    mixture_average_by_fock, prominent_maxima, series_average, taylor_oracle, CoherenceOrders, Distribution,
    PhotonStatistics, PopulationCurve, StatisticsKind, TaylorEstimate,
};
pub use series::{build_table, coeff_c1, coeff_ck, phi, SeriesTable};
