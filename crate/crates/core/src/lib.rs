//! Numerical laboratory for Brownian-time processes.
//!
//! A Brownian-time process runs an outer Brownian motion `X^x` on the clock
//! `|B(t)|` of an independent inner Brownian motion. This crate simulates
//! these processes and their excursion variants, estimates their
//! functionals by Monte Carlo, evaluates the same functionals by quadrature
//! of the subordinated Gaussian semigroup, and checks the resulting fields
//! against the fourth-order initially perturbed PDEs they solve.
//!
//! | module          | contents                                                   |
//! |-----------------|------------------------------------------------------------|
//! | [`paths`]       | time grids, Brownian paths, reflection, excursions, kernel |
//! | [`processes`]   | BTP / kEBTP / EBTP values, clock scaling, Feynman–Kac weight |
//! | [`mc`]          | Monte Carlo estimators and the two-sample KS statistic     |
//! | [`semigroup`]   | Gauss–Hermite semigroup, half-normal quadrature, Picard    |
//! | [`pde`]         | PDE residuals, guarded Fourier-mode solves, initial limits |
//! | [`field`]       | registry of test functions with closed-form derivatives    |
//! | [`spacetime`]   | periodic grids, space-time fields, spectral operators      |

// Domain checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod mc;
pub mod paths;
pub mod pde;
pub mod processes;
pub mod quad;
pub mod rng;
pub mod semigroup;
pub mod spacetime;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use mc::{
    ks_critical_value, ks_two_sample, mc_feynman_kac, mc_theorem1, mc_theorem2, terminal_samples, McEstimate,
};
pub use paths::{
    excursion_decompose, heat_kernel, make_uniform_grid, reflect_path, sample_bm, sample_bm_at_times, ExcursionSet,
    SamplePath, TimeGrid,
};
pub use pde::{
    evaluate_route, initial_forcing, initial_limit_check, pde_residual, spectral_mode_amplitudes, spectral_mode_solve,
    InitialLimitReport, LimitCheckOptions, ModeTrajectory, PdeSpec, ResidualReport, Route, Theorem,
};
pub use processes::{btp_path_values, btp_terminal_sample, fk_weight, ClockSpec, Variant};
pub use rng::RngStream;
pub use semigroup::{
    commutation_check, halfnormal_exp_moment, picard_v, quad_u1, quad_u2, quad_u_fk, second_derivative_bound,
    semigroup_apply, PicardSolution, QuadratureRule,
};
pub use spacetime::{PeriodicGrid, SpaceTimeField, Spectral};
