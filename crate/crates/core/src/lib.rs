//! Simulation and numerical-optimization toolkit for intersection local times
//! of lattice random walks in the critical dimension.
//!
//! The numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the usual double-precision instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod experiments;
pub mod fft;
pub mod field;
pub mod green;
pub mod intersection;
pub mod isomorphism;
pub mod lattice;
pub mod rng;
pub mod scalar;
pub mod variational;
pub mod walk;

pub use error::{Error, Result};
pub use estimate::{clopper_pearson, MCEstimate, RunningStats};
pub use experiments::{
    confinement_lower_bound, critical_preset, default_q, exp_moment, green_convergence,
    large_deviation_preset, tail_probability, ConfinementEstimate, ExpMomentEstimate, GreenRow,
    Preset, TailEstimate,
};
pub use field::{lp_norm, norm_statistics, sample_field, FieldSample, NormStats};
pub use green::{build_kernel, green_infinite, heat_kernel_zero, Quadrature, SpectralKernel};
pub use intersection::{fold, lq_norm, milt, silt, IntersectionKind, IntersectionValue};
pub use isomorphism::{
    analytic_linear_check, lhs_estimate, rhs_estimate, IsoExperiment, LinearCheck, TestFunctional,
};
pub use lattice::{Geometry, Site, TorusShape};
pub use scalar::Real;
pub use variational::{
    rho1, rho1_critical_trend, rho2, sobolev_constant, SolverOptions, TrendRow,
    VariationalSolution,
};
pub use walk::{confined_sample, simulate_local_times, LocalTimeField, WalkConfig};

pub type WalkConfig64 = WalkConfig<f64>;
pub type LocalTimeField64 = LocalTimeField<f64>;
pub type SpectralKernel64 = SpectralKernel<f64>;
pub type FieldSample64 = FieldSample<f64>;
pub type VariationalSolution64 = VariationalSolution<f64>;
pub type SolverOptions64 = SolverOptions<f64>;
pub type TestFunctional64 = TestFunctional<f64>;

pub type WalkConfig32 = WalkConfig<f32>;
pub type LocalTimeField32 = LocalTimeField<f32>;
pub type SpectralKernel32 = SpectralKernel<f32>;
