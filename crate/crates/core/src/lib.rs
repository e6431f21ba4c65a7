//! Steady states of a cooperative Lotka–Volterra system with
//! attractive-transition cross-diffusion on an interval:
//!
//! ```text
//! d1 u'' + α (v u' - u v')' + u (a1 - b1 u + c1 v) = 0
//! d2 v'' + β (u v' - v u')' + v (-a2 + b2 u - c2 v) = 0,   u' = v' = 0 at both ends.
//! ```
//!
//! The crate provides the closed-form bifurcation structure of the constant
//! state ([`spectral`]), a conservative discretization ([`mesh`]), Newton and
//! pseudo-arclength continuation ([`solver`], [`continuation`]), the scalar
//! limit reached as the flux strengths grow ([`limit`]) and a semi-implicit
//! time stepper ([`evolve`]).
//!
//! Every numerical routine is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.

pub mod continuation;
pub mod error;
pub mod evolve;
pub mod io;
pub mod limit;
pub mod mesh;
pub mod model;
pub mod scalar;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ModelParams = model::ModelParams<f64>;
pub type ModelParamsF32 = model::ModelParams<f32>;
pub type ConstantState = model::ConstantState<f64>;
pub type ModeData = spectral::ModeData<f64>;
pub type ModeSet = spectral::ModeSet<f64>;
pub type FluxRatio = spectral::FluxRatio<f64>;
pub type LimitCoefficients = spectral::LimitCoefficients<f64>;
pub type Grid = mesh::Grid<f64>;
pub type GridF32 = mesh::Grid<f32>;
pub type StateVector = mesh::StateVector<f64>;
pub type Norms = mesh::Norms<f64>;
pub type BandedMatrix = solver::BandedMatrix<f64>;
pub type NewtonOptions = solver::NewtonOptions<f64>;
pub type NewtonReport = solver::NewtonReport<f64>;
pub type BranchPoint = continuation::BranchPoint<f64>;
pub type Branch = continuation::Branch<f64>;
pub type StepControls = continuation::StepControls<f64>;
pub type ScalarBranch = limit::ScalarBranch<f64>;
pub type EvolutionRun = evolve::EvolutionRun<f64>;
