//! Orientation-adaptive anisotropic denoising.
//!
//! The model couples a grey-scale image `u` with an orientation field `α`
//! through the energy
//!
//! ```text
//! E(α, u) = κ/2 ∫|∇α|² + ν/p ∫|∇u|^p + ∫γ(R(α)∇u) + λ/2 ∫|u − u_org|²
//! ```
//!
//! and advances `u` by an implicit pseudo-parabolic time step: every step
//! minimizes `E` plus the penalty `1/(2τ)|u − ū|² + μ/(2τ)|∇(u − ū)|²` around
//! the previous image `ū`. The orientation at time zero is computed from the
//! initial image, not supplied.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the CLI uses.

pub mod anisotropy;
pub mod cli;
pub mod energy;
pub mod error;
pub mod grid;
pub mod instances;
pub mod io;
pub mod scalar;
pub mod selftest;
pub mod solver;
pub mod spectral;
pub mod theory;

pub use anisotropy::{Anisotropy, Family};
pub use energy::{EnergyBreakdown, ModelParams, StepData};
pub use error::{Error, Result};
pub use grid::{GridSpec, ScalarField, VectorField};
pub use scalar::Real;
pub use solver::{SolveConfig, StepReport, Trajectory};
pub use theory::{ConditionReport, EmbeddingConstants, JTrace};

pub type Grid = GridSpec<f64>;
pub type Field = ScalarField<f64>;
pub type VecField = VectorField<f64>;
pub type Aniso = Anisotropy<f64>;
pub type Params = ModelParams<f64>;
pub type Config = SolveConfig<f64>;
pub type Traj = Trajectory<f64>;

pub type Grid32 = GridSpec<f32>;
pub type Field32 = ScalarField<f32>;
