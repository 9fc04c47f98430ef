//! Min-max robust optimisation over multiple domains.
//!
//! The crate solves problems of the form
//!
//! ```text
//! minimize_{δ ∈ X} maximize_{w ∈ P}  Σ_i w_i F_i(δ) − (γ/2)‖w − 1/K‖²
//! ```
//!
//! where `X` is an ℓp ball intersected with a box and `P` is the probability
//! simplex. The pieces are:
//!
//! * [`numkit`]: dense linear algebra, bisection, log-det of Gram matrices and
//!   the seeded random stream used everywhere else.
//! * [`projections`]: exact Euclidean projections onto the simplex and onto
//!   ℓ0/ℓ1/ℓ2/ℓ∞ balls intersected with a box.
//! * [`models`]: a dense ReLU classifier with hand-written backpropagation, the
//!   C&W margin and cross-entropy losses, SGD and a text checkpoint format.
//! * [`transforms`]: differentiable image transforms with exact adjoints.
//! * [`attack`]: the alternating one-step PGD solver (APGD) plus loss-oracle
//!   adapters for ensemble, universal and transformation attacks.
//! * [`defense`]: alternating multi-step PGD (AMPGD) adversarial training with
//!   learned per-attack weights and an optional diversity regulariser.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, which is what the harness uses.

pub mod attack;
pub mod defense;
mod error;
pub mod models;
pub mod numkit;
pub mod oracle;
pub mod projections;
pub mod transforms;

pub use error::{Error, Result};
pub use numkit::Scalar;

pub use attack::{ApgdConfig, DeltaInit, SolverTrace, WeightMode};
pub use defense::{AtConfig, AtTrace, AttackType};
pub use models::{LabeledDataset, LossKind, MlpModel};
pub use numkit::{DenseMatrix, SeededRng};
pub use oracle::DomainLossOracle;
pub use projections::{ConstraintSet, Norm};
pub use transforms::{ImageTensor, TransformKind, TransformSpec};

/// Dense matrix over `f64`.
pub type Matrix = DenseMatrix<f64>;
/// ℓp-ball ∩ box constraint over `f64`.
pub type Constraint = ConstraintSet<f64>;
/// Dense ReLU classifier over `f64`.
pub type Mlp = MlpModel<f64>;
/// Labeled dataset over `f64`.
pub type Dataset = LabeledDataset<f64>;
/// Image tensor over `f64`.
pub type Image = ImageTensor<f64>;
/// Image transform over `f64`.
pub type Transform = TransformSpec<f64>;
/// APGD configuration over `f64`.
pub type Apgd = ApgdConfig<f64>;
/// APGD trace over `f64`.
pub type Trace = SolverTrace<f64>;
/// AMPGD configuration over `f64`.
pub type AdvTraining = AtConfig<f64>;
