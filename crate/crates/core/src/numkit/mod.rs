//! Numeric kernel shared by every other module: the [`Scalar`] bound, dense
//! vectors and matrices, a guarded bisection root finder, the Gram log-det
//! used by the diversity regulariser and a reproducible random stream.

mod bisect;
mod gram;
mod matrix;
mod rng;
pub mod vector;

pub use bisect::{bisect, bisect_bracket, Bracket, DEFAULT_BISECT_MAX_ITER, DEFAULT_BISECT_TOL};
pub use gram::{cholesky, logdet_gram, logdet_gram_grad, DEFAULT_GRAM_JITTER};
pub use matrix::DenseMatrix;
pub use rng::SeededRng;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the solvers are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the conversion is lossy to
    /// the point of failure, which cannot happen for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
