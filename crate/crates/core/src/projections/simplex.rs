use super::BRACKET_PAD;
use crate::numkit::{bisect_bracket, vector, Scalar, DEFAULT_BISECT_MAX_ITER};
use crate::{Error, Result};

/// Membership tolerance on `|Σw − 1|`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Probability simplex `{w : w ≥ 0, 1ᵀw = 1}` in `k` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Simplex {
    pub k: usize,
}

impl Simplex {
    pub fn new(k: usize) -> Self {
        Self { k }
    }

    pub fn contains<T: Scalar>(&self, w: &[T]) -> bool {
        let sum = w.iter().fold(T::zero(), |acc, &x| acc + x);
        w.len() == self.k
            && w.iter().all(|&x| x >= T::zero())
            && (sum - T::one()).abs() <= T::lit(SIMPLEX_TOL)
    }

    pub fn center<T: Scalar>(&self) -> Vec<T> {
        vector::uniform(self.k)
    }
}

/// Projection onto the probability simplex: `(b − μ1)_+` where `μ` solves
/// `1ᵀ(b − μ1)_+ = 1`.
///
/// `μ` is bracketed by `[min b − 1/K, max b − 1/K]` and found by bisection;
/// once the active set is known the threshold is recomputed in closed form
/// from it, which removes the bisection's last-bit error.
pub fn project_simplex<T: Scalar>(b: &[T]) -> Result<Vec<T>> {
    let k = b.len();
    if k == 0 {
        return Err(Error::InvalidArgument("simplex projection of an empty vector".into()));
    }
    vector::ensure_finite(b, "simplex projection input")?;
    if k == 1 {
        return Ok(vec![T::one()]);
    }

    // The projection commutes with shifts along 1; working relative to the
    // largest entry keeps the bracket resolvable when |b| is huge.
    let top = b.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let shifted: Vec<T> = b.iter().map(|&x| x - top).collect();
    let b = &shifted[..];
    let inv_k = T::one() / T::from_count(k);
    let pad = T::lit(BRACKET_PAD);
    let min_b = b.iter().fold(T::infinity(), |m, &x| m.min(x));
    let lo = min_b - inv_k - pad;
    let hi = -inv_k + pad;

    let excess = |mu: T| b.iter().fold(T::zero(), |acc, &x| acc + (x - mu).max(T::zero())) - T::one();
    let tol = T::epsilon() * hi.abs().max(lo.abs()).max(T::one());
    let bracket = bisect_bracket(excess, lo, hi, tol, DEFAULT_BISECT_MAX_ITER)?;
    let mut mu = bracket.midpoint();

    let (count, active_sum) = b
        .iter()
        .filter(|&&x| x > mu)
        .fold((0usize, T::zero()), |(n, s), &x| (n + 1, s + x));
    if count > 0 {
        let exact = (active_sum - T::one()) / T::from_count(count);
        let consistent = b.iter().all(|&x| (x > mu) == (x > exact));
        if consistent {
            mu = exact;
        }
    }
    Ok(b.iter().map(|&x| (x - mu).max(T::zero())).collect())
}
