//! Exact Euclidean projections onto the probability simplex and onto
//! `X = {δ : ‖δ‖p ≤ ε, lower ≤ δ ≤ upper}` for `p ∈ {0, 1, 2, ∞}`.
//!
//! The box always contains the origin (`lower ≤ 0 ≤ upper`), which is what
//! makes the soft-threshold / rescale-then-clip forms exact for `p = 1, 2`.
//! The scalar multipliers are found by bisection on brackets widened by
//! [`BRACKET_PAD`].

mod lp;
mod simplex;

pub use lp::{clip_box, project_l0_box, project_l1_box, project_l2_box, project_linf_box};
pub use simplex::{project_simplex, Simplex, SIMPLEX_TOL};

use std::fmt;
use std::str::FromStr;

use crate::numkit::{vector, Scalar};
use crate::{Error, Result};

/// Padding applied on each side of a bisection bracket.
pub const BRACKET_PAD: f64 = 1e-12;

/// Tolerance used when validating an integer-valued ℓ0 radius.
const L0_INTEGER_TOL: f64 = 1e-9;

/// Norm order of a perturbation ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    L0,
    L1,
    L2,
    Linf,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L0 => "0",
            Norm::L1 => "1",
            Norm::L2 => "2",
            Norm::Linf => "inf",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "l0" => Ok(Norm::L0),
            "1" | "l1" => Ok(Norm::L1),
            "2" | "l2" => Ok(Norm::L2),
            "inf" | "linf" | "∞" => Ok(Norm::Linf),
            other => Err(Error::InvalidConstraint(format!("unknown norm '{other}'"))),
        }
    }
}

/// Feasible set `{δ : ‖δ‖p ≤ eps, lower ≤ δ ≤ upper}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet<T> {
    norm: Norm,
    eps: T,
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> ConstraintSet<T> {
    pub fn new(norm: Norm, eps: T, lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if !eps.is_finite() || !(eps > T::zero()) {
            return Err(Error::InvalidConstraint(format!("radius must be finite and positive, got {eps}")));
        }
        if norm == Norm::L0 {
            let rounded = eps.round();
            if (eps - rounded).abs() > T::lit(L0_INTEGER_TOL) || rounded < T::one() {
                return Err(Error::InvalidConstraint(format!(
                    "l0 radius must be an integer >= 1, got {eps}"
                )));
            }
        }
        if lower.is_empty() {
            return Err(Error::InvalidConstraint("box has zero dimensions".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidConstraint(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > T::zero() || hi < T::zero() {
                return Err(Error::InvalidConstraint(format!(
                    "box must satisfy lower <= 0 <= upper, coordinate {i} has [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { norm, eps, lower, upper })
    }

    /// Perturbation set around an input `x0 ∈ [0,1]^d`: the box keeps
    /// `x0 + δ` inside `[0,1]^d`.
    pub fn around_input(norm: Norm, eps: T, x0: &[T]) -> Result<Self> {
        let lower = x0.iter().map(|&x| -x).collect();
        let upper = x0.iter().map(|&x| T::one() - x).collect();
        Self::new(norm, eps, lower, upper)
    }

    /// Ball with the symmetric box `[-bound, bound]^d`.
    pub fn with_symmetric_box(norm: Norm, eps: T, dim: usize, bound: T) -> Result<Self> {
        Self::new(norm, eps, vec![-bound; dim], vec![bound; dim])
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Integer radius of an ℓ0 ball.
    pub fn sparsity(&self) -> usize {
        self.eps.round().to_usize().unwrap_or(0)
    }

    /// Norm of `delta` in this set's order (ℓ0 counts nonzeros).
    pub fn measure(&self, delta: &[T]) -> T {
        match self.norm {
            Norm::L0 => T::from_count(vector::count_nonzero(delta)),
            Norm::L1 => vector::norm1(delta),
            Norm::L2 => vector::norm2(delta),
            Norm::Linf => vector::norm_inf(delta),
        }
    }

    /// Membership with relative slack `rel_tol` on the norm and exact box.
    pub fn contains(&self, delta: &[T], rel_tol: T) -> bool {
        delta.len() == self.dim()
            && delta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
            && self.measure(delta) <= self.eps * (T::one() + rel_tol)
    }

    /// Euclidean projection of `a` onto the set.
    pub fn project(&self, a: &[T]) -> Result<Vec<T>> {
        match self.norm {
            Norm::L0 => project_l0_box(a, self),
            Norm::L1 => project_l1_box(a, self),
            Norm::L2 => project_l2_box(a, self),
            Norm::Linf => project_linf_box(a, self),
        }
    }

    fn check_input(&self, a: &[T]) -> Result<()> {
        vector::ensure_len(a, self.dim())?;
        vector::ensure_finite(a, "projection input")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_sets() {
        let ok = |n, e: f64| ConstraintSet::new(n, e, vec![-0.5, 0.0], vec![0.5, 1.0]);
        assert!(ok(Norm::L2, 1.0).is_ok());
        assert!(ok(Norm::L2, 0.0).is_err());
        assert!(ok(Norm::L1, f64::INFINITY).is_err());
        assert!(ok(Norm::L0, 1.5).is_err());
        assert!(ok(Norm::L0, 2.0 + 1e-12).is_ok());
        assert!(ConstraintSet::new(Norm::L2, 1.0, vec![0.1], vec![1.0]).is_err());
        assert!(ConstraintSet::new(Norm::L2, 1.0, vec![-0.1], vec![-0.05]).is_err());
        assert!(ConstraintSet::new(Norm::L2, 1.0, vec![-0.1], vec![0.1, 0.2]).is_err());
    }

    #[test]
    fn around_input_box() {
        let s = ConstraintSet::around_input(Norm::Linf, 0.2, &[0.0, 0.25, 1.0]).unwrap();
        assert_eq!(s.lower(), &[0.0, -0.25, -1.0]);
        assert_eq!(s.upper(), &[1.0, 0.75, 0.0]);
    }

    #[test]
    fn norm_parsing_round_trips() {
        for n in [Norm::L0, Norm::L1, Norm::L2, Norm::Linf] {
            assert_eq!(n.to_string().parse::<Norm>().unwrap(), n);
        }
        assert!("3".parse::<Norm>().is_err());
    }
}
