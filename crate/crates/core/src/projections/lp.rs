use std::cmp::Ordering;

use super::{ConstraintSet, BRACKET_PAD};
use crate::numkit::{bisect_bracket, vector, Scalar, DEFAULT_BISECT_MAX_ITER};
use crate::{Error, Result};

/// Lower end of the ℓ1 multiplier bracket, standing in for the open 0.
const L1_BRACKET_FLOOR: f64 = 1e-15;

#[inline]
fn clip<T: Scalar>(x: T, lo: T, hi: T) -> T {
    x.max(lo).min(hi)
}

/// Elementwise `min(max(a_i, lower_i), upper_i)`.
pub fn clip_box<T: Scalar>(a: &[T], lower: &[T], upper: &[T]) -> Vec<T> {
    a.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&x, (&lo, &hi))| clip(x, lo, hi))
        .collect()
}

/// ℓ∞ ball ∩ box: a clip to `[max(−ε, lower_i), min(ε, upper_i)]`.
pub fn project_linf_box<T: Scalar>(a: &[T], set: &ConstraintSet<T>) -> Result<Vec<T>> {
    set.check_input(a)?;
    let eps = set.eps();
    a.iter()
        .zip(set.lower().iter().zip(set.upper()))
        .enumerate()
        .map(|(i, (&x, (&lo, &hi)))| {
            let lo = lo.max(-eps);
            let hi = hi.min(eps);
            if lo > hi {
                Err(Error::EmptySet(i))
            } else {
                Ok(clip(x, lo, hi))
            }
        })
        .collect()
}

/// Runs a bisection on a decreasing residual `g` and returns the multiplier on
/// the feasible side (`g ≤ 0`).
fn feasible_multiplier<T, G>(g: G, lo: T, hi: T) -> Result<T>
where
    T: Scalar,
    G: Fn(T) -> T,
{
    if g(lo) <= T::zero() {
        return Ok(lo);
    }
    if g(hi) > T::zero() {
        // Rounding at the analytic upper end; every caller's residual is
        // negative far enough out, so walk the end outwards.
        let mut far = hi;
        let mut step = hi.abs().max(T::one());
        for _ in 0..64 {
            far = far + step;
            step = step + step;
            if g(far) <= T::zero() {
                break;
            }
        }
        return feasible_multiplier(g, lo, far);
    }
    let tol = T::epsilon() * hi.abs().max(T::one());
    let b = bisect_bracket(&g, lo, hi, tol, DEFAULT_BISECT_MAX_ITER)?;
    Ok(if b.f_hi <= T::zero() { b.hi } else { b.lo })
}

/// ℓ1 ball ∩ box. Outside the ball, soft-thresholds by `λ` and clips, with `λ`
/// the bisection root of `Σ|δ_i(λ)| = ε` on `(0, max|a_i| − ε/d]`.
pub fn project_l1_box<T: Scalar>(a: &[T], set: &ConstraintSet<T>) -> Result<Vec<T>> {
    set.check_input(a)?;
    let (lower, upper, eps) = (set.lower(), set.upper(), set.eps());
    let clipped = clip_box(a, lower, upper);
    if vector::norm1(&clipped) <= eps {
        return Ok(clipped);
    }

    let shrink = |lambda: T| -> Vec<T> {
        a.iter()
            .zip(lower.iter().zip(upper))
            .map(|(&x, (&lo, &hi))| {
                let mag = (x.abs() - lambda).max(T::zero());
                clip(if x >= T::zero() { mag } else { -mag }, lo, hi)
            })
            .collect()
    };
    let residual = |lambda: T| vector::norm1(&shrink(lambda)) - eps;

    let d = T::from_count(a.len());
    let lo = T::lit(L1_BRACKET_FLOOR);
    let hi = (vector::norm_inf(a) - eps / d + T::lit(BRACKET_PAD)).max(lo);
    let lambda = feasible_multiplier(residual, lo, hi)?;
    Ok(shrink(lambda))
}

/// ℓ2 ball ∩ box. Outside the ball, rescales by `1/(λ+1)` and clips, with `λ`
/// the bisection root of `Σδ_i(λ)² = ε²` on `(0, ‖a‖/ε − 1]`.
pub fn project_l2_box<T: Scalar>(a: &[T], set: &ConstraintSet<T>) -> Result<Vec<T>> {
    set.check_input(a)?;
    let (lower, upper, eps) = (set.lower(), set.upper(), set.eps());
    let clipped = clip_box(a, lower, upper);
    let eps_sq = eps * eps;
    if vector::dot(&clipped, &clipped) <= eps_sq {
        return Ok(clipped);
    }

    let shrink = |lambda: T| -> Vec<T> {
        let s = T::one() / (lambda + T::one());
        a.iter()
            .zip(lower.iter().zip(upper))
            .map(|(&x, (&lo, &hi))| clip(x * s, lo, hi))
            .collect()
    };
    let residual = |lambda: T| {
        let v = shrink(lambda);
        vector::dot(&v, &v) - eps_sq
    };

    let lo = T::zero();
    let hi = (vector::norm2(a) / eps - T::one() + T::lit(BRACKET_PAD)).max(lo);
    let lambda = feasible_multiplier(residual, lo, hi)?;
    Ok(shrink(lambda))
}

/// Distance-to-zero saving of keeping coordinate `i` after box clipping:
/// `sqrt(a_i² − (a_i − c_i)²)` written as `sqrt(2·a_i·c_i − c_i²)`.
fn l0_score<T: Scalar>(x: T, lo: T, hi: T) -> T {
    let two = T::lit(2.0);
    if x < lo {
        (two * x * lo - lo * lo).max(T::zero()).sqrt()
    } else if x > hi {
        (two * x * hi - hi * hi).max(T::zero()).sqrt()
    } else {
        x.abs()
    }
}

/// ℓ0 ball ∩ box: clip, then keep the `ε` coordinates with the largest
/// savings. Ties at the threshold go to the lowest indices.
pub fn project_l0_box<T: Scalar>(a: &[T], set: &ConstraintSet<T>) -> Result<Vec<T>> {
    set.check_input(a)?;
    let (lower, upper) = (set.lower(), set.upper());
    let clipped = clip_box(a, lower, upper);
    let keep = set.sparsity();
    if keep >= a.len() {
        return Ok(clipped);
    }

    let scores: Vec<T> = a
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&x, (&lo, &hi))| l0_score(x, lo, hi))
        .collect();
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .partial_cmp(&scores[i])
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });

    let mut out = vec![T::zero(); a.len()];
    for &i in &order[..keep] {
        out[i] = clipped[i];
    }
    Ok(out)
}
