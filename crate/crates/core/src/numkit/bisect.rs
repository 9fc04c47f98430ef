use super::Scalar;
use crate::{Error, Result};

pub const DEFAULT_BISECT_TOL: f64 = 1e-10;
pub const DEFAULT_BISECT_MAX_ITER: usize = 200;

/// Final bracket of a bisection run. `f_lo` and `f_hi` keep the signs of the
/// initial endpoints, so callers can pick the side they need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket<T> {
    pub lo: T,
    pub hi: T,
    pub f_lo: T,
    pub f_hi: T,
}

impl<T: Scalar> Bracket<T> {
    pub fn midpoint(&self) -> T {
        self.lo + (self.hi - self.lo) / T::lit(2.0)
    }

    fn collapsed(x: T, fx: T) -> Self {
        Self { lo: x, hi: x, f_lo: fx, f_hi: fx }
    }
}

fn eval<T: Scalar, F: FnMut(T) -> T>(f: &mut F, x: T) -> Result<T> {
    let v = f(x);
    if v.is_nan() {
        return Err(Error::NonFinite(format!("bisection function returned NaN at {x}")));
    }
    Ok(v)
}

fn check_args<T: Scalar>(lo: T, hi: T, tol: T) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonFinite(format!("bisection bracket [{lo}, {hi}]")));
    }
    if lo > hi {
        return Err(Error::InvalidArgument(format!("bisection bracket reversed: [{lo}, {hi}]")));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument(format!("bisection tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Shrinks `[lo, hi]` around a sign change of `f` until it is narrower than
/// `tol`, stops making progress, or `max_iter` halvings have been spent.
///
/// Unlike [`bisect`] this never stops early on a small `|f|`, which is what
/// the projections need: their residuals live on very different scales.
pub fn bisect_bracket<T, F>(mut f: F, lo: T, hi: T, tol: T, max_iter: usize) -> Result<Bracket<T>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    check_args(lo, hi, tol)?;
    let f_lo = eval(&mut f, lo)?;
    if f_lo == T::zero() {
        return Ok(Bracket::collapsed(lo, f_lo));
    }
    let f_hi = eval(&mut f, hi)?;
    if f_hi == T::zero() {
        return Ok(Bracket::collapsed(hi, f_hi));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { f_lo: f_lo.as_f64(), f_hi: f_hi.as_f64() });
    }

    let mut b = Bracket { lo, hi, f_lo, f_hi };
    for _ in 0..max_iter {
        if b.hi - b.lo < tol {
            break;
        }
        let mid = b.midpoint();
        if mid <= b.lo || mid >= b.hi {
            break;
        }
        let fm = eval(&mut f, mid)?;
        if fm == T::zero() {
            return Ok(Bracket::collapsed(mid, fm));
        }
        if fm.signum() == b.f_lo.signum() {
            b.lo = mid;
            b.f_lo = fm;
        } else {
            b.hi = mid;
            b.f_hi = fm;
        }
    }
    Ok(b)
}

/// Root of a monotone scalar function bracketed by `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` or `|f(μ)| ≤ tol`. The result
/// always lies inside the initial bracket.
pub fn bisect<T, F>(mut f: F, lo: T, hi: T, tol: T, max_iter: usize) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    check_args(lo, hi, tol)?;
    let mut f_lo = eval(&mut f, lo)?;
    if f_lo == T::zero() {
        return Ok(lo);
    }
    let f_hi = eval(&mut f, hi)?;
    if f_hi == T::zero() {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { f_lo: f_lo.as_f64(), f_hi: f_hi.as_f64() });
    }

    let (mut lo, mut hi) = (lo, hi);
    let mut mid = lo + (hi - lo) / T::lit(2.0);
    for _ in 0..max_iter {
        mid = lo + (hi - lo) / T::lit(2.0);
        let fm = eval(&mut f, mid)?;
        if fm.abs() <= tol || hi - lo < tol {
            break;
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_root() {
        let r = bisect(|x: f64| x - 2.0, 0.0, 10.0, 1e-12, 200).unwrap();
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-11);
    }

    #[test]
    fn symmetric_root_at_origin() {
        let r = bisect(|x: f64| x, -1.0, 1.0, 1e-12, 200).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn piecewise_linear_simplex_equation() {
        // Σ (b_i − x)_+ = 1 with b = (0.52, 0.50); both terms active at the root.
        let b = [0.52, 0.50];
        let f = |x: f64| b.iter().map(|&bi| (bi - x).max(0.0)).sum::<f64>() - 1.0;
        let lo = 0.50 - 0.5;
        let hi = 0.52 - 0.5;
        let r = bisect(f, lo, hi, 1e-12, 200).unwrap();
        assert_abs_diff_eq!(r, 0.01, epsilon = 1e-11);
    }

    #[test]
    fn endpoint_root_is_returned() {
        assert_eq!(bisect(|x: f64| x - 1.0, 1.0, 3.0, 1e-9, 50).unwrap(), 1.0);
        assert_eq!(bisect(|x: f64| x - 3.0, 1.0, 3.0, 1e-9, 50).unwrap(), 3.0);
    }

    #[test]
    fn same_sign_is_rejected() {
        let err = bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-9, 50).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn nan_is_rejected() {
        let err = bisect(|x: f64| if x > 0.3 { f64::NAN } else { x - 0.5 }, 0.0, 1.0, 1e-9, 50)
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn bracket_keeps_endpoint_signs() {
        let b = bisect_bracket(|x: f64| 1.0 - x * x, 0.0, 3.0, 1e-14, 200).unwrap();
        assert!(b.f_lo > 0.0 && b.f_hi < 0.0);
        assert!(b.hi - b.lo < 1e-14);
        assert_abs_diff_eq!(b.midpoint(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn works_in_single_precision() {
        let r = bisect(|x: f32| x - 0.25, 0.0, 1.0, 1e-6, 200).unwrap();
        assert!((r - 0.25).abs() < 1e-6);
    }

    proptest::proptest! {
        #[test]
        fn result_stays_in_bracket(root in -5.0f64..5.0, lo_off in 0.0f64..3.0, hi_off in 0.0f64..3.0,
                                   slope in 0.1f64..10.0) {
            let lo = root - lo_off;
            let hi = root + hi_off;
            proptest::prop_assume!(lo < hi);
            let r = bisect(|x: f64| slope * (x - root), lo, hi, 1e-10, 200).unwrap();
            proptest::prop_assert!(r >= lo && r <= hi);
        }
    }
}
