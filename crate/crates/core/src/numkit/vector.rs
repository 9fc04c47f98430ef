//! Small helpers over slices. Vectors are plain `Vec<T>` / `&[T]`.

use super::Scalar;
use crate::{Error, Result};

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm1<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x.abs())
}

pub fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// Number of nonzero entries.
pub fn count_nonzero<T: Scalar>(a: &[T]) -> usize {
    a.iter().filter(|x| !x.is_zero()).count()
}

/// `a + s·b`
pub fn add_scaled<T: Scalar>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

/// `y += s·x` in place.
pub fn axpy<T: Scalar>(s: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + s * xi;
    }
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<T: Scalar>(s: T, a: &[T]) -> Vec<T> {
    a.iter().map(|&x| s * x).collect()
}

pub fn all_finite<T: Scalar>(a: &[T]) -> bool {
    a.iter().all(|x| x.is_finite())
}

pub fn ensure_finite<T: Scalar>(a: &[T], what: &str) -> Result<()> {
    if all_finite(a) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn ensure_len<T>(a: &[T], expected: usize) -> Result<()> {
    if a.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found: a.len() })
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<T: Scalar>(a: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in a.iter().enumerate().skip(1) {
        if x > a[best] {
            best = i;
        }
    }
    best
}

/// The vector with every entry equal to `1/k`.
pub fn uniform<T: Scalar>(k: usize) -> Vec<T> {
    vec![T::one() / T::from_count(k); k]
}
