//! Loss oracles: the per-domain `F_i(δ)` the min-max solvers operate on.

use crate::numkit::{vector, Scalar};
use crate::Result;

/// A differentiable per-domain loss `F(δ)`.
///
/// Solvers call [`begin_iteration`](Self::begin_iteration) once before they
/// evaluate an iterate; stochastic oracles redraw their Monte Carlo samples
/// there so the value and gradient of one iteration see the same samples.
pub trait DomainLossOracle<T: Scalar> {
    fn dim(&self) -> usize;

    fn value_and_grad(&self, delta: &[T]) -> Result<(T, Vec<T>)>;

    fn value(&self, delta: &[T]) -> Result<T> {
        Ok(self.value_and_grad(delta)?.0)
    }

    fn grad(&self, delta: &[T]) -> Result<Vec<T>> {
        Ok(self.value_and_grad(delta)?.1)
    }

    fn begin_iteration(&mut self, _iteration: usize) {}
}

impl<T: Scalar, O: DomainLossOracle<T> + ?Sized> DomainLossOracle<T> for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value_and_grad(&self, delta: &[T]) -> Result<(T, Vec<T>)> {
        (**self).value_and_grad(delta)
    }

    fn value(&self, delta: &[T]) -> Result<T> {
        (**self).value(delta)
    }

    fn grad(&self, delta: &[T]) -> Result<Vec<T>> {
        (**self).grad(delta)
    }

    fn begin_iteration(&mut self, iteration: usize) {
        (**self).begin_iteration(iteration)
    }
}

/// Oracle built from a pair of closures.
pub struct FnOracle<V, G> {
    dim: usize,
    value: V,
    grad: G,
}

impl<V, G> FnOracle<V, G> {
    pub fn new(dim: usize, value: V, grad: G) -> Self {
        Self { dim, value, grad }
    }
}

impl<T, V, G> DomainLossOracle<T> for FnOracle<V, G>
where
    T: Scalar,
    V: Fn(&[T]) -> T,
    G: Fn(&[T]) -> Vec<T>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_and_grad(&self, delta: &[T]) -> Result<(T, Vec<T>)> {
        vector::ensure_len(delta, self.dim)?;
        Ok(((self.value)(delta), (self.grad)(delta)))
    }
}

/// `½(δ − c)ᵀ A (δ − c) + offset` with a symmetric `A` given row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOracle<T> {
    pub hessian: Vec<T>,
    pub center: Vec<T>,
    pub offset: T,
}

impl<T: Scalar> QuadraticOracle<T> {
    pub fn isotropic(center: Vec<T>, curvature: T, offset: T) -> Self {
        let d = center.len();
        let mut hessian = vec![T::zero(); d * d];
        for i in 0..d {
            hessian[i * d + i] = curvature;
        }
        Self { hessian, center, offset }
    }
}

impl<T: Scalar> DomainLossOracle<T> for QuadraticOracle<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value_and_grad(&self, delta: &[T]) -> Result<(T, Vec<T>)> {
        let d = self.dim();
        vector::ensure_len(delta, d)?;
        let diff = vector::sub(delta, &self.center);
        let grad: Vec<T> = (0..d).map(|i| vector::dot(&self.hessian[i * d..(i + 1) * d], &diff)).collect();
        let value = T::lit(0.5) * vector::dot(&diff, &grad) + self.offset;
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_value_and_gradient() {
        let q = QuadraticOracle { hessian: vec![2.0, 0.0, 0.0, 4.0], center: vec![1.0, -1.0], offset: 0.5 };
        let (v, g) = q.value_and_grad(&[2.0, 0.0]).unwrap();
        assert_eq!(v, 0.5 * (2.0 + 4.0) + 0.5);
        assert_eq!(g, vec![2.0, 4.0]);
        assert!(q.value(&[1.0]).is_err());
    }

    #[test]
    fn boxed_oracles_forward() {
        let o: Box<dyn DomainLossOracle<f64>> =
            Box::new(FnOracle::new(1, |d: &[f64]| d[0] * d[0], |d: &[f64]| vec![2.0 * d[0]]));
        assert_eq!(o.value_and_grad(&[3.0]).unwrap(), (9.0, vec![6.0]));
    }
}
