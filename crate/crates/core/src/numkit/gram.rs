use super::{DenseMatrix, Scalar};
use crate::{Error, Result};

/// Default diagonal jitter added to Gram matrices, so identical columns give a
/// finite (very negative) log-determinant instead of −∞.
pub const DEFAULT_GRAM_JITTER: f64 = 1e-12;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.cols() });
    }
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag = diag - l[(j, k)] * l[(j, k)];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: diag.as_f64() });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

fn jittered_gram<T: Scalar>(g: &DenseMatrix<T>, jitter: T) -> Result<DenseMatrix<T>> {
    if g.rows() < g.cols() {
        return Err(Error::InvalidArgument(format!(
            "Gram log-det needs rows >= cols, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    if jitter < T::zero() {
        return Err(Error::InvalidArgument(format!("jitter must be non-negative, got {jitter}")));
    }
    let mut gram = g.gram();
    for i in 0..gram.rows() {
        gram[(i, i)] = gram[(i, i)] + jitter;
    }
    Ok(gram)
}

/// `log det(GᵀG + jitter·I)` through the Cholesky factor of the K×K Gram.
pub fn logdet_gram<T: Scalar>(g: &DenseMatrix<T>, jitter: T) -> Result<T> {
    let l = cholesky(&jittered_gram(g, jitter)?)?;
    let two = T::lit(2.0);
    Ok((0..l.rows()).fold(T::zero(), |acc, i| acc + two * l[(i, i)].ln()))
}

/// Gradient of [`logdet_gram`] with respect to `G`: `2·G·(GᵀG + jitter·I)⁻¹`.
pub fn logdet_gram_grad<T: Scalar>(g: &DenseMatrix<T>, jitter: T) -> Result<DenseMatrix<T>> {
    let k = g.cols();
    let l = cholesky(&jittered_gram(g, jitter)?)?;
    let mut inv = DenseMatrix::zeros(k, k);
    for c in 0..k {
        // Solve L Lᵀ x = e_c.
        let mut y = vec![T::zero(); k];
        for i in 0..k {
            let mut s = if i == c { T::one() } else { T::zero() };
            for j in 0..i {
                s = s - l[(i, j)] * y[j];
            }
            y[i] = s / l[(i, i)];
        }
        let mut x = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut s = y[i];
            for j in (i + 1)..k {
                s = s - l[(j, i)] * x[j];
            }
            x[i] = s / l[(i, i)];
        }
        for i in 0..k {
            inv[(i, c)] = x[i];
        }
    }
    let mut grad = g.matmul(&inv)?;
    let two = T::lit(2.0);
    for v in grad.as_mut_slice() {
        *v = two * *v;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::SeededRng;
    use approx::assert_abs_diff_eq;

    fn identity_columns(d: usize, k: usize) -> DenseMatrix<f64> {
        DenseMatrix::from_fn(d, k, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn orthonormal_columns_have_zero_logdet() {
        assert_abs_diff_eq!(logdet_gram(&identity_columns(5, 3), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn duplicate_columns_are_finite_and_very_negative() {
        let g = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let v: f64 = logdet_gram(&g, 1e-12).unwrap();
        assert!(v.is_finite());
        // det = 2j + j² for jitter j.
        assert!((v - (2e-12f64).ln()).abs() < 1e-2, "{v}");
        assert!(logdet_gram(&g, 0.0).is_err());
    }

    #[test]
    fn sixty_degree_pair() {
        let t = 60f64.to_radians();
        let g = DenseMatrix::from_columns(&[vec![1.0, 0.0, 0.0], vec![t.cos(), t.sin(), 0.0]]).unwrap();
        assert_abs_diff_eq!(logdet_gram(&g, 0.0).unwrap(), 0.75f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn gradient_closed_forms() {
        let g = identity_columns(4, 2);
        let grad = logdet_gram_grad(&g, 0.0).unwrap();
        for (a, b) in grad.as_slice().iter().zip(g.as_slice()) {
            assert_abs_diff_eq!(*a, 2.0 * b, epsilon = 1e-14);
        }
        let single = DenseMatrix::new(1, 1, vec![0.7]).unwrap();
        assert_abs_diff_eq!(logdet_gram_grad(&single, 0.0).unwrap()[(0, 0)], 2.0 / 0.7, epsilon = 1e-12);
    }

    #[test]
    fn tall_matrix_required() {
        let g = DenseMatrix::<f64>::zeros(1, 2);
        assert!(matches!(logdet_gram(&g, 0.0), Err(Error::InvalidArgument(_))));
    }

    fn random_unit_columns(rng: &mut SeededRng, d: usize, k: usize) -> DenseMatrix<f64> {
        let cols: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
                let n = crate::numkit::vector::norm2(&v);
                v.iter().map(|x| x / n).collect()
            })
            .collect();
        DenseMatrix::from_columns(&cols).unwrap()
    }

    #[test]
    fn hadamard_bound_on_unit_columns() {
        let mut rng = SeededRng::new(11);
        for _ in 0..200 {
            let d = 2 + rng.below(10);
            let k = 1 + rng.below(d.min(4));
            let g = random_unit_columns(&mut rng, d, k);
            assert!(logdet_gram(&g, 0.0).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = SeededRng::new(5);
        let h = 1e-6;
        for _ in 0..100 {
            let d = 1 + rng.below(16);
            let k = 1 + rng.below(d.min(4));
            let g = DenseMatrix::from_fn(d, k, |_, _| rng.normal::<f64>());
            let grad = logdet_gram_grad(&g, 0.0).unwrap();
            let mut fd = Vec::with_capacity(d * k);
            for idx in 0..d * k {
                let mut plus = g.clone();
                plus.as_mut_slice()[idx] += h;
                let mut minus = g.clone();
                minus.as_mut_slice()[idx] -= h;
                fd.push((logdet_gram(&plus, 0.0).unwrap() - logdet_gram(&minus, 0.0).unwrap()) / (2.0 * h));
            }
            let diff: f64 = grad.as_slice().iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-8);
            assert!(diff / scale <= 1e-5, "relative error {}", diff / scale);
        }
    }
}
