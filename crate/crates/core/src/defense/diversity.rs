use crate::models::{LossKind, MlpModel};
use crate::numkit::{logdet_gram, logdet_gram_grad, vector, DenseMatrix, Scalar};
use crate::{Error, Result};

fn normalized_columns<T: Scalar>(grads: &[Vec<T>]) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let mut cols = Vec::with_capacity(grads.len());
    let mut norms = Vec::with_capacity(grads.len());
    for (i, g) in grads.iter().enumerate() {
        let n = vector::norm2(g);
        if !(n > T::zero() && n.is_finite()) {
            return Err(Error::NonFinite(format!("input gradient {i} has norm {n}")));
        }
        cols.push(vector::scale(T::one() / n, g));
        norms.push(n);
    }
    Ok((cols, norms))
}

/// `log det(GᵀG + jitter·I)` over the ℓ2-normalised gradients. At most 0,
/// with equality for orthonormal directions and no jitter.
pub fn diversity_value<T: Scalar>(grads: &[Vec<T>], jitter: T) -> Result<T> {
    let (cols, _) = normalized_columns(grads)?;
    logdet_gram(&DenseMatrix::from_columns(&cols)?, jitter)
}

/// Central-difference Hessian-vector product `∇²f·v` from a gradient
/// function, probing along the unit direction of `v` with step `h`.
pub fn hvp<T: Scalar, G>(grad: G, x: &[T], v: &[T], h: T) -> Result<Vec<T>>
where
    G: Fn(&[T]) -> Result<Vec<T>>,
{
    if !(h > T::zero()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    vector::ensure_len(v, x.len())?;
    let nv = vector::norm2(v);
    if nv == T::zero() {
        return Ok(vec![T::zero(); x.len()]);
    }
    let u = vector::scale(T::one() / nv, v);
    let plus = grad(&vector::add_scaled(x, h, &u))?;
    let minus = grad(&vector::add_scaled(x, -h, &u))?;
    let s = nv / (T::lit(2.0) * h);
    let out: Vec<T> = plus.iter().zip(&minus).map(|(&a, &b)| (a - b) * s).collect();
    vector::ensure_finite(&out, "Hessian-vector product")?;
    Ok(out)
}

/// Value of the diversity term and its gradient with respect to every
/// perturbation. `grad_fn(i, δ)` is the input gradient of the loss of type `i`.
///
/// With `g_i` the raw gradient, `u_i = g_i/‖g_i‖` and `C = ∂h/∂G`,
/// `∂h/∂δ_i = ∇²f_i · (I − u_i u_iᵀ) C_i / ‖g_i‖`, the Hessian product taken
/// by finite differences.
pub fn diversity_grad<T: Scalar, F>(deltas: &[Vec<T>], grad_fn: F, jitter: T, fd_step: T) -> Result<(T, Vec<Vec<T>>)>
where
    F: Fn(usize, &[T]) -> Result<Vec<T>>,
{
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("at least one perturbation is required".into()));
    }
    let grads = deltas.iter().enumerate().map(|(i, d)| grad_fn(i, d)).collect::<Result<Vec<_>>>()?;
    let (cols, norms) = normalized_columns(&grads)?;
    let g = DenseMatrix::from_columns(&cols)?;
    let value = logdet_gram(&g, jitter)?;
    let dg = logdet_gram_grad(&g, jitter)?;
    let mut out = Vec::with_capacity(deltas.len());
    for (i, d) in deltas.iter().enumerate() {
        let c = dg.column(i);
        let u = &cols[i];
        let proj = vector::dot(u, &c);
        let v: Vec<T> = c.iter().zip(u).map(|(&ci, &ui)| (ci - proj * ui) / norms[i]).collect();
        out.push(hvp(|x| grad_fn(i, x), d, &v, fd_step)?);
    }
    Ok((value, out))
}

/// [`diversity_grad`] for the adversary's training loss `s·loss(x + δ)` of a
/// model on one example.
pub fn diversity_grad_wrt_deltas<T: Scalar>(
    model: &MlpModel<T>,
    x: &[T],
    y: usize,
    deltas: &[Vec<T>],
    kind: &LossKind<T>,
    jitter: T,
    fd_step: T,
) -> Result<(T, Vec<Vec<T>>)> {
    let s = kind.adversarial_sign();
    diversity_grad(
        deltas,
        |_, d| {
            vector::ensure_len(d, x.len())?;
            let xp: Vec<T> = x.iter().zip(d).map(|(&a, &b)| a + b).collect();
            Ok(vector::scale(s, &model.grad_input(&xp, kind, y)?))
        },
        jitter,
        fd_step,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hvp_on_quadratic() {
        // f = ½ xᵀAx, ∇f = Ax.
        let a = [[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 3.0]];
        let grad = |x: &[f64]| Ok((0..3).map(|i| (0..3).map(|j| a[i][j] * x[j]).sum()).collect());
        let v = [0.3, -1.2, 0.7];
        let hv = hvp(grad, &[0.1, 0.2, 0.3], &v, 1e-3).unwrap();
        for i in 0..3 {
            let exact: f64 = (0..3).map(|j| a[i][j] * v[j]).sum();
            assert_abs_diff_eq!(hv[i], exact, epsilon = 1e-5);
        }
        assert_eq!(hvp(grad, &[0.0; 3], &[0.0; 3], 1e-3).unwrap(), vec![0.0; 3]);
        assert!(hvp(grad, &[0.0; 3], &v, 0.0).is_err());
    }

    #[test]
    fn orthogonal_directions_are_stationary() {
        // f_i(δ) = e_iᵀδ + ½‖δ‖²: gradients e_i + δ, orthonormal at δ = 0.
        let grad = |i: usize, d: &[f64]| {
            let mut g = d.to_vec();
            g[i] += 1.0;
            Ok(g)
        };
        let deltas = vec![vec![0.0; 3], vec![0.0; 3]];
        let (h, g) = diversity_grad(&deltas, grad, 0.0, 1e-3).unwrap();
        assert_abs_diff_eq!(h, 0.0, epsilon = 1e-14);
        for gi in g {
            assert!(vector::norm2(&gi) < 1e-10);
        }
    }

    #[test]
    fn zero_gradient_is_reported() {
        assert!(diversity_value(&[vec![0.0, 0.0], vec![1.0, 0.0]], 1e-12).is_err());
    }
}
