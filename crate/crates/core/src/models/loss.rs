use crate::numkit::Scalar;
use crate::{Error, Result};

/// Confidence cap of the C&W margin loss used by the attacks.
pub const DEFAULT_KAPPA: f64 = 50.0;

/// Classification loss on logits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind<T> {
    /// `−log softmax(Z)_y`
    CrossEntropy,
    /// `max(Z_y − max_{j≠y} Z_j, −κ)`
    CwMargin { kappa: T },
}

impl<T: Scalar> LossKind<T> {
    pub fn cw_default() -> Self {
        LossKind::CwMargin { kappa: T::lit(DEFAULT_KAPPA) }
    }

    pub fn value(&self, logits: &[T], label: usize) -> Result<T> {
        match *self {
            LossKind::CrossEntropy => ce_loss(logits, label),
            LossKind::CwMargin { kappa } => cw_loss(logits, label, kappa),
        }
    }

    pub fn grad_logits(&self, logits: &[T], label: usize) -> Result<Vec<T>> {
        match *self {
            LossKind::CrossEntropy => ce_loss_grad(logits, label),
            LossKind::CwMargin { kappa } => cw_loss_grad(logits, label, kappa),
        }
    }

    /// `+1` when a larger loss value means a stronger attack (cross-entropy),
    /// `−1` when a smaller one does (the margin).
    ///
    /// Attack objectives that are minimised use `−sign·loss`; training losses
    /// that the adversary maximises use `sign·loss`.
    pub fn adversarial_sign(&self) -> T {
        match self {
            LossKind::CrossEntropy => T::one(),
            LossKind::CwMargin { .. } => -T::one(),
        }
    }
}

fn check_label<T>(logits: &[T], label: usize) -> Result<()> {
    if label >= logits.len() {
        return Err(Error::InvalidLabel { label, classes: logits.len() });
    }
    Ok(())
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, &z| m.max(z));
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |acc, &e| acc + e);
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy `−log softmax(Z)_y` with max subtraction.
pub fn ce_loss<T: Scalar>(logits: &[T], label: usize) -> Result<T> {
    check_label(logits, label)?;
    let max = logits.iter().fold(T::neg_infinity(), |m, &z| m.max(z));
    let lse = logits.iter().fold(T::zero(), |acc, &z| acc + (z - max).exp()).ln() + max;
    Ok(lse - logits[label])
}

pub fn ce_loss_grad<T: Scalar>(logits: &[T], label: usize) -> Result<Vec<T>> {
    check_label(logits, label)?;
    let mut g = softmax(logits);
    g[label] = g[label] - T::one();
    Ok(g)
}

/// Strongest competing class; lowest index wins ties.
fn runner_up<T: Scalar>(logits: &[T], label: usize) -> usize {
    let mut best: Option<usize> = None;
    for (j, &z) in logits.iter().enumerate() {
        if j != label && best.is_none_or(|b| z > logits[b]) {
            best = Some(j);
        }
    }
    best.expect("at least two classes")
}

fn check_margin_args<T: Scalar>(logits: &[T], label: usize, kappa: T) -> Result<()> {
    if logits.len() < 2 {
        return Err(Error::InvalidArgument("margin loss needs at least two classes".into()));
    }
    if kappa < T::zero() {
        return Err(Error::InvalidArgument(format!("kappa must be non-negative, got {kappa}")));
    }
    check_label(logits, label)
}

/// C&W margin `max(Z_y − max_{j≠y} Z_j, −κ)`; smaller means a stronger attack.
pub fn cw_loss<T: Scalar>(logits: &[T], label: usize, kappa: T) -> Result<T> {
    check_margin_args(logits, label, kappa)?;
    let j = runner_up(logits, label);
    Ok((logits[label] - logits[j]).max(-kappa))
}

/// Gradient of [`cw_loss`] w.r.t. the logits; zero on the `−κ` plateau.
pub fn cw_loss_grad<T: Scalar>(logits: &[T], label: usize, kappa: T) -> Result<Vec<T>> {
    check_margin_args(logits, label, kappa)?;
    let j = runner_up(logits, label);
    let mut g = vec![T::zero(); logits.len()];
    if logits[label] - logits[j] > -kappa {
        g[label] = T::one();
        g[j] = -T::one();
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cw_examples() {
        assert_eq!(cw_loss(&[10.0, 0.0], 0, 50.0).unwrap(), 10.0);
        assert_eq!(cw_loss(&[-100.0, 0.0], 0, 50.0).unwrap(), -50.0);
        assert_eq!(cw_loss_grad(&[-100.0, 0.0], 0, 50.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(cw_loss_grad(&[1.0, 3.0, 2.0], 0, 50.0).unwrap(), vec![1.0, -1.0, 0.0]);
        assert_eq!(LossKind::<f64>::cw_default(), LossKind::CwMargin { kappa: 50.0 });
    }

    #[test]
    fn cw_needs_two_classes() {
        assert!(cw_loss(&[1.0], 0, 50.0).is_err());
        assert!(cw_loss(&[1.0, 2.0], 2, 50.0).is_err());
        assert!(cw_loss(&[1.0, 2.0], 0, -1.0).is_err());
    }

    #[test]
    fn cw_shift_invariant() {
        let z = [0.3, -1.2, 2.5, 0.0];
        let shifted: Vec<f64> = z.iter().map(|x| x + 7.25).collect();
        for y in 0..4 {
            assert_abs_diff_eq!(
                cw_loss(&z, y, 50.0).unwrap(),
                cw_loss(&shifted, y, 50.0).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn ce_examples() {
        assert_abs_diff_eq!(ce_loss(&[0.0; 10], 3).unwrap(), 10f64.ln(), epsilon = 1e-12);
        assert!(ce_loss(&[50.0, 0.0], 0).unwrap() < 1e-20);
        // Large logits stay finite.
        assert!(ce_loss(&[1000.0f64, -1000.0], 1).unwrap().is_finite());
    }

    #[test]
    fn softmax_normalises() {
        let p = softmax(&[1.0, 2.0, 3.0, -700.0]);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ce_grad_matches_differences() {
        let z = [0.4, -0.3, 1.1];
        let g = ce_loss_grad(&z, 1).unwrap();
        for i in 0..3 {
            let mut p = z;
            p[i] += 1e-6;
            let mut m = z;
            m[i] -= 1e-6;
            let fd = (ce_loss(&p, 1).unwrap() - ce_loss(&m, 1).unwrap()) / 2e-6;
            assert_abs_diff_eq!(g[i], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn signs() {
        assert_eq!(LossKind::<f64>::CrossEntropy.adversarial_sign(), 1.0);
        assert_eq!(LossKind::<f64>::cw_default().adversarial_sign(), -1.0);
    }
}
