//! Generalised adversarial training over several perturbation types
//! (alternating multi-step PGD), with the optional log-det diversity
//! regulariser on the normalised input gradients of the attacks.

mod diversity;

pub use diversity::{diversity_grad, diversity_grad_wrt_deltas, diversity_value, hvp};

use crate::attack::WeightMode;
use crate::models::{accuracy, LossKind, MlpModel};
use crate::numkit::{vector, Scalar, SeededRng, DEFAULT_GRAM_JITTER};
use crate::projections::{project_simplex, ConstraintSet, Norm};
use crate::{Error, Result};

/// One threat model: an `ℓp` ball of radius `eps` (a count for ℓ0),
/// intersected with the box keeping inputs in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackType<T> {
    pub norm: Norm,
    pub eps: T,
}

impl<T: Scalar> AttackType<T> {
    pub fn new(norm: Norm, eps: T) -> Self {
        Self { norm, eps }
    }

    pub fn constraint_for(&self, x: &[T]) -> Result<ConstraintSet<T>> {
        ConstraintSet::around_input(self.norm, self.eps, x)
    }
}

/// Diversity weight used when the regulariser is switched on.
pub const DEFAULT_DPAR_LAMBDA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct AtConfig<T> {
    pub attack_types: Vec<AttackType<T>>,
    /// Ascent rounds `R` per batch.
    pub inner_steps: usize,
    /// Ascent step on each `δ_i`.
    pub delta_lr: T,
    /// Ascent step on `w`.
    pub weight_lr: T,
    pub gamma: T,
    /// SGD step on the model parameters.
    pub lr: T,
    pub epochs: usize,
    pub batch: usize,
    /// Share of the training loss taken by the adversarial term.
    pub adv_ratio: T,
    /// Diversity weight; 0 disables the regulariser entirely.
    pub lambda: T,
    pub jitter: T,
    /// Step of the finite-difference Hessian-vector products.
    pub fd_step: T,
    pub loss: LossKind<T>,
    /// `Uniform` gives the averaging baseline.
    pub weights: WeightMode,
    pub seed: u64,
}

impl<T: Scalar> AtConfig<T> {
    /// 20 ascent rounds with δ-step 1/6, w-step 1/50, γ = 4, half adversarial
    /// batches, no diversity term, cross-entropy.
    pub fn new(attack_types: Vec<AttackType<T>>) -> Self {
        Self {
            attack_types,
            inner_steps: 20,
            delta_lr: T::lit(1.0 / 6.0),
            weight_lr: T::lit(0.02),
            gamma: T::lit(4.0),
            lr: T::lit(0.05),
            epochs: 5,
            batch: 32,
            adv_ratio: T::lit(0.5),
            lambda: T::zero(),
            jitter: T::lit(DEFAULT_GRAM_JITTER),
            fd_step: T::lit(1e-3),
            loss: LossKind::CrossEntropy,
            weights: WeightMode::Learned,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.attack_types.is_empty() {
            return bad("at least one attack type is required".into());
        }
        if self.inner_steps == 0 {
            return bad("inner_steps must be at least 1".into());
        }
        if self.batch == 0 {
            return bad("batch must be positive".into());
        }
        if !(self.adv_ratio >= T::zero() && self.adv_ratio <= T::one()) {
            return bad(format!("adv_ratio must be in [0, 1], got {}", self.adv_ratio));
        }
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.fd_step > T::zero()) {
            return bad(format!("fd_step must be positive, got {}", self.fd_step));
        }
        if !(self.jitter >= T::zero()) {
            return bad(format!("jitter must be non-negative, got {}", self.jitter));
        }
        for (name, v) in [("delta_lr", self.delta_lr), ("weight_lr", self.weight_lr)] {
            if !(v > T::zero() && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.gamma >= T::zero() && self.lr >= T::zero()) {
            return bad("gamma and lr must be non-negative".into());
        }
        for a in &self.attack_types {
            // Validates norm/eps against a neutral one-pixel input.
            ConstraintSet::around_input(a.norm, a.eps, &[T::lit(0.5)])?;
        }
        Ok(())
    }

    fn k(&self) -> usize {
        self.attack_types.len()
    }
}

/// Per-round record of one inner maximisation (`R + 1` entries).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InnerTrace<T> {
    pub weights: Vec<Vec<T>>,
    /// Batch-mean training loss of each attack type.
    pub losses: Vec<Vec<T>>,
    pub objective: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult<T> {
    pub weights: Vec<T>,
    /// `deltas[i][n]`: perturbation of type `i` for example `n`.
    pub deltas: Vec<Vec<Vec<T>>>,
    pub trace: InnerTrace<T>,
}

impl<T: Scalar> InnerResult<T> {
    /// `Σ_i w_i φ_i` at the final iterates.
    pub fn final_weighted_loss(&self) -> T {
        let phi = self.trace.losses.last().expect("trace has the starting point");
        vector::dot(&self.weights, phi)
    }

    /// `Σ_i φ_i / K` at zero perturbation, the starting point.
    pub fn initial_weighted_loss(&self) -> T {
        let phi = &self.trace.losses[0];
        phi.iter().copied().sum::<T>() / T::from_count(phi.len())
    }
}

/// `f_tr(δ) = s·loss(x + δ)`, the adversary's ascent objective, with its
/// input gradient.
fn train_loss_and_grad<T: Scalar>(
    model: &MlpModel<T>,
    x: &[T],
    y: usize,
    delta: &[T],
    kind: &LossKind<T>,
) -> Result<(T, Vec<T>)> {
    let xp: Vec<T> = x.iter().zip(delta).map(|(&a, &b)| a + b).collect();
    let (loss, grad) = model.loss_and_grad_input(&xp, kind, y)?;
    let s = kind.adversarial_sign();
    if !loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    vector::ensure_finite(&grad, "training loss gradient")?;
    Ok((s * loss, vector::scale(s, &grad)))
}

/// `Σ w_i f_tr(δ_i) − (γ/2)‖w − 1/K‖² + λ·h` for one example.
pub fn at_objective<T: Scalar>(
    model: &MlpModel<T>,
    x: &[T],
    y: usize,
    w: &[T],
    deltas: &[Vec<T>],
    cfg: &AtConfig<T>,
) -> Result<T> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("at least one perturbation is required".into()));
    }
    vector::ensure_len(w, deltas.len())?;
    let mut grads = Vec::with_capacity(deltas.len());
    let mut value = T::zero();
    for (&wi, d) in w.iter().zip(deltas) {
        let (f, g) = train_loss_and_grad(model, x, y, d, &cfg.loss)?;
        value = value + wi * f;
        grads.push(g);
    }
    let center = T::one() / T::from_count(w.len());
    let spread: T = w.iter().map(|&wi| (wi - center) * (wi - center)).sum();
    value = value - cfg.gamma * T::lit(0.5) * spread;
    if cfg.lambda > T::zero() {
        value = value + cfg.lambda * diversity_value(&grads, cfg.jitter)?;
    }
    Ok(value)
}

fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_count(v.len())
}

/// `R` rounds of simultaneous projected ascent on the shared weights `w`
/// and on every per-example perturbation `δ_{i,n}`, starting from `w = 1/K`
/// and `δ = 0`, for an arbitrary per-example adversary loss.
///
/// `sets[i][n]` is the feasible set of type `i` for example `n`, and
/// `loss(n, δ)` returns `f_tr` of example `n` and its gradient. The weight
/// step uses the batch-mean loss of each type; each `δ_{i,n}` ascends its own
/// example's objective `w_i f_tr(δ_{i,n}) + λ h_n`. Every gradient of a round
/// is taken at the previous round's iterates.
pub fn inner_maximize_with<T, F>(sets: &[Vec<ConstraintSet<T>>], loss: F, cfg: &AtConfig<T>) -> Result<InnerResult<T>>
where
    T: Scalar,
    F: Fn(usize, &[T]) -> Result<(T, Vec<T>)>,
{
    cfg.validate()?;
    let k = cfg.k();
    if sets.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: sets.len() });
    }
    let n_ex = sets[0].len();
    if n_ex == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if let Some(s) = sets.iter().find(|s| s.len() != n_ex) {
        return Err(Error::DimensionMismatch { expected: n_ex, found: s.len() });
    }
    let mut deltas: Vec<Vec<Vec<T>>> =
        sets.iter().map(|per| per.iter().map(|s| vec![T::zero(); s.dim()]).collect()).collect();
    let mut w = vector::uniform::<T>(k);
    let mut trace = InnerTrace::default();
    let center = T::one() / T::from_count(k);
    let use_dpar = cfg.lambda > T::zero();

    for r in 0..=cfg.inner_steps {
        let mut values = vec![Vec::with_capacity(n_ex); k];
        let mut grads = vec![Vec::with_capacity(n_ex); k];
        for i in 0..k {
            for n in 0..n_ex {
                let (f, g) = loss(n, &deltas[i][n])?;
                if !f.is_finite() {
                    return Err(Error::NonFinite(format!("adversary loss of type {i}, example {n}")));
                }
                vector::ensure_finite(&g, "adversary loss gradient")?;
                values[i].push(f);
                grads[i].push(g);
            }
        }
        let phi: Vec<T> = values.iter().map(|v| mean(v)).collect();

        let mut dpar_grads: Vec<Option<Vec<Vec<T>>>> = vec![None; n_ex];
        let mut h_sum = T::zero();
        if use_dpar {
            for (n, slot) in dpar_grads.iter_mut().enumerate() {
                // A vanishing gradient has no direction; skip the term for
                // that example rather than abort the batch.
                if (0..k).any(|i| vector::norm2(&grads[i][n]) == T::zero()) {
                    continue;
                }
                let ds: Vec<Vec<T>> = (0..k).map(|i| deltas[i][n].clone()).collect();
                let (h, g) = diversity_grad(&ds, |_, d| Ok(loss(n, d)?.1), cfg.jitter, cfg.fd_step)?;
                h_sum = h_sum + h;
                *slot = Some(g);
            }
        }

        let spread: T = w.iter().map(|&wi| (wi - center) * (wi - center)).sum();
        let mut obj = vector::dot(&w, &phi) - cfg.gamma * T::lit(0.5) * spread;
        if use_dpar {
            obj = obj + cfg.lambda * h_sum / T::from_count(n_ex);
        }
        trace.weights.push(w.clone());
        trace.losses.push(phi.clone());
        trace.objective.push(obj);
        if r == cfg.inner_steps {
            break;
        }

        let w_next = match cfg.weights {
            WeightMode::Learned => {
                let gw: Vec<T> = w.iter().zip(&phi).map(|(&wi, &p)| p - cfg.gamma * (wi - center)).collect();
                project_simplex(&vector::add_scaled(&w, cfg.weight_lr, &gw))?
            }
            WeightMode::Uniform => w.clone(),
        };
        for i in 0..k {
            for n in 0..n_ex {
                let mut g = vector::scale(w[i], &grads[i][n]);
                if let Some(dg) = &dpar_grads[n] {
                    vector::axpy(cfg.lambda, &dg[i], &mut g);
                }
                let moved = vector::add_scaled(&deltas[i][n], cfg.delta_lr, &g);
                deltas[i][n] = sets[i][n].project(&moved)?;
            }
        }
        w = w_next;
    }
    Ok(InnerResult { weights: w, deltas, trace })
}

/// [`inner_maximize_with`] for a model on a batch, with the constraint of
/// each attack type centred on each example.
pub fn inner_maximize<T: Scalar>(
    model: &MlpModel<T>,
    batch: &[(&[T], usize)],
    cfg: &AtConfig<T>,
) -> Result<InnerResult<T>> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let sets: Vec<Vec<ConstraintSet<T>>> = cfg
        .attack_types
        .iter()
        .map(|a| batch.iter().map(|&(x, _)| a.constraint_for(x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    inner_maximize_with(
        &sets,
        |n, d| {
            let (x, y) = batch[n];
            train_loss_and_grad(model, x, y, d, &cfg.loss)
        },
        cfg,
    )
}

/// Everything recorded during adversarial training.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtTrace<T> {
    /// Clean training accuracy after each epoch.
    pub clean_accuracy: Vec<f64>,
    /// `[epoch][type]`: accuracy on the perturbed training batches, measured
    /// before each parameter step.
    pub adv_accuracy: Vec<Vec<f64>>,
    /// `[epoch][batch]`: final domain weights of every batch.
    pub batch_weights: Vec<Vec<Vec<T>>>,
    /// `[epoch]`: mean training loss.
    pub epoch_loss: Vec<f64>,
    /// `(start, end)` weighted adversarial loss of every batch, in order.
    pub ascent: Vec<(T, T)>,
}

impl<T: Scalar> AtTrace<T> {
    /// Mean weight of each attack type over every batch of `epoch`.
    pub fn mean_weights(&self, epoch: usize) -> Vec<f64> {
        let rows = &self.batch_weights[epoch];
        let k = rows.first().map_or(0, Vec::len);
        (0..k)
            .map(|i| rows.iter().map(|w| w[i].as_f64()).sum::<f64>() / rows.len() as f64)
            .collect()
    }
}

/// Trains `model` in place. Each batch: run [`inner_maximize`], then one SGD
/// step on
/// `adv_ratio·Σ_i w_i mean_n f_tr(δ_{i,n}) + (1 − adv_ratio)·mean_n f_tr(0)`.
/// The diversity term does not contribute to the parameter gradient.
pub fn ampgd_train<T: Scalar>(
    model: &mut MlpModel<T>,
    data: &crate::models::LabeledDataset<T>,
    cfg: &AtConfig<T>,
) -> Result<AtTrace<T>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if data.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), found: data.dim() });
    }
    let k = cfg.k();
    let mut rng = SeededRng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = AtTrace::default();
    let s = cfg.loss.adversarial_sign();

    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut correct = vec![0usize; k];
        let mut weights = Vec::new();
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<(&[T], usize)> = chunk.iter().map(|&i| (data.input(i), data.label(i))).collect();
            let inner = inner_maximize(model, &batch, cfg)?;
            trace.ascent.push((inner.initial_weighted_loss(), inner.final_weighted_loss()));

            let inv_n = T::one() / T::from_count(batch.len());
            let mut grad = vec![T::zero(); model.num_params()];
            let mut batch_loss = T::zero();
            for (n, &(x, y)) in batch.iter().enumerate() {
                if cfg.adv_ratio > T::zero() {
                    for i in 0..k {
                        let xp: Vec<T> = x.iter().zip(&inner.deltas[i][n]).map(|(&a, &b)| a + b).collect();
                        if model.predict(&xp)? == y {
                            correct[i] += 1;
                        }
                        let scale = s * cfg.adv_ratio * inner.weights[i] * inv_n;
                        let l = model.accumulate_grad_params(&xp, y, &cfg.loss, scale, &mut grad)?;
                        batch_loss = batch_loss + cfg.adv_ratio * inner.weights[i] * l;
                    }
                }
                if cfg.adv_ratio < T::one() {
                    let scale = s * (T::one() - cfg.adv_ratio) * inv_n;
                    let l = model.accumulate_grad_params(x, y, &cfg.loss, scale, &mut grad)?;
                    batch_loss = batch_loss + (T::one() - cfg.adv_ratio) * l;
                }
            }
            vector::ensure_finite(&grad, "parameter gradient")?;
            model.sgd_step(&grad, cfg.lr)?;
            loss_sum += batch_loss.as_f64();
            weights.push(inner.weights);
        }
        trace.epoch_loss.push(loss_sum / data.len() as f64);
        trace.adv_accuracy.push(correct.iter().map(|&c| c as f64 / data.len() as f64).collect());
        trace.batch_weights.push(weights);
        trace.clean_accuracy.push(accuracy(model, data)?);
    }
    Ok(trace)
}

/// Per-example, per-type correctness under an `R`-step PGD attack of each
/// type separately (`result[n][i]`).
pub fn robustness_matrix<T: Scalar>(
    model: &MlpModel<T>,
    data: &crate::models::LabeledDataset<T>,
    cfg: &AtConfig<T>,
) -> Result<Vec<Vec<bool>>> {
    let mut out = vec![Vec::with_capacity(cfg.k()); data.len()];
    for a in &cfg.attack_types {
        let single = AtConfig { attack_types: vec![*a], lambda: T::zero(), ..cfg.clone() };
        for (n, (x, y)) in data.iter().enumerate() {
            let inner = inner_maximize(model, &[(x, y)], &single)?;
            let xp: Vec<T> = x.iter().zip(&inner.deltas[0][0]).map(|(&a, &b)| a + b).collect();
            out[n].push(model.predict(&xp)? == y);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LabeledDataset;
    use crate::numkit::DenseMatrix;
    use approx::assert_abs_diff_eq;

    fn toy() -> (MlpModel<f64>, LabeledDataset<f64>) {
        let mut rng = SeededRng::new(21);
        let model = MlpModel::init(&[6, 10, 3], &mut rng).unwrap();
        let n = 12;
        let data: Vec<f64> = (0..n * 6).map(|_| rng.uniform(0.0, 1.0)).collect();
        let labels = (0..n).map(|i| i % 3).collect();
        (model, LabeledDataset::new(DenseMatrix::new(n, 6, data).unwrap(), labels, 3).unwrap())
    }

    #[test]
    fn config_validation() {
        let mut cfg = AtConfig::<f64>::new(vec![AttackType::new(Norm::Linf, 0.2)]);
        assert!(cfg.validate().is_ok());
        cfg.adv_ratio = 1.5;
        assert!(cfg.validate().is_err());
        cfg.adv_ratio = 0.5;
        cfg.attack_types.clear();
        assert!(cfg.validate().is_err());
        let bad = AtConfig::<f64>::new(vec![AttackType::new(Norm::L2, -1.0)]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_type_objective_is_training_loss() {
        let (m, d) = toy();
        let cfg = AtConfig::new(vec![AttackType::new(Norm::Linf, 0.2)]);
        let delta = vec![0.05; 6];
        let v = at_objective(&m, d.input(0), d.label(0), &[1.0], &[delta.clone()], &cfg).unwrap();
        let xp: Vec<f64> = d.input(0).iter().zip(&delta).map(|(a, b)| a + b).collect();
        let expected = crate::models::ce_loss(&m.forward(&xp).unwrap(), d.label(0)).unwrap();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-14);
    }

    #[test]
    fn inner_iterates_stay_feasible() {
        let (m, d) = toy();
        let mut cfg = AtConfig::new(vec![AttackType::new(Norm::Linf, 0.1), AttackType::new(Norm::L2, 0.3)]);
        cfg.delta_lr = 5.0;
        cfg.lambda = 0.1;
        let batch: Vec<(&[f64], usize)> = d.iter().take(4).collect();
        let res = inner_maximize(&m, &batch, &cfg).unwrap();
        assert_eq!(res.trace.objective.len(), 21);
        for w in &res.trace.weights {
            assert!(crate::projections::Simplex::new(2).contains(w));
        }
        for (i, a) in cfg.attack_types.iter().enumerate() {
            for (n, &(x, _)) in batch.iter().enumerate() {
                assert!(a.constraint_for(x).unwrap().contains(&res.deltas[i][n], 1e-9));
            }
        }
    }

    #[test]
    fn symmetric_types_keep_uniform_weights() {
        let (m, d) = toy();
        let t = AttackType::new(Norm::Linf, 0.1);
        let cfg = AtConfig::new(vec![t, t]);
        let batch: Vec<(&[f64], usize)> = d.iter().take(3).collect();
        let res = inner_maximize(&m, &batch, &cfg).unwrap();
        for w in &res.trace.weights {
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn zero_lr_keeps_parameters() {
        let (mut m, d) = toy();
        let before = m.clone();
        let mut cfg = AtConfig::new(vec![AttackType::new(Norm::Linf, 0.1)]);
        cfg.lr = 0.0;
        cfg.epochs = 2;
        cfg.batch = 5;
        cfg.inner_steps = 3;
        let trace = ampgd_train(&mut m, &d, &cfg).unwrap();
        assert_eq!(m, before);
        assert_eq!(trace.clean_accuracy.len(), 2);
        assert_eq!(trace.batch_weights[0].len(), 3);
        assert_eq!(trace.ascent.len(), 6);
    }

    #[test]
    fn robustness_matrix_shape() {
        let (m, d) = toy();
        let mut cfg = AtConfig::new(vec![AttackType::new(Norm::Linf, 0.1), AttackType::new(Norm::L1, 1.0)]);
        cfg.inner_steps = 2;
        let r = robustness_matrix(&m, &d, &cfg).unwrap();
        assert_eq!(r.len(), d.len());
        assert!(r.iter().all(|row| row.len() == 2));
    }
}
