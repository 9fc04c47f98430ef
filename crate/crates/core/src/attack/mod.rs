//! Alternating one-step projected gradient descent (APGD) for
//!
//! ```text
//! min_{δ∈X} max_{w∈P}  Σ_i w_i F_i(δ) − (γ/2)‖w − 1/K‖²
//! ```
//!
//! and the adapters that turn models, example groups and transformation
//! suites into per-domain loss oracles.

mod adapters;
mod lemma;

pub use adapters::{
    ensemble_oracles, transform_oracles, universal_constraint, universal_oracles, ModelLossOracle, TransformOracle,
};
pub use lemma::{joint_weighted_max, max_of_domain_maxima};

use std::fmt;

use crate::numkit::{vector, Scalar, SeededRng};
use crate::oracle::DomainLossOracle;
use crate::projections::{project_simplex, ConstraintSet, Norm};
use crate::{Error, Result};

/// Starting perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaInit {
    #[default]
    Zeros,
    /// Uniform in the `ε`-cube intersected with the box, then projected.
    RandomInBall,
}

/// How domain weights evolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Projected ascent on `w` (the min-max attack).
    #[default]
    Learned,
    /// `w` frozen at `1/K`: ensemble PGD, universal averaging, EOT.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgdConfig<T> {
    /// Step on `δ`.
    pub alpha: T,
    /// Step on `w`.
    pub beta: T,
    /// Pull of `w` toward uniform.
    pub gamma: T,
    pub iters: usize,
    pub constraint: ConstraintSet<T>,
    pub init: DeltaInit,
    pub seed: u64,
    pub weights: WeightMode,
}

impl<T: Scalar> ApgdConfig<T> {
    /// ℓ∞ ensemble-attack settings: α = 1/4, β = 1/50, γ = 3, 50 iterations.
    pub fn new(constraint: ConstraintSet<T>) -> Self {
        Self {
            alpha: T::lit(0.25),
            beta: T::lit(0.02),
            gamma: T::lit(3.0),
            iters: 50,
            constraint,
            init: DeltaInit::Zeros,
            seed: 0,
            weights: WeightMode::Learned,
        }
    }

    /// 20-step settings used for universal perturbations and adversarial
    /// training: α = 1/6, β = 1/50, γ = 4.
    pub fn twenty_step(constraint: ConstraintSet<T>) -> Self {
        Self { alpha: T::lit(1.0 / 6.0), gamma: T::lit(4.0), iters: 20, ..Self::new(constraint) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta > T::zero() && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.gamma >= T::zero() && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if self.iters == 0 {
            return Err(Error::InvalidArgument("iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Non-fatal diagnostics; currently only the `β < 1/γ` step condition.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.weights == WeightMode::Learned && self.beta * self.gamma >= T::one() {
            out.push(format!(
                "beta*gamma = {} >= 1: the weight step is outside the range with convergence guarantees",
                self.beta * self.gamma
            ));
        }
        out
    }

    fn initial_delta(&self) -> Result<Vec<T>> {
        let d = self.constraint.dim();
        match self.init {
            DeltaInit::Zeros => Ok(vec![T::zero(); d]),
            DeltaInit::RandomInBall => {
                let mut rng = SeededRng::new(self.seed);
                let radius = match self.constraint.norm() {
                    Norm::Linf | Norm::L0 => self.constraint.eps().min(T::one()),
                    _ => self.constraint.eps() / T::from_count(d).sqrt(),
                };
                let raw: Vec<T> = (0..d)
                    .map(|i| {
                        let lo = (-radius).max(self.constraint.lower()[i]);
                        let hi = radius.min(self.constraint.upper()[i]);
                        rng.uniform(lo, hi)
                    })
                    .collect();
                self.constraint.project(&raw)
            }
        }
    }
}

/// Every iterate of one solve, including the starting point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverTrace<T> {
    pub deltas: Vec<Vec<T>>,
    pub weights: Vec<Vec<T>>,
    /// Per-domain losses `φ^(t)` at `δ^(t)`.
    pub losses: Vec<Vec<T>>,
    pub objective: Vec<T>,
    pub residuals: Vec<T>,
}

impl<T: Scalar> SolverTrace<T> {
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn final_delta(&self) -> Option<&[T]> {
        self.deltas.last().map(Vec::as_slice)
    }

    pub fn final_weights(&self) -> Option<&[T]> {
        self.weights.last().map(Vec::as_slice)
    }
}

/// A solve that hit an error part way, with every iterate recorded before it.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveFailure<T> {
    pub error: Error,
    pub partial: SolverTrace<T>,
}

impl<T> fmt::Display for SolveFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} recorded iterates)", self.error, self.partial_len())
    }
}

impl<T> SolveFailure<T> {
    fn partial_len(&self) -> usize {
        self.partial.deltas.len()
    }
}

impl<T: fmt::Debug> std::error::Error for SolveFailure<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// `Σ w_i φ_i − (γ/2)‖w − 1/K‖²` from precomputed losses.
pub fn objective_from_losses<T: Scalar>(losses: &[T], w: &[T], gamma: T) -> Result<T> {
    check_k(losses.len())?;
    vector::ensure_len(w, losses.len())?;
    let center = T::one() / T::from_count(w.len());
    let spread: T = w.iter().map(|&wi| (wi - center) * (wi - center)).sum();
    Ok(vector::dot(w, losses) - gamma * T::lit(0.5) * spread)
}

/// Regularised objective at `(δ, w)`.
pub fn objective<T: Scalar, O: DomainLossOracle<T>>(oracles: &[O], delta: &[T], w: &[T], gamma: T) -> Result<T> {
    let losses = oracles.iter().map(|o| o.value(delta)).collect::<Result<Vec<_>>>()?;
    objective_from_losses(&losses, w, gamma)
}

/// `Σ_i w_i g_i`.
fn weighted_gradient<T: Scalar>(w: &[T], grads: &[Vec<T>], dim: usize) -> Vec<T> {
    let mut out = vec![T::zero(); dim];
    for (&wi, g) in w.iter().zip(grads) {
        vector::axpy(wi, g, &mut out);
    }
    out
}

fn descent_from_grads<T: Scalar>(
    delta: &[T],
    w: &[T],
    grads: &[Vec<T>],
    alpha: T,
    constraint: &ConstraintSet<T>,
) -> Result<Vec<T>> {
    let g = weighted_gradient(w, grads, delta.len());
    constraint.project(&vector::add_scaled(delta, -alpha, &g))
}

/// One projected descent step on `δ`: `proj_X(δ − α Σ w_i ∇F_i(δ))`.
pub fn outer_step<T: Scalar, O: DomainLossOracle<T>>(
    delta: &[T],
    w: &[T],
    oracles: &[O],
    alpha: T,
    constraint: &ConstraintSet<T>,
) -> Result<Vec<T>> {
    check_k(oracles.len())?;
    vector::ensure_len(w, oracles.len())?;
    let grads = oracles.iter().map(|o| o.grad(delta)).collect::<Result<Vec<_>>>()?;
    descent_from_grads(delta, w, &grads, alpha, constraint)
}

/// `∇_w ψ = φ − γ(w − 1/K)`.
fn weight_gradient<T: Scalar>(w: &[T], losses: &[T], gamma: T) -> Vec<T> {
    let center = T::one() / T::from_count(w.len());
    w.iter().zip(losses).map(|(&wi, &phi)| phi - gamma * (wi - center)).collect()
}

/// One projected ascent step on `w`: `proj_P(w + β(φ − γ(w − 1/K)))`.
pub fn inner_step<T: Scalar>(w: &[T], losses: &[T], beta: T, gamma: T) -> Result<Vec<T>> {
    check_k(w.len())?;
    vector::ensure_len(losses, w.len())?;
    let g = weight_gradient(w, losses, gamma);
    project_simplex(&vector::add_scaled(w, beta, &g))
}

fn residual_from_parts<T: Scalar>(
    delta: &[T],
    w: &[T],
    losses: &[T],
    grads: &[Vec<T>],
    cfg: &ApgdConfig<T>,
) -> Result<T> {
    let moved_delta = descent_from_grads(delta, w, grads, cfg.alpha, &cfg.constraint)?;
    let moved_w = project_simplex(&vector::add_scaled(w, cfg.beta, &weight_gradient(w, losses, cfg.gamma)))?;
    let sq: T = delta
        .iter()
        .zip(&moved_delta)
        .chain(w.iter().zip(&moved_w))
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(sq.sqrt() / (cfg.alpha + cfg.beta))
}

/// Projected-gradient stationarity measure
/// `‖(δ − proj_X(δ − α∇_δψ), w − proj_P(w + β∇_wψ))‖₂ / (α + β)`.
pub fn stationarity_residual<T: Scalar, O: DomainLossOracle<T>>(
    oracles: &[O],
    delta: &[T],
    w: &[T],
    cfg: &ApgdConfig<T>,
) -> Result<T> {
    check_k(oracles.len())?;
    vector::ensure_len(w, oracles.len())?;
    let (losses, grads) = evaluate(oracles, delta)?;
    residual_from_parts(delta, w, &losses, &grads, cfg)
}

fn evaluate<T: Scalar, O: DomainLossOracle<T>>(oracles: &[O], delta: &[T]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let mut losses = Vec::with_capacity(oracles.len());
    let mut grads = Vec::with_capacity(oracles.len());
    for (i, o) in oracles.iter().enumerate() {
        let (v, g) = o.value_and_grad(delta)?;
        vector::ensure_len(&g, delta.len())?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("loss of domain {i}")));
        }
        vector::ensure_finite(&g, &format!("gradient of domain {i}"))?;
        losses.push(v);
        grads.push(g);
    }
    Ok((losses, grads))
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("at least one domain is required".into()));
    }
    Ok(())
}

/// Runs APGD for `cfg.iters` iterations.
///
/// Iteration `t` first moves `δ` with the previous weights, then moves `w`
/// with the losses at the new `δ`. Oracles are evaluated once per iterate;
/// that single evaluation feeds the trace, the residual, the weight step and
/// the next `δ` step.
pub fn apgd_solve<T: Scalar, O: DomainLossOracle<T>>(
    oracles: &mut [O],
    cfg: &ApgdConfig<T>,
) -> std::result::Result<SolverTrace<T>, SolveFailure<T>> {
    let mut trace = SolverTrace::default();
    let fail = |error: Error, partial: SolverTrace<T>| SolveFailure { error, partial };
    if let Err(e) = cfg.validate().and_then(|_| check_k(oracles.len())) {
        return Err(fail(e, trace));
    }
    let d = cfg.constraint.dim();
    if let Some(o) = oracles.iter().find(|o| o.dim() != d) {
        return Err(fail(Error::DimensionMismatch { expected: d, found: o.dim() }, trace));
    }
    let k = oracles.len();
    let mut delta = match cfg.initial_delta() {
        Ok(x) => x,
        Err(e) => return Err(fail(e, trace)),
    };
    let mut w = vector::uniform::<T>(k);

    for t in 0..=cfg.iters {
        for o in oracles.iter_mut() {
            o.begin_iteration(t);
        }
        let step = (|| -> Result<(Vec<T>, Vec<Vec<T>>, Vec<T>, T, T)> {
            let (losses, grads) = evaluate(oracles, &delta)?;
            let w_t = if t > 0 && cfg.weights == WeightMode::Learned {
                inner_step(&w, &losses, cfg.beta, cfg.gamma)?
            } else {
                w.clone()
            };
            let obj = objective_from_losses(&losses, &w_t, cfg.gamma)?;
            let res = residual_from_parts(&delta, &w_t, &losses, &grads, cfg)?;
            Ok((losses, grads, w_t, obj, res))
        })();
        let (losses, grads, w_t, obj, res) = match step {
            Ok(s) => s,
            Err(e) => return Err(fail(e, trace)),
        };
        w = w_t;
        trace.deltas.push(delta.clone());
        trace.weights.push(w.clone());
        trace.losses.push(losses);
        trace.objective.push(obj);
        trace.residuals.push(res);
        if t < cfg.iters {
            delta = match descent_from_grads(&delta, &w, &grads, cfg.alpha, &cfg.constraint) {
                Ok(x) => x,
                Err(e) => return Err(fail(e, trace)),
            };
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{FnOracle, QuadraticOracle};
    use approx::assert_abs_diff_eq;

    fn constant(value: f64, dim: usize) -> QuadraticOracle<f64> {
        QuadraticOracle { hessian: vec![0.0; dim * dim], center: vec![0.0; dim], offset: value }
    }

    #[test]
    fn objective_examples() {
        let o = [constant(3.0, 1), constant(1.0, 1)];
        assert_abs_diff_eq!(objective(&o, &[0.0], &[1.0, 0.0], 2.0).unwrap(), 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(objective(&o, &[0.0], &[0.5, 0.5], 7.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(objective(&o[..1], &[0.0], &[1.0], 5.0).unwrap(), 3.0, epsilon = 1e-15);
        assert!(objective::<f64, QuadraticOracle<f64>>(&[], &[0.0], &[], 1.0).is_err());
    }

    #[test]
    fn inner_step_examples() {
        let w = inner_step(&[0.5, 0.5], &[1.0, 0.0], 0.02, 0.0).unwrap();
        assert_abs_diff_eq!(w[0], 0.51, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.49, epsilon = 1e-12);
        let third = 1.0 / 3.0;
        let w = inner_step(&[third; 3], &[2.0; 3], 0.1, 1.0).unwrap();
        for wi in w {
            assert_abs_diff_eq!(wi, third, epsilon = 1e-12);
        }
    }

    #[test]
    fn newton_step_on_unit_quadratic() {
        let set = ConstraintSet::with_symmetric_box(Norm::L2, 10.0, 3, 10.0).unwrap();
        let o = [QuadraticOracle::isotropic(vec![0.0; 3], 1.0, 0.0)];
        let d = outer_step(&[0.3, -0.2, 0.1], &[1.0], &o, 1.0, &set).unwrap();
        assert_eq!(d, vec![0.0; 3]);
    }

    #[test]
    fn symmetric_pair_converges_to_saddle() {
        let set = ConstraintSet::with_symmetric_box(Norm::Linf, 1.0, 1, 1.0).unwrap();
        let mut o = [QuadraticOracle::isotropic(vec![1.0], 2.0, 0.0), QuadraticOracle::isotropic(vec![-1.0], 2.0, 0.0)];
        let cfg = ApgdConfig { alpha: 0.1, beta: 0.02, gamma: 0.1, iters: 2000, ..ApgdConfig::new(set) };
        let trace = apgd_solve(&mut o, &cfg).unwrap();
        assert_eq!(trace.len(), 2001);
        assert_abs_diff_eq!(trace.final_delta().unwrap()[0], 0.0, epsilon = 1e-6);
        let w = trace.final_weights().unwrap();
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn nan_aborts_with_partial_trace() {
        let set = ConstraintSet::with_symmetric_box(Norm::Linf, 1.0, 1, 1.0).unwrap();
        let mut o = [FnOracle::new(
            1,
            |d: &[f64]| if d[0] < -0.15 { f64::NAN } else { d[0] },
            |_: &[f64]| vec![1.0],
        )];
        let cfg = ApgdConfig { alpha: 0.1, iters: 10, ..ApgdConfig::new(set) };
        let err = apgd_solve(&mut o, &cfg).unwrap_err();
        assert!(matches!(err.error, Error::NonFinite(_)));
        assert_eq!(err.partial.len(), 2);
    }

    #[test]
    fn config_validation_and_warning() {
        let set = ConstraintSet::with_symmetric_box(Norm::Linf, 1.0, 1, 1.0).unwrap();
        let mut cfg = ApgdConfig::new(set);
        assert!(cfg.validate().is_ok());
        assert!(cfg.warnings().is_empty());
        cfg.gamma = 100.0;
        assert_eq!(cfg.warnings().len(), 1);
        cfg.iters = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn random_init_is_feasible_and_seeded() {
        let set = ConstraintSet::new(Norm::L2, 0.5, vec![-0.1; 6], vec![1.0; 6]).unwrap();
        let cfg = ApgdConfig { init: DeltaInit::RandomInBall, seed: 11, ..ApgdConfig::new(set.clone()) };
        let a = cfg.initial_delta().unwrap();
        assert!(set.contains(&a, 1e-12));
        assert_eq!(a, cfg.initial_delta().unwrap());
        assert!(a.iter().any(|&x| x != 0.0));
    }
}
