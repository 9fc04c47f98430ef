use crate::models::{LossKind, MlpModel};
use crate::numkit::{vector, Scalar, SeededRng};
use crate::oracle::DomainLossOracle;
use crate::projections::{ConstraintSet, Norm};
use crate::transforms::{ImageTensor, TransformSpec};
use crate::{Error, Result};

/// Attack loss of one model on one example: `F(δ) = −s·f(x0 + δ)` with `s`
/// the loss kind's adversarial sign, so that minimising `F` attacks.
#[derive(Debug, Clone)]
pub struct ModelLossOracle<'a, T> {
    model: &'a MlpModel<T>,
    x0: Vec<T>,
    label: usize,
    kind: LossKind<T>,
}

impl<'a, T: Scalar> ModelLossOracle<'a, T> {
    pub fn new(model: &'a MlpModel<T>, x0: &[T], label: usize, kind: LossKind<T>) -> Result<Self> {
        vector::ensure_len(x0, model.input_dim())?;
        if label >= model.num_classes() {
            return Err(Error::InvalidLabel { label, classes: model.num_classes() });
        }
        Ok(Self { model, x0: x0.to_vec(), label, kind })
    }

    pub fn model(&self) -> &MlpModel<T> {
        self.model
    }

    pub fn x0(&self) -> &[T] {
        &self.x0
    }

    pub fn label(&self) -> usize {
        self.label
    }
}

impl<T: Scalar> DomainLossOracle<T> for ModelLossOracle<'_, T> {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn value_and_grad(&self, delta: &[T]) -> Result<(T, Vec<T>)> {
        vector::ensure_len(delta, self.x0.len())?;
        let x: Vec<T> = self.x0.iter().zip(delta).map(|(&a, &b)| a + b).collect();
        let (loss, grad) = self.model.loss_and_grad_input(&x, &self.kind, self.label)?;
        let s = -self.kind.adversarial_sign();
        Ok((s * loss, vector::scale(s, &grad)))
    }
}

/// One oracle per model, all on the same example.
pub fn ensemble_oracles<'a, T: Scalar>(
    models: &'a [MlpModel<T>],
    x0: &[T],
    y0: usize,
    kind: LossKind<T>,
) -> Result<Vec<ModelLossOracle<'a, T>>> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("ensemble needs at least one model".into()));
    }
    models.iter().map(|m| ModelLossOracle::new(m, x0, y0, kind)).collect()
}

/// One oracle per example, all against the same model.
pub fn universal_oracles<'a, T: Scalar>(
    model: &'a MlpModel<T>,
    examples: &[(&[T], usize)],
    kind: LossKind<T>,
) -> Result<Vec<ModelLossOracle<'a, T>>> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("universal perturbation needs a non-empty group".into()));
    }
    examples.iter().map(|&(x, y)| ModelLossOracle::new(model, x, y, kind)).collect()
}

/// Shared constraint for a universal perturbation: the intersection of the
/// per-example boxes `[−x_i, 1 − x_i]`, so every `x_i + δ` stays in `[0, 1]`.
pub fn universal_constraint<T: Scalar>(norm: Norm, eps: T, examples: &[(&[T], usize)]) -> Result<ConstraintSet<T>> {
    let first = examples
        .first()
        .ok_or_else(|| Error::InvalidArgument("universal perturbation needs a non-empty group".into()))?
        .0;
    let d = first.len();
    let mut lower = vec![T::neg_infinity(); d];
    let mut upper = vec![T::infinity(); d];
    for &(x, _) in examples {
        vector::ensure_len(x, d)?;
        for i in 0..d {
            lower[i] = lower[i].max(-x[i]);
            upper[i] = upper[i].min(T::one() - x[i]);
        }
    }
    ConstraintSet::new(norm, eps, lower, upper)
}

/// Attack loss of one model through one transformation:
/// `F(δ) = −s·f(t(x0 + δ))`. A stochastic transformation averages
/// `mc_samples` draws, redrawn at every solver iteration from a substream
/// keyed by (domain, iteration) so reruns are reproducible.
#[derive(Debug, Clone)]
pub struct TransformOracle<'a, T> {
    base: ModelLossOracle<'a, T>,
    shape: (usize, usize, usize),
    spec: TransformSpec<T>,
    mc_samples: usize,
    domain: u64,
    rng: SeededRng,
    draws: Vec<TransformSpec<T>>,
}

impl<'a, T: Scalar> TransformOracle<'a, T> {
    pub fn new(
        model: &'a MlpModel<T>,
        x0: &ImageTensor<T>,
        y0: usize,
        kind: LossKind<T>,
        spec: TransformSpec<T>,
        mc_samples: usize,
        domain: u64,
        rng: &SeededRng,
    ) -> Result<Self> {
        if spec.stochastic && mc_samples == 0 {
            return Err(Error::InvalidArgument("stochastic transforms need mc_samples >= 1".into()));
        }
        let base = ModelLossOracle::new(model, x0.as_slice(), y0, kind)?;
        let mut oracle =
            Self { base, shape: x0.shape(), spec, mc_samples, domain, rng: rng.clone(), draws: Vec::new() };
        oracle.redraw(0);
        Ok(oracle)
    }

    pub fn spec(&self) -> &TransformSpec<T> {
        &self.spec
    }

    /// Transformation instances in use for the current iteration.
    pub fn current_draws(&self) -> &[TransformSpec<T>] {
        &self.draws
    }

    fn redraw(&mut self, iteration: usize) {
        self.draws = if self.spec.stochastic {
            let mut rng = self.rng.substream((self.domain << 32) | iteration as u64);
            (0..self.mc_samples)
                .map(|_| self.spec.sample(&mut rng).expect("validated stochastic spec"))
                .collect()
        } else {
            vec![self.spec]
        };
    }
}

impl<T: Scalar> DomainLossOracle<T> for TransformOracle<'_, T> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value_and_grad(&self, delta: &[T]) -> Result<(T, Vec<T>)> {
        vector::ensure_len(delta, self.dim())?;
        let (h, w, c) = self.shape;
        let x: Vec<T> = self.base.x0.iter().zip(delta).map(|(&a, &b)| a + b).collect();
        let img = ImageTensor::from_values(h, w, c, x)?;
        let s = -self.base.kind.adversarial_sign();
        let mut value = T::zero();
        let mut grad = vec![T::zero(); self.dim()];
        for t in &self.draws {
            let out = t.apply(&img)?;
            let (loss, g_out) = self.base.model.loss_and_grad_input(out.as_slice(), &self.base.kind, self.base.label)?;
            let g_in = t.vjp(&img, &ImageTensor::from_values(h, w, c, g_out)?)?;
            value = value + loss;
            vector::axpy(T::one(), g_in.as_slice(), &mut grad);
        }
        let scale = s / T::from_count(self.draws.len());
        Ok((value * scale, vector::scale(scale, &grad)))
    }

    fn begin_iteration(&mut self, iteration: usize) {
        self.redraw(iteration);
    }
}

/// One oracle per transformation of a single image.
pub fn transform_oracles<'a, T: Scalar>(
    model: &'a MlpModel<T>,
    x0: &ImageTensor<T>,
    y0: usize,
    kind: LossKind<T>,
    specs: &[TransformSpec<T>],
    mc_samples: usize,
    rng: &SeededRng,
) -> Result<Vec<TransformOracle<'a, T>>> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("transformation suite is empty".into()));
    }
    specs
        .iter()
        .enumerate()
        .map(|(i, &spec)| TransformOracle::new(model, x0, y0, kind, spec, mc_samples, i as u64, rng))
        .collect()
}
