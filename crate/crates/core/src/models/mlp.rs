use super::LossKind;
use crate::numkit::{vector, Scalar, SeededRng};
use crate::{Error, Result};

/// Fully connected ReLU network. The last layer is linear (logits).
///
/// Parameters are stored flat, layer by layer: the `out × in` weight block in
/// row-major order followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    dims: Vec<usize>,
    params: Vec<T>,
}

/// Activations saved by a forward pass: `activations[0]` is the input,
/// `activations[l]` the post-ReLU output of hidden layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub activations: Vec<Vec<T>>,
    pub logits: Vec<T>,
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl<T: Scalar> MlpModel<T> {
    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer sizes {dims:?}")));
        }
        Ok(())
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::check_dims(dims)?;
        Ok(Self { dims: dims.to_vec(), params: vec![T::zero(); param_count(dims)] })
    }

    pub fn from_params(dims: &[usize], params: Vec<T>) -> Result<Self> {
        Self::check_dims(dims)?;
        vector::ensure_len(&params, param_count(dims))?;
        Ok(Self { dims: dims.to_vec(), params })
    }

    /// Weights and biases drawn uniformly from `±1/√fan_in`.
    pub fn init(dims: &[usize], rng: &mut SeededRng) -> Result<Self> {
        let mut model = Self::zeros(dims)?;
        let mut offset = 0;
        for w in dims.windows(2) {
            let bound = T::one() / T::from_count(w[0]).sqrt();
            let n = (w[0] + 1) * w[1];
            for p in &mut model.params[offset..offset + n] {
                *p = rng.uniform(-bound, bound);
            }
            offset += n;
        }
        Ok(model)
    }

    /// Layer sizes of the four-layer MLP (FC 128-128-64 + ReLU, then the
    /// classifier), with hidden widths scaled by `width` (at least one unit).
    pub fn model_a_dims(input: usize, classes: usize, width: f64) -> Vec<usize> {
        let scaled = |n: f64| ((n * width).round() as usize).max(1);
        vec![input, scaled(128.0), scaled(128.0), scaled(64.0), classes]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.dims.last().expect("at least two layers")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Offset of layer `l`'s weight block.
    fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.dims[..=l])
    }

    pub fn forward_cached(&self, x: &[T]) -> Result<ForwardCache<T>> {
        vector::ensure_len(x, self.input_dim())?;
        let mut activations = Vec::with_capacity(self.num_layers());
        let mut current = x.to_vec();
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let off = self.layer_offset(l);
            let weights = &self.params[off..off + n_in * n_out];
            let biases = &self.params[off + n_in * n_out..off + (n_in + 1) * n_out];
            let mut next: Vec<T> = (0..n_out)
                .map(|o| vector::dot(&weights[o * n_in..(o + 1) * n_in], &current) + biases[o])
                .collect();
            if l + 1 < self.num_layers() {
                for v in &mut next {
                    *v = v.max(T::zero());
                }
            }
            activations.push(current);
            current = next;
        }
        Ok(ForwardCache { activations, logits: current })
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(x)?.logits)
    }

    pub fn predict(&self, x: &[T]) -> Result<usize> {
        Ok(vector::argmax(&self.forward(x)?))
    }

    /// Reverse pass from `d loss / d logits`. Returns the input gradient and,
    /// when `param_grad` is given, adds the parameter gradient into it.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: &[T], mut param_grad: Option<&mut [T]>) -> Vec<T> {
        let mut delta = dlogits.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let off = self.layer_offset(l);
            let input = &cache.activations[l];
            if let Some(g) = param_grad.as_deref_mut() {
                for o in 0..n_out {
                    let row = &mut g[off + o * n_in..off + (o + 1) * n_in];
                    vector::axpy(delta[o], input, row);
                    g[off + n_in * n_out + o] = g[off + n_in * n_out + o] + delta[o];
                }
            }
            let weights = &self.params[off..off + n_in * n_out];
            let mut prev = vec![T::zero(); n_in];
            for o in 0..n_out {
                vector::axpy(delta[o], &weights[o * n_in..(o + 1) * n_in], &mut prev);
            }
            if l > 0 {
                // ReLU mask: the stored activation is positive iff its pre-activation was.
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= T::zero() {
                        *p = T::zero();
                    }
                }
            }
            delta = prev;
        }
        delta
    }

    /// Loss value and its gradient w.r.t. the input.
    pub fn loss_and_grad_input(&self, x: &[T], kind: &LossKind<T>, label: usize) -> Result<(T, Vec<T>)> {
        let cache = self.forward_cached(x)?;
        let value = kind.value(&cache.logits, label)?;
        let dlogits = kind.grad_logits(&cache.logits, label)?;
        Ok((value, self.backward(&cache, &dlogits, None)))
    }

    pub fn grad_input(&self, x: &[T], kind: &LossKind<T>, label: usize) -> Result<Vec<T>> {
        Ok(self.loss_and_grad_input(x, kind, label)?.1)
    }

    /// Adds `scale · ∇θ loss(x, label)` into `grad` and returns the loss.
    pub fn accumulate_grad_params(
        &self,
        x: &[T],
        label: usize,
        kind: &LossKind<T>,
        scale: T,
        grad: &mut [T],
    ) -> Result<T> {
        vector::ensure_len(grad, self.num_params())?;
        let cache = self.forward_cached(x)?;
        let value = kind.value(&cache.logits, label)?;
        let mut dlogits = kind.grad_logits(&cache.logits, label)?;
        for g in &mut dlogits {
            *g = *g * scale;
        }
        self.backward(&cache, &dlogits, Some(grad));
        Ok(value)
    }

    pub fn grad_params(&self, x: &[T], label: usize, kind: &LossKind<T>) -> Result<Vec<T>> {
        let mut grad = vec![T::zero(); self.num_params()];
        self.accumulate_grad_params(x, label, kind, T::one(), &mut grad)?;
        Ok(grad)
    }

    /// Summed loss and summed parameter gradient over a batch (no averaging).
    pub fn batch_grad_params(&self, batch: &[(&[T], usize)], kind: &LossKind<T>) -> Result<(T, Vec<T>)> {
        let mut grad = vec![T::zero(); self.num_params()];
        let mut total = T::zero();
        for &(x, y) in batch {
            total = total + self.accumulate_grad_params(x, y, kind, T::one(), &mut grad)?;
        }
        Ok((total, grad))
    }

    /// `θ ← θ − lr·grad`.
    pub fn sgd_step(&mut self, grad: &[T], lr: T) -> Result<()> {
        vector::ensure_len(grad, self.num_params())?;
        vector::axpy(-lr, grad, &mut self.params);
        Ok(())
    }
}
