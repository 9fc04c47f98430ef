use super::{LabeledDataset, LossKind, MlpModel};
use crate::numkit::{Scalar, SeededRng};
use crate::{Error, Result};

/// Plain constant-rate SGD settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    pub epochs: usize,
    pub lr: T,
    pub batch: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Training accuracy after each epoch, in `[0, 1]`.
    pub epoch_accuracy: Vec<f64>,
    /// Mean mini-batch cross-entropy seen during each epoch.
    pub epoch_loss: Vec<f64>,
}

/// Fraction of examples the model classifies correctly.
pub fn accuracy<T: Scalar>(model: &MlpModel<T>, data: &LabeledDataset<T>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty dataset".into()));
    }
    let mut correct = 0usize;
    for (x, y) in data.iter() {
        if model.predict(x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Minimises mean cross-entropy with shuffled mini-batch SGD, in place.
pub fn train_natural<T: Scalar>(
    model: &mut MlpModel<T>,
    data: &LabeledDataset<T>,
    cfg: &TrainConfig<T>,
    rng: &mut SeededRng,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if cfg.batch == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<(&[T], usize)> = chunk.iter().map(|&i| (data.input(i), data.label(i))).collect();
            let (loss, mut grad) = model.batch_grad_params(&batch, &LossKind::CrossEntropy)?;
            let inv = T::one() / T::from_count(chunk.len());
            for g in &mut grad {
                *g = *g * inv;
            }
            model.sgd_step(&grad, cfg.lr)?;
            loss_sum += loss.as_f64();
        }
        report.epoch_loss.push(loss_sum / data.len() as f64);
        report.epoch_accuracy.push(accuracy(model, data)?);
    }
    Ok(report)
}
