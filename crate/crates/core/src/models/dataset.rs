use crate::numkit::{DenseMatrix, Scalar};
use crate::{Error, Result};

/// Inputs in `[0,1]^d` (one row per example) with class labels in `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    inputs: DenseMatrix<T>,
    labels: Vec<usize>,
    classes: usize,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(inputs: DenseMatrix<T>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.len() != inputs.rows() {
            return Err(Error::DimensionMismatch { expected: inputs.rows(), found: labels.len() });
        }
        if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::InvalidLabel { label, classes });
        }
        if let Some(v) = inputs.as_slice().iter().find(|&&v| !(v >= T::zero() && v <= T::one())) {
            return Err(Error::InvalidArgument(format!("input value {v} outside [0, 1]")));
        }
        Ok(Self { inputs, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input(&self, i: usize) -> &[T] {
        self.inputs.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn inputs(&self) -> &DenseMatrix<T> {
        &self.inputs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], usize)> + '_ {
        (0..self.len()).map(move |i| (self.input(i), self.label(i)))
    }

    /// Examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty subset".into()));
        }
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(self.input(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(DenseMatrix::new(indices.len(), d, data)?, labels, self.classes)
    }

    /// The first `n` examples (all of them if `n ≥ len`).
    pub fn take(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }
}
