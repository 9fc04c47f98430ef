//! Small separable datasets in `[0, 1]^d`.

use std::f64::consts::PI;
use std::str::FromStr;

use minmax_core::{DenseMatrix, LabeledDataset, SeededRng};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Isotropic Gaussian clusters with spread 0.03 around random centres.
    Blobs,
    /// Two interleaved half circles in the first two coordinates, the rest
    /// small noise. Two classes only.
    Moons,
}

impl FromStr for SyntheticKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(Self::Blobs),
            "moons" => Ok(Self::Moons),
            other => Err(HarnessError::Config(format!("unknown synthetic dataset '{other}'"))),
        }
    }
}

pub fn make_synthetic(
    kind: SyntheticKind,
    n: usize,
    d: usize,
    classes: usize,
    rng: &mut SeededRng,
) -> Result<LabeledDataset<f64>> {
    if classes < 2 || n < classes || d == 0 {
        return Err(HarnessError::Config(format!("invalid synthetic sizes n={n} d={d} classes={classes}")));
    }
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let mut data = Vec::with_capacity(n * d);
    match kind {
        SyntheticKind::Blobs => {
            let centres: Vec<Vec<f64>> =
                (0..classes).map(|_| (0..d).map(|_| rng.uniform(0.15, 0.85)).collect()).collect();
            for &y in &labels {
                for c in &centres[y] {
                    data.push((c + 0.03 * rng.normal::<f64>()).clamp(0.0, 1.0));
                }
            }
        }
        SyntheticKind::Moons => {
            if classes != 2 || d < 2 {
                return Err(HarnessError::Config("moons needs exactly 2 classes and d >= 2".into()));
            }
            for &y in &labels {
                let t = rng.uniform(0.0, PI);
                // Raw moons live in [-1, 2] x [-0.5, 1]; map both axes into [0.1, 0.9].
                let (mx, my) = if y == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
                let px = 0.1 + 0.8 * (mx + 1.0) / 3.0 + 0.01 * rng.normal::<f64>();
                let py = 0.1 + 0.8 * (my + 0.5) / 1.5 + 0.01 * rng.normal::<f64>();
                data.push(px.clamp(0.0, 1.0));
                data.push(py.clamp(0.0, 1.0));
                for _ in 2..d {
                    data.push((0.5 + 0.01 * rng.normal::<f64>()).clamp(0.0, 1.0));
                }
            }
        }
    }
    Ok(LabeledDataset::new(DenseMatrix::new(n, d, data)?, labels, classes)?)
}
