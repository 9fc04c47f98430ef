//! Differentiable image transformations and their vector-Jacobian products.
//!
//! Flips are permutations, brightness and gamma act pixelwise (with zero
//! derivative where the clamp to `[0, 1]` is active), and crop-resize and
//! rotation are fixed bilinear resampling maps with zero padding, so their
//! adjoints scatter the same weights back.

mod resample;

use std::fmt;

use crate::numkit::{Scalar, SeededRng};
use crate::{Error, Result};
use resample::ResampleMap;

/// Image stored height × width × channels, channel fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageTensor<T> {
    /// Validated ingestion: values must lie in `[0, 1]`.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        let img = Self::from_values(height, width, channels, data)?;
        if let Some(v) = img.data.iter().find(|&&v| !(v >= T::zero() && v <= T::one())) {
            return Err(Error::InvalidArgument(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(img)
    }

    /// Unchecked value range, for perturbed inputs and cotangents.
    pub fn from_values(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidArgument(format!("image shape {height}x{width}x{channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch { expected: height * width * channels, found: data.len() });
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn zeros_like(&self) -> Self {
        Self { data: vec![T::zero(); self.data.len()], ..*self }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    fn at(&self, i: usize, j: usize, c: usize) -> T {
        self.data[(i * self.width + j) * self.channels + c]
    }

    fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        Self { data: self.data.iter().map(|&v| f(v)).collect(), ..*self }
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::InvalidArgument(format!(
                "image shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

/// Transformation family with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformKind<T> {
    Identity,
    FlipH,
    FlipV,
    /// Adds `delta`, then clamps to `[0, 1]`.
    Brightness { delta: T },
    /// `clamp(x, 0, 1)^gamma`.
    Gamma { gamma: T },
    /// Centered `fraction·H × fraction·W` window resized back to `H × W`.
    CropResize { fraction: T },
    /// Rotation about the image center, clockwise for positive degrees.
    Rotate { degrees: T },
}

impl<T: Scalar> TransformKind<T> {
    fn with_param(self, p: T) -> Self {
        match self {
            TransformKind::Brightness { .. } => TransformKind::Brightness { delta: p },
            TransformKind::Gamma { .. } => TransformKind::Gamma { gamma: p },
            TransformKind::CropResize { .. } => TransformKind::CropResize { fraction: p },
            TransformKind::Rotate { .. } => TransformKind::Rotate { degrees: p },
            other => other,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TransformKind::Gamma { gamma } if !(gamma > T::zero() && gamma.is_finite()) => {
                Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")))
            }
            TransformKind::CropResize { fraction } if !(fraction > T::zero() && fraction <= T::one()) => {
                Err(Error::InvalidArgument(format!("crop fraction must be in (0, 1], got {fraction}")))
            }
            TransformKind::Brightness { delta } if !delta.is_finite() => {
                Err(Error::InvalidArgument("brightness delta must be finite".into()))
            }
            TransformKind::Rotate { degrees } if !degrees.is_finite() => {
                Err(Error::InvalidArgument("rotation angle must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A transform, optionally stochastic: each [`sample`](Self::sample) applies
/// it with probability `apply_prob` (identity otherwise), drawing the
/// parameter uniformly from `param_range` when one is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformSpec<T> {
    pub kind: TransformKind<T>,
    pub stochastic: bool,
    pub apply_prob: T,
    pub param_range: Option<(T, T)>,
}

impl<T: Scalar> fmt::Display for TransformSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            TransformKind::Identity => "id".to_string(),
            TransformKind::FlipH => "flh".to_string(),
            TransformKind::FlipV => "flv".to_string(),
            TransformKind::Brightness { delta } => format!("bri({delta})"),
            TransformKind::Gamma { gamma } => format!("gam({gamma})"),
            TransformKind::CropResize { fraction } => format!("crop({fraction})"),
            TransformKind::Rotate { degrees } => format!("rot({degrees})"),
        };
        if self.stochastic {
            write!(f, "{name}~p{}", self.apply_prob)
        } else {
            f.write_str(&name)
        }
    }
}

/// Number of Monte Carlo draws per iteration for stochastic transform domains.
pub const DEFAULT_MC_SAMPLES: usize = 8;

impl<T: Scalar> TransformSpec<T> {
    pub fn deterministic(kind: TransformKind<T>) -> Result<Self> {
        kind.validate()?;
        Ok(Self { kind, stochastic: false, apply_prob: T::one(), param_range: None })
    }

    pub fn stochastic(kind: TransformKind<T>, apply_prob: T, param_range: Option<(T, T)>) -> Result<Self> {
        kind.validate()?;
        if !(apply_prob >= T::zero() && apply_prob <= T::one()) {
            return Err(Error::InvalidArgument(format!("apply_prob must be in [0, 1], got {apply_prob}")));
        }
        if let Some((lo, hi)) = param_range {
            if !(lo <= hi) {
                return Err(Error::InvalidArgument(format!("parameter range [{lo}, {hi}] is reversed")));
            }
            kind.with_param(lo).validate()?;
            kind.with_param(hi).validate()?;
        }
        Ok(Self { kind, stochastic: true, apply_prob, param_range })
    }

    pub fn identity() -> Self {
        Self { kind: TransformKind::Identity, stochastic: false, apply_prob: T::one(), param_range: None }
    }

    /// Named transform of the experiment suites: `id, flh, flv, bri, gam,
    /// crop, rot`.
    ///
    /// Deterministic settings: brightness +0.1, gamma 1.3, centered 0.8 crop,
    /// 30° clockwise rotation. Stochastic settings: rotation uniform in
    /// [−10°, 10°] and crop fraction uniform in [0.6, 1.0], always applied;
    /// the others applied with probability 0.8.
    pub fn named(name: &str, stochastic: bool) -> Result<Self> {
        let kind = match name {
            "id" | "identity" => return Ok(Self::identity()),
            "flh" => TransformKind::FlipH,
            "flv" => TransformKind::FlipV,
            "bri" => TransformKind::Brightness { delta: T::lit(0.1) },
            "gam" => TransformKind::Gamma { gamma: T::lit(1.3) },
            "crop" => TransformKind::CropResize { fraction: T::lit(0.8) },
            "rot" => TransformKind::Rotate { degrees: T::lit(30.0) },
            other => return Err(Error::InvalidArgument(format!("unknown transform '{other}'"))),
        };
        if !stochastic {
            return Self::deterministic(kind);
        }
        match kind {
            TransformKind::Rotate { .. } => Self::stochastic(kind, T::one(), Some((T::lit(-10.0), T::lit(10.0)))),
            TransformKind::CropResize { .. } => Self::stochastic(kind, T::one(), Some((T::lit(0.6), T::one()))),
            _ => Self::stochastic(kind, T::lit(0.8), None),
        }
    }

    /// Draws a deterministic instance of a stochastic transform.
    pub fn sample(&self, rng: &mut SeededRng) -> Result<Self> {
        if !self.stochastic {
            return Err(Error::InvalidArgument("sample called on a deterministic transform".into()));
        }
        if !rng.bernoulli(self.apply_prob.as_f64()) {
            return Ok(Self::identity());
        }
        let kind = match self.param_range {
            Some((lo, hi)) => self.kind.with_param(if lo == hi { lo } else { rng.uniform(lo, hi) }),
            None => self.kind,
        };
        Self::deterministic(kind)
    }

    fn resample_map(&self, h: usize, w: usize) -> Option<ResampleMap<T>> {
        match self.kind {
            TransformKind::CropResize { fraction } => Some(ResampleMap::crop_resize(h, w, fraction)),
            TransformKind::Rotate { degrees } => Some(ResampleMap::rotate(h, w, degrees)),
            _ => None,
        }
    }

    /// Applies the transform with its current parameter.
    pub fn apply(&self, img: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        self.kind.validate()?;
        let (h, w, ch) = img.shape();
        let (zero, one) = (T::zero(), T::one());
        Ok(match self.kind {
            TransformKind::Identity => img.clone(),
            TransformKind::FlipH => flip(img, true),
            TransformKind::FlipV => flip(img, false),
            TransformKind::Brightness { delta } => img.map_values(|v| (v + delta).max(zero).min(one)),
            TransformKind::Gamma { gamma } => img.map_values(|v| v.max(zero).min(one).powf(gamma)),
            TransformKind::CropResize { .. } | TransformKind::Rotate { .. } => {
                let map = self.resample_map(h, w).expect("resampling kind");
                ImageTensor { data: map.forward(&img.data, ch), ..*img }
            }
        })
    }

    /// `Jᵀ·cotangent`, with `J` the Jacobian of [`apply`](Self::apply) at `img`.
    pub fn vjp(&self, img: &ImageTensor<T>, cotangent: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        img.same_shape(cotangent)?;
        self.kind.validate()?;
        let (h, w, ch) = img.shape();
        let (zero, one) = (T::zero(), T::one());
        Ok(match self.kind {
            TransformKind::Identity => cotangent.clone(),
            TransformKind::FlipH => flip(cotangent, true),
            TransformKind::FlipV => flip(cotangent, false),
            TransformKind::Brightness { delta } => {
                let data = img
                    .data
                    .iter()
                    .zip(&cotangent.data)
                    .map(|(&x, &u)| {
                        let y = x + delta;
                        if y > zero && y < one {
                            u
                        } else {
                            zero
                        }
                    })
                    .collect();
                ImageTensor { data, ..*img }
            }
            TransformKind::Gamma { gamma } => {
                let data = img
                    .data
                    .iter()
                    .zip(&cotangent.data)
                    .map(|(&x, &u)| {
                        if x > zero && x < one {
                            u * gamma * x.powf(gamma - one)
                        } else {
                            zero
                        }
                    })
                    .collect();
                ImageTensor { data, ..*img }
            }
            TransformKind::CropResize { .. } | TransformKind::Rotate { .. } => {
                let map = self.resample_map(h, w).expect("resampling kind");
                ImageTensor { data: map.adjoint(&cotangent.data, ch), ..*img }
            }
        })
    }
}

fn flip<T: Scalar>(img: &ImageTensor<T>, horizontal: bool) -> ImageTensor<T> {
    let (h, w, ch) = img.shape();
    let mut data = Vec::with_capacity(img.data.len());
    for i in 0..h {
        for j in 0..w {
            let (si, sj) = if horizontal { (i, w - 1 - j) } else { (h - 1 - i, j) };
            for c in 0..ch {
                data.push(img.at(si, sj, c));
            }
        }
    }
    ImageTensor { data, ..*img }
}
