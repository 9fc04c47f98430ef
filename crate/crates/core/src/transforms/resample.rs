use crate::numkit::Scalar;

/// Linear resampling map: every output pixel is a bilinear combination of at
/// most four source pixels, out-of-bounds taps contribute zero.
pub(super) struct ResampleMap<T> {
    taps: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> ResampleMap<T> {
    fn from_source_coords(h: usize, w: usize, src: impl Fn(usize, usize) -> (T, T)) -> Self {
        let mut taps = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                let (sy, sx) = src(i, j);
                taps.push(bilinear_taps(h, w, sy, sx));
            }
        }
        Self { taps }
    }

    /// Centered window of `fraction` times the size, stretched back to `h × w`
    /// with pixel-center alignment.
    pub(super) fn crop_resize(h: usize, w: usize, fraction: T) -> Self {
        let half = T::lit(0.5);
        let origin = |n: usize| (T::from_count(n) - fraction * T::from_count(n)) * half;
        let (top, left) = (origin(h), origin(w));
        Self::from_source_coords(h, w, |i, j| {
            (
                top + (T::from_count(i) + half) * fraction - half,
                left + (T::from_count(j) + half) * fraction - half,
            )
        })
    }

    /// Rotation by `degrees` clockwise about the center, sampled through the
    /// inverse rotation.
    pub(super) fn rotate(h: usize, w: usize, degrees: T) -> Self {
        let theta = degrees.to_radians();
        let (s, c) = theta.sin_cos();
        let half = T::lit(0.5);
        let cy = (T::from_count(h) - T::one()) * half;
        let cx = (T::from_count(w) - T::one()) * half;
        Self::from_source_coords(h, w, |i, j| {
            let dy = T::from_count(i) - cy;
            let dx = T::from_count(j) - cx;
            (cy - s * dx + c * dy, cx + c * dx + s * dy)
        })
    }

    pub(super) fn forward(&self, data: &[T], ch: usize) -> Vec<T> {
        let mut out = vec![T::zero(); data.len()];
        for (p, taps) in self.taps.iter().enumerate() {
            for &(src, wt) in taps {
                for c in 0..ch {
                    out[p * ch + c] = out[p * ch + c] + wt * data[src * ch + c];
                }
            }
        }
        out
    }

    pub(super) fn adjoint(&self, cot: &[T], ch: usize) -> Vec<T> {
        let mut out = vec![T::zero(); cot.len()];
        for (p, taps) in self.taps.iter().enumerate() {
            for &(src, wt) in taps {
                for c in 0..ch {
                    out[src * ch + c] = out[src * ch + c] + wt * cot[p * ch + c];
                }
            }
        }
        out
    }
}

fn bilinear_taps<T: Scalar>(h: usize, w: usize, sy: T, sx: T) -> Vec<(usize, T)> {
    let (y0, x0) = (sy.floor(), sx.floor());
    let (fy, fx) = (sy - y0, sx - x0);
    let one = T::one();
    let mut taps = Vec::with_capacity(4);
    for (dy, wy) in [(0i64, one - fy), (1, fy)] {
        for (dx, wx) in [(0i64, one - fx), (1, fx)] {
            let wt = wy * wx;
            if wt == T::zero() {
                continue;
            }
            let (Some(yi), Some(xi)) = (y0.to_i64(), x0.to_i64()) else { continue };
            let (y, x) = (yi + dy, xi + dx);
            if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                taps.push((y as usize * w + x as usize, wt));
            }
        }
    }
    taps
}
