//! Probability densities sampled on a uniform real grid.
//!
//! Weights are probability masses per grid cell and are kept normalized to
//! unit sum. All operations used by the message updates (affine remap,
//! Gaussian blur, pointwise product) work on raw slices so the recovery loop
//! can reuse buffers; [`QuantizedDensity`] wraps them for the public API.

use crate::error::{Error, Result};

/// Ties within this relative distance of the maximum count as equal in
/// [`QuantizedDensity::argmax`].
const TIE_RELATIVE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDensity {
    grid_min: f64,
    step: f64,
    weights: Vec<f64>,
}

impl QuantizedDensity {
    pub fn new(grid_min: f64, step: f64, weights: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && grid_min.is_finite()) {
            return Err(Error::InvalidRbpConfig(format!(
                "bad grid (min {grid_min}, step {step})"
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidRbpConfig(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            grid_min,
            step,
            weights,
        })
    }

    /// Sample `f` on the grid and normalize.
    pub fn from_fn(grid_min: f64, step: f64, len: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let weights = (0..len).map(|i| f(grid_min + i as f64 * step)).collect();
        let mut d = Self::new(grid_min, step, weights)?;
        d.normalize()?;
        Ok(d)
    }

    pub(crate) fn from_parts(grid_min: f64, step: f64, weights: Vec<f64>) -> Self {
        Self {
            grid_min,
            step,
            weights,
        }
    }

    /// An all-zero density on the same grid, used as a scratch buffer.
    pub(crate) fn zeros_like(&self) -> Self {
        Self::from_parts(self.grid_min, self.step, vec![0.0; self.weights.len()])
    }

    pub fn grid_min(&self) -> f64 {
        self.grid_min
    }

    pub fn grid_max(&self) -> f64 {
        self.point(self.weights.len().saturating_sub(1))
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> f64 {
        self.grid_min + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.grid_min == other.grid_min && self.step == other.step && self.len() == other.len()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        normalize(&mut self.weights)
    }

    /// Linear interpolation between grid points; zero off the grid.
    pub fn value_at(&self, y: f64) -> f64 {
        interpolate(&self.weights, (y - self.grid_min) / self.step)
    }

    /// Grid point of maximum weight. Ties go to the point nearest zero.
    pub fn argmax(&self) -> f64 {
        let max = self
            .weights
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let floor = max * (1.0 - TIE_RELATIVE);
        let mut best: Option<f64> = None;
        for (i, &w) in self.weights.iter().enumerate() {
            if w >= floor {
                let y = self.point(i);
                if best.is_none_or(|b| y.abs() < b.abs()) {
                    best = Some(y);
                }
            }
        }
        best.unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        let total = self.total();
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.point(i))
            .sum::<f64>()
            / total
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let total = self.total();
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (self.point(i) - m).powi(2))
            .sum::<f64>()
            / total
    }

    /// Largest absolute pointwise difference from `other` on the same grid.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn normalize(w: &mut [f64]) -> Result<()> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DisjointSupport);
    }
    let inv = 1.0 / total;
    w.iter_mut().for_each(|v| *v *= inv);
    Ok(())
}

/// Value at fractional index `pos` by linear interpolation, zero outside.
#[inline]
pub(crate) fn interpolate(w: &[f64], pos: f64) -> f64 {
    let last = w.len() as f64 - 1.0;
    if !(pos >= 0.0 && pos <= last) {
        return 0.0;
    }
    let j = pos.floor();
    let frac = pos - j;
    let j = j as usize;
    if frac == 0.0 || j + 1 >= w.len() {
        w[j]
    } else {
        w[j] * (1.0 - frac) + w[j + 1] * frac
    }
}

/// `dst(y_i) = src(scale * y_i + shift)` on a shared grid.
///
/// Returns the mass of `src` lying outside the preimage of the grid, i.e.
/// the mass the remap drops.
pub(crate) fn remap_into(
    src: &[f64],
    grid_min: f64,
    step: f64,
    scale: f64,
    shift: f64,
    dst: &mut [f64],
) -> f64 {
    debug_assert_eq!(src.len(), dst.len());
    let n = src.len();
    // Fractional source index of output point i is pos0 + scale * i.
    let pos0 = (scale * grid_min + shift - grid_min) / step;
    for (i, d) in dst.iter_mut().enumerate() {
        *d = interpolate(src, pos0 + scale * i as f64);
    }
    let end = pos0 + scale * (n as f64 - 1.0);
    let (lo, hi) = if pos0 <= end {
        (pos0, end)
    } else {
        (end, pos0)
    };
    let tol = 1e-9;
    src.iter()
        .enumerate()
        .filter(|(j, _)| {
            let j = *j as f64;
            j < lo - tol || j > hi + tol
        })
        .map(|(_, w)| w)
        .sum()
}

/// Discrete zero-mean Gaussian kernel with standard deviation `sigma` (grid
/// units of `step`), truncated at five standard deviations and normalized.
pub(crate) fn gaussian_kernel(sigma: f64, step: f64) -> Vec<f64> {
    let half = (5.0 * sigma / step).ceil() as usize;
    if sigma <= 0.0 || half == 0 {
        return vec![1.0];
    }
    let mut k: Vec<f64> = (0..=2 * half)
        .map(|j| {
            let s = (j as f64 - half as f64) * step;
            (-s * s / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Convolve with a symmetric odd-length kernel, zero padding at the edges.
pub(crate) fn blur_into(src: &[f64], kernel: &[f64], dst: &mut [f64]) {
    let n = src.len();
    let half = kernel.len() / 2;
    for (i, d) in dst.iter_mut().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let mut acc = 0.0;
        for j in lo..=hi {
            acc += src[j] * kernel[j + half - i];
        }
        *d = acc;
    }
}

/// Normalized pointwise product. Falls back to the log domain when the
/// linear product underflows; fails only if the supports are disjoint.
pub(crate) fn product_into(a: &[f64], b: &[f64], dst: &mut [f64]) -> Result<()> {
    let mut total = 0.0;
    for ((d, x), y) in dst.iter_mut().zip(a).zip(b) {
        *d = x * y;
        total += *d;
    }
    if total > f64::MIN_POSITIVE * 1e3 && total.is_finite() {
        let inv = 1.0 / total;
        dst.iter_mut().for_each(|v| *v *= inv);
        return Ok(());
    }
    let mut peak = f64::NEG_INFINITY;
    for ((d, &x), &y) in dst.iter_mut().zip(a).zip(b) {
        *d = if x > 0.0 && y > 0.0 {
            x.ln() + y.ln()
        } else {
            f64::NEG_INFINITY
        };
        peak = peak.max(*d);
    }
    if peak == f64::NEG_INFINITY {
        return Err(Error::DisjointSupport);
    }
    dst.iter_mut().for_each(|v| *v = (*v - peak).exp());
    normalize(dst)
}
