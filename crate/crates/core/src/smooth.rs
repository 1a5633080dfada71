//! Recovery by smoothing (BKIC-S).
//!
//! Scaling each combined sample by `I(1)/I(k)` makes the chain telescope:
//! `u(k) = y(1) - I(1)/I(k+1) * y(k+1)` with `y = x' + n`. Averaging the
//! partial sums estimates `y(1)`, and every other sample follows from it.
//! The estimate of `y(1)` is shared by all samples, so the residual
//! interference is `w(k) = I(k)/I(1) * w(1)`.

use crate::cancel::{CombinedSignal, Recovery};
use crate::channel::ReceivedFrame;
use crate::error::{Error, Result};
use crate::modem::SymbolStream;

/// Intermediate values of one smoothing pass over a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingState {
    /// Telescoped partial sums, one per combined sample.
    pub u: Vec<f64>,
    /// Smoothed estimate of the first desired-plus-noise sample.
    pub z1: f64,
    /// Recovered chain, one longer than `u`.
    pub z: Vec<f64>,
}

/// Run the telescoping recursion over a chain of `t.len() + 1` nodes.
///
/// `interferer` must hold the `t.len() + 1` symbols aligned with the nodes.
pub fn telescope(t: &[f64], interferer: &[i32]) -> SmoothingState {
    assert!(
        !t.is_empty(),
        "telescope needs at least one combined sample"
    );
    assert_eq!(interferer.len(), t.len() + 1);
    let first = f64::from(interferer[0]);
    let mut u = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for (tk, &ik) in t.iter().zip(interferer) {
        acc += first / f64::from(ik) * tk;
        u.push(acc);
    }
    let z1 = u.iter().sum::<f64>() / u.len() as f64;
    let mut z = Vec::with_capacity(interferer.len());
    z.push(z1);
    for (&ik, &prev) in interferer[1..].iter().zip(&u) {
        z.push(f64::from(ik) / first * (z1 - prev));
    }
    SmoothingState { u, z1, z }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub z: Vec<f64>,
    /// Set when the active range held fewer than two combined samples and the
    /// input was returned unchanged.
    pub degenerate: bool,
}

/// Recover the full-length signal from one combining pass.
pub fn smooth_recover(combined: &CombinedSignal, interferer: &SymbolStream) -> Result<Smoothed> {
    if interferer.len() != combined.len() {
        return Err(Error::LengthMismatch {
            what: "interferer stream",
            expected: combined.len(),
            got: interferer.len(),
        });
    }
    let t = combined.chain_observations();
    if t.len() < 2 {
        return Ok(Smoothed {
            z: combined.source.clone(),
            degenerate: true,
        });
    }
    let state = telescope(t, combined.chain_interferer(interferer));
    Ok(Smoothed {
        z: combined.assemble(&state.z),
        degenerate: false,
    })
}

/// BKIC-S as a [`Recovery`] strategy.
#[derive(Debug, Clone, Copy, Default)]
pub struct Smoothing;

impl Recovery for Smoothing {
    fn recover(&self, combined: &CombinedSignal, interferer: &SymbolStream) -> Result<Vec<f64>> {
        smooth_recover(combined, interferer).map(|s| s.z)
    }
}

/// Residual interference `w = z - x' - n` against the frame's ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub w: Vec<f64>,
    /// Sample variance about the sample mean.
    pub variance: f64,
    /// `mean(w^2)`.
    pub mean_square: f64,
}

pub fn residual(z: &[f64], frame: &ReceivedFrame) -> Result<Residual> {
    if z.len() != frame.len() {
        return Err(Error::LengthMismatch {
            what: "recovered signal",
            expected: frame.len(),
            got: z.len(),
        });
    }
    let w: Vec<f64> = z
        .iter()
        .zip(frame.x_prime.iter().zip(&frame.noise))
        .map(|(z, (x, n))| z - x - n)
        .collect();
    let len = w.len() as f64;
    let mean = w.iter().sum::<f64>() / len;
    let mean_square = w.iter().map(|v| v * v).sum::<f64>() / len;
    let variance = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len;
    Ok(Residual {
        w,
        variance,
        mean_square,
    })
}
