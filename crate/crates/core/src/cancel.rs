//! Adjacent-symbol combining and the successive per-tap canceller.
//!
//! For a tap with delay `d`, each sample in the active range is combined with
//! its successor so that the known interference cancels whenever the channel
//! is locally constant:
//!
//! ```text
//! t(k) = r(k) - I(k-d) / I(k+1-d) * r(k+1)
//! ```
//!
//! Indices are 0-based here. The active range is `d ..= N-2`; samples before
//! it carry no tap-`d` interference and are passed through untouched.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::modem::SymbolStream;

/// Output of one combining pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedSignal {
    /// Length `N - 1`. Equal to the input outside the active range.
    pub t: Vec<f64>,
    /// Combining weight per index of `t`; `0` outside the active range.
    pub weights: Vec<f64>,
    /// Indices of `t` where combining was applied.
    pub active: Range<usize>,
    pub delay: usize,
    /// The length-`N` input the pass was formed from.
    pub source: Vec<f64>,
}

impl CombinedSignal {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Combined samples of the active range: the check observations of the
    /// recovery chain.
    pub fn chain_observations(&self) -> &[f64] {
        &self.t[self.active.clone()]
    }

    /// Interferer symbols aligned with the chain: node `j` of the chain is
    /// sample `delay + j` and sees interferer symbol `j`.
    pub fn chain_interferer<'a>(&self, interferer: &'a SymbolStream) -> &'a [i32] {
        &interferer.symbols()[..self.len() - self.delay]
    }

    /// Stitch a recovered chain (`N - delay` values) behind the pass-through
    /// head of the source.
    pub fn assemble(&self, chain: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.len());
        z.extend_from_slice(&self.source[..self.delay]);
        z.extend_from_slice(chain);
        z
    }
}

/// Form `t(k)` for the tap at `delay`.
pub fn combine(r: &[f64], interferer: &SymbolStream, delay: usize) -> Result<CombinedSignal> {
    let n = r.len();
    if interferer.len() != n {
        return Err(Error::LengthMismatch {
            what: "interferer stream",
            expected: n,
            got: interferer.len(),
        });
    }
    if n < delay + 2 {
        return Err(Error::EmptyActiveRange { delay, len: n });
    }
    let symbols = interferer.symbols();
    let mut t = r[..n - 1].to_vec();
    let mut weights = vec![0.0; n - 1];
    for k in delay..n - 1 {
        let w = f64::from(symbols[k - delay]) / f64::from(symbols[k + 1 - delay]);
        weights[k] = w;
        t[k] = r[k] - w * r[k + 1];
    }
    Ok(CombinedSignal {
        t,
        weights,
        active: delay..n - 1,
        delay,
        source: r.to_vec(),
    })
}

/// Second step of the canceller: rebuild a full-length estimate of the
/// desired signal plus noise from a combined signal.
pub trait Recovery {
    fn recover(&self, combined: &CombinedSignal, interferer: &SymbolStream) -> Result<Vec<f64>>;
}

impl<R: Recovery + ?Sized> Recovery for &R {
    fn recover(&self, combined: &CombinedSignal, interferer: &SymbolStream) -> Result<Vec<f64>> {
        (**self).recover(combined, interferer)
    }
}

/// Cancel every tap in ascending delay order, recovering after each pass.
pub fn successive_cancel<R: Recovery + ?Sized>(
    r: &[f64],
    interferer: &SymbolStream,
    delays: &[usize],
    recovery: &R,
) -> Result<Vec<f64>> {
    if delays.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidTaps(
            "delays must be strictly increasing".into(),
        ));
    }
    let mut z = r.to_vec();
    for &d in delays {
        let combined = combine(&z, interferer, d)?;
        z = recovery.recover(&combined, interferer)?;
        debug_assert_eq!(z.len(), r.len());
    }
    Ok(z)
}
