//! Traditional known-interference cancellation with a genie initial channel.
//!
//! The canceller knows every tap's true coefficient at the first symbol and
//! holds it for the whole packet, so under drift the error grows with `k`.

use crate::channel::{FadingRealization, ReceivedFrame};
use crate::error::{Error, Result};
use crate::modem::SymbolStream;

/// `z(k) = r(k) - sum_d h_init(d) I(k - d)`, with `I(j) = 0` before the packet.
pub fn traditional_kic(
    frame: &ReceivedFrame,
    interferer: &SymbolStream,
    h_init: &[(usize, f64)],
) -> Result<Vec<f64>> {
    let n = frame.len();
    if interferer.len() != n {
        return Err(Error::LengthMismatch {
            what: "interferer stream",
            expected: n,
            got: interferer.len(),
        });
    }
    let symbols = interferer.symbols();
    let mut z = frame.r.clone();
    for &(delay, h) in h_init {
        for k in delay..n {
            z[k] -= h * f64::from(symbols[k - delay]);
        }
    }
    Ok(z)
}

/// Residual left by [`traditional_kic`]: `sum_d (h(k,d) - h(1,d)) I(k-d)`.
pub fn drift_residual(fading: &FadingRealization, interferer: &SymbolStream) -> Vec<f64> {
    let n = interferer.len();
    let symbols = interferer.symbols();
    let mut w = vec![0.0; n];
    for tap in &fading.taps {
        let h0 = tap.coeffs[0];
        for k in tap.delay..n {
            w[k] += (tap.coeffs[k] - h0) * f64::from(symbols[k - tap.delay]);
        }
    }
    w
}
