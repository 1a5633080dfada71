//! Closed-form theory for blind cancellation and the statistics used to tie
//! Monte-Carlo output back to it.

use crate::modem::Constellation;

/// Parameters of the residual-interference bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    /// Packet length.
    pub n: usize,
    pub sigma2: f64,
    pub alpha: f64,
    /// Desired-signal power.
    pub p_x: f64,
    /// Interference-channel power.
    pub p_i: f64,
    /// Interferer constellation order.
    pub q: u32,
    /// `E{1/I^2}` over the interferer constellation.
    pub e_inv_i2: f64,
}

impl TheoryInputs {
    /// BPSK on both links with unit powers.
    pub fn bpsk(n: usize, sigma2: f64, alpha: f64) -> Self {
        Self {
            n,
            sigma2,
            alpha,
            p_x: 1.0,
            p_i: 1.0,
            q: 2,
            e_inv_i2: 1.0,
        }
    }

    /// Fill the constellation moments from the interferer order.
    pub fn with_interferer(mut self, c: &Constellation) -> Self {
        self.q = c.order();
        self.e_inv_i2 = c.mean_inverse_square();
        self
    }

    fn e_i2(&self) -> f64 {
        let q = f64::from(self.q);
        (q * q - 1.0) / 3.0
    }
}

/// Upper bound on the BKIC-S residual variance:
///
/// `mu = E{I^2} ((P_x + sigma^2)/(N-1) + N P_I (1 - alpha^2)/3) E{1/I^2}`.
pub fn residual_variance_bound(inp: &TheoryInputs) -> f64 {
    assert!(inp.n >= 2, "packet length must be at least 2");
    let n = inp.n as f64;
    let drift = n * inp.p_i * (1.0 - inp.alpha * inp.alpha) / 3.0;
    inp.e_i2() * ((inp.p_x + inp.sigma2) / (n - 1.0) + drift) * inp.e_inv_i2
}

/// The same bound before the large-`N` simplification of the drift term,
/// written in terms of the increment variance `sigma_delta2`.
pub fn residual_variance_exact(inp: &TheoryInputs, sigma_delta2: f64) -> f64 {
    assert!(inp.n >= 2, "packet length must be at least 2");
    let n = inp.n as f64;
    let drift = n * (2.0 * n - 1.0) / (6.0 * (n - 1.0)) * sigma_delta2;
    inp.e_i2() * ((inp.p_x + inp.sigma2) / (n - 1.0) + drift) * inp.e_inv_i2
}

/// Residual after successive per-tap cancellation of `taps` (`(delay, power)`,
/// ascending delays). Each pass sees the not-yet-cancelled taps and the
/// residual of earlier passes as extra noise on a chain of `N - delay` nodes.
pub fn multipath_residual_variance(inp: &TheoryInputs, taps: &[(usize, f64)]) -> f64 {
    let mut accumulated = 0.0;
    for (m, &(delay, power)) in taps.iter().enumerate() {
        let remaining: f64 = taps[m + 1..].iter().map(|&(_, p)| p).sum();
        let pass = TheoryInputs {
            n: inp.n - delay,
            p_x: inp.p_x + remaining,
            sigma2: inp.sigma2 + accumulated,
            p_i: power,
            ..*inp
        };
        accumulated += residual_variance_bound(&pass);
    }
    accumulated
}

/// Standard normal upper tail.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// BPSK bit error rate with residual `mu` treated as extra Gaussian noise.
pub fn theoretical_ber(mu: f64, sigma2: f64, p_x: f64) -> f64 {
    q_function((p_x / (mu + sigma2)).sqrt())
}

/// Symbol error rate of unit-spaced `q`-ASK (odd-integer points) under the
/// same Gaussian approximation. Reduces to [`theoretical_ber`] for `q = 2`.
pub fn theoretical_ser(mu: f64, sigma2: f64, q: u32) -> f64 {
    let q = f64::from(q);
    2.0 * (1.0 - 1.0 / q) * q_function(1.0 / (mu + sigma2).sqrt())
}

/// Packet length minimizing [`residual_variance_exact`] at large `N`.
pub fn optimal_n(inp: &TheoryInputs, sigma_delta2: f64) -> f64 {
    1.0 + (3.0 * (inp.p_x + inp.sigma2) / sigma_delta2).sqrt()
}

/// SNR loss of a canceller with residual `mu` against the clean link, in dB.
pub fn snr_loss(mu: f64, sigma2: f64) -> f64 {
    10.0 * (1.0 + mu / sigma2).log10()
}

/// `sigma^2 = P_x / 10^(snr/10)` with `P_x = 1`.
pub fn snr_db_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// SNR (dB) at which a BER curve crosses `target`, interpolating `log10(ber)`
/// linearly between the bracketing points. `None` when the curve does not
/// bracket the target or a bracketing BER is zero.
pub fn crossing_snr(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let lt = target.log10();
    curve.windows(2).find_map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if b0 <= 0.0
            || b1 <= 0.0
            || !((b0 >= target && b1 <= target) || (b0 <= target && b1 >= target))
        {
            return None;
        }
        let (l0, l1) = (b0.log10(), b1.log10());
        if l0 == l1 {
            return Some(s0);
        }
        Some(s0 + (lt - l0) / (l1 - l0) * (s1 - s0))
    })
}

/// SNR (dB) where clean BPSK reaches `target`, by bisection on the closed form.
pub fn clean_snr_for_ber(target: f64) -> f64 {
    let (mut lo, mut hi) = (-20.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if theoretical_ber(0.0, snr_db_to_sigma2(mid), 1.0) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTolerances {
    /// Bound on `|mean| / std`.
    pub mean: f64,
    pub skew: f64,
    /// Bound on `|kurtosis - 3|`.
    pub excess_kurtosis: f64,
}

impl Default for MomentTolerances {
    fn default() -> Self {
        Self {
            mean: 0.05,
            skew: 0.1,
            excess_kurtosis: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub skew: f64,
    pub kurtosis: f64,
    pub passed: bool,
}

/// Compare the first four sample moments against a Gaussian.
pub fn gaussian_moment_test(samples: &[f64], tol: &MomentTolerances) -> MomentStats {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &s in samples {
        let d = s - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let skew = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);
    let passed = samples.len() >= 8
        && m2 > 0.0
        && mean.abs() / m2.sqrt() <= tol.mean
        && skew.abs() <= tol.skew
        && (kurtosis - 3.0).abs() <= tol.excess_kurtosis;
    MomentStats {
        count: samples.len(),
        mean,
        variance: m2,
        skew,
        kurtosis,
        passed,
    }
}
