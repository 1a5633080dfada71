//! Interference-channel fading and received-frame synthesis.
//!
//! The interference channel is a set of independent real taps. Each tap is
//! either block fading (constant over the packet) or first-order Gauss-Markov:
//!
//! ```text
//! h(1)   ~ N(0, P)
//! h(k+1) = alpha * h(k) + sqrt(1 - alpha^2) * g(k),   g(k) ~ N(0, P)
//! ```
//!
//! which is stationary with power `P` and increment variance `2 (1 - alpha) P`.
//! The target channel is flat with a configurable gain.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::modem::SymbolStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingKind {
    Block,
    GaussMarkov { alpha: f64 },
}

/// How a block-fading tap picks its constant coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockGain {
    /// `h = gain`, deterministic.
    #[default]
    Unit,
    /// `h ~ N(0, gain^2)`, drawn once per packet.
    Random,
}

/// One interference path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: usize,
    /// RMS amplitude; the tap power is `gain^2`.
    pub gain: f64,
}

impl Tap {
    pub fn new(delay: usize, gain: f64) -> Self {
        Self { delay, gain }
    }

    pub fn power(&self) -> f64 {
        self.gain * self.gain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingModel {
    pub kind: FadingKind,
    pub block_gain: BlockGain,
    pub taps: Vec<Tap>,
}

impl FadingModel {
    /// Single unit tap, constant over the packet.
    pub fn block_unit() -> Self {
        Self {
            kind: FadingKind::Block,
            block_gain: BlockGain::Unit,
            taps: vec![Tap::new(0, 1.0)],
        }
    }

    pub fn gauss_markov(alpha: f64, power: f64) -> Self {
        Self {
            kind: FadingKind::GaussMarkov { alpha },
            block_gain: BlockGain::Unit,
            taps: vec![Tap::new(0, power.sqrt())],
        }
    }

    pub fn with_taps(mut self, taps: Vec<Tap>) -> Self {
        self.taps = taps;
        self
    }

    /// Per-symbol correlation; block fading is `alpha = 1`.
    pub fn alpha(&self) -> f64 {
        match self.kind {
            FadingKind::Block => 1.0,
            FadingKind::GaussMarkov { alpha } => alpha,
        }
    }

    pub fn max_delay(&self) -> usize {
        self.taps.last().map_or(0, |t| t.delay)
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        if self.taps.is_empty() {
            return Err(Error::InvalidTaps("at least one tap is required".into()));
        }
        if self.taps.windows(2).any(|w| w[0].delay >= w[1].delay) {
            return Err(Error::InvalidTaps(
                "delays must be strictly increasing".into(),
            ));
        }
        if self
            .taps
            .iter()
            .any(|t| !t.gain.is_finite() || t.gain < 0.0)
        {
            return Err(Error::InvalidTaps(
                "gains must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Coefficient sequence of one tap.
#[derive(Debug, Clone, PartialEq)]
pub struct TapRealization {
    pub delay: usize,
    pub coeffs: Vec<f64>,
}

impl TapRealization {
    /// `delta(k) = h(k+1) - h(k)`, length `N - 1`.
    pub fn delta(&self) -> Vec<f64> {
        self.coeffs.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingRealization {
    pub taps: Vec<TapRealization>,
}

impl FadingRealization {
    pub fn len(&self) -> usize {
        self.taps.first().map_or(0, |t| t.coeffs.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn delays(&self) -> Vec<usize> {
        self.taps.iter().map(|t| t.delay).collect()
    }

    /// Per-tap `(delay, h(1))`, the genie knowledge of a traditional canceller.
    pub fn initial_coefficients(&self) -> Vec<(usize, f64)> {
        self.taps.iter().map(|t| (t.delay, t.coeffs[0])).collect()
    }

    /// A block realization with the given constant coefficient per tap.
    pub fn constant(taps: &[(usize, f64)], n: usize) -> Self {
        Self {
            taps: taps
                .iter()
                .map(|&(delay, h)| TapRealization {
                    delay,
                    coeffs: vec![h; n],
                })
                .collect(),
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw the per-tap coefficient sequences for an `n`-symbol packet.
pub fn realize_fading<R: Rng + ?Sized>(
    model: &FadingModel,
    n: usize,
    rng: &mut R,
) -> Result<FadingRealization> {
    model.validate()?;
    if n < 2 {
        return Err(Error::StreamTooShort(n));
    }
    let taps = model
        .taps
        .iter()
        .map(|tap| {
            let coeffs = match model.kind {
                FadingKind::Block => {
                    let h = match model.block_gain {
                        BlockGain::Unit => tap.gain,
                        BlockGain::Random => tap.gain * normal(rng),
                    };
                    vec![h; n]
                }
                FadingKind::GaussMarkov { alpha } => {
                    let mut coeffs = Vec::with_capacity(n);
                    let mut h = tap.gain * normal(rng);
                    coeffs.push(h);
                    if alpha == 1.0 {
                        // No innovations: same draws as a random block tap.
                        coeffs.resize(n, h);
                    } else {
                        let innovation = tap.gain * (1.0 - alpha * alpha).sqrt();
                        for _ in 1..n {
                            h = alpha * h + innovation * normal(rng);
                            coeffs.push(h);
                        }
                    }
                    coeffs
                }
            };
            TapRealization {
                delay: tap.delay,
                coeffs,
            }
        })
        .collect();
    Ok(FadingRealization { taps })
}

/// Gain of the flat target channel.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetGain {
    Constant(f64),
    PerSymbol(Vec<f64>),
}

impl TargetGain {
    fn at(&self, k: usize) -> f64 {
        match self {
            TargetGain::Constant(g) => *g,
            TargetGain::PerSymbol(g) => g[k],
        }
    }
}

/// Received samples together with the ground truth used by the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub r: Vec<f64>,
    /// Desired signal `x'(k)`.
    pub x_prime: Vec<f64>,
    pub noise: Vec<f64>,
    /// `h(k, d) I(k - d)` for each tap, in tap order.
    pub interference: Vec<Vec<f64>>,
    pub sigma2: f64,
}

impl ReceivedFrame {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Desired signal plus noise, the ideal output of any canceller.
    pub fn dsn(&self) -> Vec<f64> {
        self.x_prime
            .iter()
            .zip(&self.noise)
            .map(|(x, n)| x + n)
            .collect()
    }
}

/// Superimpose target, delayed interference taps and white Gaussian noise.
///
/// Interferer symbols before the start of the packet are taken as zero, so a
/// tap with delay `d` contributes nothing to the first `d` samples.
pub fn synthesize<R: Rng + ?Sized>(
    x: &SymbolStream,
    interferer: &SymbolStream,
    fading: &FadingRealization,
    target_gain: &TargetGain,
    sigma2: f64,
    rng: &mut R,
) -> Result<ReceivedFrame> {
    let n = x.len();
    if interferer.len() != n {
        return Err(Error::LengthMismatch {
            what: "interferer stream",
            expected: n,
            got: interferer.len(),
        });
    }
    for tap in &fading.taps {
        if tap.coeffs.len() != n {
            return Err(Error::LengthMismatch {
                what: "fading realization",
                expected: n,
                got: tap.coeffs.len(),
            });
        }
    }
    if let TargetGain::PerSymbol(g) = target_gain {
        if g.len() != n {
            return Err(Error::LengthMismatch {
                what: "target gain",
                expected: n,
                got: g.len(),
            });
        }
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::InvalidNoiseVariance(sigma2));
    }

    let sigma = sigma2.sqrt();
    let x_prime: Vec<f64> = x
        .symbols()
        .iter()
        .enumerate()
        .map(|(k, &s)| target_gain.at(k) * f64::from(s))
        .collect();
    let noise: Vec<f64> = (0..n).map(|_| sigma * normal(rng)).collect();
    let symbols = interferer.symbols();
    let interference: Vec<Vec<f64>> = fading
        .taps
        .iter()
        .map(|tap| {
            (0..n)
                .map(|k| {
                    if k >= tap.delay {
                        tap.coeffs[k] * f64::from(symbols[k - tap.delay])
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let r = (0..n)
        .map(|k| {
            let i: f64 = interference.iter().map(|c| c[k]).sum();
            x_prime[k] + i + noise[k]
        })
        .collect();
    Ok(ReceivedFrame {
        r,
        x_prime,
        noise,
        interference,
        sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{generate_stream, Constellation, Role};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stream(symbols: &[i32], role: Role) -> SymbolStream {
        SymbolStream::new(symbols.to_vec(), role, &Constellation::bpsk()).unwrap()
    }

    #[test]
    fn block_unit_is_constant_with_zero_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = realize_fading(&FadingModel::block_unit(), 5, &mut rng).unwrap();
        assert_eq!(f.taps[0].coeffs, vec![1.0; 5]);
        assert!(f.taps[0].delta().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn alpha_one_matches_random_block() {
        let block = FadingModel {
            kind: FadingKind::Block,
            block_gain: BlockGain::Random,
            taps: vec![Tap::new(0, 1.3), Tap::new(2, 0.4)],
        };
        let gm = FadingModel {
            kind: FadingKind::GaussMarkov { alpha: 1.0 },
            ..block.clone()
        };
        let a = realize_fading(&block, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = realize_fading(&gm, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_alpha_and_taps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for alpha in [0.0, -0.5, 1.5, f64::NAN] {
            let m = FadingModel::gauss_markov(alpha, 1.0);
            assert!(matches!(
                realize_fading(&m, 10, &mut rng),
                Err(Error::InvalidAlpha(_))
            ));
        }
        let m = FadingModel::block_unit().with_taps(vec![Tap::new(2, 1.0), Tap::new(0, 1.0)]);
        assert!(matches!(
            realize_fading(&m, 10, &mut rng),
            Err(Error::InvalidTaps(_))
        ));
        let m = FadingModel::block_unit().with_taps(vec![Tap::new(1, 1.0), Tap::new(1, 1.0)]);
        assert!(matches!(m.validate(), Err(Error::InvalidTaps(_))));
        assert!(realize_fading(&FadingModel::block_unit(), 1, &mut rng).is_err());
    }

    #[test]
    fn gauss_markov_increment_variance() {
        // Oracle: stationary increments have variance 2 (1 - alpha) P.
        let alpha = 1.0 - 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let f =
            realize_fading(&FadingModel::gauss_markov(alpha, 1.0), 1_000_000, &mut rng).unwrap();
        let d = f.taps[0].delta();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        let expected = 2.0 * (1.0 - alpha);
        assert!(
            (var / expected - 1.0).abs() < 0.05,
            "var {var} vs {expected}"
        );
    }

    #[test]
    fn gauss_markov_is_stationary_across_the_packet() {
        let alpha = 0.95;
        let trials = 20_000;
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = FadingModel::gauss_markov(alpha, 2.0);
        let mut sums = vec![0.0; n];
        let mut lag1 = 0.0;
        for _ in 0..trials {
            let h = &realize_fading(&model, n, &mut rng).unwrap().taps[0].coeffs;
            for (s, v) in sums.iter_mut().zip(h) {
                *s += v * v;
            }
            lag1 += h[20] * h[21];
        }
        for (k, s) in sums.iter().enumerate() {
            let p = s / trials as f64;
            assert!((p / 2.0 - 1.0).abs() < 0.05, "power drift at k={k}: {p}");
        }
        let corr = lag1 / trials as f64;
        assert!((corr / (alpha * 2.0) - 1.0).abs() < 0.05, "lag-1 {corr}");
    }

    #[test]
    fn superposition_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = stream(&[1, -1], Role::Target);
        let i = stream(&[1, -1], Role::Interferer);
        let half = FadingRealization::constant(&[(0, 0.5)], 2);
        let f = synthesize(&x, &i, &half, &TargetGain::Constant(0.0), 0.0, &mut rng).unwrap();
        assert_eq!(f.r, vec![0.5, -0.5]);

        let i = stream(&[1, 1], Role::Interferer);
        let unit = FadingRealization::constant(&[(0, 1.0)], 2);
        let f = synthesize(&x, &i, &unit, &TargetGain::Constant(1.0), 0.0, &mut rng).unwrap();
        assert_eq!(f.r, vec![2.0, 0.0]);
    }

    #[test]
    fn delayed_tap_starts_after_its_delay() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = stream(&[1, 1, 1, 1, 1], Role::Target);
        let i = stream(&[1, -1, 1, 1, -1], Role::Interferer);
        let f = FadingRealization::constant(&[(0, 1.0), (2, 1.0)], 5);
        let fr = synthesize(&x, &i, &f, &TargetGain::Constant(0.0), 0.0, &mut rng).unwrap();
        assert_eq!(fr.interference[1], vec![0.0, 0.0, 1.0, -1.0, 1.0]);
        assert_eq!(fr.r, vec![1.0, -1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn decomposition_identity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 256;
        let x = generate_stream(4, n, Role::Target, &mut rng).unwrap();
        let i = generate_stream(2, n, Role::Interferer, &mut rng).unwrap();
        let model = FadingModel::gauss_markov(0.99, 1.0).with_taps(vec![
            Tap::new(0, 1.0),
            Tap::new(1, 0.5),
            Tap::new(3, 0.2),
        ]);
        let fad = realize_fading(&model, n, &mut rng).unwrap();
        let fr = synthesize(&x, &i, &fad, &TargetGain::Constant(0.8), 0.3, &mut rng).unwrap();
        for k in 0..n {
            let mut rest = fr.r[k] - fr.x_prime[k] - fr.noise[k];
            for c in &fr.interference {
                rest -= c[k];
            }
            assert!(rest.abs() <= 1e-12, "k={k}: {rest}");
        }
    }

    #[test]
    fn noise_kurtosis_is_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 200_000;
        let x = generate_stream(2, n, Role::Target, &mut rng).unwrap();
        let i = generate_stream(2, n, Role::Interferer, &mut rng).unwrap();
        let fad = FadingRealization::constant(&[(0, 1.0)], n);
        let fr = synthesize(&x, &i, &fad, &TargetGain::Constant(1.0), 0.5, &mut rng).unwrap();
        let m2 = fr.noise.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let m4 = fr.noise.iter().map(|v| v.powi(4)).sum::<f64>() / n as f64;
        assert!((m2 - 0.5).abs() < 0.01);
        assert!((m4 / (m2 * m2) - 3.0).abs() < 0.05);
    }

    #[test]
    fn synthesize_checks_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = stream(&[1, -1, 1], Role::Target);
        let i = stream(&[1, -1], Role::Interferer);
        let f = FadingRealization::constant(&[(0, 1.0)], 3);
        assert!(matches!(
            synthesize(&x, &i, &f, &TargetGain::Constant(1.0), 0.0, &mut rng),
            Err(Error::LengthMismatch { .. })
        ));
        let i = stream(&[1, -1, 1], Role::Interferer);
        let short = FadingRealization::constant(&[(0, 1.0)], 2);
        assert!(synthesize(&x, &i, &short, &TargetGain::Constant(1.0), 0.0, &mut rng).is_err());
        assert!(synthesize(&x, &i, &f, &TargetGain::Constant(1.0), -1.0, &mut rng).is_err());
    }
}
