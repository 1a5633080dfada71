//! Recovery by real-valued belief propagation (BKIC-RBP).
//!
//! The unknowns are the desired-signal-plus-noise samples `y(k) = x'(k) + n(k)`
//! of the active chain. Each combined sample ties two neighbours together:
//!
//! ```text
//! t(k) = y(k) - I(k)/I(k+1) * y(k+1) - I(k) * delta(k)
//! ```
//!
//! so the factor graph is a chain and one top-to-bottom plus one
//! bottom-to-top sweep yields exact marginals. Messages are densities of
//! `y(k)` on a shared grid. Check updates are affine remaps (blurred by the
//! channel-increment prior unless fading is assumed block); variable updates
//! multiply in the a-priori density, a uniform amplitude smeared by the noise.

mod density;

pub use density::QuantizedDensity;

use crate::cancel::{CombinedSignal, Recovery};
use crate::error::{Error, Result};
use crate::modem::SymbolStream;
use density::{blur_into, gaussian_kernel, product_into, remap_into};

/// Remaps that drop more than this much mass off the grid are counted in
/// [`RbpOutput::clipped_updates`].
pub const CLIP_TOLERANCE: f64 = 1e-3;

/// Minimum number of grid points across the prior support.
pub const MIN_GRID_POINTS: usize = 16;

/// Width of the guard band around the prior support, in noise standard
/// deviations.
pub const GUARD_SIGMAS: f64 = 6.0;

/// How the per-node point estimate is read off the final density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimate {
    /// Grid point of maximum posterior density, ties toward zero.
    #[default]
    Argmax,
    /// Posterior mean.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbpConfig {
    /// Bound on the desired-signal power; the prior is uniform on
    /// `[-sqrt(p_max), sqrt(p_max)]`.
    pub p_max: f64,
    /// Noise variance.
    pub sigma2: f64,
    /// Assumed variance of the per-symbol channel increment.
    pub sigma_delta2: f64,
    /// Quantization interval of the grid.
    pub step: f64,
    /// Treat the interference channel as constant over the packet.
    pub block_fading: bool,
    pub estimate: Estimate,
}

impl RbpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRbpConfig(msg));
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return bad(format!("p_max must be positive, got {}", self.p_max));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be non-negative, got {}", self.sigma2));
        }
        if !(self.sigma_delta2 >= 0.0 && self.sigma_delta2.is_finite()) {
            return bad(format!(
                "sigma_delta2 must be non-negative, got {}",
                self.sigma_delta2
            ));
        }
        if self.sigma_delta2 == 0.0 && !self.block_fading {
            return bad("sigma_delta2 = 0 requires block fading".into());
        }
        Ok(())
    }
}

/// Standard normal upper tail via `erfc`.
fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// A-priori density of `x' + n`: `U(-sqrt(p_max), sqrt(p_max))` convolved with
/// `N(0, sigma2)`, sampled on a grid symmetric about zero.
pub fn init_prior(cfg: &RbpConfig) -> Result<QuantizedDensity> {
    cfg.validate()?;
    let amp = cfg.p_max.sqrt();
    let sigma = cfg.sigma2.sqrt();
    let half_width = amp + GUARD_SIGMAS * sigma;
    let k = (half_width / cfg.step).ceil() as usize;
    let len = 2 * k + 1;
    if len < MIN_GRID_POINTS {
        return Err(Error::GridTooCoarse {
            step: cfg.step,
            points: len,
        });
    }
    // P(|s| <= amp) for s = y - x', evaluated at |y| so the grid is exactly
    // symmetric.
    let weight = |y: f64| -> f64 {
        if sigma == 0.0 {
            return if y < amp {
                1.0
            } else if y == amp {
                0.5
            } else {
                0.0
            };
        }
        let near = (amp - y) / sigma;
        let far = (amp + y) / sigma;
        if near >= 0.0 {
            1.0 - upper_tail(near) - upper_tail(far)
        } else {
            upper_tail(-near) - upper_tail(far)
        }
    };
    let mut weights = vec![0.0; len];
    for i in 0..=k {
        let w = weight((k - i) as f64 * cfg.step);
        weights[i] = w;
        weights[len - 1 - i] = w;
    }
    let mut prior = QuantizedDensity::from_parts(-(k as f64) * cfg.step, cfg.step, weights);
    prior.normalize()?;
    Ok(prior)
}

/// A check-node output together with the mass it dropped off the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutput {
    pub density: QuantizedDensity,
    pub clipped_mass: f64,
}

impl CheckOutput {
    pub fn clipped(&self) -> bool {
        self.clipped_mass > CLIP_TOLERANCE
    }
}

/// Affine image (optionally increment-blurred) of `m_in`, renormalized.
fn check_update(
    m_in: &QuantizedDensity,
    scale: f64,
    shift: f64,
    kernel: Option<&[f64]>,
    scratch: &mut Vec<f64>,
    out: &mut QuantizedDensity,
) -> Result<f64> {
    if !m_in.same_grid(out) {
        return Err(Error::GridMismatch);
    }
    let src = match kernel {
        Some(k) if k.len() > 1 => {
            scratch.resize(m_in.len(), 0.0);
            blur_into(m_in.weights(), k, scratch);
            scratch.as_slice()
        }
        _ => m_in.weights(),
    };
    let clipped = remap_into(
        src,
        m_in.grid_min(),
        m_in.step(),
        scale,
        shift,
        out.weights_mut(),
    );
    if out.total() > 0.0 {
        out.normalize()?;
        return Ok(clipped);
    }
    // Everything fell off the grid: the check carries no usable information.
    let flat = 1.0 / out.len() as f64;
    out.weights_mut().fill(flat);
    Ok(1.0)
}

fn increment_kernel(cfg: &RbpConfig, symbol: i32) -> Option<Vec<f64>> {
    if cfg.block_fading || cfg.sigma_delta2 == 0.0 {
        None
    } else {
        let sigma = f64::from(symbol).abs() * cfg.sigma_delta2.sqrt();
        Some(gaussian_kernel(sigma, cfg.step))
    }
}

/// Top-to-bottom check update: density of `y(k+1)` from that of `y(k)`.
///
/// `p_out(y) ∝ ∫ m_in(I_k/I_k1 * y + t_k + I_k * s) N(s; 0, sigma_delta2) ds`,
/// which collapses to the bare remap under block fading.
pub fn check_update_forward(
    m_in: &QuantizedDensity,
    t_k: f64,
    i_k: i32,
    i_k1: i32,
    cfg: &RbpConfig,
) -> Result<CheckOutput> {
    let kernel = increment_kernel(cfg, i_k);
    let mut out = m_in.zeros_like();
    let clipped_mass = check_update(
        m_in,
        f64::from(i_k) / f64::from(i_k1),
        t_k,
        kernel.as_deref(),
        &mut Vec::new(),
        &mut out,
    )?;
    Ok(CheckOutput {
        density: out,
        clipped_mass,
    })
}

/// Bottom-to-top check update: density of `y(k)` from that of `y(k+1)`.
///
/// `p_out(y) ∝ ∫ m_in(I_k1/I_k * (y - t_k) - I_k1 * s) N(s; 0, sigma_delta2) ds`.
pub fn check_update_backward(
    m_in: &QuantizedDensity,
    t_k: f64,
    i_k: i32,
    i_k1: i32,
    cfg: &RbpConfig,
) -> Result<CheckOutput> {
    let kernel = increment_kernel(cfg, i_k1);
    let ratio = f64::from(i_k1) / f64::from(i_k);
    let mut out = m_in.zeros_like();
    let clipped_mass = check_update(
        m_in,
        ratio,
        -ratio * t_k,
        kernel.as_deref(),
        &mut Vec::new(),
        &mut out,
    )?;
    Ok(CheckOutput {
        density: out,
        clipped_mass,
    })
}

/// Variable-node update: incoming message times the prior, renormalized.
pub fn variable_update(
    m_in: &QuantizedDensity,
    prior: &QuantizedDensity,
) -> Result<QuantizedDensity> {
    if !m_in.same_grid(prior) {
        return Err(Error::GridMismatch);
    }
    let mut out = m_in.zeros_like();
    product_into(m_in.weights(), prior.weights(), out.weights_mut())?;
    Ok(out)
}

/// Normalized product of a node's prior and its available sweep inputs.
fn final_density(
    prior: &QuantizedDensity,
    from_above: Option<&QuantizedDensity>,
    from_below: Option<&QuantizedDensity>,
    out: &mut QuantizedDensity,
) -> Result<()> {
    match (from_above, from_below) {
        (Some(a), Some(b)) => {
            product_into(a.weights(), b.weights(), out.weights_mut())?;
            let tmp = out.weights().to_vec();
            product_into(&tmp, prior.weights(), out.weights_mut())
        }
        (Some(m), None) | (None, Some(m)) => {
            product_into(m.weights(), prior.weights(), out.weights_mut())
        }
        (None, None) => {
            out.weights_mut().copy_from_slice(prior.weights());
            Ok(())
        }
    }
}

fn point_estimate(d: &QuantizedDensity, estimate: Estimate) -> f64 {
    match estimate {
        Estimate::Argmax => d.argmax(),
        Estimate::Mean => d.mean(),
    }
}

fn check_chain(t: &[f64], interferer: &[i32]) -> Result<()> {
    if t.is_empty() {
        return Err(Error::StreamTooShort(t.len() + 1));
    }
    if interferer.len() != t.len() + 1 {
        return Err(Error::LengthMismatch {
            what: "chain interferer",
            expected: t.len() + 1,
            got: interferer.len(),
        });
    }
    Ok(())
}

/// All messages of the chain graph.
///
/// `forward[k]` is the input to node `k` from the check above it (none for
/// the first node); `backward[k]` the input from the check below (none for
/// the last node). Both start out equal to the prior.
#[derive(Debug, Clone)]
pub struct RbpMessages {
    pub prior: QuantizedDensity,
    pub forward: Vec<Option<QuantizedDensity>>,
    pub backward: Vec<Option<QuantizedDensity>>,
    /// Check plus variable updates performed so far.
    pub updates: usize,
    /// Check updates that dropped more than [`CLIP_TOLERANCE`] mass.
    pub clipped_updates: usize,
    /// `-1` flips the sign of every check observation; only used to show the
    /// self-test catches a broken check update.
    shift_sign: f64,
}

impl RbpMessages {
    pub fn new(prior: QuantizedDensity, nodes: usize) -> Self {
        let forward = (0..nodes).map(|k| (k > 0).then(|| prior.clone())).collect();
        let backward = (0..nodes)
            .map(|k| (k + 1 < nodes).then(|| prior.clone()))
            .collect();
        Self {
            prior,
            forward,
            backward,
            updates: 0,
            clipped_updates: 0,
            shift_sign: 1.0,
        }
    }

    pub(crate) fn with_corrupted_checks(mut self) -> Self {
        self.shift_sign = -1.0;
        self
    }

    pub fn nodes(&self) -> usize {
        self.forward.len()
    }

    /// Top-to-bottom sweep: `N-1` check and `N-2` variable updates.
    pub fn sweep_down(&mut self, t: &[f64], interferer: &[i32], cfg: &RbpConfig) -> Result<()> {
        check_chain(t, interferer)?;
        let n = self.nodes();
        let mut outgoing = self.prior.clone();
        for k in 0..n - 1 {
            let c = check_update_forward(
                &outgoing,
                self.shift_sign * t[k],
                interferer[k],
                interferer[k + 1],
                cfg,
            )?;
            self.updates += 1;
            self.clipped_updates += usize::from(c.clipped());
            if k + 1 < n - 1 {
                outgoing = variable_update(&c.density, &self.prior)?;
                self.updates += 1;
            }
            self.forward[k + 1] = Some(c.density);
        }
        Ok(())
    }

    /// Bottom-to-top sweep: `N-1` check and `N-2` variable updates.
    pub fn sweep_up(&mut self, t: &[f64], interferer: &[i32], cfg: &RbpConfig) -> Result<()> {
        check_chain(t, interferer)?;
        let n = self.nodes();
        let mut outgoing = self.prior.clone();
        for k in (0..n - 1).rev() {
            let c = check_update_backward(
                &outgoing,
                self.shift_sign * t[k],
                interferer[k],
                interferer[k + 1],
                cfg,
            )?;
            self.updates += 1;
            self.clipped_updates += usize::from(c.clipped());
            if k > 0 {
                outgoing = variable_update(&c.density, &self.prior)?;
                self.updates += 1;
            }
            self.backward[k] = Some(c.density);
        }
        Ok(())
    }

    /// Posterior of every node: prior times both sweep inputs (one at the
    /// chain ends).
    pub fn finals(&self) -> Result<Vec<QuantizedDensity>> {
        (0..self.nodes())
            .map(|k| {
                let mut out = self.prior.zeros_like();
                final_density(
                    &self.prior,
                    self.forward[k].as_ref(),
                    self.backward[k].as_ref(),
                    &mut out,
                )?;
                Ok(out)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RbpOutput {
    /// Full-length recovered signal (pass-through head included).
    pub z: Vec<f64>,
    /// Posterior density of each chain node.
    pub posteriors: Vec<QuantizedDensity>,
    pub updates: usize,
    pub clipped_updates: usize,
}

/// One top-to-bottom and one bottom-to-top sweep over the active chain,
/// keeping every posterior.
pub fn rbp_recover(
    combined: &CombinedSignal,
    interferer: &SymbolStream,
    cfg: &RbpConfig,
) -> Result<RbpOutput> {
    if interferer.len() != combined.len() {
        return Err(Error::LengthMismatch {
            what: "interferer stream",
            expected: combined.len(),
            got: interferer.len(),
        });
    }
    let t = combined.chain_observations();
    let symbols = combined.chain_interferer(interferer);
    let prior = init_prior(cfg)?;
    let mut messages = RbpMessages::new(prior, symbols.len());
    messages.sweep_down(t, symbols, cfg)?;
    messages.sweep_up(t, symbols, cfg)?;
    let posteriors = messages.finals()?;
    let chain: Vec<f64> = posteriors
        .iter()
        .map(|d| point_estimate(d, cfg.estimate))
        .collect();
    Ok(RbpOutput {
        z: combined.assemble(&chain),
        posteriors,
        updates: messages.updates,
        clipped_updates: messages.clipped_updates,
    })
}

/// Exhaustive reference posteriors for block fading.
///
/// Without channel drift every check is a hard constraint, so the whole chain
/// is fixed by its first node. Scoring each grid value of that node by the
/// product of priors along the implied chain gives the exact joint posterior
/// on the grid. Intended for short chains with on-grid observations and unit
/// interferer ratios, where it matches the sweeps to rounding.
pub fn brute_force_posteriors(
    t: &[f64],
    interferer: &[i32],
    cfg: &RbpConfig,
) -> Result<Vec<QuantizedDensity>> {
    check_chain(t, interferer)?;
    let prior = init_prior(cfg)?;
    let n = interferer.len();
    let mut posts = vec![prior.zeros_like(); n];
    let (lo, hi) = (prior.grid_min(), prior.grid_max());
    let index = |y: f64| -> Option<usize> {
        let pos = (y - lo) / prior.step();
        let i = pos.round();
        (y >= lo - 1e-9 && y <= hi + 1e-9 && (pos - i).abs() < 1e-6).then_some(i as usize)
    };
    for i0 in 0..prior.len() {
        let mut y = prior.point(i0);
        let mut nodes = vec![i0];
        for k in 0..n - 1 {
            y = f64::from(interferer[k + 1]) / f64::from(interferer[k]) * (y - t[k]);
            match index(y) {
                Some(i) => nodes.push(i),
                None => break,
            }
        }
        if nodes.len() < n {
            continue;
        }
        let score: f64 = nodes.iter().map(|&i| prior.weights()[i]).product();
        for (post, &i) in posts.iter_mut().zip(&nodes) {
            post.weights_mut()[i] += score;
        }
    }
    for post in &mut posts {
        post.normalize()?;
    }
    Ok(posts)
}

/// Posteriors from the sweeps with every check observation negated.
pub(crate) fn corrupted_posteriors(
    t: &[f64],
    interferer: &[i32],
    cfg: &RbpConfig,
) -> Result<Vec<QuantizedDensity>> {
    let mut messages = RbpMessages::new(init_prior(cfg)?, interferer.len()).with_corrupted_checks();
    messages.sweep_down(t, interferer, cfg)?;
    messages.sweep_up(t, interferer, cfg)?;
    messages.finals()
}

/// Same schedule as [`rbp_recover`] but only the point estimates are kept;
/// backward messages are folded into the posteriors as the upward sweep
/// reaches each node.
pub fn rbp_estimate(t: &[f64], interferer: &[i32], cfg: &RbpConfig) -> Result<Vec<f64>> {
    check_chain(t, interferer)?;
    let prior = init_prior(cfg)?;
    let n = interferer.len();
    let kernels = KernelCache::new(cfg, interferer);
    let mut scratch = Vec::new();

    // forward[k] is the input of node k from above; forward[0] is unused.
    let mut forward: Vec<QuantizedDensity> = Vec::with_capacity(n);
    forward.push(prior.zeros_like());
    let mut outgoing = prior.clone();
    for k in 0..n - 1 {
        let mut msg = prior.zeros_like();
        let scale = f64::from(interferer[k]) / f64::from(interferer[k + 1]);
        check_update(
            &outgoing,
            scale,
            t[k],
            kernels.get(interferer[k]),
            &mut scratch,
            &mut msg,
        )?;
        if k + 1 < n - 1 {
            product_into(msg.weights(), prior.weights(), outgoing.weights_mut())?;
        }
        forward.push(msg);
    }

    let mut z = vec![0.0; n];
    let mut post = prior.zeros_like();
    final_density(&prior, (n > 1).then(|| &forward[n - 1]), None, &mut post)?;
    z[n - 1] = point_estimate(&post, cfg.estimate);
    let mut outgoing = prior.clone();
    let mut from_below = prior.zeros_like();
    for k in (0..n - 1).rev() {
        let ratio = f64::from(interferer[k + 1]) / f64::from(interferer[k]);
        check_update(
            &outgoing,
            ratio,
            -ratio * t[k],
            kernels.get(interferer[k + 1]),
            &mut scratch,
            &mut from_below,
        )?;
        let above = (k > 0).then(|| &forward[k]);
        final_density(&prior, above, Some(&from_below), &mut post)?;
        z[k] = point_estimate(&post, cfg.estimate);
        if k > 0 {
            product_into(
                from_below.weights(),
                prior.weights(),
                outgoing.weights_mut(),
            )?;
        }
    }
    Ok(z)
}

/// Increment-blur kernels per interferer amplitude, built once per chain.
struct KernelCache {
    kernels: Vec<(i32, Vec<f64>)>,
}

impl KernelCache {
    fn new(cfg: &RbpConfig, interferer: &[i32]) -> Self {
        let mut kernels: Vec<(i32, Vec<f64>)> = Vec::new();
        for &s in interferer {
            let a = s.abs();
            if kernels.iter().all(|(b, _)| *b != a) {
                if let Some(k) = increment_kernel(cfg, a) {
                    kernels.push((a, k));
                }
            }
        }
        Self { kernels }
    }

    fn get(&self, symbol: i32) -> Option<&[f64]> {
        let a = symbol.abs();
        self.kernels
            .iter()
            .find(|(b, _)| *b == a)
            .map(|(_, k)| k.as_slice())
    }
}

/// Where the prior's amplitude bound comes from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PowerBound {
    /// Largest received power of the pass input, `max r(k)^2`.
    #[default]
    MaxReceived,
    Fixed(f64),
}

/// BKIC-RBP as a [`Recovery`] strategy; resolves the prior bound per pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbpRecovery {
    pub p_max: PowerBound,
    pub sigma2: f64,
    pub sigma_delta2: f64,
    pub step: f64,
    pub block_fading: bool,
    pub estimate: Estimate,
}

impl RbpRecovery {
    pub fn config_for(&self, source: &[f64]) -> RbpConfig {
        let p_max = match self.p_max {
            PowerBound::MaxReceived => source.iter().map(|v| v * v).fold(0.0, f64::max),
            PowerBound::Fixed(p) => p,
        };
        RbpConfig {
            p_max,
            sigma2: self.sigma2,
            sigma_delta2: self.sigma_delta2,
            step: self.step,
            block_fading: self.block_fading,
            estimate: self.estimate,
        }
    }
}

impl Recovery for RbpRecovery {
    fn recover(&self, combined: &CombinedSignal, interferer: &SymbolStream) -> Result<Vec<f64>> {
        let cfg = self.config_for(&combined.source);
        let chain = rbp_estimate(
            combined.chain_observations(),
            combined.chain_interferer(interferer),
            &cfg,
        )?;
        Ok(combined.assemble(&chain))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cancel::combine;
    use crate::modem::{generate_stream, Role};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(p_max: f64, sigma2: f64, step: f64) -> RbpConfig {
        RbpConfig {
            p_max,
            sigma2,
            sigma_delta2: 0.0,
            step,
            block_fading: true,
            estimate: Estimate::Argmax,
        }
    }

    fn gaussian_on(grid: &QuantizedDensity, mean: f64, var: f64) -> QuantizedDensity {
        QuantizedDensity::from_fn(grid.grid_min(), grid.step(), grid.len(), |y| {
            (-(y - mean).powi(2) / (2.0 * var)).exp()
        })
        .unwrap()
    }

    fn uniform_like(grid: &QuantizedDensity) -> QuantizedDensity {
        QuantizedDensity::from_fn(grid.grid_min(), grid.step(), grid.len(), |_| 1.0).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1.0, 0.1, 0.025).validate().is_ok());
        assert!(cfg(0.0, 0.1, 0.025).validate().is_err());
        assert!(cfg(1.0, 0.1, 0.0).validate().is_err());
        assert!(cfg(1.0, -0.1, 0.1).validate().is_err());
        let mut c = cfg(1.0, 0.1, 0.025);
        c.block_fading = false;
        assert!(c.validate().is_err());
        c.sigma_delta2 = 0.001;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn prior_is_exactly_symmetric_and_covers_guard_band() {
        let c = cfg(1.7, 0.13, 0.025);
        let p = init_prior(&c).unwrap();
        let w = p.weights();
        for i in 0..w.len() {
            assert_eq!(w[i], w[w.len() - 1 - i]);
        }
        assert!(p.grid_max() >= 1.7f64.sqrt() + 6.0 * 0.13f64.sqrt());
        assert_eq!(p.grid_min(), -p.grid_max());
        assert!((p.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_prior_is_a_box() {
        let p = init_prior(&cfg(1.0, 0.0, 0.05)).unwrap();
        let inside: Vec<f64> = p
            .points()
            .zip(p.weights())
            .filter(|(y, _)| y.abs() < 1.0 - 1e-9)
            .map(|(_, &w)| w)
            .collect();
        assert!(inside.windows(2).all(|v| v[0] == v[1]));
        assert!(p
            .points()
            .zip(p.weights())
            .all(|(y, &w)| y.abs() <= 1.0 + 1e-9 || w == 0.0));
    }

    #[test]
    fn prior_ratio_matches_quadrature() {
        // Density of U(-1, 1) + N(0, 0.1) by direct Simpson integration.
        let sigma: f64 = 0.1f64.sqrt();
        let density = |y: f64| {
            let steps = 20_000;
            let h = 2.0 / steps as f64;
            let g = |x: f64| (-(y - x).powi(2) / (2.0 * sigma * sigma)).exp();
            let mut acc = g(-1.0) + g(1.0);
            for i in 1..steps {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(-1.0 + i as f64 * h);
            }
            acc * h / 3.0
        };
        let p = init_prior(&cfg(1.0, 0.1, 0.01)).unwrap();
        let ratio = p.value_at(0.0) / p.value_at(1.5);
        let oracle = density(0.0) / density(1.5);
        assert!((ratio / oracle - 1.0).abs() < 0.01, "{ratio} vs {oracle}");
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(matches!(
            init_prior(&cfg(1.0, 0.0, 0.5)),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn identity_and_mirror_checks() {
        let c = cfg(1.0, 0.1, 0.025);
        let p = init_prior(&c).unwrap();
        let m = gaussian_on(&p, 0.4, 0.05);
        for update in [check_update_forward, check_update_backward] {
            let id = update(&m, 0.0, 1, 1, &c).unwrap();
            assert!(id.density.max_abs_diff(&m) < 1e-15);
            assert_eq!(id.clipped_mass, 0.0);
            let mirrored = update(&m, 0.0, 1, -1, &c).unwrap();
            let w = m.weights();
            for (i, v) in mirrored.density.weights().iter().enumerate() {
                assert!((v - w[w.len() - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn forward_check_shifts_a_gaussian() {
        let c = cfg(1.0, 0.1, 0.025);
        let p = init_prior(&c).unwrap();
        let (v, tau) = (0.1, 0.3137);
        let out = check_update_forward(&gaussian_on(&p, 0.0, v), tau, 1, 1, &c).unwrap();
        let oracle = gaussian_on(&p, -tau, v);
        let peak = oracle.weights().iter().cloned().fold(0.0, f64::max);
        assert!(out.density.max_abs_diff(&oracle) < 1e-2 * peak);
        assert!((out.density.mean() + tau).abs() < 1e-3);
    }

    #[test]
    fn blurred_check_adds_increment_variance() {
        let mut c = cfg(1.0, 0.1, 0.0125);
        c.block_fading = false;
        c.sigma_delta2 = 0.01;
        let p = init_prior(&c).unwrap();
        let m = gaussian_on(&p, 0.0, 0.05);
        let out = check_update_forward(&m, 0.0, 3, 1, &c).unwrap();
        // p_out(y) = m_in(3y + 3s): y = m/3 - s has variance 0.05/9 + 0.01.
        assert!(
            (out.density.variance() - (0.05 / 9.0 + 0.01)).abs() < 2e-4,
            "{}",
            out.density.variance()
        );
    }

    #[test]
    fn forward_backward_round_trip() {
        let c = cfg(1.0, 0.1, 0.025);
        let p = init_prior(&c).unwrap();
        let m = gaussian_on(&p, 0.2, 0.08);
        for (ik, ik1, t) in [(1, 1, 0.31), (1, -1, -0.2), (3, 1, 0.5), (1, 3, -0.05)] {
            let there = check_update_forward(&m, t, ik, ik1, &c).unwrap();
            let back = check_update_backward(&there.density, t, ik, ik1, &c).unwrap();
            assert!(
                (back.density.mean() - m.mean()).abs() <= c.step,
                "{ik} {ik1}"
            );
            assert!((back.density.variance() - m.variance()).abs() <= c.step);
        }
    }

    #[test]
    fn clipped_mass_is_reported() {
        let c = cfg(1.0, 0.1, 0.025);
        let p = init_prior(&c).unwrap();
        let out = check_update_forward(&p, 2.5, 1, 1, &c).unwrap();
        assert!(out.clipped());
        assert!((out.density.total() - 1.0).abs() < 1e-9);
        let gone = check_update_forward(&p, 50.0, 1, 1, &c).unwrap();
        assert_eq!(gone.clipped_mass, 1.0);
        assert!((gone.density.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn variable_update_examples() {
        let c = cfg(4.0, 0.1, 0.02);
        let p = init_prior(&c).unwrap();
        let m = gaussian_on(&p, 0.1, 0.3);
        let same = variable_update(&m, &uniform_like(&p)).unwrap();
        assert!(same.max_abs_diff(&m) < 1e-15);
        let g = gaussian_on(&p, 0.0, 1.0);
        let prod = variable_update(&g, &g).unwrap();
        assert!((prod.variance() - 0.5).abs() < 1e-3);
        assert!(prod.mean().abs() < 1e-12);
        let left = QuantizedDensity::from_fn(p.grid_min(), p.step(), p.len(), |y| {
            f64::from(u8::from(y < -1.0))
        })
        .unwrap();
        let right = QuantizedDensity::from_fn(p.grid_min(), p.step(), p.len(), |y| {
            f64::from(u8::from(y > 1.0))
        })
        .unwrap();
        assert!(matches!(
            variable_update(&left, &right),
            Err(Error::DisjointSupport)
        ));
        let other = QuantizedDensity::from_fn(0.0, 0.5, 10, |_| 1.0).unwrap();
        assert!(matches!(
            variable_update(&m, &other),
            Err(Error::GridMismatch)
        ));
    }

    /// BPSK chain whose observations come from an on-grid signal.
    fn on_grid_chain(seed: u64, n: usize, step: f64) -> (Vec<f64>, Vec<i32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let i: Vec<i32> = (0..n)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(-40i32..=40)) * step)
            .collect();
        let t = (0..n - 1)
            .map(|k| y[k] - f64::from(i[k]) / f64::from(i[k + 1]) * y[k + 1])
            .collect();
        (t, i)
    }

    #[test]
    fn sweeps_match_brute_force_map() {
        let c = cfg(1.0, 0.2, 0.025);
        for seed in 0..20 {
            let (t, i) = on_grid_chain(seed, 3, c.step);
            let exact = brute_force_posteriors(&t, &i, &c).unwrap();
            let mut msgs = RbpMessages::new(init_prior(&c).unwrap(), 3);
            msgs.sweep_down(&t, &i, &c).unwrap();
            msgs.sweep_up(&t, &i, &c).unwrap();
            let finals = msgs.finals().unwrap();
            for (a, b) in finals.iter().zip(&exact) {
                assert!(a.max_abs_diff(b) < 1e-9, "seed {seed}");
                assert_eq!(a.argmax(), b.argmax(), "seed {seed}");
            }
            let fast = rbp_estimate(&t, &i, &c).unwrap();
            for (z, b) in fast.iter().zip(&exact) {
                assert_eq!(*z, b.argmax());
            }
        }
    }

    #[test]
    fn corrupted_check_sign_breaks_equivalence() {
        let c = cfg(1.0, 0.2, 0.025);
        let (t, i) = (vec![0.25, -0.4], vec![1, 1, -1]);
        let exact = brute_force_posteriors(&t, &i, &c).unwrap();
        let bad = corrupted_posteriors(&t, &i, &c).unwrap();
        assert!(bad
            .iter()
            .zip(&exact)
            .any(|(a, b)| a.argmax() != b.argmax()));
    }

    #[test]
    fn update_count_is_4n_minus_6() {
        let c = cfg(1.0, 0.1, 0.05);
        for n in [2usize, 3, 4, 10, 57] {
            let (t, i) = on_grid_chain(n as u64, n, c.step);
            let mut msgs = RbpMessages::new(init_prior(&c).unwrap(), n);
            msgs.sweep_down(&t, &i, &c).unwrap();
            msgs.sweep_up(&t, &i, &c).unwrap();
            assert_eq!(msgs.updates, 4 * n - 6);
        }
    }

    #[test]
    fn repeated_sweeps_are_idempotent_and_normalized() {
        let mut c = cfg(2.0, 0.1, 0.025);
        c.block_fading = false;
        c.sigma_delta2 = 0.001;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let i = generate_stream(2, 40, Role::Interferer, &mut rng).unwrap();
        let t: Vec<f64> = (0..39).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut msgs = RbpMessages::new(init_prior(&c).unwrap(), 40);
        msgs.sweep_down(&t, i.symbols(), &c).unwrap();
        msgs.sweep_up(&t, i.symbols(), &c).unwrap();
        let once = msgs.finals().unwrap();
        msgs.sweep_down(&t, i.symbols(), &c).unwrap();
        msgs.sweep_up(&t, i.symbols(), &c).unwrap();
        let twice = msgs.finals().unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!(a.max_abs_diff(b) <= 1e-9);
            assert!((a.total() - 1.0).abs() <= 1e-9);
        }
        for m in msgs.forward.iter().chain(&msgs.backward).flatten() {
            assert!((m.total() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn pure_interference_recovers_zero() {
        let c = cfg(1.0, 0.0, 0.025);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let i = generate_stream(2, 50, Role::Interferer, &mut rng).unwrap();
        let r: Vec<f64> = i.symbols().iter().map(|&s| 0.9 * f64::from(s)).collect();
        let combined = combine(&r, &i, 0).unwrap();
        let out = rbp_recover(&combined, &i, &c).unwrap();
        assert!(out.z.iter().all(|z| z.abs() <= c.step / 2.0));
        assert_eq!(out.posteriors.len(), 50);
        assert_eq!(out.updates, 4 * 50 - 6);
    }

    #[test]
    fn strategy_matches_full_recovery() {
        let mut c = cfg(0.0, 0.1, 0.025);
        c.block_fading = false;
        c.sigma_delta2 = 0.001;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = generate_stream(2, 60, Role::Target, &mut rng).unwrap();
        let i = generate_stream(4, 60, Role::Interferer, &mut rng).unwrap();
        let r: Vec<f64> = x
            .symbols()
            .iter()
            .zip(i.symbols())
            .map(|(&a, &b)| f64::from(a) + 0.6 * f64::from(b) + rng.random_range(-0.3..0.3))
            .collect();
        for d in [0, 3] {
            let combined = combine(&r, &i, d).unwrap();
            let strategy = RbpRecovery {
                p_max: PowerBound::MaxReceived,
                sigma2: c.sigma2,
                sigma_delta2: c.sigma_delta2,
                step: c.step,
                block_fading: false,
                estimate: Estimate::Argmax,
            };
            let fast = strategy.recover(&combined, &i).unwrap();
            let full = rbp_recover(&combined, &i, &strategy.config_for(&r)).unwrap();
            assert_eq!(fast, full.z);
            assert_eq!(&fast[..d], &r[..d]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn every_message_is_normalized(seed in any::<u64>(), n in 2usize..30, block in any::<bool>()) {
            let mut c = cfg(1.5, 0.1, 0.05);
            if !block {
                c.block_fading = false;
                c.sigma_delta2 = 0.001;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let i = generate_stream(4, n, Role::Interferer, &mut rng).unwrap();
            let s = i.symbols();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.2..1.2)).collect();
            let t: Vec<f64> = (0..n - 1).map(|k| y[k] - f64::from(s[k]) / f64::from(s[k + 1]) * y[k + 1]).collect();
            let mut msgs = RbpMessages::new(init_prior(&c).unwrap(), n);
            msgs.sweep_down(&t, i.symbols(), &c).unwrap();
            msgs.sweep_up(&t, i.symbols(), &c).unwrap();
            prop_assert_eq!(msgs.updates, 4 * n - 6);
            for m in msgs.forward.iter().chain(&msgs.backward).flatten().chain(msgs.finals().unwrap().iter()) {
                prop_assert!((m.total() - 1.0).abs() <= 1e-9);
            }
        }
    }
}
