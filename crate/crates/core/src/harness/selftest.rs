//! Built-in invariant checks, runnable from the command line.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run_experiment, write_csv, ExperimentConfig, Scheme, Stopping};
use crate::cancel::combine;
use crate::error::Result;
use crate::modem::{generate_stream, Role};
use crate::rbp::{
    brute_force_posteriors, corrupted_posteriors, init_prior, Estimate, QuantizedDensity,
    RbpConfig, RbpMessages,
};
use crate::smooth::telescope;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag}  {:<28} {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

fn exact_cancellation() -> Result<Check> {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for order in [2, 4, 8] {
        let i = generate_stream(order, 400, Role::Interferer, &mut rng)?;
        for delay in [0, 2] {
            let h = rng.random_range(0.2..3.0);
            let r: Vec<f64> = (0..400)
                .map(|k| {
                    if k >= delay {
                        h * f64::from(i.symbols()[k - delay])
                    } else {
                        0.0
                    }
                })
                .collect();
            let c = combine(&r, &i, delay)?;
            let scale = h * (order as f64 - 1.0);
            worst = c
                .chain_observations()
                .iter()
                .fold(worst, |m, t| m.max(t.abs() / scale));
        }
    }
    Ok(Check {
        name: "exact cancellation",
        passed: worst <= 8.0 * f64::EPSILON,
        detail: format!("max |t|/scale = {worst:.1e}"),
    })
}

fn smoothing_identity() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let i = generate_stream(4, 200, Role::Interferer, &mut rng)?;
    let t: Vec<f64> = (0..199).map(|_| rng.random_range(-2.0..2.0)).collect();
    let s = telescope(&t, i.symbols());
    let first = f64::from(i.symbols()[0]);
    let worst = (1..200).fold(0.0f64, |m, k| {
        let rebuilt = s.z1 - first / f64::from(i.symbols()[k]) * s.z[k];
        m.max((rebuilt - s.u[k - 1]).abs())
    });
    Ok(Check {
        name: "smoothing identity",
        passed: worst < 1e-9,
        detail: format!("max |u - rebuilt| = {worst:.1e}"),
    })
}

fn rbp_config(block: bool) -> RbpConfig {
    RbpConfig {
        p_max: 2.0,
        sigma2: 0.15,
        sigma_delta2: if block { 0.0 } else { 0.001 },
        step: 0.025,
        block_fading: block,
        estimate: Estimate::Argmax,
    }
}

fn normalization_and_count() -> Result<Check> {
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (n, block) in [(2, true), (7, false), (60, true), (60, false)] {
        let cfg = rbp_config(block);
        let i = generate_stream(2, n, Role::Interferer, &mut rng)?;
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.3..1.3)).collect();
        let s = i.symbols();
        let t: Vec<f64> = (0..n - 1)
            .map(|k| y[k] - f64::from(s[k]) / f64::from(s[k + 1]) * y[k + 1])
            .collect();
        let mut msgs = RbpMessages::new(init_prior(&cfg)?, n);
        msgs.sweep_down(&t, s, &cfg)?;
        msgs.sweep_up(&t, s, &cfg)?;
        counts_ok &= msgs.updates == 4 * n - 6;
        let finals = msgs.finals()?;
        for m in msgs
            .forward
            .iter()
            .chain(&msgs.backward)
            .flatten()
            .chain(&finals)
        {
            worst = worst.max((m.total() - 1.0).abs());
        }
    }
    Ok(Check {
        name: "rbp normalization, 4N-6",
        passed: counts_ok && worst <= 1e-9,
        detail: format!(
            "max |sum - 1| = {worst:.1e}, counts {}",
            if counts_ok { "ok" } else { "wrong" }
        ),
    })
}

/// Short BPSK chains with on-grid observations.
fn map_cases(cfg: &RbpConfig) -> Vec<(Vec<f64>, Vec<i32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    (0..16)
        .map(|_| {
            let i: Vec<i32> = (0..3)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect();
            let y: Vec<f64> = (0..3)
                .map(|_| f64::from(rng.random_range(-40i32..=40)) * cfg.step)
                .collect();
            let t = (0..2)
                .map(|k| y[k] - f64::from(i[k] * i[k + 1]) * y[k + 1])
                .collect();
            (t, i)
        })
        .collect()
}

fn sweeps(t: &[f64], i: &[i32], cfg: &RbpConfig) -> Result<Vec<QuantizedDensity>> {
    let mut msgs = RbpMessages::new(init_prior(cfg)?, i.len());
    msgs.sweep_down(t, i, cfg)?;
    msgs.sweep_up(t, i, cfg)?;
    msgs.finals()
}

fn agrees(a: &[QuantizedDensity], b: &[QuantizedDensity]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| x.argmax() == y.argmax() && x.max_abs_diff(y) < 1e-9)
}

fn brute_force_map(corrupt: bool) -> Result<Check> {
    let cfg = rbp_config(true);
    let mut matched = 0;
    let cases = map_cases(&cfg);
    for (t, i) in &cases {
        let exact = brute_force_posteriors(t, i, &cfg)?;
        let got = if corrupt {
            corrupted_posteriors(t, i, &cfg)?
        } else {
            sweeps(t, i, &cfg)?
        };
        matched += usize::from(agrees(&got, &exact));
    }
    Ok(if corrupt {
        Check {
            name: "mutation detected",
            passed: matched < cases.len(),
            detail: format!(
                "sign-flipped checks matched {matched}/{} chains",
                cases.len()
            ),
        }
    } else {
        Check {
            name: "brute-force MAP, N=3",
            passed: matched == cases.len(),
            detail: format!("{matched}/{} chains identical", cases.len()),
        }
    })
}

fn determinism() -> Result<Check> {
    let cfg = ExperimentConfig {
        name: "selftest".into(),
        schemes: vec![Scheme::BkicS, Scheme::BkicRbp],
        n: 24,
        snr_db: vec![4.0, 8.0],
        stopping: Stopping {
            target_errors: 20,
            min_trials: 8,
            max_trials: 64,
            batch: 8,
        },
        seed: 77,
        ..ExperimentConfig::default()
    };
    let mut runs = Vec::new();
    for workers in [1, 2, 1] {
        let mut buf = Vec::new();
        write_csv(&mut buf, &run_experiment(&cfg, workers)?)?;
        runs.push(buf);
    }
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    Ok(Check {
        name: "deterministic CSV",
        passed: same,
        detail: format!("{} bytes, 1/2/1 workers", runs[0].len()),
    })
}

type CheckFn = fn() -> Result<Check>;

/// Run every check; errors inside a check count as failures.
pub fn selftest() -> SelftestReport {
    let checks: [(&'static str, CheckFn); 6] = [
        ("exact cancellation", exact_cancellation),
        ("smoothing identity", smoothing_identity),
        ("rbp normalization, 4N-6", normalization_and_count),
        ("brute-force MAP, N=3", || brute_force_map(false)),
        ("mutation detected", || brute_force_map(true)),
        ("deterministic CSV", determinism),
    ];
    SelftestReport {
        checks: checks
            .into_iter()
            .map(|(name, run)| {
                run().unwrap_or_else(|e| Check {
                    name,
                    passed: false,
                    detail: format!("error: {e}"),
                })
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes() {
        let report = selftest();
        assert!(report.passed(), "{report}");
        assert_eq!(report.checks.len(), 6);
        assert!(report.to_string().lines().all(|l| l.starts_with("PASS")));
    }
}
