//! Flat `key = value` experiment files.
//!
//! Blank lines and `#` comments are ignored. Recognised keys:
//!
//! | key | value |
//! |-----|-------|
//! | `name` | experiment label written to the CSV |
//! | `preset` | start from a named preset; must come first |
//! | `schemes` | comma list of `clean`, `bkic_s`, `bkic_rbp`, `bkic_rbp_cont`, `traditional_kic` |
//! | `n` | packet length |
//! | `q` | constellation order |
//! | `fading` | `block` or `gauss_markov` |
//! | `alpha` | Gauss-Markov correlation |
//! | `block_gain` | `unit` or `random` |
//! | `taps` | `delay:gain` list, e.g. `0:1, 2:1` |
//! | `snr_db` | comma list, or `start:stop:step` |
//! | `target_errors`, `min_trials`, `max_trials`, `batch` | stopping rule |
//! | `seed` | master seed |
//! | `rbp_step`, `rbp_step_fine`, `rbp_step_fine_from_db` | quantization schedule |
//! | `rbp_sigma_delta2` | assumed increment variance |
//! | `rbp_p_max` | `max` (largest received power) or a number |
//! | `rbp_estimate` | `argmax` or `mean` |
//! | `output` | CSV path |

use std::str::FromStr;

use super::{preset, ExperimentConfig, Scheme, StepSchedule};
use crate::channel::{BlockGain, FadingKind, Tap};
use crate::error::{Error, Result};
use crate::rbp::{Estimate, PowerBound};

fn number<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::ConfigParse {
        line,
        msg: format!("{key}: cannot parse {value:?}"),
    })
}

fn snr_list(line: usize, value: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let (start, stop, step): (f64, f64, f64) = (
            number(line, "snr_db", parts[0])?,
            number(line, "snr_db", parts[1])?,
            number(line, "snr_db", parts[2])?,
        );
        if step <= 0.0 || stop < start {
            return Err(Error::ConfigParse {
                line,
                msg: "snr_db range needs start <= stop and step > 0".into(),
            });
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    value
        .split(',')
        .map(|v| number(line, "snr_db", v.trim()))
        .collect()
}

fn tap_list(line: usize, value: &str) -> Result<Vec<Tap>> {
    value
        .split(',')
        .map(|item| {
            let (d, g) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::ConfigParse {
                    line,
                    msg: format!("tap {item:?} is not delay:gain"),
                })?;
            Ok(Tap::new(
                number(line, "taps", d.trim())?,
                number(line, "taps", g.trim())?,
            ))
        })
        .collect()
}

/// Parse an experiment file on top of [`ExperimentConfig::default`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut alpha: Option<f64> = None;
    let mut fading_kind: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigParse {
            line,
            msg: format!("expected key = value, got {content:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "preset" => cfg = preset(value)?,
            "name" => cfg.name = value.to_string(),
            "schemes" => {
                cfg.schemes = value
                    .split(',')
                    .map(|s| {
                        s.parse::<Scheme>().map_err(|e| Error::ConfigParse {
                            line,
                            msg: e.to_string(),
                        })
                    })
                    .collect::<Result<_>>()?
            }
            "n" => cfg.n = number(line, key, value)?,
            "q" => cfg.q = number(line, key, value)?,
            "fading" => fading_kind = Some(value.to_string()),
            "alpha" => alpha = Some(number(line, key, value)?),
            "block_gain" => {
                cfg.fading.block_gain = match value {
                    "unit" => BlockGain::Unit,
                    "random" => BlockGain::Random,
                    _ => {
                        return Err(Error::ConfigParse {
                            line,
                            msg: format!("block_gain must be unit or random, got {value:?}"),
                        })
                    }
                }
            }
            "taps" => cfg.fading.taps = tap_list(line, value)?,
            "snr_db" => cfg.snr_db = snr_list(line, value)?,
            "target_errors" => cfg.stopping.target_errors = number(line, key, value)?,
            "min_trials" => cfg.stopping.min_trials = number(line, key, value)?,
            "max_trials" => cfg.stopping.max_trials = number(line, key, value)?,
            "batch" => cfg.stopping.batch = number(line, key, value)?,
            "seed" => cfg.seed = number(line, key, value)?,
            "rbp_step" => {
                let step = number(line, key, value)?;
                cfg.rbp.step = StepSchedule {
                    coarse: step,
                    ..cfg.rbp.step
                };
            }
            "rbp_step_fine" => cfg.rbp.step.fine = number(line, key, value)?,
            "rbp_step_fine_from_db" => cfg.rbp.step.fine_from_db = number(line, key, value)?,
            "rbp_sigma_delta2" => cfg.rbp.sigma_delta2 = number(line, key, value)?,
            "rbp_p_max" => {
                cfg.rbp.p_max = if value == "max" {
                    PowerBound::MaxReceived
                } else {
                    PowerBound::Fixed(number(line, key, value)?)
                }
            }
            "rbp_estimate" => {
                cfg.rbp.estimate = match value {
                    "argmax" => Estimate::Argmax,
                    "mean" => Estimate::Mean,
                    _ => {
                        return Err(Error::ConfigParse {
                            line,
                            msg: format!("rbp_estimate must be argmax or mean, got {value:?}"),
                        })
                    }
                }
            }
            "output" => cfg.output = Some(value.into()),
            _ => {
                return Err(Error::ConfigParse {
                    line,
                    msg: format!("unknown key {key:?}"),
                })
            }
        }
    }
    let kind = match fading_kind.as_deref() {
        None => match (cfg.fading.kind, alpha) {
            (FadingKind::GaussMarkov { .. }, Some(a)) => FadingKind::GaussMarkov { alpha: a },
            (kind, _) => kind,
        },
        Some("block") => FadingKind::Block,
        Some("gauss_markov") => FadingKind::GaussMarkov {
            alpha: alpha.unwrap_or(cfg.fading.alpha()),
        },
        Some(other) => {
            return Err(Error::InvalidConfig(format!(
                "fading must be block or gauss_markov, got {other:?}"
            )))
        }
    };
    cfg.fading.kind = kind;
    cfg.validate()?;
    Ok(cfg)
}
