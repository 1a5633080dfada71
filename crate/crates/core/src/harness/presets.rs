use super::{ExperimentConfig, RbpSettings, Scheme, Stopping};
use crate::channel::{FadingModel, Tap};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 7] = ["fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10"];

/// Per-symbol correlation of the continuous-fading scenarios.
const FAST_ALPHA: f64 = 1.0 - 1e-3;

/// Residual-variance curves: a fixed, large number of packets per point.
fn variance_stopping() -> Stopping {
    Stopping {
        target_errors: 0,
        min_trials: 100_000,
        max_trials: 100_000,
        batch: 256,
    }
}

fn ber_stopping(n: usize) -> Stopping {
    Stopping {
        target_errors: 2000,
        min_trials: 100,
        max_trials: 20_000_000 / n as u64,
        batch: 32,
    }
}

/// Full-scale configuration of a named scenario. Apply
/// [`ExperimentConfig::desk_scale`] for quick runs.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let block = FadingModel::block_unit();
    let fast = FadingModel::gauss_markov(FAST_ALPHA, 1.0);
    let (n, fading, schemes, stopping) = match name {
        "fig4" => (
            100,
            block,
            vec![Scheme::BkicS, Scheme::BkicRbp],
            variance_stopping(),
        ),
        "fig5" => (
            100,
            block,
            vec![
                Scheme::Clean,
                Scheme::BkicS,
                Scheme::BkicRbp,
                Scheme::BkicRbpCont,
            ],
            ber_stopping(100),
        ),
        "fig6" => (
            1000,
            block,
            vec![Scheme::Clean, Scheme::BkicS, Scheme::BkicRbp],
            ber_stopping(1000),
        ),
        "fig7" => (
            100,
            fast,
            vec![Scheme::BkicS, Scheme::BkicRbp, Scheme::TraditionalKic],
            variance_stopping(),
        ),
        "fig8" | "fig9" => {
            let n = if name == "fig8" { 100 } else { 1000 };
            (
                n,
                fast,
                vec![
                    Scheme::Clean,
                    Scheme::BkicS,
                    Scheme::BkicRbp,
                    Scheme::TraditionalKic,
                ],
                ber_stopping(n),
            )
        }
        "fig10" => (
            100,
            block.with_taps(vec![Tap::new(0, 1.0), Tap::new(2, 1.0)]),
            vec![Scheme::Clean, Scheme::BkicS, Scheme::BkicRbp],
            ber_stopping(100),
        ),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(ExperimentConfig {
        name: name.to_string(),
        schemes,
        fading,
        n,
        q: 2,
        snr_db: (1..=10).map(f64::from).collect(),
        stopping,
        seed: 1,
        rbp: RbpSettings::default(),
        output: None,
    })
}
