//! Blind known-interference cancellation.
//!
//! A receiver that knows an interferer's data, but not its channel, can still
//! remove it: combining adjacent samples cancels the interference wherever the
//! channel is locally constant, and the desired signal is then recovered from
//! the combined chain either by smoothing ([`smooth`]) or by belief
//! propagation over quantized densities ([`rbp`]).

pub mod analysis;
pub mod baseline;
pub mod cancel;
pub mod channel;
pub mod error;
pub mod harness;
pub mod modem;
pub mod rbp;
pub mod smooth;

pub use cancel::{combine, successive_cancel, CombinedSignal, Recovery};
pub use channel::{
    realize_fading, synthesize, BlockGain, FadingKind, FadingModel, FadingRealization,
    ReceivedFrame, Tap, TargetGain,
};
pub use error::{Error, Result};
pub use harness::{preset, run_experiment, CurvePoint, ExperimentConfig, Scheme};
pub use modem::{detect, detect_bpsk, generate_stream, Constellation, Role, SymbolStream};
pub use rbp::{rbp_recover, Estimate, PowerBound, QuantizedDensity, RbpConfig, RbpRecovery};
pub use smooth::{smooth_recover, Smoothing};
