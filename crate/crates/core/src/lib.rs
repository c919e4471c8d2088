//! Streaming casing-collar recognition core.
//!
//! Everything in this crate is pure computation over caller-owned buffers and
//! needs only `alloc`: the 1D CNN kernels and cost accounting ([`layer`],
//! [`kernels`], [`model`], [`cost`], [`fold`]), the reference collar
//! recognition networks and their budget search ([`zoo`], [`search`]), the
//! per-sample inference engine ([`stream`]), probability-map post-processing
//! ([`detect`]), event scoring ([`eval`]), the synthetic run generator
//! ([`synth`]) and the CRNW weight container ([`format`]).
//!
//! File IO, CSV/TOML formats and the command line live in the `ccl` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cost;
pub mod detect;
pub mod error;
pub mod eval;
pub mod fold;
pub mod format;
pub mod kernels;
pub mod layer;
pub mod model;
pub mod search;
pub mod stream;
pub mod synth;
pub mod tensor;
pub mod zoo;

pub use cost::{count_costs, count_layers, CostReport};
pub use detect::{
    correlate_tally, estimate_motion, Assignment, CasingTally, CollarEvent, Detector,
    DetectorConfig, Direction, Motion, MotionState,
};
pub use error::{Error, Result};
pub use eval::{match_events, metrics, EvalConfig, EvalReport, MatchOutcome};
pub use fold::fold_batchnorm;
pub use format::{decode_weights, encode_weights, LayerDescriptor};
pub use kernels::forward_layer;
pub use layer::{LayerKind, LayerSpec, LayerWeights, Padding};
pub use model::{forward_model, init_weights, zero_weights, ArchConfig, Model};
pub use search::{search_budget_config, BudgetTarget, Family, SearchBounds, SearchOutcome};
pub use stream::{Normalizer, ProbabilityMap, StreamEngine, Tick, WindowBuffer};
pub use synth::{generate_run, RunArtifacts, SynthConfig};
pub use tensor::{Shape, Tensor1D};
pub use zoo::{reference_config, validate_weights, CrnSpec, ModelId, WeightDiagnostic};

/// Logistic function, saturating for large magnitudes.
pub fn sigmoid(logit: f32) -> f32 {
    if logit >= 0.0 {
        1.0 / (1.0 + libm::expf(-logit))
    } else {
        let e = libm::expf(logit);
        e / (1.0 + e)
    }
}

/// Writes an `f32` as the `f64` nearest its shortest decimal form, so text
/// formats that widen to `f64` show `0.001` rather than `0.0010000000474974513`.
#[cfg(feature = "serde")]
pub(crate) fn short_f32<S: serde::Serializer>(v: &f32, s: S) -> core::result::Result<S::Ok, S::Error> {
    let text = alloc::format!("{v:?}");
    s.serialize_f64(text.parse().unwrap_or(*v as f64))
}

/// Samples per second of the digitized CCL stream.
pub const SAMPLE_RATE_HZ: u32 = 1000;

/// Length of the inference window in samples.
pub const WINDOW_LEN: usize = 160;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_fixed_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(20.0) > 0.999_999_9);
        assert!(sigmoid(-20.0) < 1e-7);
        assert!(sigmoid(-200.0) >= 0.0);
        assert!(sigmoid(200.0) <= 1.0);
    }

    #[test]
    fn sigmoid_matches_double_precision() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: f32 = rng.random_range(-30.0..30.0);
            let oracle = 1.0 / (1.0 + (-(x as f64)).exp());
            assert!((sigmoid(x) as f64 - oracle).abs() <= 1e-7, "x={x}");
        }
    }

    #[test]
    fn sigmoid_is_monotone() {
        let mut prev = 0.0;
        for i in -400..=400 {
            let p = sigmoid(i as f32 * 0.05);
            assert!(p >= prev);
            prev = p;
        }
    }
}
