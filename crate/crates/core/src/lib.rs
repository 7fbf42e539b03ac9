//! Simulation and analysis toolkit for brainstem stages of an auditory
//! model: alpha-function synaptic filters, cochlear-nucleus (CN) and
//! inferior-colliculus (IC) processing stages, ABR-style calibration, and
//! the modulation-transfer-function (MTF), click-growth and envelope-
//! following-response (EFR) experiment pipelines built on top of them.
//!
//! The crate is generic over the sample scalar (any [`Sample`], in practice
//! `f32` or `f64`); the `…64` aliases at the crate root fix the scalar to
//! `f64`, which is what the experiment drivers and the CLI use throughout.
//!
//! # Layout
//!
//! - [`alpha`] — discretized alpha-function kernels as biquad filters, in
//!   three historical variants with distinct DC gains.
//! - [`nuclei`] — the CN/IC stage: excitation minus delayed, scaled
//!   inhibition, with the optional legacy normalization bug.
//! - [`stimuli`] — click trains and AM probe tones at the render rate.
//! - [`frontend`] — Greenwood channel map and the surrogate AN stage.
//! - [`analysis`] — channel-sums, spectral magnitudes, wave picking, MTF
//!   curves.
//! - [`calibration`] — wave-amplitude scaling factors M1/M3/M5.
//! - [`experiments`] — end-to-end drivers (`simulate`, `calibrate`, `mtf`,
//!   `clicks`, `efr`) plus their CSV emitters.
//! - [`config`] — the flat `section.key = value` configuration format and
//!   its canonical hash.
//! - [`io`] — the VAP1 binary matrix format and CSV waveform/matrix files.

pub mod alpha;
pub mod analysis;
pub mod calibration;
pub mod config;
pub mod error;
pub mod experiments;
pub mod frontend;
pub mod io;
pub mod nuclei;
pub mod population;
pub mod sample;
pub mod stimuli;

pub use alpha::{AlphaVariant, Biquad};
pub use analysis::{
    efr_magnitude, modulation_magnitude, wave_metrics, ChannelRange, Convention, EfrWeights,
    MtfCurve, Wave, WaveMetrics, WaveWindow,
};
pub use calibration::{
    calibrate, calibrate_sums, CalibrationOutcome, CalibrationProtocol, CalibrationTargets,
    ScalingFactors,
};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use frontend::{surrogate_an, ChannelMap, FiberWeights, SurrogateConfig};
pub use io::MatrixFormat;
pub use nuclei::{nucleus_response, BugMode, NucleusParams};
pub use population::PopulationResponse;
pub use sample::Sample;
pub use stimuli::{AmTone, ClickTrain, Polarity, StimulusSpec};

/// [`Biquad`] over `f64`.
pub type Biquad64 = Biquad<f64>;
/// [`PopulationResponse`] over `f64`.
pub type PopulationResponse64 = PopulationResponse<f64>;
/// [`NucleusParams`] over `f64`.
pub type NucleusParams64 = NucleusParams<f64>;
/// [`ChannelMap`] over `f64`.
pub type ChannelMap64 = ChannelMap<f64>;
/// [`EfrWeights`] over `f64`.
pub type EfrWeights64 = EfrWeights<f64>;
