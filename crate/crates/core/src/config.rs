//! Experiment configuration: a flat, diffable `section.key = value` text
//! format in which every key has a default and unknown keys are rejected.
//!
//! `#` lines are comments; later assignments override earlier ones. The
//! canonical serialization (sorted keys, shortest round-trip numbers) feeds
//! a SHA-256 [`ExperimentConfig::config_hash`] that experiment drivers embed
//! in their outputs, so any two byte-identical output files are guaranteed
//! to come from the same parameter set.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::alpha::AlphaVariant;
use crate::analysis::{ChannelRange, WaveWindow};
use crate::calibration::{CalibrationProtocol, CalibrationTargets, ScalingFactors};
use crate::error::{Error, Result};
use crate::frontend::{FiberWeights, SurrogateConfig};
use crate::io::MatrixFormat;
use crate::nuclei::{BugMode, NucleusParams};
use crate::stimuli::{AmTone, ClickTrain, Polarity, StimulusSpec, RENDER_FS};

/// Stimulus description (both kinds carry their full parameter sets; `kind`
/// selects which one [`ExperimentConfig::stimulus_spec`] builds).
#[derive(Clone, Debug, PartialEq)]
pub struct StimulusSection {
    pub kind: String,
    pub fs_hz: f64,
    pub click_rate_hz: f64,
    pub click_duration_s: f64,
    pub click_width_s: f64,
    pub click_level_db_pespl: f64,
    pub click_polarity: String,
    pub click_first_onset_s: f64,
    pub tone_fc_hz: f64,
    pub tone_fmod_hz: f64,
    pub tone_depth: f64,
    pub tone_duration_s: f64,
    pub tone_level_db_spl: f64,
    pub tone_ramp_s: f64,
    pub tone_leading_silence_s: f64,
}

/// Front-end settings: analysis rate, channel count and surrogate knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontendSection {
    pub fs_abr_hz: f64,
    pub channels: usize,
    pub bandpass_q: f64,
    pub lowpass_hz: f64,
    pub slope_hsr: f64,
    pub slope_msr: f64,
    pub slope_lsr: f64,
    pub sat_hsr: f64,
    pub sat_msr: f64,
    pub sat_lsr: f64,
    pub n_hsr: usize,
    pub n_msr: usize,
    pub n_lsr: usize,
}

/// One nucleus stage's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NucleusSection {
    pub tau_exc_s: f64,
    pub tau_inh_s: f64,
    pub s_inh: f64,
    pub delay_s: f64,
    pub gain_a: f64,
}

/// Settings shared by both nucleus stages.
#[derive(Clone, Debug, PartialEq)]
pub struct NucleiSection {
    pub bug_mode: String,
    pub kernel_variant: String,
}

/// Analysis windows, FFT length and channel bands.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisSection {
    pub nfft: usize,
    pub epoch_s: f64,
    pub trough_span_s: f64,
    pub latency_shift_s: f64,
    pub mtf_channel: usize,
    pub w1_start_s: f64,
    pub w1_end_s: f64,
    pub w3_start_s: f64,
    pub w3_end_s: f64,
    pub w5_start_s: f64,
    pub w5_end_s: f64,
    pub onfreq_first: usize,
    pub onfreq_last: usize,
    pub offfreq_first: usize,
    pub offfreq_last: usize,
}

/// Calibration targets, epochs and the active scaling factors.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationSection {
    pub target_w1_v: f64,
    pub target_w3_v: f64,
    pub target_w5_v: f64,
    pub epoch_a: usize,
    pub epoch_b: usize,
    pub m1: f64,
    pub m3: f64,
    pub m5: f64,
    /// Optional calibration file whose `m1=`/`m3=`/`m5=` lines override the
    /// factors above (empty = unused).
    pub file: String,
}

/// Modulation-transfer-function sweep settings.
#[derive(Clone, Debug, PartialEq)]
pub struct MtfSection {
    pub fmod_start_hz: f64,
    pub fmod_stop_hz: f64,
    pub fmod_step_hz: f64,
    pub duration_s: f64,
    pub ramp_s: f64,
    pub depth: f64,
    pub level_db_spl: f64,
    pub leading_silence_s: f64,
}

/// Click-growth sweep settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ClicksSection {
    pub level_start_db: f64,
    pub level_stop_db: f64,
    pub level_step_db: f64,
    pub rate_hz: f64,
    pub duration_s: f64,
    pub first_onset_s: f64,
    pub epoch_first: usize,
    pub epoch_last: usize,
}

/// EFR level-series settings.
#[derive(Clone, Debug, PartialEq)]
pub struct EfrSection {
    pub level_start_db: f64,
    pub level_stop_db: f64,
    pub level_step_db: f64,
    pub trace_level_db: f64,
}

/// Input/output settings.
#[derive(Clone, Debug, PartialEq)]
pub struct IoSection {
    /// Pre-computed AN population file to ingest (empty = run the surrogate
    /// front end instead).
    pub an_path: String,
    /// Matrix format for population files: `vap1` or `csv`.
    pub format: String,
}

/// The full experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub stimulus: StimulusSection,
    pub frontend: FrontendSection,
    pub cn: NucleusSection,
    pub ic: NucleusSection,
    pub nuclei: NucleiSection,
    pub analysis: AnalysisSection,
    pub calibration: CalibrationSection,
    pub mtf: MtfSection,
    pub clicks: ClicksSection,
    pub efr: EfrSection,
    pub io: IoSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            stimulus: StimulusSection {
                kind: "click_train".into(),
                fs_hz: RENDER_FS,
                click_rate_hz: 11.1,
                click_duration_s: 6.0,
                click_width_s: 80e-6,
                click_level_db_pespl: 100.0,
                click_polarity: "alternating".into(),
                click_first_onset_s: 0.0,
                tone_fc_hz: 4e3,
                tone_fmod_hz: 98.0,
                tone_depth: 0.85,
                tone_duration_s: 0.1,
                tone_level_db_spl: 70.0,
                tone_ramp_s: 2.5e-3,
                tone_leading_silence_s: 20e-3,
            },
            frontend: FrontendSection {
                fs_abr_hz: 20e3,
                channels: 401,
                bandpass_q: 4.0,
                lowpass_hz: 1e3,
                slope_hsr: 300.0,
                slope_msr: 120.0,
                slope_lsr: 60.0,
                sat_hsr: 250.0,
                sat_msr: 150.0,
                sat_lsr: 120.0,
                n_hsr: 13,
                n_msr: 3,
                n_lsr: 3,
            },
            cn: NucleusSection {
                tau_exc_s: 0.5e-3,
                tau_inh_s: 2e-3,
                s_inh: 0.6,
                delay_s: 1e-3,
                gain_a: 1.5,
            },
            ic: NucleusSection {
                tau_exc_s: 0.5e-3,
                tau_inh_s: 2e-3,
                s_inh: 1.5,
                delay_s: 2e-3,
                gain_a: 1.0,
            },
            nuclei: NucleiSection {
                bug_mode: "fixed_v12".into(),
                kernel_variant: "v12".into(),
            },
            analysis: AnalysisSection {
                nfft: 4000,
                epoch_s: 25e-3,
                trough_span_s: 5e-3,
                latency_shift_s: 3.5e-3,
                mtf_channel: 112,
                w1_start_s: 0.5e-3,
                w1_end_s: 2.5e-3,
                w3_start_s: 1.5e-3,
                w3_end_s: 4e-3,
                w5_start_s: 3e-3,
                w5_end_s: 8e-3,
                onfreq_first: 100,
                onfreq_last: 123,
                offfreq_first: 30,
                offfreq_last: 54,
            },
            calibration: CalibrationSection {
                target_w1_v: 0.15e-6,
                target_w3_v: 0.17e-6,
                target_w5_v: 0.61e-6,
                epoch_a: 59,
                epoch_b: 60,
                m1: 4.2767e-14,
                m3: 5.1435e-14,
                m5: 13.3093e-14,
                file: String::new(),
            },
            mtf: MtfSection {
                fmod_start_hz: 5.0,
                fmod_stop_hz: 250.0,
                fmod_step_hz: 5.0,
                duration_s: 0.2,
                ramp_s: 5e-3,
                depth: 1.0,
                level_db_spl: 70.0,
                leading_silence_s: 0.0,
            },
            clicks: ClicksSection {
                level_start_db: 60.0,
                level_stop_db: 100.0,
                level_step_db: 10.0,
                rate_hz: 20.0,
                duration_s: 0.5,
                first_onset_s: 10e-6,
                epoch_first: 1,
                epoch_last: 10,
            },
            efr: EfrSection {
                level_start_db: 30.0,
                level_stop_db: 90.0,
                level_step_db: 10.0,
                trace_level_db: 70.0,
            },
            io: IoSection {
                an_path: String::new(),
                format: "vap1".into(),
            },
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got '{value}'")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| {
        Error::Config(format!(
            "{key}: expected a non-negative integer, got '{value}'"
        ))
    })
}

/// Shortest round-trip float spelling used in the canonical serialization.
fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

impl ExperimentConfig {
    /// Parse a config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Read and parse a config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Assign one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "stimulus.kind" => match value {
                "click_train" | "am_tone" => self.stimulus.kind = value.into(),
                _ => {
                    return Err(Error::Config(format!(
                        "stimulus.kind: expected click_train or am_tone, got '{value}'"
                    )))
                }
            },
            "stimulus.fs_hz" => self.stimulus.fs_hz = parse_f64(key, value)?,
            "stimulus.click_rate_hz" => self.stimulus.click_rate_hz = parse_f64(key, value)?,
            "stimulus.click_duration_s" => self.stimulus.click_duration_s = parse_f64(key, value)?,
            "stimulus.click_width_s" => self.stimulus.click_width_s = parse_f64(key, value)?,
            "stimulus.click_level_db_pespl" => {
                self.stimulus.click_level_db_pespl = parse_f64(key, value)?
            }
            "stimulus.click_polarity" => {
                Polarity::parse(value)?;
                self.stimulus.click_polarity = value.into();
            }
            "stimulus.click_first_onset_s" => {
                self.stimulus.click_first_onset_s = parse_f64(key, value)?
            }
            "stimulus.tone_fc_hz" => self.stimulus.tone_fc_hz = parse_f64(key, value)?,
            "stimulus.tone_fmod_hz" => self.stimulus.tone_fmod_hz = parse_f64(key, value)?,
            "stimulus.tone_depth" => self.stimulus.tone_depth = parse_f64(key, value)?,
            "stimulus.tone_duration_s" => self.stimulus.tone_duration_s = parse_f64(key, value)?,
            "stimulus.tone_level_db_spl" => {
                self.stimulus.tone_level_db_spl = parse_f64(key, value)?
            }
            "stimulus.tone_ramp_s" => self.stimulus.tone_ramp_s = parse_f64(key, value)?,
            "stimulus.tone_leading_silence_s" => {
                self.stimulus.tone_leading_silence_s = parse_f64(key, value)?
            }
            "frontend.fs_abr_hz" => self.frontend.fs_abr_hz = parse_f64(key, value)?,
            "frontend.channels" => self.frontend.channels = parse_usize(key, value)?,
            "frontend.bandpass_q" => self.frontend.bandpass_q = parse_f64(key, value)?,
            "frontend.lowpass_hz" => self.frontend.lowpass_hz = parse_f64(key, value)?,
            "frontend.slope_hsr" => self.frontend.slope_hsr = parse_f64(key, value)?,
            "frontend.slope_msr" => self.frontend.slope_msr = parse_f64(key, value)?,
            "frontend.slope_lsr" => self.frontend.slope_lsr = parse_f64(key, value)?,
            "frontend.sat_hsr" => self.frontend.sat_hsr = parse_f64(key, value)?,
            "frontend.sat_msr" => self.frontend.sat_msr = parse_f64(key, value)?,
            "frontend.sat_lsr" => self.frontend.sat_lsr = parse_f64(key, value)?,
            "frontend.n_hsr" => self.frontend.n_hsr = parse_usize(key, value)?,
            "frontend.n_msr" => self.frontend.n_msr = parse_usize(key, value)?,
            "frontend.n_lsr" => self.frontend.n_lsr = parse_usize(key, value)?,
            "cn.tau_exc_s" => self.cn.tau_exc_s = parse_f64(key, value)?,
            "cn.tau_inh_s" => self.cn.tau_inh_s = parse_f64(key, value)?,
            "cn.s_inh" => self.cn.s_inh = parse_f64(key, value)?,
            "cn.delay_s" => self.cn.delay_s = parse_f64(key, value)?,
            "cn.gain_a" => self.cn.gain_a = parse_f64(key, value)?,
            "ic.tau_exc_s" => self.ic.tau_exc_s = parse_f64(key, value)?,
            "ic.tau_inh_s" => self.ic.tau_inh_s = parse_f64(key, value)?,
            "ic.s_inh" => self.ic.s_inh = parse_f64(key, value)?,
            "ic.delay_s" => self.ic.delay_s = parse_f64(key, value)?,
            "ic.gain_a" => self.ic.gain_a = parse_f64(key, value)?,
            "nuclei.bug_mode" => {
                BugMode::parse(value)?;
                self.nuclei.bug_mode = value.into();
            }
            "nuclei.kernel_variant" => {
                AlphaVariant::parse(value)?;
                self.nuclei.kernel_variant = value.into();
            }
            "analysis.nfft" => self.analysis.nfft = parse_usize(key, value)?,
            "analysis.epoch_s" => self.analysis.epoch_s = parse_f64(key, value)?,
            "analysis.trough_span_s" => self.analysis.trough_span_s = parse_f64(key, value)?,
            "analysis.latency_shift_s" => self.analysis.latency_shift_s = parse_f64(key, value)?,
            "analysis.mtf_channel" => self.analysis.mtf_channel = parse_usize(key, value)?,
            "analysis.w1_start_s" => self.analysis.w1_start_s = parse_f64(key, value)?,
            "analysis.w1_end_s" => self.analysis.w1_end_s = parse_f64(key, value)?,
            "analysis.w3_start_s" => self.analysis.w3_start_s = parse_f64(key, value)?,
            "analysis.w3_end_s" => self.analysis.w3_end_s = parse_f64(key, value)?,
            "analysis.w5_start_s" => self.analysis.w5_start_s = parse_f64(key, value)?,
            "analysis.w5_end_s" => self.analysis.w5_end_s = parse_f64(key, value)?,
            "analysis.onfreq_first" => self.analysis.onfreq_first = parse_usize(key, value)?,
            "analysis.onfreq_last" => self.analysis.onfreq_last = parse_usize(key, value)?,
            "analysis.offfreq_first" => self.analysis.offfreq_first = parse_usize(key, value)?,
            "analysis.offfreq_last" => self.analysis.offfreq_last = parse_usize(key, value)?,
            "calibration.target_w1_v" => self.calibration.target_w1_v = parse_f64(key, value)?,
            "calibration.target_w3_v" => self.calibration.target_w3_v = parse_f64(key, value)?,
            "calibration.target_w5_v" => self.calibration.target_w5_v = parse_f64(key, value)?,
            "calibration.epoch_a" => self.calibration.epoch_a = parse_usize(key, value)?,
            "calibration.epoch_b" => self.calibration.epoch_b = parse_usize(key, value)?,
            "calibration.m1" => self.calibration.m1 = parse_f64(key, value)?,
            "calibration.m3" => self.calibration.m3 = parse_f64(key, value)?,
            "calibration.m5" => self.calibration.m5 = parse_f64(key, value)?,
            "calibration.file" => self.calibration.file = value.into(),
            "mtf.fmod_start_hz" => self.mtf.fmod_start_hz = parse_f64(key, value)?,
            "mtf.fmod_stop_hz" => self.mtf.fmod_stop_hz = parse_f64(key, value)?,
            "mtf.fmod_step_hz" => self.mtf.fmod_step_hz = parse_f64(key, value)?,
            "mtf.duration_s" => self.mtf.duration_s = parse_f64(key, value)?,
            "mtf.ramp_s" => self.mtf.ramp_s = parse_f64(key, value)?,
            "mtf.depth" => self.mtf.depth = parse_f64(key, value)?,
            "mtf.level_db_spl" => self.mtf.level_db_spl = parse_f64(key, value)?,
            "mtf.leading_silence_s" => self.mtf.leading_silence_s = parse_f64(key, value)?,
            "clicks.level_start_db" => self.clicks.level_start_db = parse_f64(key, value)?,
            "clicks.level_stop_db" => self.clicks.level_stop_db = parse_f64(key, value)?,
            "clicks.level_step_db" => self.clicks.level_step_db = parse_f64(key, value)?,
            "clicks.rate_hz" => self.clicks.rate_hz = parse_f64(key, value)?,
            "clicks.duration_s" => self.clicks.duration_s = parse_f64(key, value)?,
            "clicks.first_onset_s" => self.clicks.first_onset_s = parse_f64(key, value)?,
            "clicks.epoch_first" => self.clicks.epoch_first = parse_usize(key, value)?,
            "clicks.epoch_last" => self.clicks.epoch_last = parse_usize(key, value)?,
            "efr.level_start_db" => self.efr.level_start_db = parse_f64(key, value)?,
            "efr.level_stop_db" => self.efr.level_stop_db = parse_f64(key, value)?,
            "efr.level_step_db" => self.efr.level_step_db = parse_f64(key, value)?,
            "efr.trace_level_db" => self.efr.trace_level_db = parse_f64(key, value)?,
            "io.an_path" => self.io.an_path = value.into(),
            "io.format" => {
                MatrixFormat::parse(value)?;
                self.io.format = value.into();
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Every key with its canonical value spelling.
    pub fn entries(&self) -> Vec<(String, String)> {
        let f = fmt_f64;
        let mut e: Vec<(String, String)> = Vec::with_capacity(80);
        let mut push = |k: &str, v: String| e.push((k.to_string(), v));

        push("stimulus.kind", self.stimulus.kind.clone());
        push("stimulus.fs_hz", f(self.stimulus.fs_hz));
        push("stimulus.click_rate_hz", f(self.stimulus.click_rate_hz));
        push(
            "stimulus.click_duration_s",
            f(self.stimulus.click_duration_s),
        );
        push("stimulus.click_width_s", f(self.stimulus.click_width_s));
        push(
            "stimulus.click_level_db_pespl",
            f(self.stimulus.click_level_db_pespl),
        );
        push(
            "stimulus.click_polarity",
            self.stimulus.click_polarity.clone(),
        );
        push(
            "stimulus.click_first_onset_s",
            f(self.stimulus.click_first_onset_s),
        );
        push("stimulus.tone_fc_hz", f(self.stimulus.tone_fc_hz));
        push("stimulus.tone_fmod_hz", f(self.stimulus.tone_fmod_hz));
        push("stimulus.tone_depth", f(self.stimulus.tone_depth));
        push("stimulus.tone_duration_s", f(self.stimulus.tone_duration_s));
        push(
            "stimulus.tone_level_db_spl",
            f(self.stimulus.tone_level_db_spl),
        );
        push("stimulus.tone_ramp_s", f(self.stimulus.tone_ramp_s));
        push(
            "stimulus.tone_leading_silence_s",
            f(self.stimulus.tone_leading_silence_s),
        );
        push("frontend.fs_abr_hz", f(self.frontend.fs_abr_hz));
        push("frontend.channels", self.frontend.channels.to_string());
        push("frontend.bandpass_q", f(self.frontend.bandpass_q));
        push("frontend.lowpass_hz", f(self.frontend.lowpass_hz));
        push("frontend.slope_hsr", f(self.frontend.slope_hsr));
        push("frontend.slope_msr", f(self.frontend.slope_msr));
        push("frontend.slope_lsr", f(self.frontend.slope_lsr));
        push("frontend.sat_hsr", f(self.frontend.sat_hsr));
        push("frontend.sat_msr", f(self.frontend.sat_msr));
        push("frontend.sat_lsr", f(self.frontend.sat_lsr));
        push("frontend.n_hsr", self.frontend.n_hsr.to_string());
        push("frontend.n_msr", self.frontend.n_msr.to_string());
        push("frontend.n_lsr", self.frontend.n_lsr.to_string());
        push("cn.tau_exc_s", f(self.cn.tau_exc_s));
        push("cn.tau_inh_s", f(self.cn.tau_inh_s));
        push("cn.s_inh", f(self.cn.s_inh));
        push("cn.delay_s", f(self.cn.delay_s));
        push("cn.gain_a", f(self.cn.gain_a));
        push("ic.tau_exc_s", f(self.ic.tau_exc_s));
        push("ic.tau_inh_s", f(self.ic.tau_inh_s));
        push("ic.s_inh", f(self.ic.s_inh));
        push("ic.delay_s", f(self.ic.delay_s));
        push("ic.gain_a", f(self.ic.gain_a));
        push("nuclei.bug_mode", self.nuclei.bug_mode.clone());
        push("nuclei.kernel_variant", self.nuclei.kernel_variant.clone());
        push("analysis.nfft", self.analysis.nfft.to_string());
        push("analysis.epoch_s", f(self.analysis.epoch_s));
        push("analysis.trough_span_s", f(self.analysis.trough_span_s));
        push("analysis.latency_shift_s", f(self.analysis.latency_shift_s));
        push(
            "analysis.mtf_channel",
            self.analysis.mtf_channel.to_string(),
        );
        push("analysis.w1_start_s", f(self.analysis.w1_start_s));
        push("analysis.w1_end_s", f(self.analysis.w1_end_s));
        push("analysis.w3_start_s", f(self.analysis.w3_start_s));
        push("analysis.w3_end_s", f(self.analysis.w3_end_s));
        push("analysis.w5_start_s", f(self.analysis.w5_start_s));
        push("analysis.w5_end_s", f(self.analysis.w5_end_s));
        push(
            "analysis.onfreq_first",
            self.analysis.onfreq_first.to_string(),
        );
        push(
            "analysis.onfreq_last",
            self.analysis.onfreq_last.to_string(),
        );
        push(
            "analysis.offfreq_first",
            self.analysis.offfreq_first.to_string(),
        );
        push(
            "analysis.offfreq_last",
            self.analysis.offfreq_last.to_string(),
        );
        push("calibration.target_w1_v", f(self.calibration.target_w1_v));
        push("calibration.target_w3_v", f(self.calibration.target_w3_v));
        push("calibration.target_w5_v", f(self.calibration.target_w5_v));
        push("calibration.epoch_a", self.calibration.epoch_a.to_string());
        push("calibration.epoch_b", self.calibration.epoch_b.to_string());
        push("calibration.m1", f(self.calibration.m1));
        push("calibration.m3", f(self.calibration.m3));
        push("calibration.m5", f(self.calibration.m5));
        push("calibration.file", self.calibration.file.clone());
        push("mtf.fmod_start_hz", f(self.mtf.fmod_start_hz));
        push("mtf.fmod_stop_hz", f(self.mtf.fmod_stop_hz));
        push("mtf.fmod_step_hz", f(self.mtf.fmod_step_hz));
        push("mtf.duration_s", f(self.mtf.duration_s));
        push("mtf.ramp_s", f(self.mtf.ramp_s));
        push("mtf.depth", f(self.mtf.depth));
        push("mtf.level_db_spl", f(self.mtf.level_db_spl));
        push("mtf.leading_silence_s", f(self.mtf.leading_silence_s));
        push("clicks.level_start_db", f(self.clicks.level_start_db));
        push("clicks.level_stop_db", f(self.clicks.level_stop_db));
        push("clicks.level_step_db", f(self.clicks.level_step_db));
        push("clicks.rate_hz", f(self.clicks.rate_hz));
        push("clicks.duration_s", f(self.clicks.duration_s));
        push("clicks.first_onset_s", f(self.clicks.first_onset_s));
        push("clicks.epoch_first", self.clicks.epoch_first.to_string());
        push("clicks.epoch_last", self.clicks.epoch_last.to_string());
        push("efr.level_start_db", f(self.efr.level_start_db));
        push("efr.level_stop_db", f(self.efr.level_stop_db));
        push("efr.level_step_db", f(self.efr.level_step_db));
        push("efr.trace_level_db", f(self.efr.trace_level_db));
        push("io.an_path", self.io.an_path.clone());
        push("io.format", self.io.format.clone());
        e
    }

    /// Canonical serialization: `key = value` lines, keys sorted.
    pub fn canonical_string(&self) -> String {
        let mut entries = self.entries();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = String::new();
        for (k, v) in entries {
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical serialization, lowercase hex.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    // ----- typed builders -----------------------------------------------

    /// The stimulus selected by `stimulus.kind`.
    pub fn stimulus_spec(&self) -> Result<StimulusSpec> {
        match self.stimulus.kind.as_str() {
            "click_train" => Ok(StimulusSpec::ClickTrain(ClickTrain {
                fs: self.stimulus.fs_hz,
                rate_hz: self.stimulus.click_rate_hz,
                duration_s: self.stimulus.click_duration_s,
                click_width_s: self.stimulus.click_width_s,
                level_db_pespl: self.stimulus.click_level_db_pespl,
                polarity: Polarity::parse(&self.stimulus.click_polarity)?,
                first_onset_s: self.stimulus.click_first_onset_s,
            })),
            "am_tone" => Ok(StimulusSpec::AmTone(AmTone {
                fs: self.stimulus.fs_hz,
                fc_hz: self.stimulus.tone_fc_hz,
                fmod_hz: self.stimulus.tone_fmod_hz,
                depth: self.stimulus.tone_depth,
                duration_s: self.stimulus.tone_duration_s,
                level_db_spl: self.stimulus.tone_level_db_spl,
                ramp_s: self.stimulus.tone_ramp_s,
                leading_silence_s: self.stimulus.tone_leading_silence_s,
            })),
            other => Err(Error::Config(format!("unknown stimulus.kind '{other}'"))),
        }
    }

    /// The calibration click train described by the `stimulus.click_*` keys.
    pub fn calibration_train(&self) -> Result<ClickTrain> {
        Ok(ClickTrain {
            fs: self.stimulus.fs_hz,
            rate_hz: self.stimulus.click_rate_hz,
            duration_s: self.stimulus.click_duration_s,
            click_width_s: self.stimulus.click_width_s,
            level_db_pespl: self.stimulus.click_level_db_pespl,
            polarity: Polarity::parse(&self.stimulus.click_polarity)?,
            first_onset_s: self.stimulus.click_first_onset_s,
        })
    }

    /// The all-positive wave-growth click train at the given level.
    pub fn growth_train(&self, level_db_pespl: f64) -> ClickTrain {
        ClickTrain {
            fs: self.stimulus.fs_hz,
            rate_hz: self.clicks.rate_hz,
            duration_s: self.clicks.duration_s,
            click_width_s: self.stimulus.click_width_s,
            level_db_pespl,
            polarity: Polarity::AllPositive,
            first_onset_s: self.clicks.first_onset_s,
        }
    }

    /// The MTF probe tone at the given modulation frequency.
    pub fn mtf_tone(&self, fmod_hz: f64) -> AmTone {
        AmTone {
            fs: self.stimulus.fs_hz,
            fc_hz: self.stimulus.tone_fc_hz,
            fmod_hz,
            depth: self.mtf.depth,
            duration_s: self.mtf.duration_s,
            level_db_spl: self.mtf.level_db_spl,
            ramp_s: self.mtf.ramp_s,
            leading_silence_s: self.mtf.leading_silence_s,
        }
    }

    /// The EFR tone (`stimulus.tone_*` keys) at the given level.
    pub fn efr_tone(&self, level_db_spl: f64) -> AmTone {
        AmTone {
            fs: self.stimulus.fs_hz,
            fc_hz: self.stimulus.tone_fc_hz,
            fmod_hz: self.stimulus.tone_fmod_hz,
            depth: self.stimulus.tone_depth,
            duration_s: self.stimulus.tone_duration_s,
            level_db_spl,
            ramp_s: self.stimulus.tone_ramp_s,
            leading_silence_s: self.stimulus.tone_leading_silence_s,
        }
    }

    /// Surrogate front-end settings.
    pub fn surrogate_config(&self) -> SurrogateConfig {
        SurrogateConfig {
            bandpass_q: self.frontend.bandpass_q,
            lowpass_hz: self.frontend.lowpass_hz,
            slope_hsr: self.frontend.slope_hsr,
            slope_msr: self.frontend.slope_msr,
            slope_lsr: self.frontend.slope_lsr,
            sat_hsr: self.frontend.sat_hsr,
            sat_msr: self.frontend.sat_msr,
            sat_lsr: self.frontend.sat_lsr,
            weights: FiberWeights {
                n_hsr: self.frontend.n_hsr,
                n_msr: self.frontend.n_msr,
                n_lsr: self.frontend.n_lsr,
            },
        }
    }

    fn nucleus_params(&self, section: &NucleusSection) -> Result<NucleusParams<f64>> {
        let params = NucleusParams {
            tau_exc_s: section.tau_exc_s,
            tau_inh_s: section.tau_inh_s,
            s_inh: section.s_inh,
            delay_s: section.delay_s,
            gain_a: section.gain_a,
            kernel_variant: AlphaVariant::parse(&self.nuclei.kernel_variant)?,
            bug_mode: BugMode::parse(&self.nuclei.bug_mode)?,
        };
        params.validate()?;
        Ok(params)
    }

    /// CN-stage parameters (`cn.*` + `nuclei.*` keys).
    pub fn cn_params(&self) -> Result<NucleusParams<f64>> {
        self.nucleus_params(&self.cn)
    }

    /// IC-stage parameters (`ic.*` + `nuclei.*` keys).
    pub fn ic_params(&self) -> Result<NucleusParams<f64>> {
        self.nucleus_params(&self.ic)
    }

    /// Wave search windows (W-I, W-III, W-V).
    pub fn wave_windows(&self) -> [WaveWindow; 3] {
        [
            WaveWindow {
                start_s: self.analysis.w1_start_s,
                end_s: self.analysis.w1_end_s,
            },
            WaveWindow {
                start_s: self.analysis.w3_start_s,
                end_s: self.analysis.w3_end_s,
            },
            WaveWindow {
                start_s: self.analysis.w5_start_s,
                end_s: self.analysis.w5_end_s,
            },
        ]
    }

    /// Active scaling factors from the `calibration.m*` keys.
    pub fn scaling_factors(&self) -> Result<ScalingFactors> {
        let m = ScalingFactors {
            m1: self.calibration.m1,
            m3: self.calibration.m3,
            m5: self.calibration.m5,
        };
        m.validate()?;
        Ok(m)
    }

    /// Full calibration protocol from the calibration and analysis keys.
    pub fn calibration_protocol(&self) -> Result<CalibrationProtocol> {
        let [w1, w3, w5] = self.wave_windows();
        Ok(CalibrationProtocol {
            targets: CalibrationTargets {
                w1_p_v: self.calibration.target_w1_v,
                w3_p_v: self.calibration.target_w3_v,
                w5_pp_v: self.calibration.target_w5_v,
            },
            epochs: vec![self.calibration.epoch_a, self.calibration.epoch_b],
            train: self.calibration_train()?,
            w1_window: w1,
            w3_window: w3,
            w5_window: w5,
            trough_span_s: self.analysis.trough_span_s,
        })
    }

    /// On-frequency summation band.
    pub fn onfreq_range(&self) -> Result<ChannelRange> {
        ChannelRange::new(self.analysis.onfreq_first, self.analysis.onfreq_last)
    }

    /// Off-frequency summation band.
    pub fn offfreq_range(&self) -> Result<ChannelRange> {
        ChannelRange::new(self.analysis.offfreq_first, self.analysis.offfreq_last)
    }

    /// Population file format from `io.format`.
    pub fn matrix_format(&self) -> Result<MatrixFormat> {
        MatrixFormat::parse(&self.io.format)
    }
}
