//! Cochlear-nucleus and inferior-colliculus stage equations.
//!
//! Both stages share one same-difference form: the output is excitation minus
//! delayed, scaled inhibition, each path an alpha-kernel convolution of the
//! stage input,
//!
//! ```text
//! r_out(t) = A · [ h_exc ∗ r_in(t)  −  S · h_inh ∗ r_in(t − D) ]
//! ```
//!
//! with `h_τ` the unit-area alpha filter of [`crate::alpha`] and the delay
//! realized as a shift of `round(D·fs)` samples with zero-fill. The CN stage
//! feeds on the summed AN rate, the IC stage on the CN output; only the
//! parameter values differ.
//!
//! [`BugMode::BugV11`] reproduces a historical normalization slip: each path
//! is additionally multiplied by `1/τ²` (τ in seconds), turning the intended
//! `1/τ²` kernel constants into effective `1/τ⁴` ones. Because
//! `1/τ_exc² ≫ 1/τ_inh²` for the default time constants, inhibition becomes
//! nearly marginal relative to excitation in that mode.

use crate::alpha::{AlphaVariant, Biquad};
use crate::error::{Error, Result};
use crate::population::PopulationResponse;
use crate::sample::Sample;

/// Normalization convention for the two nucleus paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BugMode {
    /// Correct normalization: each path is exactly the unit-area kernel.
    FixedV12,
    /// v1.1 regression mode: each path carries an extra `1/τ²` factor.
    BugV11,
}

impl BugMode {
    /// Stable config-file spelling.
    pub fn name(self) -> &'static str {
        match self {
            BugMode::FixedV12 => "fixed_v12",
            BugMode::BugV11 => "bug_v11",
        }
    }

    /// Parse the config-file spelling.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fixed_v12" => Ok(BugMode::FixedV12),
            "bug_v11" => Ok(BugMode::BugV11),
            other => Err(Error::Config(format!(
                "unknown bug_mode '{other}' (expected fixed_v12 or bug_v11)"
            ))),
        }
    }
}

/// Parameters of one nucleus stage (CN or IC).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NucleusParams<S: Sample> {
    /// Excitatory kernel time constant in seconds.
    pub tau_exc_s: S,
    /// Inhibitory kernel time constant in seconds.
    pub tau_inh_s: S,
    /// Inhibition strength `S` (dimensionless, ≥ 0).
    pub s_inh: S,
    /// Inhibition delay `D` in seconds (≥ 0).
    pub delay_s: S,
    /// Stage gain `A` (dimensionless).
    pub gain_a: S,
    /// Alpha-filter variant used for both paths.
    pub kernel_variant: AlphaVariant,
    /// Path normalization convention.
    pub bug_mode: BugMode,
}

impl<S: Sample> NucleusParams<S> {
    /// Default CN parameters: τ_exc = 0.5 ms, τ_inh = 2 ms, S = 0.6,
    /// D = 1 ms, A = 1.5.
    ///
    /// The time constants are the model's published pair; S, D and A are
    /// implementer-chosen defaults and must be set explicitly when matching
    /// any particular published figure.
    pub fn cn_defaults() -> Self {
        NucleusParams {
            tau_exc_s: S::of(0.5e-3),
            tau_inh_s: S::of(2e-3),
            s_inh: S::of(0.6),
            delay_s: S::of(1e-3),
            gain_a: S::of(1.5),
            kernel_variant: AlphaVariant::V12,
            bug_mode: BugMode::FixedV12,
        }
    }

    /// Default IC parameters: τ_exc = 0.5 ms, τ_inh = 2 ms, S = 1.5,
    /// D = 2 ms, A = 1.0. The same caveats as [`cn_defaults`] apply; note
    /// S > 1 makes the stage's DC gain negative, which is what produces the
    /// characteristic negative IC excursions.
    ///
    /// [`cn_defaults`]: NucleusParams::cn_defaults
    pub fn ic_defaults() -> Self {
        NucleusParams {
            tau_exc_s: S::of(0.5e-3),
            tau_inh_s: S::of(2e-3),
            s_inh: S::of(1.5),
            delay_s: S::of(2e-3),
            gain_a: S::of(1.0),
            kernel_variant: AlphaVariant::V12,
            bug_mode: BugMode::FixedV12,
        }
    }

    /// Check parameter invariants.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau_exc_s", self.tau_exc_s), ("tau_inh_s", self.tau_inh_s)] {
            if !(v.is_finite() && v > S::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {}",
                    v.to64()
                )));
            }
        }
        if !(self.s_inh.is_finite() && self.s_inh >= S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "s_inh must be ≥ 0, got {}",
                self.s_inh.to64()
            )));
        }
        if !(self.delay_s.is_finite() && self.delay_s >= S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "delay_s must be ≥ 0, got {}",
                self.delay_s.to64()
            )));
        }
        if !self.gain_a.is_finite() {
            return Err(Error::InvalidParameter("gain_a must be finite".into()));
        }
        Ok(())
    }

    /// Extra multiplicative factor on (excitatory, inhibitory) path outputs.
    ///
    /// `(1, 1)` in the fixed mode; `(1/τ_exc², 1/τ_inh²)` in bug mode, with
    /// τ in seconds.
    pub fn path_scales(&self) -> (S, S) {
        match self.bug_mode {
            BugMode::FixedV12 => (S::one(), S::one()),
            BugMode::BugV11 => (
                S::one() / (self.tau_exc_s * self.tau_exc_s),
                S::one() / (self.tau_inh_s * self.tau_inh_s),
            ),
        }
    }

    /// Inhibition delay in whole samples at rate `fs`.
    pub fn delay_samples(&self, fs: S) -> usize {
        (self.delay_s * fs).round().to64() as usize
    }

    /// Analytic inhibitory-to-excitatory DC weight ratio.
    ///
    /// This is `S · (scale_inh·|H_inh(0)|) / (scale_exc·|H_exc(0)|)`: `S` in
    /// the fixed mode (unit-DC kernels), and `S·(τ_exc/τ_inh)²` in bug mode —
    /// 1/16 of the intended inhibition strength at the default τ pair.
    pub fn dc_weight_ratio(&self, fs: S) -> Result<S> {
        self.validate()?;
        let exc = Biquad::design(fs, self.tau_exc_s, self.kernel_variant)?;
        let inh = Biquad::design(fs, self.tau_inh_s, self.kernel_variant)?;
        let (se, si) = self.path_scales();
        // Association matters: the path-scale quotient is exact whenever the
        // tau ratio is a power of two (1/16 at the default pair), and
        // unit-DC kernels contribute a gain quotient of exactly 1, so the
        // headline S/16 identity holds bitwise.
        Ok(self.s_inh * (si / se) * (inh.dc_gain() / exc.dc_gain()))
    }
}

/// Apply one nucleus stage to a single rate waveform.
///
/// Errors with [`Error::DegenerateDelay`] when the quantized delay spans the
/// whole signal, since the inhibitory path would then see only zero-fill.
pub fn nucleus_response<S: Sample>(
    input: &[S],
    params: &NucleusParams<S>,
    fs: S,
) -> Result<Vec<S>> {
    params.validate()?;
    let n = input.len();
    let nd = params.delay_samples(fs);
    if nd >= n {
        return Err(Error::DegenerateDelay {
            samples: nd,
            len: n,
        });
    }
    let exc = Biquad::design(fs, params.tau_exc_s, params.kernel_variant)?;
    let inh = Biquad::design(fs, params.tau_inh_s, params.kernel_variant)?;

    let y_exc = exc.apply(input)?;
    let mut delayed = vec![S::zero(); n];
    delayed[nd..].copy_from_slice(&input[..n - nd]);
    let y_inh = inh.apply(&delayed)?;

    let (se, si) = params.path_scales();
    let a = params.gain_a;
    let s = params.s_inh;
    Ok(y_exc
        .iter()
        .zip(&y_inh)
        .map(|(&e, &i)| a * (se * e - s * (si * i)))
        .collect())
}

/// Apply one nucleus stage independently to every channel of a population.
///
/// Shape, sample rate and CF axis are preserved; row `i` of the output
/// depends only on row `i` of the input.
pub fn stage_response<S: Sample>(
    input: &PopulationResponse<S>,
    params: &NucleusParams<S>,
) -> Result<PopulationResponse<S>> {
    let fs = input.fs();
    let mut rows = Vec::with_capacity(input.n_channels());
    for row in input.rows() {
        rows.push(nucleus_response(row, params, fs)?);
    }
    PopulationResponse::from_rows(fs, input.cf_hz().to_vec(), rows)
}

/// CN stage: per-channel nucleus response of the summed AN rate.
pub fn cn_stage<S: Sample>(
    an: &PopulationResponse<S>,
    params: &NucleusParams<S>,
) -> Result<PopulationResponse<S>> {
    stage_response(an, params)
}

/// IC stage: per-channel nucleus response of the CN output.
pub fn ic_stage<S: Sample>(
    cn: &PopulationResponse<S>,
    params: &NucleusParams<S>,
) -> Result<PopulationResponse<S>> {
    stage_response(cn, params)
}
