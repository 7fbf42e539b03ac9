//! Auditory-nerve input: file ingestion companions live in [`crate::io`];
//! this module supplies the CF channel map and a clearly-labeled surrogate
//! rate generator.
//!
//! # The surrogate is a stand-in
//!
//! The upstream stages of the full model (middle ear, transmission-line
//! cochlea, hair cells, synapses) are out of scope here. So that every
//! downstream component can still be exercised end to end, [`surrogate_an`]
//! produces plausible, deterministic AN-style rate waveforms from a simple
//! chain:
//!
//! ```text
//! bandpass at CF (biquad, Q=4) → half-wave rectify → 1 kHz one-pole lowpass
//!   → per-class affine rate map clamped to [0, saturation]
//!   → weighted fiber sum → sample-pick decimation
//! ```
//!
//! Its architecture and constants are implementer-defined; it must never be
//! mistaken for the physiological front end, and results obtained with it
//! only validate the brainstem stages and analysis chain.

use crate::error::{Error, Result};
use crate::population::PopulationResponse;
use crate::sample::Sample;

/// Greenwood place-frequency map, human constants: `CF(x) = 165.4·(10^{2.1·x} − 0.88)`
/// with `x` the fractional distance from apex.
pub fn greenwood_cf(x: f64) -> f64 {
    165.4 * (10f64.powf(2.1 * x) - 0.88)
}

/// Inverse Greenwood map: the place `x` whose CF is `cf_hz`.
pub fn greenwood_x(cf_hz: f64) -> f64 {
    (cf_hz / 165.4 + 0.88).log10() / 2.1
}

/// Characteristic frequencies for a bank of equidistant cochlear positions.
///
/// Channel 1 sits at the basal (high-frequency) end. The standard map spans
/// 12 kHz down to 112 Hz over 401 channels; endpoints are pinned to the
/// requested frequencies exactly, interior channels follow the Greenwood
/// function over linearly spaced positions.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMap<S: Sample> {
    /// Per-channel CF in Hz, strictly decreasing (index 0 ↔ channel 1).
    pub cf_hz: Vec<S>,
}

/// Number of channels in the standard map.
pub const STANDARD_CHANNELS: usize = 401;
/// Basal (channel 1) CF of the standard map, Hz.
pub const STANDARD_CF_HI: f64 = 12_000.0;
/// Apical (last channel) CF of the standard map, Hz.
pub const STANDARD_CF_LO: f64 = 112.0;

impl<S: Sample> ChannelMap<S> {
    /// Greenwood map over `n` equidistant positions between the places of
    /// `cf_hi` (channel 1) and `cf_lo` (channel n).
    pub fn greenwood(n: usize, cf_hi: f64, cf_lo: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "channel map needs ≥ 1 channel".into(),
            ));
        }
        if !(cf_hi.is_finite() && cf_lo.is_finite() && cf_hi > cf_lo && cf_lo > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need cf_hi > cf_lo > 0, got {cf_hi} and {cf_lo}"
            )));
        }
        let x_hi = greenwood_x(cf_hi);
        let x_lo = greenwood_x(cf_lo);
        let mut cf_hz = Vec::with_capacity(n);
        for i in 0..n {
            let cf = if i == 0 {
                cf_hi
            } else if i == n - 1 {
                cf_lo
            } else {
                let x = x_hi + i as f64 * (x_lo - x_hi) / (n - 1) as f64;
                greenwood_cf(x)
            };
            cf_hz.push(S::of(cf));
        }
        Ok(ChannelMap { cf_hz })
    }

    /// The standard 401-channel map from 12 kHz (channel 1) to 112 Hz, or
    /// the analogous span for another channel count.
    pub fn standard(n: usize) -> Result<Self> {
        if n == 1 {
            return Ok(ChannelMap {
                cf_hz: vec![S::of(STANDARD_CF_HI)],
            });
        }
        Self::greenwood(n, STANDARD_CF_HI, STANDARD_CF_LO)
    }

    /// Number of channels.
    pub fn n_channels(&self) -> usize {
        self.cf_hz.len()
    }

    /// CF of a 1-based channel index.
    pub fn cf(&self, channel: usize) -> Result<S> {
        if channel == 0 || channel > self.cf_hz.len() {
            return Err(Error::InvalidParameter(format!(
                "channel {} out of range 1..={}",
                channel,
                self.cf_hz.len()
            )));
        }
        Ok(self.cf_hz[channel - 1])
    }
}

/// Fiber counts per spontaneous-rate class and the class constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FiberWeights {
    pub n_hsr: usize,
    pub n_msr: usize,
    pub n_lsr: usize,
}

/// Spontaneous rates per class, spikes/s.
pub const SPONT_HSR: f64 = 70.0;
pub const SPONT_MSR: f64 = 10.0;
pub const SPONT_LSR: f64 = 1.0;

impl FiberWeights {
    /// The normal-hearing innervation profile: 13 HSR, 3 MSR, 3 LSR fibers.
    pub fn standard() -> Self {
        FiberWeights {
            n_hsr: 13,
            n_msr: 3,
            n_lsr: 3,
        }
    }

    /// HSR-only profile (13-0-0).
    pub fn hsr_only() -> Self {
        FiberWeights {
            n_hsr: 13,
            n_msr: 0,
            n_lsr: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_hsr + self.n_msr + self.n_lsr == 0 {
            return Err(Error::InvalidParameter(
                "at least one fiber count must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Rate of the weighted fiber sum when every class sits at its
    /// spontaneous rate (943 spikes/s for the 13-3-3 profile).
    pub fn spontaneous_sum(&self) -> f64 {
        self.n_hsr as f64 * SPONT_HSR
            + self.n_msr as f64 * SPONT_MSR
            + self.n_lsr as f64 * SPONT_LSR
    }
}

/// Surrogate front-end parameters. All values are implementer-defined; see
/// the module docs for what this chain is and is not.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateConfig {
    /// Bandpass quality factor.
    pub bandpass_q: f64,
    /// Envelope lowpass corner, Hz.
    pub lowpass_hz: f64,
    /// Rate-map slope per class, spikes/s per Pa of envelope drive.
    pub slope_hsr: f64,
    pub slope_msr: f64,
    pub slope_lsr: f64,
    /// Saturation rate per class, spikes/s.
    pub sat_hsr: f64,
    pub sat_msr: f64,
    pub sat_lsr: f64,
    /// Fiber counts entering the weighted sum.
    pub weights: FiberWeights,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            bandpass_q: 4.0,
            lowpass_hz: 1e3,
            slope_hsr: 300.0,
            slope_msr: 120.0,
            slope_lsr: 60.0,
            sat_hsr: 250.0,
            sat_msr: 150.0,
            sat_lsr: 120.0,
            weights: FiberWeights::standard(),
        }
    }
}

impl SurrogateConfig {
    fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        for (name, v) in [
            ("bandpass_q", self.bandpass_q),
            ("lowpass_hz", self.lowpass_hz),
            ("sat_hsr", self.sat_hsr),
            ("sat_msr", self.sat_msr),
            ("sat_lsr", self.sat_lsr),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("slope_hsr", self.slope_hsr),
            ("slope_msr", self.slope_msr),
            ("slope_lsr", self.slope_lsr),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be ≥ 0 and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One surrogate channel: stimulus in pascals at `fs_in` → weighted-fiber
/// rate waveform at `fs_out` (spikes/s). `fs_out` must divide `fs_in`.
pub fn surrogate_channel<S: Sample>(
    stimulus: &[S],
    fs_in: f64,
    cf_hz: f64,
    config: &SurrogateConfig,
    fs_out: f64,
) -> Result<Vec<S>> {
    config.validate()?;
    if !(cf_hz.is_finite() && cf_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cf_hz must be positive, got {cf_hz}"
        )));
    }
    if fs_in < 2.0 * cf_hz {
        return Err(Error::InvalidParameter(format!(
            "fs_in = {fs_in} underruns 2·CF = {}",
            2.0 * cf_hz
        )));
    }
    let decim = decimation_factor(fs_in, fs_out)?;

    // Bandpass at CF: biquad with constant 0 dB peak gain.
    let w0 = 2.0 * std::f64::consts::PI * cf_hz / fs_in;
    let alpha = w0.sin() / (2.0 * config.bandpass_q);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (S::of(alpha / a0), S::of(-alpha / a0));
    let (a1, a2) = (S::of(-2.0 * w0.cos() / a0), S::of((1.0 - alpha) / a0));

    // Envelope lowpass: one-pole y[n] = k·x[n] + (1−k)·y[n−1].
    let k = S::of(1.0 - (-2.0 * std::f64::consts::PI * config.lowpass_hz / fs_in).exp());
    let one_minus_k = S::one() - k;

    let classes = [
        (
            config.weights.n_hsr,
            SPONT_HSR,
            config.slope_hsr,
            config.sat_hsr,
        ),
        (
            config.weights.n_msr,
            SPONT_MSR,
            config.slope_msr,
            config.sat_msr,
        ),
        (
            config.weights.n_lsr,
            SPONT_LSR,
            config.slope_lsr,
            config.sat_lsr,
        ),
    ]
    .map(|(n, spont, slope, sat)| (S::of(n as f64), S::of(spont), S::of(slope), S::of(sat)));

    let n = stimulus.len();
    let mut out = Vec::with_capacity(n / decim + 1);
    let (mut x1, mut x2) = (S::zero(), S::zero());
    let (mut y1, mut y2) = (S::zero(), S::zero());
    let mut lp = S::zero();
    for (i, &x0) in stimulus.iter().enumerate() {
        if !x0.is_finite() {
            return Err(Error::Data(format!(
                "non-finite stimulus sample at index {i}"
            )));
        }
        let y0 = b0 * x0 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x0;
        y2 = y1;
        y1 = y0;
        let rect = if y0 > S::zero() { y0 } else { S::zero() };
        lp = k * rect + one_minus_k * lp;
        if i % decim == 0 {
            let mut rate = S::zero();
            for &(count, spont, slope, sat) in &classes {
                let r = (spont + slope * lp).max(S::zero()).min(sat);
                rate += count * r;
            }
            out.push(rate);
        }
    }
    Ok(out)
}

/// Full surrogate front end: one [`surrogate_channel`] per map entry,
/// assembled into a population at the analysis rate.
pub fn surrogate_an<S: Sample>(
    stimulus: &[S],
    fs_in: f64,
    map: &ChannelMap<S>,
    config: &SurrogateConfig,
    fs_out: f64,
) -> Result<PopulationResponse<S>> {
    let mut rows = Vec::with_capacity(map.n_channels());
    for &cf in &map.cf_hz {
        rows.push(surrogate_channel(
            stimulus,
            fs_in,
            cf.to64(),
            config,
            fs_out,
        )?);
    }
    PopulationResponse::from_rows(S::of(fs_out), map.cf_hz.clone(), rows)
}

/// Integral decimation factor `fs_in / fs_out`, or an error when the rates
/// are not commensurate.
pub fn decimation_factor(fs_in: f64, fs_out: f64) -> Result<usize> {
    if !(fs_in.is_finite() && fs_in > 0.0 && fs_out.is_finite() && fs_out > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample rates must be positive, got {fs_in} and {fs_out}"
        )));
    }
    let ratio = fs_in / fs_out;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio {
        return Err(Error::InvalidParameter(format!(
            "fs_out = {fs_out} must divide fs_in = {fs_in} (ratio {ratio})"
        )));
    }
    Ok(rounded as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::AmTone;
    use approx::assert_relative_eq;

    #[test]
    fn standard_map_endpoints_and_reference_channel() {
        let map = ChannelMap::<f64>::standard(401).unwrap();
        assert_eq!(map.n_channels(), 401);
        assert_eq!(map.cf(1).unwrap(), 12_000.0);
        assert_eq!(map.cf(401).unwrap(), 112.0);
        let cf112 = map.cf(112).unwrap();
        assert!(
            (cf112 - 4013.0).abs() / 4013.0 < 0.02,
            "channel 112 CF {cf112} should land within 2% of 4013 Hz"
        );
        assert_relative_eq!(cf112, 4023.2, max_relative = 1e-4);
    }

    #[test]
    fn standard_map_is_strictly_decreasing_and_equidistant_in_place() {
        let map = ChannelMap::<f64>::standard(401).unwrap();
        for w in map.cf_hz.windows(2) {
            assert!(w[0] > w[1], "CFs must fall with channel index");
        }
        // Positions recovered through the inverse map must be evenly spaced.
        let x: Vec<f64> = map.cf_hz.iter().map(|&cf| greenwood_x(cf)).collect();
        let step = (x[400] - x[0]) / 400.0;
        for i in 1..400 {
            assert_relative_eq!(x[i] - x[i - 1], step, max_relative = 1e-6);
        }
    }

    #[test]
    fn greenwood_maps_invert_each_other() {
        for cf in [112.0, 500.0, 4013.0, 12_000.0] {
            assert_relative_eq!(greenwood_cf(greenwood_x(cf)), cf, max_relative = 1e-12);
        }
        assert_relative_eq!(greenwood_cf(0.0), 165.4 * 0.12, max_relative = 1e-12);
    }

    #[test]
    fn out_of_range_channels_are_rejected() {
        let map = ChannelMap::<f64>::standard(401).unwrap();
        assert!(map.cf(0).is_err());
        assert!(map.cf(402).is_err());
    }

    #[test]
    fn spontaneous_sums_match_the_profiles() {
        assert_eq!(FiberWeights::standard().spontaneous_sum(), 943.0);
        assert_eq!(FiberWeights::hsr_only().spontaneous_sum(), 910.0);
    }

    #[test]
    fn silence_yields_the_spontaneous_rate_everywhere() {
        let map = ChannelMap::<f64>::standard(5).unwrap();
        let stim = vec![0.0; 2000];
        let cfg = SurrogateConfig::default();
        let pop = surrogate_an(&stim, 100e3, &map, &cfg, 20e3).unwrap();
        assert_eq!(pop.n_samples(), 400);
        assert!(pop.flat().iter().all(|&v| v == 943.0));

        let cfg = SurrogateConfig {
            weights: FiberWeights::hsr_only(),
            ..cfg
        };
        let pop = surrogate_an(&stim, 100e3, &map, &cfg, 20e3).unwrap();
        assert!(pop.flat().iter().all(|&v| v == 910.0));
    }

    #[test]
    fn am_tone_rate_peaks_at_the_modulation_frequency() {
        use rustfft::{num_complex::Complex, FftPlanner};
        // Channel at the 4 kHz carrier: after mean removal, the rate
        // spectrum over the steady tone portion must peak at fmod
        // (98 Hz → the 100 Hz bin of a 4000-point FFT at 20 kHz, ±1 bin).
        let spec = AmTone::efr_default(70.0);
        let stim: Vec<f64> = spec.render().unwrap();
        let rate =
            surrogate_channel(&stim, spec.fs, 4023.2, &SurrogateConfig::default(), 20e3).unwrap();
        // Steady window: past silence (20 ms) and onset ramp, at 20 kHz.
        let seg = &rate[500..2350];
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        let nfft = 4000;
        let mut buf: Vec<Complex<f64>> = seg
            .iter()
            .map(|&v| Complex::new(v - mean, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(nfft)
            .collect();
        FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
        let peak_bin = (1..nfft / 2)
            .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
            .unwrap();
        let peak_hz = peak_bin as f64 * 20e3 / nfft as f64;
        assert!(
            (peak_hz - 98.0).abs() <= 5.0,
            "rate spectrum peaks at {peak_hz} Hz, expected ≈ 98 Hz"
        );
    }

    #[test]
    fn rates_are_nonnegative_and_monotone_in_drive() {
        let spec = AmTone::mtf_default(40.0);
        let stim: Vec<f64> = spec.render().unwrap();
        let doubled: Vec<f64> = stim.iter().map(|&v| 2.0 * v).collect();
        let cfg = SurrogateConfig::default();
        let r1 = surrogate_channel(&stim, spec.fs, 4000.0, &cfg, 20e3).unwrap();
        let r2 = surrogate_channel(&doubled, spec.fs, 4000.0, &cfg, 20e3).unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            assert!(*a >= 0.0);
            assert!(b >= a, "doubling the stimulus must not lower any rate");
        }
    }

    #[test]
    fn decimation_picks_every_kth_full_rate_sample() {
        let spec = AmTone::mtf_default(25.0);
        let stim: Vec<f64> = spec.render().unwrap();
        let cfg = SurrogateConfig::default();
        let full = surrogate_channel(&stim, spec.fs, 2000.0, &cfg, spec.fs).unwrap();
        let dec = surrogate_channel(&stim, spec.fs, 2000.0, &cfg, 20e3).unwrap();
        assert_eq!(dec.len(), full.len().div_ceil(5));
        for (i, &v) in dec.iter().enumerate() {
            assert_eq!(v, full[5 * i], "decimated sample {i}");
        }
    }

    #[test]
    fn surrogate_is_deterministic() {
        let spec = AmTone::efr_default(60.0);
        let stim: Vec<f64> = spec.render().unwrap();
        let map = ChannelMap::<f64>::standard(3).unwrap();
        let cfg = SurrogateConfig::default();
        let a = surrogate_an(&stim, spec.fs, &map, &cfg, 20e3).unwrap();
        let b = surrogate_an(&stim, spec.fs, &map, &cfg, 20e3).unwrap();
        assert_eq!(a.flat(), b.flat());
    }

    #[test]
    fn rate_mismatches_are_rejected() {
        let stim = vec![0.0f64; 100];
        let cfg = SurrogateConfig::default();
        assert!(matches!(
            surrogate_channel(&stim, 100e3, 4000.0, &cfg, 30e3),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            surrogate_channel(&stim, 6e3, 4000.0, &cfg, 6e3),
            Err(Error::InvalidParameter(_))
        ));
        let zero = FiberWeights {
            n_hsr: 0,
            n_msr: 0,
            n_lsr: 0,
        };
        let cfg = SurrogateConfig {
            weights: zero,
            ..cfg
        };
        assert!(surrogate_channel(&stim, 100e3, 4000.0, &cfg, 20e3).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            /// Rates stay within [0, weighted saturation] and never drop
            /// when the stimulus is scaled up.
            #[test]
            fn rates_bounded_and_monotone(
                seed in 0u64..5000,
                gain in 1.0f64..4.0,
                cf in 300.0f64..10_000.0,
            ) {
                let stim: Vec<f64> = (0..800)
                    .map(|i| ((i as f64 + seed as f64) * 0.013).sin() * 0.3)
                    .collect();
                let scaled: Vec<f64> = stim.iter().map(|&v| gain * v).collect();
                let cfg = SurrogateConfig::default();
                let cap = 13.0 * cfg.sat_hsr + 3.0 * cfg.sat_msr + 3.0 * cfg.sat_lsr;
                let r1 = surrogate_channel(&stim, 100e3, cf, &cfg, 20e3).unwrap();
                let r2 = surrogate_channel(&scaled, 100e3, cf, &cfg, 20e3).unwrap();
                for (a, b) in r1.iter().zip(&r2) {
                    prop_assert!(*a >= 0.0 && *a <= cap);
                    prop_assert!(b + 1e-12 >= *a);
                }
            }
        }
    }
}
