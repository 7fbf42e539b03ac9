//! Acoustic stimulus rendering: click trains and AM tones in pascals.
//!
//! All generators are pure functions of their spec — identical spec and
//! sample rate give bitwise identical waveforms. Levels follow two different
//! conventions, matching how evoked-potential stimuli are usually described:
//!
//! * clicks are specified in **dB peSPL** — the click's baseline-to-peak
//!   amplitude equals the peak-to-peak amplitude of a sinusoid at that SPL,
//!   so `A = 2·√2·20 µPa·10^(L/20)`;
//! * tones are specified in **dB SPL** of the emitted (ramped) waveform's
//!   overall RMS.
//!
//! Stimuli are rendered at a fine rate (100 kHz by default) so that an 80 µs
//! click spans a whole number of samples; the front end decimates to the
//! analysis rate after rate generation.

use crate::error::{Error, Result};
use crate::sample::Sample;

/// Default rendering sample rate in Hz.
pub const RENDER_FS: f64 = 100e3;

/// Click polarity pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    /// +, −, +, −, … (first click positive).
    AlternatingPosFirst,
    /// Every click positive.
    AllPositive,
}

impl Polarity {
    /// Stable config-file spelling.
    pub fn name(self) -> &'static str {
        match self {
            Polarity::AlternatingPosFirst => "alternating",
            Polarity::AllPositive => "positive",
        }
    }

    /// Parse the config-file spelling.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "alternating" => Ok(Polarity::AlternatingPosFirst),
            "positive" => Ok(Polarity::AllPositive),
            other => Err(Error::Config(format!(
                "unknown polarity '{other}' (expected alternating or positive)"
            ))),
        }
    }
}

/// Rectangular click train.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClickTrain {
    /// Rendering sample rate, Hz.
    pub fs: f64,
    /// Repetition rate, Hz.
    pub rate_hz: f64,
    /// Train duration, s. The train holds `⌊duration·rate⌋` clicks.
    pub duration_s: f64,
    /// Width of each rectangular click, s.
    pub click_width_s: f64,
    /// Level in dB peSPL (see [`pespl_to_pa`]).
    pub level_db_pespl: f64,
    /// Polarity pattern.
    pub polarity: Polarity,
    /// Onset of the first click, s.
    pub first_onset_s: f64,
}

impl ClickTrain {
    /// 11.1 Hz alternating-polarity train of 80 µs clicks, 6 s at 100 dB
    /// peSPL — the broadband calibration stimulus (66 clicks).
    pub fn calibration_default() -> Self {
        ClickTrain {
            fs: RENDER_FS,
            rate_hz: 11.1,
            duration_s: 6.0,
            click_width_s: 80e-6,
            level_db_pespl: 100.0,
            polarity: Polarity::AlternatingPosFirst,
            first_onset_s: 0.0,
        }
    }

    /// 20 Hz all-positive train of 80 µs clicks, 0.5 s (10 clicks), first
    /// onset at 10 µs — the wave-growth stimulus at the given level.
    pub fn growth_default(level_db_pespl: f64) -> Self {
        ClickTrain {
            fs: RENDER_FS,
            rate_hz: 20.0,
            duration_s: 0.5,
            click_width_s: 80e-6,
            level_db_pespl,
            polarity: Polarity::AllPositive,
            first_onset_s: 10e-6,
        }
    }

    /// Number of clicks in the train: `⌊duration·rate⌋`.
    pub fn n_clicks(&self) -> usize {
        (self.duration_s * self.rate_hz + 1e-9).floor() as usize
    }

    /// Onset time of click `k` (0-based), in seconds.
    pub fn onset_s(&self, k: usize) -> f64 {
        self.first_onset_s + k as f64 / self.rate_hz
    }

    fn validate(&self) -> Result<()> {
        ensure_positive("fs", self.fs)?;
        ensure_positive("rate_hz", self.rate_hz)?;
        ensure_positive("duration_s", self.duration_s)?;
        ensure_positive("click_width_s", self.click_width_s)?;
        if self.click_width_s * self.fs < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "click_width_s·fs = {} < 1 sample",
                self.click_width_s * self.fs
            )));
        }
        if !self.level_db_pespl.is_finite() {
            return Err(Error::InvalidParameter(
                "level_db_pespl must be finite".into(),
            ));
        }
        if !(self.first_onset_s.is_finite() && self.first_onset_s >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "first_onset_s must be ≥ 0, got {}",
                self.first_onset_s
            )));
        }
        Ok(())
    }

    /// Render the train as a pressure waveform in pascals.
    pub fn render<S: Sample>(&self) -> Result<Vec<S>> {
        self.validate()?;
        let n = (self.duration_s * self.fs).round() as usize;
        let width = (self.click_width_s * self.fs).round() as usize;
        let amp = pespl_to_pa(self.level_db_pespl);
        let mut x = vec![S::zero(); n];
        for k in 0..self.n_clicks() {
            let onset = (self.onset_s(k) * self.fs).round() as usize;
            if onset >= n {
                return Err(Error::InvalidParameter(format!(
                    "click {} onset {:.6} s lies beyond the {} s stimulus",
                    k + 1,
                    self.onset_s(k),
                    self.duration_s
                )));
            }
            let sign = match self.polarity {
                Polarity::AllPositive => 1.0,
                Polarity::AlternatingPosFirst => {
                    if k % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            let v = S::of(sign * amp);
            for i in onset..(onset + width).min(n) {
                x[i] = v;
            }
        }
        Ok(x)
    }
}

/// Sinusoidally amplitude-modulated tone with raised-cosine ramps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmTone {
    /// Rendering sample rate, Hz (must exceed 2·fc).
    pub fs: f64,
    /// Carrier frequency, Hz.
    pub fc_hz: f64,
    /// Modulation frequency, Hz (must be below fc).
    pub fmod_hz: f64,
    /// Modulation depth in [0, 1].
    pub depth: f64,
    /// Tone duration (excluding leading silence), s.
    pub duration_s: f64,
    /// Level in dB SPL of the ramped waveform's overall RMS.
    pub level_db_spl: f64,
    /// Raised-cosine on/off ramp duration, s.
    pub ramp_s: f64,
    /// Zeros prepended before the tone, s.
    pub leading_silence_s: f64,
}

impl AmTone {
    /// 4 kHz carrier, 100% depth, 200 ms, 70 dB SPL, 5 ms ramps, no leading
    /// silence — the modulation-transfer-function probe at rate `fmod_hz`.
    pub fn mtf_default(fmod_hz: f64) -> Self {
        AmTone {
            fs: RENDER_FS,
            fc_hz: 4e3,
            fmod_hz,
            depth: 1.0,
            duration_s: 0.2,
            level_db_spl: 70.0,
            ramp_s: 5e-3,
            leading_silence_s: 0.0,
        }
    }

    /// 4 kHz carrier modulated at 98 Hz with 85% depth, 100 ms, 2.5 ms
    /// ramps, 20 ms leading silence — the envelope-following-response
    /// stimulus at the given level.
    pub fn efr_default(level_db_spl: f64) -> Self {
        AmTone {
            fs: RENDER_FS,
            fc_hz: 4e3,
            fmod_hz: 98.0,
            depth: 0.85,
            duration_s: 0.1,
            level_db_spl,
            ramp_s: 2.5e-3,
            leading_silence_s: 20e-3,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure_positive("fs", self.fs)?;
        ensure_positive("fc_hz", self.fc_hz)?;
        ensure_positive("duration_s", self.duration_s)?;
        if self.fs <= 2.0 * self.fc_hz {
            return Err(Error::InvalidParameter(format!(
                "fs = {} must exceed 2·fc = {}",
                self.fs,
                2.0 * self.fc_hz
            )));
        }
        if !(self.fmod_hz.is_finite() && self.fmod_hz >= 0.0) || self.fmod_hz >= self.fc_hz {
            return Err(Error::InvalidParameter(format!(
                "fmod_hz = {} must lie in [0, fc)",
                self.fmod_hz
            )));
        }
        if !(self.depth.is_finite() && (0.0..=1.0).contains(&self.depth)) {
            return Err(Error::InvalidParameter(format!(
                "depth = {} must lie in [0, 1]",
                self.depth
            )));
        }
        if !self.level_db_spl.is_finite() {
            return Err(Error::InvalidParameter(
                "level_db_spl must be finite".into(),
            ));
        }
        if !(self.ramp_s.is_finite() && self.ramp_s >= 0.0) || 2.0 * self.ramp_s > self.duration_s {
            return Err(Error::InvalidParameter(format!(
                "ramp_s = {} must be ≥ 0 with 2·ramp ≤ duration",
                self.ramp_s
            )));
        }
        if !(self.leading_silence_s.is_finite() && self.leading_silence_s >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "leading_silence_s must be ≥ 0, got {}",
                self.leading_silence_s
            )));
        }
        Ok(())
    }

    /// Number of leading-silence samples.
    pub fn silence_samples(&self) -> usize {
        (self.leading_silence_s * self.fs).round() as usize
    }

    /// Render the tone as a pressure waveform in pascals.
    ///
    /// The tone portion is `A·(1 + depth·cos(2π·fmod·t))·sin(2π·fc·t)` with
    /// squared-cosine flanks over the first and last `round(ramp·fs)`
    /// samples; `A` is chosen so the ramped tone's RMS hits the target
    /// `20 µPa·10^(level/20)` exactly.
    pub fn render<S: Sample>(&self) -> Result<Vec<S>> {
        self.validate()?;
        let n_sil = self.silence_samples();
        let n_tone = (self.duration_s * self.fs).round() as usize;
        let n_ramp = (self.ramp_s * self.fs).round() as usize;
        let two_pi = 2.0 * std::f64::consts::PI;

        let mut tone = Vec::with_capacity(n_tone);
        for i in 0..n_tone {
            let t = i as f64 / self.fs;
            let env = 1.0 + self.depth * (two_pi * self.fmod_hz * t).cos();
            let carrier = (two_pi * self.fc_hz * t).sin();
            let gain = ramp_gain(i, n_tone, n_ramp);
            tone.push(env * carrier * gain);
        }
        let mean_sq = tone.iter().map(|v| v * v).sum::<f64>() / n_tone as f64;
        if mean_sq <= 0.0 {
            return Err(Error::InvalidParameter(
                "degenerate tone: zero RMS before level scaling".into(),
            ));
        }
        let a = spl_to_rms_pa(self.level_db_spl) / mean_sq.sqrt();

        let mut x = vec![S::zero(); n_sil + n_tone];
        for (i, v) in tone.into_iter().enumerate() {
            x[n_sil + i] = S::of(a * v);
        }
        Ok(x)
    }
}

/// Squared-cosine on/off flank gain for sample `i` of `n` total, with
/// `n_ramp`-sample flanks. Both endpoints are exactly zero.
fn ramp_gain(i: usize, n: usize, n_ramp: usize) -> f64 {
    if n_ramp == 0 {
        return 1.0;
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    if i < n_ramp {
        (half_pi * i as f64 / n_ramp as f64).sin().powi(2)
    } else if i >= n - n_ramp {
        (half_pi * (n - 1 - i) as f64 / n_ramp as f64).sin().powi(2)
    } else {
        1.0
    }
}

/// A stimulus of either kind, ready to render.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StimulusSpec {
    ClickTrain(ClickTrain),
    AmTone(AmTone),
}

impl StimulusSpec {
    /// Rendering sample rate, Hz.
    pub fn fs(&self) -> f64 {
        match self {
            StimulusSpec::ClickTrain(c) => c.fs,
            StimulusSpec::AmTone(t) => t.fs,
        }
    }

    /// Render as a pressure waveform in pascals.
    pub fn render<S: Sample>(&self) -> Result<Vec<S>> {
        match self {
            StimulusSpec::ClickTrain(c) => c.render(),
            StimulusSpec::AmTone(t) => t.render(),
        }
    }
}

/// Peak pressure (Pa) of a click at `level` dB peSPL: the baseline-to-peak
/// amplitude equals the peak-to-peak amplitude of a sinusoid at that SPL,
/// `2·√2·20 µPa·10^(level/20)`.
pub fn pespl_to_pa(level_db: f64) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * 20e-6 * 10f64.powf(level_db / 20.0)
}

/// RMS pressure (Pa) of a tone at `level` dB SPL: `20 µPa·10^(level/20)`.
pub fn spl_to_rms_pa(level_db: f64) -> f64 {
    20e-6 * 10f64.powf(level_db / 20.0)
}

fn ensure_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Group consecutive nonzero samples into (start, len, value) runs.
    fn click_runs(x: &[f64]) -> Vec<(usize, usize, f64)> {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < x.len() {
            if x[i] != 0.0 {
                let start = i;
                let v = x[i];
                while i < x.len() && x[i] == v {
                    i += 1;
                }
                runs.push((start, i - start, v));
            } else {
                i += 1;
            }
        }
        runs
    }

    #[test]
    fn pespl_reference_levels() {
        assert_relative_eq!(pespl_to_pa(100.0), 5.66, max_relative = 2e-3);
        assert_relative_eq!(
            pespl_to_pa(100.0),
            2.0 * 2f64.sqrt() * 20e-6 * 1e5,
            max_relative = 1e-15
        );
        assert_relative_eq!(pespl_to_pa(0.0), 5.657e-5, max_relative = 1e-3);
        // Peak-to-peak of a 94 dB SPL sinusoid (≈ 1 Pa RMS).
        assert_relative_eq!(pespl_to_pa(94.0), 2.835, max_relative = 1e-3);
    }

    #[test]
    fn calibration_train_has_66_alternating_clicks() {
        let spec = ClickTrain::calibration_default();
        assert_eq!(spec.n_clicks(), 66);
        let x: Vec<f64> = spec.render().unwrap();
        assert_eq!(x.len(), 600_000);
        let runs = click_runs(&x);
        assert_eq!(runs.len(), 66);
        let amp = pespl_to_pa(100.0);
        for (k, &(start, len, v)) in runs.iter().enumerate() {
            assert_eq!(len, 8, "80 µs at 100 kHz is 8 samples");
            assert_eq!(start, (spec.onset_s(k) * spec.fs).round() as usize);
            let expected = if k % 2 == 0 { amp } else { -amp };
            assert_eq!(v, expected, "click {} polarity", k + 1);
        }
    }

    #[test]
    fn alternating_train_is_dc_free() {
        // The 66 clicks pair off into 33 (+, -) pairs of identical width and
        // magnitude, so the positive and negative sample populations are the
        // same multiset and their separate accumulations agree bitwise. (The
        // mixed-order total picks up accumulation round-off at odd partials
        // like 7a, so exact zero is only guaranteed this way.)
        let x: Vec<f64> = ClickTrain::calibration_default().render().unwrap();
        let pos: f64 = x.iter().filter(|&&v| v > 0.0).sum();
        let neg: f64 = x.iter().filter(|&&v| v < 0.0).map(|&v| -v).sum();
        assert_eq!(pos, neg);
        assert!(pos > 0.0);
        assert!(x.iter().sum::<f64>().abs() < 1e-12 * pos);
    }

    #[test]
    fn growth_train_has_10_positive_clicks_starting_at_10_us() {
        let spec = ClickTrain::growth_default(85.0);
        let x: Vec<f64> = spec.render().unwrap();
        assert_eq!(x.len(), 50_000);
        let runs = click_runs(&x);
        assert_eq!(runs.len(), 10);
        assert_eq!(runs[0].0, 1, "10 µs onset is sample 1 at 100 kHz");
        assert!(runs.iter().all(|&(_, _, v)| v > 0.0));
    }

    #[test]
    fn click_level_round_trips() {
        for level in [60.0, 75.0, 100.0] {
            let x: Vec<f64> = ClickTrain::growth_default(level).render().unwrap();
            let peak = x.iter().cloned().fold(0.0, f64::max);
            let measured = 20.0 * (peak / (2.0 * 2f64.sqrt() * 20e-6)).log10();
            assert!((measured - level).abs() < 0.1, "{measured} vs {level}");
        }
    }

    #[test]
    fn tone_rms_hits_the_spl_target() {
        let spec = AmTone::mtf_default(100.0);
        let x: Vec<f64> = spec.render().unwrap();
        assert_eq!(x.len(), 20_000);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert_relative_eq!(rms, 0.0632, max_relative = 5e-3);
        assert_relative_eq!(rms, spl_to_rms_pa(70.0), max_relative = 1e-12);
    }

    #[test]
    fn tone_level_round_trips_across_levels() {
        for level in [30.0, 50.0, 90.0] {
            let spec = AmTone::efr_default(level);
            let x: Vec<f64> = spec.render().unwrap();
            let tone = &x[spec.silence_samples()..];
            let rms = (tone.iter().map(|v| v * v).sum::<f64>() / tone.len() as f64).sqrt();
            let measured = 20.0 * (rms / 20e-6).log10();
            assert!((measured - level).abs() < 0.1, "{measured} vs {level}");
        }
    }

    #[test]
    fn efr_tone_layout_and_ramps() {
        let spec = AmTone::efr_default(70.0);
        let x: Vec<f64> = spec.render().unwrap();
        let n_sil = spec.silence_samples();
        assert_eq!(n_sil, 2000, "20 ms of silence at 100 kHz");
        assert_eq!(x.len(), n_sil + 10_000);
        assert!(x[..n_sil].iter().all(|&v| v == 0.0));
        assert_eq!(x[n_sil], 0.0, "ramp starts from zero");
        assert_eq!(*x.last().unwrap(), 0.0, "ramp ends at zero");
        // Mid-tone samples sit well above the ramped flanks.
        let mid_peak = x[n_sil + 4000..n_sil + 6000]
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let flank_peak = x[n_sil..n_sil + 50].iter().cloned().fold(0.0, f64::max);
        assert!(mid_peak > 5.0 * flank_peak);
    }

    #[test]
    fn modulation_depth_is_recoverable() {
        // Sideband-to-carrier amplitude ratio of A·(1+d·cos)·sin is d/2;
        // demodulate over an integer number of carrier and envelope periods.
        // Recovering d = 0.85 pins the envelope max/min ratio at 1.85/0.15.
        let spec = AmTone {
            fmod_hz: 100.0,
            depth: 0.85,
            ramp_s: 0.0,
            duration_s: 0.1,
            leading_silence_s: 0.0,
            ..AmTone::efr_default(70.0)
        };
        let x: Vec<f64> = spec.render().unwrap();
        let demod = |f: f64| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (i, &v) in x.iter().enumerate() {
                let ph = -2.0 * std::f64::consts::PI * f * i as f64 / spec.fs;
                re += v * ph.cos();
                im += v * ph.sin();
            }
            (re * re + im * im).sqrt()
        };
        let carrier = demod(spec.fc_hz);
        let sideband = demod(spec.fc_hz + spec.fmod_hz);
        assert_relative_eq!(2.0 * sideband / carrier, 0.85, max_relative = 1e-6);
    }

    #[test]
    fn rendering_is_deterministic() {
        let click: Vec<f64> = ClickTrain::calibration_default().render().unwrap();
        let click2: Vec<f64> = ClickTrain::calibration_default().render().unwrap();
        assert_eq!(click, click2);
        let tone: Vec<f64> = AmTone::efr_default(70.0).render().unwrap();
        let tone2: Vec<f64> = AmTone::efr_default(70.0).render().unwrap();
        assert_eq!(tone, tone2);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut c = ClickTrain::calibration_default();
        c.click_width_s = 1e-6; // 0.1 samples at 100 kHz
        assert!(matches!(c.render::<f64>(), Err(Error::InvalidParameter(_))));

        let mut c = ClickTrain::growth_default(80.0);
        c.first_onset_s = 10.0;
        assert!(matches!(c.render::<f64>(), Err(Error::InvalidParameter(_))));

        let mut t = AmTone::mtf_default(50.0);
        t.fmod_hz = 5e3;
        assert!(matches!(t.render::<f64>(), Err(Error::InvalidParameter(_))));

        let mut t = AmTone::mtf_default(50.0);
        t.fs = 6e3;
        assert!(matches!(t.render::<f64>(), Err(Error::InvalidParameter(_))));

        let mut t = AmTone::mtf_default(50.0);
        t.depth = 1.2;
        assert!(matches!(t.render::<f64>(), Err(Error::InvalidParameter(_))));

        let mut t = AmTone::mtf_default(50.0);
        t.ramp_s = 0.15;
        assert!(matches!(t.render::<f64>(), Err(Error::InvalidParameter(_))));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            /// Even-count alternating trains cancel exactly; all trains
            /// carry exactly ⌊duration·rate⌋ clicks.
            #[test]
            fn alternating_even_trains_cancel(
                pairs in 1usize..8,
                rate in 5.0f64..40.0,
                level in 40.0f64..100.0,
            ) {
                let n_clicks = 2 * pairs;
                let spec = ClickTrain {
                    fs: 100e3,
                    rate_hz: rate,
                    duration_s: (n_clicks as f64 + 0.5) / rate,
                    click_width_s: 80e-6,
                    level_db_pespl: level,
                    polarity: Polarity::AlternatingPosFirst,
                    first_onset_s: 0.0,
                };
                prop_assert_eq!(spec.n_clicks(), n_clicks);
                let x: Vec<f64> = spec.render().unwrap();
                // Equal-count positive and negative populations of one
                // magnitude accumulate identically, so DC-freeness is exact
                // when measured this way (the mixed-order total rounds).
                let pos: f64 = x.iter().filter(|&&v| v > 0.0).sum();
                let neg: f64 = x.iter().filter(|&&v| v < 0.0).map(|&v| -v).sum();
                prop_assert_eq!(pos, neg);
                prop_assert!(pos > 0.0);
            }
        }
    }
}
