//! Scaling-factor calibration: find M1, M3, M5 so that simulated wave
//! amplitudes to the reference click train hit normative targets.
//!
//! The protocol: drive the full pipeline with the broadband calibration
//! train (11.1 Hz alternating clicks at 100 dB peSPL), measure W-I and
//! W-III baseline-to-peak on the unit-scaled AN and CN channel-sums and
//! W-V peak-to-peak on the IC channel-sum, averaging one positive- and one
//! negative-polarity epoch late in the train (clicks 59 and 60 by default,
//! where adaptation has settled). Every stage is linear, so
//! `M = target / measured` makes re-simulation reproduce the targets
//! exactly.

use crate::analysis::{
    sum_channels, wave_metrics, ChannelRange, Convention, Wave, WaveMetrics, WaveWindow,
    DEFAULT_TROUGH_SPAN_S,
};
use crate::error::{Error, Result};
use crate::population::PopulationResponse;
use crate::sample::Sample;
use crate::stimuli::ClickTrain;

/// Normative target amplitudes, volts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationTargets {
    /// W-I baseline-to-peak target.
    pub w1_p_v: f64,
    /// W-III baseline-to-peak target.
    pub w3_p_v: f64,
    /// W-V peak-to-peak target.
    pub w5_pp_v: f64,
}

impl Default for CalibrationTargets {
    /// Normative defaults: 0.15 µV (W-I), 0.17 µV (W-III), 0.61 µV (W-V).
    fn default() -> Self {
        CalibrationTargets {
            w1_p_v: 0.15e-6,
            w3_p_v: 0.17e-6,
            w5_pp_v: 0.61e-6,
        }
    }
}

impl CalibrationTargets {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w1_p_v", self.w1_p_v),
            ("w3_p_v", self.w3_p_v),
            ("w5_pp_v", self.w5_pp_v),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "calibration target {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Scaling constants mapping the summed AN, CN and IC rates to volts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFactors {
    pub m1: f64,
    pub m3: f64,
    pub m5: f64,
}

impl ScalingFactors {
    /// Published constants for the original full model, v1.2 convention.
    ///
    /// These document where a fully calibrated original pipeline lands; they
    /// depend on the out-of-scope cochlear stages, so a surrogate front end
    /// will calibrate to different values.
    pub fn reference_v12() -> Self {
        ScalingFactors {
            m1: 4.2767e-14,
            m3: 5.1435e-14,
            m5: 13.3093e-14,
        }
    }

    /// Published constants for the original full model, v1.1 convention.
    pub fn reference_v11() -> Self {
        ScalingFactors {
            m1: 6.2755e-14,
            m3: 7.2161e-14,
            m5: 3.5200e-20,
        }
    }

    /// Check all factors are positive and finite.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m1", self.m1), ("m3", self.m3), ("m5", self.m5)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "scaling factor {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Everything the calibration measurement needs besides the responses.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationProtocol {
    pub targets: CalibrationTargets,
    /// 1-based click indices averaged per wave (default clicks 59 and 60).
    pub epochs: Vec<usize>,
    /// The stimulus the responses were computed for (supplies onset times).
    pub train: ClickTrain,
    pub w1_window: WaveWindow,
    pub w3_window: WaveWindow,
    pub w5_window: WaveWindow,
    pub trough_span_s: f64,
}

impl Default for CalibrationProtocol {
    fn default() -> Self {
        CalibrationProtocol {
            targets: CalibrationTargets::default(),
            epochs: vec![59, 60],
            train: ClickTrain::calibration_default(),
            w1_window: Wave::W1.default_window(),
            w3_window: Wave::W3.default_window(),
            w5_window: Wave::W5.default_window(),
            trough_span_s: DEFAULT_TROUGH_SPAN_S,
        }
    }
}

/// Calibration result: the factors plus the unit-scale amplitudes they were
/// derived from (useful for reporting).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationOutcome {
    pub factors: ScalingFactors,
    /// Epoch-averaged unit-scale amplitudes (W-I, W-III, W-V), in the rate
    /// units of the uncalibrated channel-sums.
    pub measured: [f64; 3],
}

/// Epoch-averaged amplitude of one wave on a channel-sum waveform.
fn measured_amplitude<S: Sample>(
    sum: &[S],
    fs: f64,
    protocol: &CalibrationProtocol,
    wave: Wave,
    window: WaveWindow,
    convention: Convention,
) -> Result<f64> {
    let n_clicks = protocol.train.n_clicks();
    if protocol.epochs.is_empty() {
        return Err(Error::InvalidParameter(
            "no calibration epochs given".into(),
        ));
    }
    let mut acc = 0.0;
    for &epoch in &protocol.epochs {
        if epoch == 0 || epoch > n_clicks {
            return Err(Error::InvalidParameter(format!(
                "epoch {epoch} out of range 1..={n_clicks}"
            )));
        }
        let onset = protocol.train.onset_s(epoch - 1);
        let m = wave_metrics(
            sum,
            fs,
            onset,
            window,
            wave,
            convention,
            protocol.trough_span_s,
        )?;
        acc += m.amplitude_v;
    }
    Ok(acc / protocol.epochs.len() as f64)
}

/// Epoch-averaged W-I, W-III and W-V amplitudes measured on the three
/// stages' broadband channel-sums with each wave's own convention.
pub fn measure_waves<S: Sample>(
    s_an: &[S],
    s_cn: &[S],
    s_ic: &[S],
    fs: f64,
    protocol: &CalibrationProtocol,
) -> Result<[f64; 3]> {
    if s_an.len() != s_cn.len() || s_an.len() != s_ic.len() {
        return Err(Error::DimensionMismatch(format!(
            "stage sums differ in length: {} / {} / {}",
            s_an.len(),
            s_cn.len(),
            s_ic.len()
        )));
    }
    let plan = [
        (
            s_an,
            Wave::W1,
            protocol.w1_window,
            Convention::BaselineToPeak,
        ),
        (
            s_cn,
            Wave::W3,
            protocol.w3_window,
            Convention::BaselineToPeak,
        ),
        (s_ic, Wave::W5, protocol.w5_window, Convention::PeakToPeak),
    ];
    let mut out = [0.0; 3];
    for (i, (sum, wave, window, convention)) in plan.into_iter().enumerate() {
        out[i] = measured_amplitude(sum, fs, protocol, wave, window, convention)?;
    }
    Ok(out)
}

/// Derive M1, M3, M5 from unit-scaled broadband channel-sums of the three
/// stages' responses to the calibration train.
///
/// This is the core of [`calibrate`] for callers that accumulate the sums
/// in a streaming fashion instead of materializing population matrices.
pub fn calibrate_sums<S: Sample>(
    s_an: &[S],
    s_cn: &[S],
    s_ic: &[S],
    fs: f64,
    protocol: &CalibrationProtocol,
) -> Result<CalibrationOutcome> {
    protocol.targets.validate()?;
    let measured = measure_waves(s_an, s_cn, s_ic, fs, protocol)?;
    let targets = [
        protocol.targets.w1_p_v,
        protocol.targets.w3_p_v,
        protocol.targets.w5_pp_v,
    ];
    let waves = [Wave::W1, Wave::W3, Wave::W5];
    let mut factors = [0.0; 3];
    for i in 0..3 {
        if !(measured[i] > 0.0) {
            return Err(Error::DegenerateCalibration {
                wave: waves[i].name(),
            });
        }
        factors[i] = targets[i] / measured[i];
    }
    Ok(CalibrationOutcome {
        factors: ScalingFactors {
            m1: factors[0],
            m3: factors[1],
            m5: factors[2],
        },
        measured,
    })
}

/// Derive M1, M3, M5 from unit-scaled responses to the calibration train.
///
/// `an`, `cn`, `ic` must share shape and sample rate and be the responses to
/// `protocol.train` with all scaling factors at 1. A wave whose epoch-average
/// measures ≤ 0 cannot be calibrated and errors with
/// [`Error::DegenerateCalibration`].
pub fn calibrate<S: Sample>(
    an: &PopulationResponse<S>,
    cn: &PopulationResponse<S>,
    ic: &PopulationResponse<S>,
    protocol: &CalibrationProtocol,
) -> Result<CalibrationOutcome> {
    if !an.same_shape(cn) || !an.same_shape(ic) {
        return Err(Error::DimensionMismatch(
            "AN, CN and IC responses must share shape and sample rate".into(),
        ));
    }
    let range = ChannelRange::broadband(an.n_channels())?;
    let s_an = sum_channels(an, range, S::one())?;
    let s_cn = sum_channels(cn, range, S::one())?;
    let s_ic = sum_channels(ic, range, S::one())?;
    calibrate_sums(&s_an, &s_cn, &s_ic, an.fs().to64(), protocol)
}

/// Convert a measurement to the peak-to-peak reporting convention: W-I and
/// W-III baseline-to-peak values are doubled, W-V is already peak-to-peak.
pub fn report_pp(metrics: &WaveMetrics) -> f64 {
    match metrics.convention {
        Convention::BaselineToPeak => 2.0 * metrics.amplitude_v,
        Convention::PeakToPeak => metrics.amplitude_v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const FS: f64 = 20e3;

    /// Single-channel population whose waveform carries, per epoch, a
    /// triangular peak of `height` 1.5 ms after each click onset, followed
    /// by a `trough`-deep dip 2 ms later.
    fn pulse_pop(train: &ClickTrain, height: f64, trough: f64) -> PopulationResponse<f64> {
        let n = (train.duration_s * FS).round() as usize;
        let mut x = vec![0.0; n];
        for k in 0..train.n_clicks() {
            let peak_i = ((train.onset_s(k) + 1.5e-3) * FS).round() as usize;
            for (off, frac) in [(0isize, 1.0), (-2, 0.5), (2, 0.5)] {
                let i = (peak_i as isize + off) as usize;
                if i < n {
                    x[i] = height * frac;
                }
            }
            let dip_i = peak_i + 40; // 2 ms later
            if dip_i < n {
                x[dip_i] = trough;
            }
        }
        PopulationResponse::from_rows(FS, vec![4000.0], vec![x]).unwrap()
    }

    fn scaled(pop: &PopulationResponse<f64>, c: f64) -> PopulationResponse<f64> {
        PopulationResponse::from_rows(
            pop.fs(),
            pop.cf_hz().to_vec(),
            pop.rows()
                .map(|r| r.iter().map(|&v| c * v).collect())
                .collect(),
        )
        .unwrap()
    }

    /// Protocol with W-I/W-III/W-V windows all covering the synthetic pulse.
    fn test_protocol() -> CalibrationProtocol {
        CalibrationProtocol {
            w1_window: WaveWindow {
                start_s: 0.5e-3,
                end_s: 2.5e-3,
            },
            w3_window: WaveWindow {
                start_s: 0.5e-3,
                end_s: 2.5e-3,
            },
            w5_window: WaveWindow {
                start_s: 0.5e-3,
                end_s: 8e-3,
            },
            ..CalibrationProtocol::default()
        }
    }

    #[test]
    fn default_targets_and_reference_constants() {
        let t = CalibrationTargets::default();
        assert_eq!((t.w1_p_v, t.w3_p_v, t.w5_pp_v), (0.15e-6, 0.17e-6, 0.61e-6));
        let v12 = ScalingFactors::reference_v12();
        assert_eq!(
            (v12.m1, v12.m3, v12.m5),
            (4.2767e-14, 5.1435e-14, 13.3093e-14)
        );
        let v11 = ScalingFactors::reference_v11();
        assert_eq!(
            (v11.m1, v11.m3, v11.m5),
            (6.2755e-14, 7.2161e-14, 3.5200e-20)
        );
        assert!(v12.validate().is_ok());
        assert_eq!(CalibrationProtocol::default().epochs, vec![59, 60]);
    }

    #[test]
    fn factors_are_target_over_measured() {
        let protocol = test_protocol();
        let an = pulse_pop(&protocol.train, 2.0, 0.0);
        let cn = pulse_pop(&protocol.train, 3.0, 0.0);
        let ic = pulse_pop(&protocol.train, 1.5, -0.5);
        let out = calibrate(&an, &cn, &ic, &protocol).unwrap();
        assert_relative_eq!(out.measured[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(out.measured[1], 3.0, max_relative = 1e-12);
        assert_relative_eq!(out.measured[2], 2.0, max_relative = 1e-12); // 1.5 − (−0.5)
        assert_relative_eq!(out.factors.m1, 0.15e-6 / 2.0, max_relative = 1e-12);
        assert_relative_eq!(out.factors.m3, 0.17e-6 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(out.factors.m5, 0.61e-6 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn recalibrating_a_calibrated_pipeline_returns_unity() {
        let protocol = test_protocol();
        let an = pulse_pop(&protocol.train, 2.0, 0.0);
        let cn = pulse_pop(&protocol.train, 3.0, 0.0);
        let ic = pulse_pop(&protocol.train, 1.5, -0.5);
        let m = calibrate(&an, &cn, &ic, &protocol).unwrap().factors;
        let again = calibrate(
            &scaled(&an, m.m1),
            &scaled(&cn, m.m3),
            &scaled(&ic, m.m5),
            &protocol,
        )
        .unwrap()
        .factors;
        for v in [again.m1, again.m3, again.m5] {
            assert!(
                (v - 1.0).abs() < 1e-6,
                "recalibration factor {v} should be unity"
            );
        }
    }

    #[test]
    fn doubling_a_target_doubles_its_factor_exactly() {
        let protocol = test_protocol();
        let an = pulse_pop(&protocol.train, 2.0, 0.0);
        let cn = pulse_pop(&protocol.train, 3.0, 0.0);
        let ic = pulse_pop(&protocol.train, 1.5, -0.5);
        let base = calibrate(&an, &cn, &ic, &protocol).unwrap().factors;
        let mut doubled = protocol.clone();
        doubled.targets.w3_p_v *= 2.0;
        let out = calibrate(&an, &cn, &ic, &doubled).unwrap().factors;
        assert_eq!(out.m3, 2.0 * base.m3);
        assert_eq!(out.m1, base.m1);
        assert_eq!(out.m5, base.m5);
    }

    #[test]
    fn calibration_compensates_any_positive_prescale() {
        let protocol = test_protocol();
        let an = pulse_pop(&protocol.train, 2.0, 0.0);
        let cn = pulse_pop(&protocol.train, 3.0, 0.0);
        let ic = pulse_pop(&protocol.train, 1.5, -0.5);
        let base = calibrate(&an, &cn, &ic, &protocol).unwrap().factors;
        let c = 7.25;
        let out = calibrate(&scaled(&an, c), &scaled(&cn, c), &scaled(&ic, c), &protocol)
            .unwrap()
            .factors;
        assert_relative_eq!(out.m1, base.m1 / c, max_relative = 1e-12);
        assert_relative_eq!(out.m3, base.m3 / c, max_relative = 1e-12);
        assert_relative_eq!(out.m5, base.m5 / c, max_relative = 1e-12);
    }

    #[test]
    fn closure_reproduces_targets_after_scaling() {
        // Re-measure after applying the factors: the linear pipeline must
        // land on the targets to well within 0.1%.
        let protocol = test_protocol();
        let an = pulse_pop(&protocol.train, 2.0, 0.0);
        let cn = pulse_pop(&protocol.train, 3.0, 0.0);
        let ic = pulse_pop(&protocol.train, 1.5, -0.5);
        let m = calibrate(&an, &cn, &ic, &protocol).unwrap().factors;

        let checks = [
            (
                scaled(&an, m.m1),
                protocol.w1_window,
                Convention::BaselineToPeak,
                0.15e-6,
            ),
            (
                scaled(&cn, m.m3),
                protocol.w3_window,
                Convention::BaselineToPeak,
                0.17e-6,
            ),
            (
                scaled(&ic, m.m5),
                protocol.w5_window,
                Convention::PeakToPeak,
                0.61e-6,
            ),
        ];
        for (pop, window, convention, target) in checks {
            let sum = sum_channels(&pop, ChannelRange::broadband(1).unwrap(), 1.0).unwrap();
            let avg =
                measured_amplitude(&sum, FS, &protocol, Wave::W5, window, convention).unwrap();
            assert_relative_eq!(avg, target, max_relative = 1e-3);
        }
    }

    #[test]
    fn silent_responses_are_degenerate() {
        let protocol = test_protocol();
        let zero =
            PopulationResponse::from_rows(FS, vec![4000.0], vec![vec![0.0; (6.0 * FS) as usize]])
                .unwrap();
        match calibrate(&zero, &zero, &zero, &protocol) {
            Err(Error::DegenerateCalibration { wave }) => assert_eq!(wave, "w1"),
            other => panic!("expected DegenerateCalibration, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_epochs_are_rejected() {
        let mut protocol = test_protocol();
        protocol.epochs = vec![59, 67]; // only 66 clicks in the train
        let an = pulse_pop(&protocol.train, 2.0, 0.0);
        assert!(matches!(
            calibrate(&an, &an, &an, &protocol),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn sum_based_and_population_based_calibration_agree() {
        let protocol = test_protocol();
        let an = pulse_pop(&protocol.train, 2.0, 0.0);
        let cn = pulse_pop(&protocol.train, 3.0, 0.0);
        let ic = pulse_pop(&protocol.train, 1.5, -0.5);
        let from_pops = calibrate(&an, &cn, &ic, &protocol).unwrap();
        let from_sums =
            calibrate_sums(an.channel(1), cn.channel(1), ic.channel(1), FS, &protocol).unwrap();
        assert_eq!(from_pops, from_sums);
    }

    #[test]
    fn report_pp_doubles_only_baseline_measurements() {
        let w1 = WaveMetrics {
            wave: Wave::W1,
            latency_s: 1e-3,
            amplitude_v: 0.15e-6,
            convention: Convention::BaselineToPeak,
        };
        let w3 = WaveMetrics {
            wave: Wave::W3,
            latency_s: 2e-3,
            amplitude_v: 0.17e-6,
            convention: Convention::BaselineToPeak,
        };
        let w5 = WaveMetrics {
            wave: Wave::W5,
            latency_s: 5e-3,
            amplitude_v: 0.61e-6,
            convention: Convention::PeakToPeak,
        };
        assert_relative_eq!(report_pp(&w1), 0.30e-6, max_relative = 1e-12);
        assert_relative_eq!(report_pp(&w3), 0.34e-6, max_relative = 1e-12);
        assert_eq!(report_pp(&w5), 0.61e-6);
    }
}
