//! Population summation, EFR magnitude, MTF curves, and ABR wave metrics.
//!
//! Everything here is a pure function of its inputs. Spectral quantities are
//! computed in `f64` regardless of the sample type; peak searches break ties
//! toward the earliest sample so results are deterministic.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::population::PopulationResponse;
use crate::sample::Sample;

/// Default FFT length (200 ms at the 20 kHz analysis rate).
pub const DEFAULT_NFFT: usize = 4000;
/// Default per-click analysis epoch, s.
pub const DEFAULT_EPOCH_S: f64 = 25e-3;
/// Default span searched for the trough following a peak-to-peak maximum, s.
pub const DEFAULT_TROUGH_SPAN_S: f64 = 5e-3;
/// Default latency shift applied when reporting against reference data, s.
pub const DEFAULT_LATENCY_SHIFT_S: f64 = 3.5e-3;

/// Inclusive 1-based channel interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelRange {
    pub first: usize,
    pub last: usize,
}

impl ChannelRange {
    /// New inclusive range; `first` must be ≥ 1 and ≤ `last`.
    pub fn new(first: usize, last: usize) -> Result<Self> {
        if first == 0 || first > last {
            return Err(Error::InvalidParameter(format!(
                "channel range {first}..={last} is empty or zero-based"
            )));
        }
        Ok(ChannelRange { first, last })
    }

    /// All `n` channels.
    pub fn broadband(n: usize) -> Result<Self> {
        ChannelRange::new(1, n)
    }

    /// On-frequency band around the 4 kHz carrier: channels 100–123.
    pub fn on_frequency() -> Self {
        ChannelRange {
            first: 100,
            last: 123,
        }
    }

    /// Off-frequency band around 8 kHz: channels 30–54.
    pub fn off_frequency() -> Self {
        ChannelRange {
            first: 30,
            last: 54,
        }
    }

    /// Number of channels in the range.
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    /// Inclusive ranges are never empty.
    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Weighted sum of the rows in `range`: `weight · Σ resp[ch]`.
pub fn sum_channels<S: Sample>(
    resp: &PopulationResponse<S>,
    range: ChannelRange,
    weight: S,
) -> Result<Vec<S>> {
    if range.last > resp.n_channels() {
        return Err(Error::DimensionMismatch(format!(
            "channel range {}..={} exceeds the {} available channels",
            range.first,
            range.last,
            resp.n_channels()
        )));
    }
    let mut acc = vec![S::zero(); resp.n_samples()];
    for ch in range.first..=range.last {
        for (a, &v) in acc.iter_mut().zip(resp.channel(ch)) {
            *a += v;
        }
    }
    for a in &mut acc {
        *a *= weight;
    }
    Ok(acc)
}

/// Scalar weights mapping the AN, CN and IC channel-sums to volts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfrWeights<S: Sample> {
    pub a_w1: S,
    pub a_w3: S,
    pub a_w5: S,
}

impl<S: Sample> EfrWeights<S> {
    /// Unit weights (raw channel-sums in rate units).
    pub fn unit() -> Self {
        EfrWeights {
            a_w1: S::one(),
            a_w3: S::one(),
            a_w5: S::one(),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_w1", self.a_w1),
            ("a_w3", self.a_w3),
            ("a_w5", self.a_w5),
        ] {
            if !(v.is_finite() && v >= S::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and ≥ 0, got {}",
                    v.to64()
                )));
            }
        }
        Ok(())
    }
}

/// Weighted three-stage population waveform over one channel range:
/// `a_w1·Σan + a_w3·Σcn + a_w5·Σic`, in volts when the weights are
/// calibrated scaling factors.
pub fn efr_waveform<S: Sample>(
    an: &PopulationResponse<S>,
    cn: &PopulationResponse<S>,
    ic: &PopulationResponse<S>,
    range: ChannelRange,
    weights: &EfrWeights<S>,
) -> Result<Vec<S>> {
    weights.validate()?;
    if !an.same_shape(cn) || !an.same_shape(ic) {
        return Err(Error::DimensionMismatch(
            "AN, CN and IC responses must share shape and sample rate".into(),
        ));
    }
    let s_an = sum_channels(an, range, S::one())?;
    let s_cn = sum_channels(cn, range, S::one())?;
    let s_ic = sum_channels(ic, range, S::one())?;
    Ok((0..s_an.len())
        .map(|i| weights.a_w1 * s_an[i] + weights.a_w3 * s_cn[i] + weights.a_w5 * s_ic[i])
        .collect())
}

/// Location and size of the largest non-DC spectral component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPeak {
    /// FFT bin index (≥ 1); frequency is `bin·fs/nfft`.
    pub bin: usize,
    /// `|FFT|/N` at that bin, in the input's units.
    pub magnitude: f64,
}

/// Largest `|FFT(x)|/N` over bins `k ≥ 1` of an `nfft`-point FFT
/// (zero-padded; bin 0 excluded). Ties break toward the lowest bin.
pub fn peak_magnitude<S: Sample>(x: &[S], nfft: usize) -> Result<SpectralPeak> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("empty waveform".into()));
    }
    if nfft < x.len() || nfft < 2 {
        return Err(Error::InvalidParameter(format!(
            "nfft = {nfft} must be ≥ the {}-sample waveform (zero-padding only)",
            x.len()
        )));
    }
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v.to64(), 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let n = nfft as f64;
    let mut best = SpectralPeak {
        bin: 1,
        magnitude: buf[1].norm() / n,
    };
    // Real input: the upper half mirrors bins 1..=nfft/2.
    for (k, v) in buf.iter().enumerate().take(nfft / 2 + 1).skip(2) {
        let mag = v.norm() / n;
        if mag > best.magnitude {
            best = SpectralPeak {
                bin: k,
                magnitude: mag,
            };
        }
    }
    Ok(best)
}

/// EFR magnitude in dB re 1 µV: `20·log10(peak/1e-6)` with `peak` the
/// largest non-DC `|FFT|/N` component of the voltage waveform.
///
/// A waveform with no non-DC energy (all-zero or pure DC) has no defined
/// magnitude and errors with [`Error::UndefinedMagnitude`].
pub fn efr_magnitude<S: Sample>(r_efr: &[S], nfft: usize) -> Result<f64> {
    let peak = peak_magnitude(r_efr, nfft)?;
    if peak.magnitude <= 0.0 {
        return Err(Error::UndefinedMagnitude);
    }
    Ok(20.0 * (peak.magnitude / 1e-6).log10())
}

/// Modulation-response magnitude for MTF points: the waveform's mean is
/// removed, then the largest non-DC `|FFT|/N` component is returned in the
/// input's units.
pub fn modulation_magnitude<S: Sample>(x: &[S], nfft: usize) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("empty waveform".into()));
    }
    let mean = x.iter().map(|v| v.to64()).sum::<f64>() / x.len() as f64;
    let centered: Vec<f64> = x.iter().map(|v| v.to64() - mean).collect();
    Ok(peak_magnitude(&centered, nfft)?.magnitude)
}

/// ABR wave identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wave {
    W1,
    W3,
    W5,
}

impl Wave {
    /// Stable lower-case name.
    pub fn name(self) -> &'static str {
        match self {
            Wave::W1 => "w1",
            Wave::W3 => "w3",
            Wave::W5 => "w5",
        }
    }

    /// The measurement convention conventionally used for this wave:
    /// baseline-to-peak for W-I and W-III, peak-to-peak for W-V.
    pub fn default_convention(self) -> Convention {
        match self {
            Wave::W1 | Wave::W3 => Convention::BaselineToPeak,
            Wave::W5 => Convention::PeakToPeak,
        }
    }

    /// Default post-onset search window for this wave.
    pub fn default_window(self) -> WaveWindow {
        match self {
            Wave::W1 => WaveWindow {
                start_s: 0.5e-3,
                end_s: 2.5e-3,
            },
            Wave::W3 => WaveWindow {
                start_s: 1.5e-3,
                end_s: 4.0e-3,
            },
            Wave::W5 => WaveWindow {
                start_s: 3.0e-3,
                end_s: 8.0e-3,
            },
        }
    }
}

/// Amplitude measurement convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// Amplitude = maximum in the window.
    BaselineToPeak,
    /// Amplitude = maximum minus the trough following it.
    PeakToPeak,
}

/// Peak search window in seconds relative to the stimulus onset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveWindow {
    pub start_s: f64,
    pub end_s: f64,
}

/// One extracted wave measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveMetrics {
    pub wave: Wave,
    /// Peak time relative to the stimulus onset, s (model time; see
    /// [`latency_report`] for the reporting shift).
    pub latency_s: f64,
    /// Amplitude in the waveform's units under `convention`.
    pub amplitude_v: f64,
    pub convention: Convention,
}

/// Extract one wave's latency and amplitude from a voltage waveform.
///
/// The window is the half-open sample interval `[onset+start, onset+end)`.
/// The peak is the window's maximum (earliest sample on ties); its latency
/// is reported relative to `onset_s`. Baseline-to-peak amplitude is the peak
/// value itself; peak-to-peak amplitude subtracts the minimum over the
/// `trough_span_s` seconds following the peak (clipped to the signal end).
pub fn wave_metrics<S: Sample>(
    x: &[S],
    fs: f64,
    onset_s: f64,
    window: WaveWindow,
    wave: Wave,
    convention: Convention,
    trough_span_s: f64,
) -> Result<WaveMetrics> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fs must be positive, got {fs}"
        )));
    }
    if !(trough_span_s.is_finite() && trough_span_s >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "trough_span_s must be ≥ 0, got {trough_span_s}"
        )));
    }
    let i0 = ((onset_s + window.start_s) * fs).round() as isize;
    let i1 = ((onset_s + window.end_s) * fs).round() as isize;
    if i0 < 0 || i0 >= i1 || i1 as usize > x.len() {
        return Err(Error::InvalidParameter(format!(
            "window [{}, {}) samples is empty or outside the {}-sample waveform",
            i0,
            i1,
            x.len()
        )));
    }
    let (i0, i1) = (i0 as usize, i1 as usize);
    let mut imax = i0;
    for i in i0..i1 {
        if x[i] > x[imax] {
            imax = i;
        }
    }
    let peak = x[imax].to64();
    let amplitude_v = match convention {
        Convention::BaselineToPeak => peak,
        Convention::PeakToPeak => {
            let span = (trough_span_s * fs).round() as usize;
            let end = (imax + span).min(x.len() - 1);
            let mut trough = x[imax];
            for &v in &x[imax..=end] {
                if v < trough {
                    trough = v;
                }
            }
            peak - trough.to64()
        }
    };
    Ok(WaveMetrics {
        wave,
        latency_s: imax as f64 / fs - onset_s,
        amplitude_v,
        convention,
    })
}

/// Shift every latency by `shift_s` for comparison with reference data
/// (amplitudes untouched). The model's own latencies omit the cochlear and
/// synaptic travel time of the out-of-scope stages; published comparisons
/// add a constant 3.5 ms.
pub fn latency_report(metrics: &[WaveMetrics], shift_s: f64) -> Vec<WaveMetrics> {
    metrics
        .iter()
        .map(|m| WaveMetrics {
            latency_s: m.latency_s + shift_s,
            ..*m
        })
        .collect()
}

/// Modulation transfer function over an fmod grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MtfCurve {
    /// Modulation frequencies, Hz.
    pub fmod_hz: Vec<f64>,
    /// Peak component per point, dB re 1 µV.
    pub magnitude_db: Vec<f64>,
    /// Peak component per point, normalized to the curve maximum.
    pub magnitude_rel: Vec<f64>,
}

impl MtfCurve {
    /// Build both reported forms from linear per-point magnitudes in volts.
    pub fn from_linear(fmod_hz: Vec<f64>, magnitude_v: Vec<f64>) -> Result<Self> {
        if fmod_hz.len() != magnitude_v.len() || fmod_hz.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} grid points vs {} magnitudes",
                fmod_hz.len(),
                magnitude_v.len()
            )));
        }
        let max = magnitude_v.iter().cloned().fold(f64::MIN, f64::max);
        if !(max > 0.0) {
            return Err(Error::UndefinedMagnitude);
        }
        let magnitude_db = magnitude_v
            .iter()
            .map(|&m| 20.0 * (m / 1e-6).log10())
            .collect();
        let magnitude_rel = magnitude_v.iter().map(|&m| m / max).collect();
        Ok(MtfCurve {
            fmod_hz,
            magnitude_db,
            magnitude_rel,
        })
    }

    /// Modulation frequency of the curve maximum (earliest on ties).
    pub fn peak_fmod_hz(&self) -> f64 {
        let mut best = 0;
        for (i, &v) in self.magnitude_rel.iter().enumerate() {
            if v > self.magnitude_rel[best] {
                best = i;
            }
        }
        self.fmod_hz[best]
    }
}

/// The standard modulation-frequency grid: 5 to 250 Hz in 5 Hz steps.
pub fn standard_fmod_grid() -> Vec<f64> {
    (1..=50).map(|k| 5.0 * k as f64).collect()
}
