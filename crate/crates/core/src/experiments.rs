//! Experiment drivers: the full stimulus → AN → CN → IC pipelines behind
//! the CLI's `simulate`, `calibrate`, `mtf`, `clicks` and `efr` subcommands,
//! plus their CSV emitters.
//!
//! All drivers stream the pipeline one channel at a time, so memory stays
//! proportional to a single channel regardless of the channel count or
//! stimulus duration. Every CSV written here starts with a
//! `# config_hash=<sha256>` line; runs from identical configurations produce
//! byte-identical files.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::analysis::{
    efr_magnitude, modulation_magnitude, wave_metrics, ChannelRange, Convention, MtfCurve, Wave,
    WaveMetrics,
};
use crate::calibration::{calibrate_sums, measure_waves, CalibrationOutcome, ScalingFactors};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::frontend::{decimation_factor, surrogate_channel, ChannelMap};
use crate::io::{load_population, MatrixFormat, Vap1Writer};
use crate::nuclei::nucleus_response;

/// Inclusive arithmetic grid `start, start+step, …` up to `stop`.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid needs finite bounds and a positive step, got {start}..{stop} by {step}"
        )));
    }
    if stop < start {
        return Err(Error::InvalidParameter(format!(
            "grid stop {stop} lies below start {start}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}

/// Broadband channel-sums of all three stages.
#[derive(Clone, Debug, PartialEq)]
pub struct StageSums {
    pub an: Vec<f64>,
    pub cn: Vec<f64>,
    pub ic: Vec<f64>,
}

/// Run the configured pipeline over `stim`, invoking `f(channel, an_row,
/// cn_row, ic_row)` for every 1-based channel in turn.
///
/// The AN stage comes from `io.an_path` when set (the file must match the
/// configured channel count and analysis rate), otherwise from the surrogate
/// front end driving `frontend.channels` Greenwood-mapped channels.
fn for_each_channel<F>(cfg: &ExperimentConfig, stim: &[f64], mut f: F) -> Result<()>
where
    F: FnMut(usize, &[f64], &[f64], &[f64]) -> Result<()>,
{
    let cn_params = cfg.cn_params()?;
    let ic_params = cfg.ic_params()?;
    let fs_abr = cfg.frontend.fs_abr_hz;
    if cfg.io.an_path.is_empty() {
        let map = ChannelMap::<f64>::standard(cfg.frontend.channels)?;
        let surrogate = cfg.surrogate_config();
        for (i, &cf) in map.cf_hz.iter().enumerate() {
            let an = surrogate_channel(stim, cfg.stimulus.fs_hz, cf, &surrogate, fs_abr)?;
            let cn = nucleus_response(&an, &cn_params, fs_abr)?;
            let ic = nucleus_response(&cn, &ic_params, fs_abr)?;
            f(i + 1, &an, &cn, &ic)?;
        }
    } else {
        let pop = load_population::<f64>(Path::new(&cfg.io.an_path), cfg.matrix_format()?)?;
        if pop.n_channels() != cfg.frontend.channels {
            return Err(Error::DimensionMismatch(format!(
                "AN file has {} channels, config expects {}",
                pop.n_channels(),
                cfg.frontend.channels
            )));
        }
        if (pop.fs() - fs_abr).abs() > 1e-9 * fs_abr {
            return Err(Error::DimensionMismatch(format!(
                "AN file rate {} Hz differs from the configured {} Hz",
                pop.fs(),
                fs_abr
            )));
        }
        for (i, an) in pop.rows().enumerate() {
            let cn = nucleus_response(an, &cn_params, fs_abr)?;
            let ic = nucleus_response(&cn, &ic_params, fs_abr)?;
            f(i + 1, an, &cn, &ic)?;
        }
    }
    Ok(())
}

/// Accumulate per-range stage sums over the whole pipeline in one pass.
pub fn pipeline_range_sums(
    cfg: &ExperimentConfig,
    stim: &[f64],
    ranges: &[ChannelRange],
) -> Result<Vec<StageSums>> {
    for r in ranges {
        if r.last > cfg.frontend.channels {
            return Err(Error::DimensionMismatch(format!(
                "channel range {}..={} exceeds the {} configured channels",
                r.first, r.last, cfg.frontend.channels
            )));
        }
    }
    let mut sums: Vec<StageSums> = Vec::new();
    for_each_channel(cfg, stim, |ch, an, cn, ic| {
        if sums.is_empty() {
            sums = ranges
                .iter()
                .map(|_| StageSums {
                    an: vec![0.0; an.len()],
                    cn: vec![0.0; an.len()],
                    ic: vec![0.0; an.len()],
                })
                .collect();
        }
        for (r, acc) in ranges.iter().zip(&mut sums) {
            if ch >= r.first && ch <= r.last {
                for (a, &v) in acc.an.iter_mut().zip(an) {
                    *a += v;
                }
                for (a, &v) in acc.cn.iter_mut().zip(cn) {
                    *a += v;
                }
                for (a, &v) in acc.ic.iter_mut().zip(ic) {
                    *a += v;
                }
            }
        }
        Ok(())
    })?;
    if sums.is_empty() {
        return Err(Error::DimensionMismatch(
            "pipeline produced no channels".into(),
        ));
    }
    Ok(sums)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// One-column sample series with the config-hash and rate header comments.
fn write_series_csv(path: &Path, hash: &str, fs: f64, x: &[f64]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# config_hash={hash}")?;
    writeln!(w, "# fs={fs}")?;
    for v in x {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Render the configured stimulus and write it to `stimulus.csv` under
/// `out_dir`. Returns the written path.
pub fn write_stimulus_csv(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let spec = cfg.stimulus_spec()?;
    let stim: Vec<f64> = spec.render()?;
    let path = out_dir.join("stimulus.csv");
    write_series_csv(&path, &cfg.config_hash(), spec.fs(), &stim)?;
    Ok(path)
}

fn require_surrogate(cfg: &ExperimentConfig, what: &str) -> Result<()> {
    if cfg.io.an_path.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "io.an_path is not supported for {what}: stimulus sweeps must re-render \
             their input, so the surrogate front end is required"
        )))
    }
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

/// Result of a calibration pipeline run.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationRun {
    pub outcome: CalibrationOutcome,
    /// SHA-256 of the rendered calibration stimulus (little-endian f64s).
    pub stimulus_sha256: String,
    pub fs_abr_hz: f64,
}

/// Run the calibration protocol: render the reference train, push it through
/// the pipeline with unit scaling, and derive M1, M3, M5.
pub fn run_calibration(cfg: &ExperimentConfig) -> Result<CalibrationRun> {
    let train = cfg.calibration_train()?;
    let stim: Vec<f64> = train.render()?;
    let broadband = ChannelRange::broadband(cfg.frontend.channels)?;
    let sums = pipeline_range_sums(cfg, &stim, &[broadband])?.remove(0);
    let protocol = cfg.calibration_protocol()?;
    let outcome = calibrate_sums(
        &sums.an,
        &sums.cn,
        &sums.ic,
        cfg.frontend.fs_abr_hz,
        &protocol,
    )?;
    let bytes: Vec<u8> = stim.iter().flat_map(|v| v.to_le_bytes()).collect();
    Ok(CalibrationRun {
        outcome,
        stimulus_sha256: sha256_hex(&bytes),
        fs_abr_hz: cfg.frontend.fs_abr_hz,
    })
}

/// Re-simulate the calibration protocol with the given factors applied and
/// return the measured (W-I, W-III, W-V) amplitudes in volts.
pub fn verify_calibration(cfg: &ExperimentConfig, factors: &ScalingFactors) -> Result<[f64; 3]> {
    factors.validate()?;
    let train = cfg.calibration_train()?;
    let stim: Vec<f64> = train.render()?;
    let broadband = ChannelRange::broadband(cfg.frontend.channels)?;
    let sums = pipeline_range_sums(cfg, &stim, &[broadband])?.remove(0);
    let s_an: Vec<f64> = sums.an.iter().map(|&v| factors.m1 * v).collect();
    let s_cn: Vec<f64> = sums.cn.iter().map(|&v| factors.m3 * v).collect();
    let s_ic: Vec<f64> = sums.ic.iter().map(|&v| factors.m5 * v).collect();
    let protocol = cfg.calibration_protocol()?;
    measure_waves(&s_an, &s_cn, &s_ic, cfg.frontend.fs_abr_hz, &protocol)
}

/// Read scaling factors from a calibration file: `#` comments plus
/// `m1=`/`m3=`/`m5=` lines (all three required).
pub fn parse_calibration_file(path: &Path) -> Result<ScalingFactors> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!(
            "cannot read calibration file {}: {e}",
            path.display()
        ))
    })?;
    let (mut m1, mut m3, mut m5) = (None, None, None);
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "calibration file line {}: expected 'key=value', got '{line}'",
                lineno + 1
            ))
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::Config(format!(
                "calibration file line {}: unparsable value '{}'",
                lineno + 1,
                value.trim()
            ))
        })?;
        match key.trim() {
            "m1" => m1 = Some(value),
            "m3" => m3 = Some(value),
            "m5" => m5 = Some(value),
            other => {
                return Err(Error::Config(format!(
                    "calibration file line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    match (m1, m3, m5) {
        (Some(m1), Some(m3), Some(m5)) => {
            let factors = ScalingFactors { m1, m3, m5 };
            factors.validate()?;
            Ok(factors)
        }
        _ => Err(Error::Config(
            "calibration file must define m1, m3 and m5".into(),
        )),
    }
}

/// The scaling factors an experiment should apply: the `calibration.file` if
/// configured, otherwise the `calibration.m*` keys.
pub fn resolved_scaling(cfg: &ExperimentConfig) -> Result<ScalingFactors> {
    if cfg.calibration.file.is_empty() {
        cfg.scaling_factors()
    } else {
        parse_calibration_file(Path::new(&cfg.calibration.file))
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

enum MatrixSink {
    Vap1(Option<Vap1Writer>),
    Csv(BufWriter<fs::File>),
}

impl MatrixSink {
    fn create(
        path: &Path,
        format: MatrixFormat,
        n_channels: usize,
        n_samples: usize,
        fs: f64,
        hash: &str,
    ) -> Result<Self> {
        match format {
            MatrixFormat::Vap1 => {
                // The VAP1 header is fixed, so the config hash goes into a
                // sidecar next to the matrix.
                let writer = Vap1Writer::create(path, n_channels, n_samples, fs)?;
                let meta = path.with_extension("vap1.meta");
                fs::write(&meta, format!("config_hash={hash}\n"))?;
                Ok(MatrixSink::Vap1(Some(writer)))
            }
            MatrixFormat::Csv => {
                let file = fs::File::create(path)?;
                let mut w = BufWriter::new(file);
                writeln!(w, "# config_hash={hash}")?;
                writeln!(w, "# fs={fs}")?;
                Ok(MatrixSink::Csv(w))
            }
        }
    }

    fn write_row(&mut self, row: &[f64]) -> Result<()> {
        match self {
            MatrixSink::Vap1(w) => w.as_mut().expect("writer live until finish").write_row(row),
            MatrixSink::Csv(w) => {
                let mut first = true;
                for v in row {
                    if first {
                        write!(w, "{v}")?;
                        first = false;
                    } else {
                        write!(w, ",{v}")?;
                    }
                }
                writeln!(w)?;
                Ok(())
            }
        }
    }

    fn finish(&mut self) -> Result<()> {
        match self {
            MatrixSink::Vap1(w) => w.take().expect("finish called once").finish(),
            MatrixSink::Csv(w) => Ok(w.flush()?),
        }
    }
}

/// Render the configured stimulus, run the pipeline, and store the stimulus
/// waveform plus all three stage matrices under `out_dir`. Returns the paths
/// written (excluding `.meta` sidecars).
pub fn run_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let hash = cfg.config_hash();
    let spec = cfg.stimulus_spec()?;
    let stim: Vec<f64> = spec.render()?;
    let fs_stim = spec.fs();

    let stim_path = out_dir.join("stimulus.csv");
    write_series_csv(&stim_path, &hash, fs_stim, &stim)?;

    let format = cfg.matrix_format()?;
    let fs_abr = cfg.frontend.fs_abr_hz;
    let n_channels = cfg.frontend.channels;
    let n_samples = if cfg.io.an_path.is_empty() {
        let decim = decimation_factor(fs_stim, fs_abr)?;
        stim.len().div_ceil(decim)
    } else {
        load_population::<f64>(Path::new(&cfg.io.an_path), format)?.n_samples()
    };

    let ext = format.extension();
    let paths: Vec<PathBuf> = ["an", "cn", "ic"]
        .iter()
        .map(|stage| out_dir.join(format!("{stage}.{ext}")))
        .collect();
    let mut sinks = paths
        .iter()
        .map(|p| MatrixSink::create(p, format, n_channels, n_samples, fs_abr, &hash))
        .collect::<Result<Vec<_>>>()?;

    for_each_channel(cfg, &stim, |_ch, an, cn, ic| {
        sinks[0].write_row(an)?;
        sinks[1].write_row(cn)?;
        sinks[2].write_row(ic)?;
        Ok(())
    })?;
    for sink in &mut sinks {
        sink.finish()?;
    }

    let mut written = vec![stim_path];
    written.extend(paths);
    Ok(written)
}

// ---------------------------------------------------------------------------
// mtf
// ---------------------------------------------------------------------------

/// CN and IC modulation transfer functions at the probe channel.
#[derive(Clone, Debug, PartialEq)]
pub struct MtfOutputs {
    pub cn: MtfCurve,
    pub ic: MtfCurve,
}

/// Sweep the AM probe tone over the configured fmod grid and extract both
/// stages' MTFs at the configured channel. Magnitudes are scaled to volts
/// with the active M3 (CN) and M5 (IC) factors before the dB form.
pub fn run_mtf(cfg: &ExperimentConfig) -> Result<MtfOutputs> {
    require_surrogate(cfg, "mtf")?;
    let map = ChannelMap::<f64>::standard(cfg.frontend.channels)?;
    let cf = map.cf(cfg.analysis.mtf_channel)?;
    let factors = resolved_scaling(cfg)?;
    let cn_params = cfg.cn_params()?;
    let ic_params = cfg.ic_params()?;
    let surrogate = cfg.surrogate_config();
    let fs_abr = cfg.frontend.fs_abr_hz;
    let fmod = grid(
        cfg.mtf.fmod_start_hz,
        cfg.mtf.fmod_stop_hz,
        cfg.mtf.fmod_step_hz,
    )?;

    let mut cn_mag = Vec::with_capacity(fmod.len());
    let mut ic_mag = Vec::with_capacity(fmod.len());
    for &f in &fmod {
        let stim: Vec<f64> = cfg.mtf_tone(f).render()?;
        let an = surrogate_channel(&stim, cfg.stimulus.fs_hz, cf, &surrogate, fs_abr)?;
        let cn = nucleus_response(&an, &cn_params, fs_abr)?;
        let ic = nucleus_response(&cn, &ic_params, fs_abr)?;
        cn_mag.push(factors.m3 * modulation_magnitude(&cn, cfg.analysis.nfft)?);
        ic_mag.push(factors.m5 * modulation_magnitude(&ic, cfg.analysis.nfft)?);
    }
    Ok(MtfOutputs {
        cn: MtfCurve::from_linear(fmod.clone(), cn_mag)?,
        ic: MtfCurve::from_linear(fmod, ic_mag)?,
    })
}

/// Write `mtf_cn.csv` and `mtf_ic.csv` (`param,value_db,value_rel`).
pub fn write_mtf_csv(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    outputs: &MtfOutputs,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let hash = cfg.config_hash();
    let mut written = Vec::new();
    for (name, curve) in [("mtf_cn.csv", &outputs.cn), ("mtf_ic.csv", &outputs.ic)] {
        let path = out_dir.join(name);
        let file = fs::File::create(&path)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# config_hash={hash}")?;
        writeln!(w, "param,value_db,value_rel")?;
        for i in 0..curve.fmod_hz.len() {
            writeln!(
                w,
                "{},{},{}",
                curve.fmod_hz[i], curve.magnitude_db[i], curve.magnitude_rel[i]
            )?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// clicks
// ---------------------------------------------------------------------------

/// Wave growth across click levels for two epochs of the train.
#[derive(Clone, Debug, PartialEq)]
pub struct ClickGrowth {
    pub levels_db: Vec<f64>,
    /// W-I metrics (M1-scaled AN sum) for the first analyzed click.
    pub w1_first: Vec<WaveMetrics>,
    /// W-I metrics for the last analyzed click.
    pub w1_last: Vec<WaveMetrics>,
    /// W-V metrics (M5-scaled IC sum) for the first analyzed click.
    pub w5_first: Vec<WaveMetrics>,
    /// W-V metrics for the last analyzed click.
    pub w5_last: Vec<WaveMetrics>,
    /// 1-based click indices the two epoch series refer to.
    pub epochs: (usize, usize),
}

/// Sweep the all-positive click train over the configured level grid and
/// extract W-I and W-V metrics for the first and last analyzed clicks.
pub fn run_clicks(cfg: &ExperimentConfig) -> Result<ClickGrowth> {
    require_surrogate(cfg, "clicks")?;
    let levels = grid(
        cfg.clicks.level_start_db,
        cfg.clicks.level_stop_db,
        cfg.clicks.level_step_db,
    )?;
    let factors = resolved_scaling(cfg)?;
    let broadband = ChannelRange::broadband(cfg.frontend.channels)?;
    let [w1_window, _, w5_window] = cfg.wave_windows();
    let span = cfg.analysis.trough_span_s;
    let fs = cfg.frontend.fs_abr_hz;
    let (e_first, e_last) = (cfg.clicks.epoch_first, cfg.clicks.epoch_last);

    let mut out = ClickGrowth {
        levels_db: levels.clone(),
        w1_first: Vec::new(),
        w1_last: Vec::new(),
        w5_first: Vec::new(),
        w5_last: Vec::new(),
        epochs: (e_first, e_last),
    };
    for &level in &levels {
        let train = cfg.growth_train(level);
        let n_clicks = train.n_clicks();
        for epoch in [e_first, e_last] {
            if epoch == 0 || epoch > n_clicks {
                return Err(Error::InvalidParameter(format!(
                    "clicks epoch {epoch} out of range 1..={n_clicks}"
                )));
            }
        }
        let stim: Vec<f64> = train.render()?;
        let sums = pipeline_range_sums(cfg, &stim, &[broadband])?.remove(0);
        let w1_sum: Vec<f64> = sums.an.iter().map(|&v| factors.m1 * v).collect();
        let w5_sum: Vec<f64> = sums.ic.iter().map(|&v| factors.m5 * v).collect();
        for (epoch, w1_dst, w5_dst) in [
            (e_first, &mut out.w1_first, &mut out.w5_first),
            (e_last, &mut out.w1_last, &mut out.w5_last),
        ] {
            let onset = train.onset_s(epoch - 1);
            w1_dst.push(wave_metrics(
                &w1_sum,
                fs,
                onset,
                w1_window,
                Wave::W1,
                Convention::BaselineToPeak,
                span,
            )?);
            w5_dst.push(wave_metrics(
                &w5_sum,
                fs,
                onset,
                w5_window,
                Wave::W5,
                Convention::PeakToPeak,
                span,
            )?);
        }
    }
    Ok(out)
}

/// Write the four growth tables (`clicks_w{1,5}_click{first,last}.csv`,
/// columns `level_db,latency_s,amplitude_v`). Latencies carry the
/// configured reporting shift.
pub fn write_clicks_csv(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    growth: &ClickGrowth,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let hash = cfg.config_hash();
    let shift = cfg.analysis.latency_shift_s;
    let (e_first, e_last) = growth.epochs;
    let tables = [
        ("w1", e_first, &growth.w1_first),
        ("w1", e_last, &growth.w1_last),
        ("w5", e_first, &growth.w5_first),
        ("w5", e_last, &growth.w5_last),
    ];
    let mut written = Vec::new();
    for (wave, epoch, metrics) in tables {
        let path = out_dir.join(format!("clicks_{wave}_click{epoch}.csv"));
        let file = fs::File::create(&path)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# config_hash={hash}")?;
        writeln!(w, "level_db,latency_s,amplitude_v")?;
        for (level, m) in growth.levels_db.iter().zip(metrics) {
            writeln!(w, "{},{},{}", level, m.latency_s + shift, m.amplitude_v)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// efr
// ---------------------------------------------------------------------------

/// EFR level series over the three summation bands plus one time-domain
/// trace.
#[derive(Clone, Debug, PartialEq)]
pub struct EfrOutputs {
    pub levels_db: Vec<f64>,
    pub broadband_db: Vec<f64>,
    pub onfreq_db: Vec<f64>,
    pub offfreq_db: Vec<f64>,
    pub trace_level_db: f64,
    pub trace_fs_hz: f64,
    /// Broadband r_EFR at the trace level, volts.
    pub trace_v: Vec<f64>,
}

fn weighted_efr(sums: &StageSums, factors: &ScalingFactors) -> Vec<f64> {
    (0..sums.an.len())
        .map(|i| factors.m1 * sums.an[i] + factors.m3 * sums.cn[i] + factors.m5 * sums.ic[i])
        .collect()
}

/// Sweep the EFR tone over the configured level grid; per level and band,
/// form the weighted three-stage sum and take its spectral magnitude.
pub fn run_efr(cfg: &ExperimentConfig) -> Result<EfrOutputs> {
    require_surrogate(cfg, "efr")?;
    let levels = grid(
        cfg.efr.level_start_db,
        cfg.efr.level_stop_db,
        cfg.efr.level_step_db,
    )?;
    let factors = resolved_scaling(cfg)?;
    let ranges = [
        ChannelRange::broadband(cfg.frontend.channels)?,
        cfg.onfreq_range()?,
        cfg.offfreq_range()?,
    ];
    let nfft = cfg.analysis.nfft;

    let mut out = EfrOutputs {
        levels_db: levels.clone(),
        broadband_db: Vec::new(),
        onfreq_db: Vec::new(),
        offfreq_db: Vec::new(),
        trace_level_db: cfg.efr.trace_level_db,
        trace_fs_hz: cfg.frontend.fs_abr_hz,
        trace_v: Vec::new(),
    };
    for &level in &levels {
        let stim: Vec<f64> = cfg.efr_tone(level).render()?;
        let sums = pipeline_range_sums(cfg, &stim, &ranges)?;
        for (dst, s) in [
            (&mut out.broadband_db, &sums[0]),
            (&mut out.onfreq_db, &sums[1]),
            (&mut out.offfreq_db, &sums[2]),
        ] {
            dst.push(efr_magnitude(&weighted_efr(s, &factors), nfft)?);
        }
    }
    let stim: Vec<f64> = cfg.efr_tone(cfg.efr.trace_level_db).render()?;
    let sums = pipeline_range_sums(cfg, &stim, &ranges[..1])?.remove(0);
    out.trace_v = weighted_efr(&sums, &factors);
    Ok(out)
}

/// Write the three EFR level-series tables (`param,value_db,value_rel`,
/// `value_rel` normalized to each band's maximum) and the time-domain trace.
pub fn write_efr_csv(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    outputs: &EfrOutputs,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let hash = cfg.config_hash();
    let tables = [
        ("efr_broadband.csv", &outputs.broadband_db),
        ("efr_onfreq.csv", &outputs.onfreq_db),
        ("efr_offfreq.csv", &outputs.offfreq_db),
    ];
    let mut written = Vec::new();
    for (name, series) in tables {
        let path = out_dir.join(name);
        let file = fs::File::create(&path)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# config_hash={hash}")?;
        writeln!(w, "param,value_db,value_rel")?;
        let max_db = series.iter().cloned().fold(f64::MIN, f64::max);
        for (level, db) in outputs.levels_db.iter().zip(series) {
            let rel = 10f64.powf((db - max_db) / 20.0);
            writeln!(w, "{level},{db},{rel}")?;
        }
        w.flush()?;
        written.push(path);
    }

    let trace_path = out_dir.join("efr_trace.csv");
    write_series_csv(&trace_path, &hash, outputs.trace_fs_hz, &outputs.trace_v)?;
    written.push(trace_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::load_waveform_csv;

    /// Desk-scale configuration: few channels, short stimuli, small sweeps.
    fn small_config() -> ExperimentConfig {
        ExperimentConfig::parse(
            "frontend.channels = 8\n\
             stimulus.click_duration_s = 0.6\n\
             calibration.epoch_a = 5\n\
             calibration.epoch_b = 6\n\
             analysis.mtf_channel = 3\n\
             analysis.onfreq_first = 2\n\
             analysis.onfreq_last = 4\n\
             analysis.offfreq_first = 5\n\
             analysis.offfreq_last = 7\n\
             mtf.fmod_start_hz = 20\n\
             mtf.fmod_stop_hz = 60\n\
             mtf.fmod_step_hz = 20\n\
             clicks.level_start_db = 60\n\
             clicks.level_stop_db = 80\n\
             clicks.duration_s = 0.2\n\
             clicks.epoch_last = 4\n\
             efr.level_start_db = 50\n\
             efr.level_stop_db = 70\n\
             efr.trace_level_db = 60\n",
        )
        .unwrap()
    }

    #[test]
    fn grid_spans_inclusively() {
        assert_eq!(
            grid(60.0, 100.0, 10.0).unwrap(),
            vec![60.0, 70.0, 80.0, 90.0, 100.0]
        );
        let fmod = grid(5.0, 250.0, 5.0).unwrap();
        assert_eq!(fmod.len(), 50);
        assert_eq!(fmod[0], 5.0);
        assert_eq!(fmod[49], 250.0);
        assert_eq!(grid(70.0, 70.0, 10.0).unwrap(), vec![70.0]);
        assert!(grid(0.0, 10.0, 0.0).is_err());
        assert!(grid(10.0, 0.0, 5.0).is_err());
    }

    #[test]
    fn calibration_run_closes_on_the_targets() {
        let cfg = small_config();
        let run = run_calibration(&cfg).unwrap();
        let f = run.outcome.factors;
        assert!(f.m1 > 0.0 && f.m3 > 0.0 && f.m5 > 0.0);
        assert_eq!(run.stimulus_sha256.len(), 64);

        let measured = verify_calibration(&cfg, &f).unwrap();
        let targets = [0.15e-6, 0.17e-6, 0.61e-6];
        for (m, t) in measured.iter().zip(targets) {
            assert!(
                (m - t).abs() <= 1e-3 * t,
                "verified amplitude {m} should land on target {t}"
            );
        }
    }

    #[test]
    fn simulate_writes_loadable_consistent_matrices() {
        let mut cfg = small_config();
        cfg.set("frontend.channels", "3").unwrap();
        cfg.set("stimulus.click_duration_s", "0.1").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = run_simulate(&cfg, dir.path()).unwrap();
        assert_eq!(files.len(), 4);

        let (fs_stim, stim): (f64, Vec<f64>) =
            load_waveform_csv(&dir.path().join("stimulus.csv")).unwrap();
        assert_eq!(fs_stim, 100e3);
        assert_eq!(stim.len(), 10_000);

        let an = load_population::<f64>(&dir.path().join("an.vap1"), MatrixFormat::Vap1).unwrap();
        let cn = load_population::<f64>(&dir.path().join("cn.vap1"), MatrixFormat::Vap1).unwrap();
        assert_eq!(an.n_channels(), 3);
        assert_eq!(an.n_samples(), 2000);
        assert_eq!(an.fs(), 20e3);
        // The stored CN rows must be exactly the nucleus response of the
        // stored AN rows.
        let params = cfg.cn_params().unwrap();
        for ch in 1..=3 {
            let expected = nucleus_response(an.channel(ch), &params, 20e3).unwrap();
            assert_eq!(cn.channel(ch), &expected[..], "channel {ch}");
        }
        let meta = std::fs::read_to_string(dir.path().join("an.vap1.meta")).unwrap();
        assert_eq!(meta.trim(), format!("config_hash={}", cfg.config_hash()));
    }

    #[test]
    fn simulate_csv_format_matches_vap1_bitwise() {
        let mut cfg = small_config();
        cfg.set("frontend.channels", "2").unwrap();
        cfg.set("stimulus.click_duration_s", "0.1").unwrap();
        let dir_v = tempfile::tempdir().unwrap();
        let dir_c = tempfile::tempdir().unwrap();
        run_simulate(&cfg, dir_v.path()).unwrap();
        cfg.set("io.format", "csv").unwrap();
        run_simulate(&cfg, dir_c.path()).unwrap();
        let v = load_population::<f64>(&dir_v.path().join("ic.vap1"), MatrixFormat::Vap1).unwrap();
        let c = load_population::<f64>(&dir_c.path().join("ic.csv"), MatrixFormat::Csv).unwrap();
        assert_eq!(v.flat(), c.flat());
    }

    #[test]
    fn calibrating_from_a_stored_an_file_matches_the_surrogate_run() {
        let mut cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        run_simulate(&cfg, dir.path()).unwrap();
        let direct = run_calibration(&cfg).unwrap();

        cfg.set("io.an_path", dir.path().join("an.vap1").to_str().unwrap())
            .unwrap();
        let from_file = run_calibration(&cfg).unwrap();
        assert_eq!(direct.outcome, from_file.outcome);
    }

    #[test]
    fn mtf_run_is_deterministic_and_bug_mode_sensitive() {
        let cfg = small_config();
        let a = run_mtf(&cfg).unwrap();
        let b = run_mtf(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cn.fmod_hz, vec![20.0, 40.0, 60.0]);
        assert_eq!(
            a.ic.magnitude_rel.iter().cloned().fold(f64::MIN, f64::max),
            1.0
        );

        let mut bug_cfg = small_config();
        bug_cfg.set("nuclei.bug_mode", "bug_v11").unwrap();
        let bug = run_mtf(&bug_cfg).unwrap();
        assert_eq!(
            a.cn.fmod_hz, bug.cn.fmod_hz,
            "the parameter column is stimulus-bound"
        );
        assert_ne!(a.ic.magnitude_db, bug.ic.magnitude_db);
    }

    #[test]
    fn clicks_and_efr_csvs_are_byte_identical_across_runs() {
        let cfg = small_config();
        let growth = run_clicks(&cfg).unwrap();
        assert_eq!(growth.levels_db, vec![60.0, 70.0, 80.0]);
        assert_eq!(growth.w1_first.len(), 3);
        assert_eq!(growth.epochs, (1, 4));

        let efr = run_efr(&cfg).unwrap();
        assert_eq!(efr.levels_db, vec![50.0, 60.0, 70.0]);
        assert_eq!(efr.trace_v.len(), 2400);
        assert!(efr.broadband_db.iter().all(|v| v.is_finite()));

        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut paths_a = write_clicks_csv(dir_a.path(), &cfg, &growth).unwrap();
        paths_a.extend(write_efr_csv(dir_a.path(), &cfg, &efr).unwrap());
        let growth2 = run_clicks(&cfg).unwrap();
        let efr2 = run_efr(&cfg).unwrap();
        let mut paths_b = write_clicks_csv(dir_b.path(), &cfg, &growth2).unwrap();
        paths_b.extend(write_efr_csv(dir_b.path(), &cfg, &efr2).unwrap());

        assert_eq!(paths_a.len(), 8);
        for (a, b) in paths_a.iter().zip(&paths_b) {
            let bytes_a = std::fs::read(a).unwrap();
            let bytes_b = std::fs::read(b).unwrap();
            assert_eq!(bytes_a, bytes_b, "{} must be byte-identical", a.display());
            let text = String::from_utf8(bytes_a).unwrap();
            assert!(
                text.starts_with(&format!("# config_hash={}", cfg.config_hash())),
                "{} must embed the config hash",
                a.display()
            );
        }
    }

    #[test]
    fn click_latencies_carry_the_reporting_shift() {
        let cfg = small_config();
        let growth = run_clicks(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_clicks_csv(dir.path(), &cfg, &growth).unwrap();
        let text = std::fs::read_to_string(dir.path().join("clicks_w5_click1.csv")).unwrap();
        let first_row = text.lines().nth(2).unwrap();
        let reported: f64 = first_row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(
            (reported - (growth.w5_first[0].latency_s + 3.5e-3)).abs() < 1e-12,
            "CSV latency {reported} should be the model latency plus 3.5 ms"
        );
    }

    #[test]
    fn sweeps_reject_a_preloaded_an_file() {
        let mut cfg = small_config();
        cfg.set("io.an_path", "somewhere.vap1").unwrap();
        assert!(matches!(run_mtf(&cfg), Err(Error::Config(_))));
        assert!(matches!(run_clicks(&cfg), Err(Error::Config(_))));
        assert!(matches!(run_efr(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn calibration_files_parse_strictly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calibration.txt");
        std::fs::write(
            &path,
            "# config_hash=abc\n# date=2024-01-01\nm1=1e-13\nm3 = 2e-13\nm5=3e-13\n",
        )
        .unwrap();
        let f = parse_calibration_file(&path).unwrap();
        assert_eq!((f.m1, f.m3, f.m5), (1e-13, 2e-13, 3e-13));

        std::fs::write(&path, "m1=1e-13\nm3=2e-13\n").unwrap();
        assert!(matches!(
            parse_calibration_file(&path),
            Err(Error::Config(_))
        ));
        std::fs::write(&path, "m1=1e-13\nm3=2e-13\nm5=3e-13\nm7=1\n").unwrap();
        assert!(matches!(
            parse_calibration_file(&path),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn resolved_scaling_prefers_the_calibration_file() {
        let mut cfg = small_config();
        assert_eq!(
            resolved_scaling(&cfg).unwrap(),
            ScalingFactors::reference_v12()
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calibration.txt");
        std::fs::write(&path, "m1=1e-13\nm3=2e-13\nm5=3e-13\n").unwrap();
        cfg.set("calibration.file", path.to_str().unwrap()).unwrap();
        let f = resolved_scaling(&cfg).unwrap();
        assert_eq!((f.m1, f.m3, f.m5), (1e-13, 2e-13, 3e-13));
    }
}
