//! `abrkit` — batch driver for the auditory brainstem pipeline.
//!
//! Subcommands cover filter inspection (`design-filter`), stimulus rendering
//! (`stim`), the full three-stage simulation (`simulate`), scaling-factor
//! calibration (`calibrate`) and the three sweep experiments (`mtf`,
//! `clicks`, `efr`). All behavior is driven by a flat `section.key = value`
//! config file; every parameter has a default, so `--config` is optional.
//!
//! Exit codes: 0 success; 2 invalid parameters or configuration (including
//! unstable filter design points); 3 data or file-format errors; 4 numerical
//! degeneracies (zero calibration amplitude, undefined spectral magnitude,
//! delay spanning the whole signal).

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abrkit::alpha::{AlphaVariant, Biquad};
use abrkit::config::ExperimentConfig;
use abrkit::error::Result;
use abrkit::experiments::{
    run_calibration, run_clicks, run_efr, run_mtf, run_simulate, write_clicks_csv, write_efr_csv,
    write_mtf_csv, write_stimulus_csv,
};

#[derive(Parser)]
#[command(name = "abrkit", version, about = "Auditory brainstem pipeline driver")]
struct Cli {
    /// Configuration file (flat `section.key = value`); defaults apply when
    /// omitted, and any key present overrides its default.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory receiving generated files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Not supported: the pipeline is fully deterministic, so a seed is
    /// rejected rather than silently ignored.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print alpha-filter coefficients for one design point.
    DesignFilter {
        /// Sampling rate in Hz.
        #[arg(long)]
        fs: f64,
        /// Time constant in seconds.
        #[arg(long)]
        tau: f64,
        /// Kernel convention: v12, v11 or urear.
        #[arg(long)]
        variant: String,
    },
    /// Render the configured stimulus to `stimulus.csv`.
    Stim,
    /// Run the pipeline and store the stimulus plus AN/CN/IC matrices.
    Simulate,
    /// Derive the scaling factors M1/M3/M5 and write `calibration.txt`.
    Calibrate,
    /// Sweep the AM probe tone and write the CN/IC modulation transfer
    /// function curves.
    Mtf,
    /// Sweep click levels and write the wave growth tables.
    Clicks,
    /// Sweep stimulus levels and write the EFR band series plus the
    /// time-domain trace.
    Efr,
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => ExperimentConfig::from_file(p),
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::DesignFilter { fs, tau, variant } => {
            let variant = AlphaVariant::parse(variant)?;
            let q = Biquad::<f64>::design(*fs, *tau, variant)?;
            // Fixed order, 17 significant digits each.
            for (key, value) in [
                ("b0", q.b[0]),
                ("b1", q.b[1]),
                ("b2", q.b[2]),
                ("a0", q.a[0]),
                ("a1", q.a[1]),
                ("a2", q.a[2]),
                ("c", q.scale),
                ("passband_gain_db", q.passband_gain_db()),
            ] {
                println!("{key}={value:.16e}");
            }
            Ok(())
        }
        Command::Stim => {
            let cfg = load_config(&cli.config)?;
            let path = write_stimulus_csv(&cfg, &cli.out)?;
            print_written(&[path]);
            Ok(())
        }
        Command::Simulate => {
            let cfg = load_config(&cli.config)?;
            let paths = run_simulate(&cfg, &cli.out)?;
            print_written(&paths);
            Ok(())
        }
        Command::Calibrate => {
            let cfg = load_config(&cli.config)?;
            let run = run_calibration(&cfg)?;
            let path = write_calibration_file(&cli.out, &cfg, &run)?;
            let f = run.outcome.factors;
            println!("m1={:e}", f.m1);
            println!("m3={:e}", f.m3);
            println!("m5={:e}", f.m5);
            print_written(&[path]);
            Ok(())
        }
        Command::Mtf => {
            let cfg = load_config(&cli.config)?;
            let outputs = run_mtf(&cfg)?;
            print_written(&write_mtf_csv(&cli.out, &cfg, &outputs)?);
            Ok(())
        }
        Command::Clicks => {
            let cfg = load_config(&cli.config)?;
            let growth = run_clicks(&cfg)?;
            print_written(&write_clicks_csv(&cli.out, &cfg, &growth)?);
            Ok(())
        }
        Command::Efr => {
            let cfg = load_config(&cli.config)?;
            let outputs = run_efr(&cfg)?;
            print_written(&write_efr_csv(&cli.out, &cfg, &outputs)?);
            Ok(())
        }
    }
}

/// Write `calibration.txt`: provenance comments plus the `m1`/`m3`/`m5`
/// key=value lines the experiments read back via `calibration.file`.
///
/// The `# date=` line is a provenance stamp; it is the one output line that
/// varies between reruns, which is why byte-identity is promised for the
/// experiment CSVs rather than for this file.
fn write_calibration_file(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    run: &abrkit::experiments::CalibrationRun,
) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("calibration.txt");
    let file = fs::File::create(&path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# config_hash={}", cfg.config_hash())?;
    writeln!(w, "# stimulus_sha256={}", run.stimulus_sha256)?;
    writeln!(
        w,
        "# date={}",
        chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ")
    )?;
    let f = run.outcome.factors;
    writeln!(w, "m1={:e}", f.m1)?;
    writeln!(w, "m3={:e}", f.m3)?;
    writeln!(w, "m5={:e}", f.m5)?;
    w.flush()?;
    Ok(path)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Usage errors exit 2; --help/--version exit 0.
        Err(e) => e.exit(),
    };
    if let Some(seed) = &cli.seed {
        eprintln!(
            "error: --seed {seed} was given, but the pipeline is deterministic and takes no seed"
        );
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
