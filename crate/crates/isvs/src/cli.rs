//! Command-line front end.
//!
//! Four subcommands cover the pipeline end to end:
//!
//! * `theory`: closed-form contrast and SNR over a parameter grid.
//! * `simulate`: Monte Carlo sweep; adds empirical columns to the same table.
//! * `estimate`: decorrelation time from acquired stack files.
//! * `dcs-fit`: intensity autocorrelation plus exponential fit of a recorded
//!   series.
//!
//! Exit codes: 0 on success with all regime guards satisfied, 2 when outputs
//! were written but a guard warned (warnings also go to stderr), 1 on error.
//! `--strict` turns guard warnings into errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::contrast::{
    calibrate_frames, run_noise_calibration, speckle_contrast, tau_from_contrast_isvs,
    tau_from_contrast_svs, Method, NoiseCalibration, TauEstimate,
};
use crate::error::{Error, Result};
use crate::harness::{self, SnrPoint, SweepTable, MASK_DOMINANCE_FACTOR};
use crate::stack::{FrameStack, StackKind};
use crate::temporal_dcs::{autocorrelate_intensity, fit_exponential};
use crate::MS_PER_US;

#[derive(Debug, Parser)]
#[command(
    name = "isvs",
    version,
    about = "Interferometric speckle visibility simulator and estimator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Table format. Defaults to csv for theory/simulate; estimate and
    /// dcs-fit always emit JSON reports.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,

    /// Master seed override; wins over the config value.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads; defaults to the machine's core count. Results are
    /// byte-identical for any value.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Escalate regime-guard warnings to errors.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form squared contrast and SNR over the configured grid.
    Theory(CommonArgs),
    /// Monte Carlo sweep: theory columns plus empirical spread over trials.
    Simulate(CommonArgs),
    /// Estimate the decorrelation time from acquired stack files.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        /// Measurement stack: raw_interference (interferometric) or
        /// sample_only (direct).
        #[arg(long)]
        raw: PathBuf,
        /// Dark calibration stack (kind dark).
        #[arg(long)]
        dark: PathBuf,
        /// Sample-arm-only calibration stack (kind sample_only).
        #[arg(long = "sample-only")]
        sample_only: PathBuf,
        /// Reference-arm-only calibration stack (kind reference_only);
        /// required for interferometric measurements.
        #[arg(long = "reference-only")]
        reference_only: Option<PathBuf>,
        /// Static-scene stacks for the systematic contrast offset, either
        /// already calibrated or raw_interference (calibrated here). Repeatable.
        #[arg(long = "static")]
        statics: Vec<PathBuf>,
    },
    /// Autocorrelate a recorded intensity series and fit an exponential.
    DcsFit {
        #[command(flatten)]
        common: CommonArgs,
        /// Series file: one intensity per row, or two columns (time_us,
        /// intensity). Comma or whitespace separated; '#' starts a comment.
        series: PathBuf,
    },
}

/// Entry point used by the binary.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Theory(common) => {
            init_threads(common.threads.or(Some(1)))?;
            cmd_sweep(&common, false)
        }
        Command::Simulate(common) => {
            init_threads(common.threads)?;
            cmd_sweep(&common, true)
        }
        Command::Estimate {
            common,
            raw,
            dark,
            sample_only,
            reference_only,
            statics,
        } => cmd_estimate(
            &common,
            &raw,
            &dark,
            &sample_only,
            reference_only.as_deref(),
            &statics,
        ),
        Command::DcsFit { common, series } => cmd_dcs_fit(&common, &series),
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::from_path(path),
        None => Err(Error::Config("--config is required for this command".into())),
    }
}

fn write_output(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

/// 9 significant digits, stable across platforms; non-finite values print as
/// "nan" / "inf" / "-inf".
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.8e}")
    }
}

pub const SWEEP_CSV_HEADER: &str = "method,tau_s_us,tau_field_us,i_s,i_r,T_us,nst,u_i,r,nio,\
                                    n_trials,k2_theory,snr_theory,tau_hat_mean_us,tau_hat_sd_us,\
                                    snr_empirical";

fn sweep_csv_row(p: &SnrPoint) -> String {
    let mut row = String::new();
    let _ = write!(
        row,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        p.method,
        fmt_float(p.tau_s_us),
        fmt_float(p.tau_field_us),
        fmt_float(p.sample_intensity),
        fmt_float(p.reference_intensity),
        fmt_float(p.exposure_us),
        fmt_float(p.nst),
        fmt_float(p.u_i),
        fmt_float(p.uniformity_ratio),
        p.nio,
        p.n_trials,
        fmt_float(p.k2_theory),
        fmt_float(p.snr_theory),
        fmt_float(p.tau_hat_mean_us),
        fmt_float(p.tau_hat_sd_us),
        fmt_float(p.snr_empirical),
    );
    row
}

pub fn sweep_to_csv(table: &SweepTable) -> String {
    let mut text = String::from(SWEEP_CSV_HEADER);
    text.push('\n');
    for p in &table.points {
        text.push_str(&sweep_csv_row(p));
        text.push('\n');
    }
    text
}

fn cmd_sweep(common: &CommonArgs, with_trials: bool) -> Result<u8> {
    let cfg = load_config(common)?;
    let format = common.format.unwrap_or(OutputFormat::Csv);
    let grid = cfg.sweep_grid()?;

    if grid.tau_s_us.is_empty() || grid.sample_intensity.is_empty() || grid.methods.is_empty() {
        let content = match format {
            OutputFormat::Csv => format!("{SWEEP_CSV_HEADER}\n"),
            OutputFormat::Json => {
                let empty = SweepTable {
                    points: vec![],
                    truncated: false,
                    warnings: vec![],
                };
                serde_json::to_string_pretty(&empty).expect("serializable") + "\n"
            }
        };
        write_output(common.out.as_deref(), &content)?;
        return Ok(0);
    }

    let mut base = cfg.base_trial_config(common.seed)?;
    if !with_trials {
        base.n_trials = 0;
    }

    if common.strict {
        // Collect guard warnings without burning trial compute.
        let mut preview = base.clone();
        preview.n_trials = 0;
        let table = harness::sweep(&grid, &preview)?;
        if let Some(w) = table.warnings.first() {
            return Err(Error::Config(format!("strict mode: {w}")));
        }
    }

    let table = harness::sweep(&grid, &base)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }

    let content = match format {
        OutputFormat::Csv => sweep_to_csv(&table),
        OutputFormat::Json => serde_json::to_string_pretty(&table).expect("serializable") + "\n",
    };
    write_output(common.out.as_deref(), &content)?;
    Ok(if table.warnings.is_empty() { 0 } else { 2 })
}

/// JSON report emitted by the estimate command.
#[derive(Debug, serde::Serialize)]
pub struct EstimateReport {
    pub method: Method,
    pub exposure_us: f64,
    pub n_frames: usize,
    pub n_pixels: usize,
    pub n_pixels_used: usize,
    pub k2_per_frame: Vec<f64>,
    pub k2_mean: f64,
    pub calibration: NoiseCalibration,
    /// Reference-to-sample intensity ratio measured from the calibration
    /// stacks; absent for the direct method.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_i_hat: Option<f64>,
    pub estimate: TauEstimate,
}

fn cmd_estimate(
    common: &CommonArgs,
    raw_path: &Path,
    dark_path: &Path,
    sample_only_path: &Path,
    reference_only_path: Option<&Path>,
    static_paths: &[PathBuf],
) -> Result<u8> {
    if common.format == Some(OutputFormat::Csv) {
        return Err(Error::Config(
            "estimate writes a JSON report; drop --format or pass json".into(),
        ));
    }
    // Optional config; only the sensor gain is consulted (pixel-mask units).
    let alpha = match &common.config {
        Some(path) => RunConfig::from_path(path)?
            .sensor
            .as_ref()
            .and_then(|s| s.alpha)
            .unwrap_or(1.0),
        None => 1.0,
    };

    let raw = FrameStack::read_from(raw_path)?;
    let dark = FrameStack::read_from(dark_path)?;
    dark.expect_kind(StackKind::Dark, "estimate --dark")?;
    let sample_only = FrameStack::read_from(sample_only_path)?;
    sample_only.expect_kind(StackKind::SampleOnly, "estimate --sample-only")?;
    let reference_only = match reference_only_path {
        Some(p) => {
            let stack = FrameStack::read_from(p)?;
            stack.expect_kind(StackKind::ReferenceOnly, "estimate --reference-only")?;
            Some(stack)
        }
        None => None,
    };

    let method = match raw.kind() {
        StackKind::RawInterference => Method::Isvs,
        StackKind::SampleOnly => Method::Svs,
        other => {
            return Err(Error::StackKind {
                expected: "raw_interference or sample_only",
                got: other.to_string(),
            });
        }
    };

    let ref_mean = match (&method, &reference_only) {
        (Method::Isvs, Some(stack)) => Some(stack.mean_frame()?),
        (Method::Isvs, None) => {
            return Err(Error::Config(
                "interferometric estimation needs --reference-only".into(),
            ));
        }
        (Method::Svs, _) => None,
    };

    let mut statics = Vec::new();
    for path in static_paths {
        let stack = FrameStack::read_from(path)?;
        match stack.kind() {
            StackKind::Calibrated => statics.push(stack),
            StackKind::RawInterference => {
                let mean = ref_mean.as_ref().ok_or_else(|| {
                    Error::Config(format!(
                        "static stack {} is raw_interference and needs --reference-only \
                         for calibration",
                        path.display()
                    ))
                })?;
                statics.push(calibrate_frames(&stack, mean)?);
            }
            other => {
                return Err(Error::StackKind {
                    expected: "calibrated or raw_interference",
                    got: other.to_string(),
                });
            }
        }
    }

    let cal = run_noise_calibration(&dark, &sample_only, &statics)?;
    let exposure_us = raw.exposure_us();
    let t_ms = exposure_us * MS_PER_US;

    let (k2_per_frame, n_pixels_used, u_i_hat, estimate) = match (&method, &ref_mean) {
        (Method::Isvs, Some(mean)) => {
            let ref_counts: Vec<f64> = mean.values.iter().map(|v| v - cal.offset_hat).collect();
            let ref_counts_mean = ref_counts.iter().sum::<f64>() / ref_counts.len() as f64;
            let u_i_hat = ref_counts_mean / cal.nst_hat;

            // Pixel mask in intensity units: reference-dominated and above the
            // read-noise floor.
            let i_s_hat = cal.nst_hat / (alpha * t_ms);
            let noise_sd = cal.read_var_hat.max(0.0).sqrt();
            let threshold = (MASK_DOMINANCE_FACTOR * i_s_hat).max(noise_sd);
            let mask: Vec<bool> = ref_counts
                .iter()
                .map(|&c| c / (alpha * t_ms) >= threshold)
                .collect();

            let calibrated = calibrate_frames(&raw, mean)?;
            let mut k2s = Vec::with_capacity(calibrated.n_frames());
            let mut used = 0;
            for frame in calibrated.frames() {
                let r = speckle_contrast(frame, Some(&mask), Some(cal.nst_hat))?;
                used = r.n_pixels_used;
                k2s.push(r.k2);
            }
            let k2_mean = k2s.iter().sum::<f64>() / k2s.len() as f64;
            let est = tau_from_contrast_isvs(
                k2_mean,
                exposure_us,
                u_i_hat,
                cal.nst_hat,
                cal.read_var_hat,
                Some(&cal),
            )?;
            (k2s, used, Some(u_i_hat), est)
        }
        _ => {
            // Direct method: the constant offset drops out of the spatial
            // variance, and the measured per-exposure count fixes the denominator.
            let mut k2s = Vec::with_capacity(raw.n_frames());
            let mut used = 0;
            for frame in raw.frames() {
                let r = speckle_contrast(frame, None, Some(cal.nst_hat))?;
                used = r.n_pixels_used;
                k2s.push(r.k2);
            }
            let k2_mean = k2s.iter().sum::<f64>() / k2s.len() as f64;
            let est = tau_from_contrast_svs(k2_mean, exposure_us, cal.nst_hat, cal.read_var_hat)?;
            (k2s, used, None, est)
        }
    };

    if common.strict && !estimate.warnings.is_empty() {
        return Err(Error::Config(format!(
            "strict mode: {}",
            estimate.warnings.join("; ")
        )));
    }
    for w in &estimate.warnings {
        eprintln!("warning: {w}");
    }
    let warned = !estimate.warnings.is_empty();

    let k2_mean = k2_per_frame.iter().sum::<f64>() / k2_per_frame.len() as f64;
    let report = EstimateReport {
        method,
        exposure_us,
        n_frames: raw.n_frames(),
        n_pixels: raw.n_pixels(),
        n_pixels_used,
        k2_per_frame,
        k2_mean,
        calibration: cal,
        u_i_hat,
        estimate,
    };
    let content = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    write_output(common.out.as_deref(), &content)?;
    Ok(if warned { 2 } else { 0 })
}

/// Parsed series: intensities plus optional time column.
fn parse_series(text: &str) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let mut values = Vec::new();
    let mut times = Vec::new();
    let mut n_cols: Option<usize> = None;
    let mut first_data_row = true;
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: Vec<std::result::Result<f64, _>> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        if first_data_row && parsed.iter().all(|p| p.is_err()) {
            // Header row of column labels.
            first_data_row = false;
            continue;
        }
        first_data_row = false;
        match n_cols {
            None => {
                if fields.len() != 1 && fields.len() != 2 {
                    return Err(Error::Parse(format!(
                        "row {row}: expected 1 or 2 columns, found {}",
                        fields.len()
                    )));
                }
                n_cols = Some(fields.len());
            }
            Some(n) if n != fields.len() => {
                return Err(Error::Parse(format!(
                    "row {row}: expected {n} columns, found {}",
                    fields.len()
                )));
            }
            _ => {}
        }
        let mut nums = Vec::with_capacity(parsed.len());
        for (f, p) in fields.iter().zip(parsed) {
            nums.push(p.map_err(|_| Error::Parse(format!("row {row}: cannot parse {f:?}")))?);
        }
        if nums.len() == 2 {
            times.push(nums[0]);
            values.push(nums[1]);
        } else {
            values.push(nums[0]);
        }
    }
    if values.is_empty() {
        return Err(Error::Parse("series file holds no data rows".into()));
    }
    Ok((values, if times.is_empty() { None } else { Some(times) }))
}

fn series_dt(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Parse(
            "a timed series needs at least 2 rows to fix the step".into(),
        ));
    }
    let dt = times[1] - times[0];
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parse(format!("row 2: non-increasing time step {dt}")));
    }
    for k in 2..times.len() {
        let step = times[k] - times[k - 1];
        if (step - dt).abs() > 1e-6 * dt.max(1.0) {
            return Err(Error::Parse(format!(
                "row {}: non-uniform time step {step} (expected {dt})",
                k + 1
            )));
        }
    }
    Ok(dt)
}

/// JSON report emitted by the dcs-fit command.
#[derive(Debug, serde::Serialize)]
pub struct DcsFitReport {
    pub n_samples: usize,
    pub dt_us: f64,
    pub max_lag_us: f64,
    pub fit: crate::temporal_dcs::ExpFit,
}

fn cmd_dcs_fit(common: &CommonArgs, series_path: &Path) -> Result<u8> {
    if common.format == Some(OutputFormat::Csv) {
        return Err(Error::Config(
            "dcs-fit writes a JSON report (plus a curve CSV next to --out); \
             drop --format or pass json"
                .into(),
        ));
    }
    let text = std::fs::read_to_string(series_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", series_path.display())))?;
    let (values, times) = parse_series(&text)?;

    let cfg = match &common.config {
        Some(path) => Some(RunConfig::from_path(path)?),
        None => None,
    };
    let dcs = cfg.as_ref().and_then(|c| c.dcs.as_ref());

    let dt_us = match &times {
        Some(t) => series_dt(t)?,
        None => dcs.and_then(|d| d.dt_us).ok_or_else(|| {
            Error::Config(
                "single-column series needs [dcs] dt_us in the config (or a time column)".into(),
            )
        })?,
    };
    let max_lag_us = match dcs {
        Some(d) => d.max_lag_us,
        None => 0.1 * dt_us * values.len() as f64,
    };

    let curve = autocorrelate_intensity(&values, dt_us, max_lag_us)?;
    let fit = fit_exponential(&curve)?;

    if let Some(out) = &common.out {
        let mut csv = String::from("lag_us,g2,n_samples\n");
        for ((lag, g2), n) in curve
            .lags_us
            .iter()
            .zip(&curve.g2_values)
            .zip(&curve.n_samples)
        {
            let _ = writeln!(csv, "{},{},{}", fmt_float(*lag), fmt_float(*g2), n);
        }
        std::fs::write(out.with_extension("curve.csv"), csv)?;
    }

    let report = DcsFitReport {
        n_samples: values.len(),
        dt_us,
        max_lag_us,
        fit,
    };
    let content = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    write_output(common.out.as_deref(), &content)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_print_nine_significant_digits() {
        assert_eq!(fmt_float(300.0), "3.00000000e2");
        assert_eq!(fmt_float(0.17555555555555555), "1.75555556e-1");
        assert_eq!(fmt_float(f64::NAN), "nan");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(f64::NEG_INFINITY), "-inf");
        let back: f64 = fmt_float(1024888.8888888889).parse().unwrap();
        assert!((back - 1024888.8888888889).abs() < 1e-2);
    }

    #[test]
    fn csv_header_matches_row_arity() {
        let p = SnrPoint {
            method: Method::Isvs,
            tau_s_us: 20.0,
            tau_field_us: 40.0,
            sample_intensity: 1.0,
            reference_intensity: 3000.0,
            exposure_us: 300.0,
            nst: 0.3,
            u_i: 3000.0,
            uniformity_ratio: 1.0,
            nio: 2000,
            n_trials: 0,
            k2_theory: 0.5,
            snr_theory: 10.0,
            tau_hat_mean_us: f64::NAN,
            tau_hat_sd_us: f64::NAN,
            snr_empirical: f64::NAN,
            k2_empirical: f64::NAN,
            k2_sd: f64::NAN,
            n_below_floor: 0,
            reference_kind: None,
        };
        let header_cols = SWEEP_CSV_HEADER.split(',').count();
        let row = sweep_csv_row(&p);
        assert_eq!(row.split(',').count(), header_cols);
        assert_eq!(header_cols, 16);
        assert!(row.starts_with("isvs,2.00000000e1,4.00000000e1,"));
        assert!(row.ends_with("nan,nan,nan"));
    }

    #[test]
    fn series_parser_handles_both_shapes() {
        let (v, t) = parse_series("1.0\n2.0\n3.0\n").unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
        assert!(t.is_none());

        let (v, t) = parse_series("# comment\nt_us,intensity\n0.0,5.0\n2.0,6.0\n4.0,7.0\n").unwrap();
        assert_eq!(v, vec![5.0, 6.0, 7.0]);
        let t = t.unwrap();
        assert_eq!(t, vec![0.0, 2.0, 4.0]);
        assert_eq!(series_dt(&t).unwrap(), 2.0);
    }

    #[test]
    fn series_parser_names_the_offending_row() {
        let err = parse_series("1.0\nx\n").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");

        let err = parse_series("0.0,1.0\n2.0\n").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");

        let err = series_dt(&[0.0, 2.0, 5.0]).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");

        assert!(parse_series("# only comments\n").is_err());
    }

    #[test]
    fn cli_parses_every_subcommand() {
        use clap::CommandFactory;
        Cli::command().debug_assert();

        let cli = Cli::try_parse_from([
            "isvs", "simulate", "--config", "run.toml", "--out", "table.csv", "--seed", "9",
            "--threads", "4", "--strict", "--format", "json",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate(c) => {
                assert_eq!(c.seed, Some(9));
                assert_eq!(c.threads, Some(4));
                assert!(c.strict);
                assert_eq!(c.format, Some(OutputFormat::Json));
            }
            _ => panic!("wrong subcommand"),
        }

        let cli = Cli::try_parse_from([
            "isvs",
            "estimate",
            "--raw",
            "raw.stack",
            "--dark",
            "dark.stack",
            "--sample-only",
            "s.stack",
            "--reference-only",
            "r.stack",
            "--static",
            "a.stack",
            "--static",
            "b.stack",
        ])
        .unwrap();
        match cli.command {
            Command::Estimate { statics, .. } => assert_eq!(statics.len(), 2),
            _ => panic!("wrong subcommand"),
        }

        assert!(Cli::try_parse_from(["isvs", "dcs-fit"]).is_err());
    }
}
