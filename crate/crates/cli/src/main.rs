// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! `qubitcorr`: simulate trace ensembles, estimate and predict output
//! correlators, fit the residual Rabi frequency and check resonator noise.
//!
//! Exit codes: 0 on success, 1 on invalid input or usage, 2 on I/O failure.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use qubitcorr::cavity::{
    analytic_noise_terms, lagged_correlator, simulate_output_noise, ResonatorParams,
};
use qubitcorr::curve::{read_curves_csv_path, write_curves_csv_path};
use qubitcorr::estimator::{calibrate_response, estimate_correlators, estimate_offsets};
use qubitcorr::fit::{fit_decay_rate, fit_rabi_mismatch, fit_rabi_mismatch_self_consistent};
use qubitcorr::io::{read_qtrc, read_traces_csv, write_traces_csv, QtrcHeader, QtrcWriter};
use qubitcorr::model::advisories;
use qubitcorr::trajectory::{for_each_trace, NoProgress};
use qubitcorr::{
    analytic::analytic_curve, Calibration, Channel, CorrelatorCurve, CurveKind, Error,
    EstimatorOptions, EstimatorWindow, LagRange, SetupDocument, TraceRecord,
};
use serde::Serialize;

const THREADS_ENV: &str = "QUBITCORR_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "qubitcorr",
    version,
    about = "Correlators of a continuously measured qubit"
)]
struct Cli {
    /// Worker threads (default: $QUBITCORR_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a trace ensemble from a setup document.
    Simulate(SimulateArgs),
    /// Estimate output correlators from recorded traces.
    Correlate(CorrelateArgs),
    /// Closed-form correlators for a setup document.
    Analytic(AnalyticArgs),
    /// Fit parameters to a correlator curve.
    #[command(subcommand)]
    Fit(FitCommand),
    /// Compare simulated resonator output noise with its analytic terms.
    CavityCheck(CavityArgs),
    /// Responses and offsets from two ensembles started in opposite states.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output file; `.csv` writes plain text, anything else QTRC.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    /// QTRC file, or trace CSV when the name ends in `.csv`.
    #[arg(long)]
    traces: PathBuf,
    /// Averaging window t_a,t_b (µs).
    #[arg(long, value_parser = parse_pair)]
    window: (f64, f64),
    #[arg(long)]
    max_lag: f64,
    /// Calibration JSON, or `identity`.
    #[arg(long, default_value = "identity")]
    calibration: String,
    #[arg(long, value_delimiter = ',', default_value = "zz,zphi,phiz,phiphi")]
    pairs: Vec<String>,
    /// Bootstrap resamples for the error bars (0 disables them).
    #[arg(long, default_value_t = 200)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Analytic curve CSV to compare against.
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Where to write the per-lag z-scores of `--compare`.
    #[arg(long, requires = "compare")]
    zscores: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyticArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "zz,zphi,phiz,phiphi")]
    pairs: Vec<String>,
    #[arg(long)]
    max_lag: f64,
    /// Lag step (default: the document's dt).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum FitCommand {
    /// Residual Rabi frequency from the antisymmetric cross-correlator.
    Rabi(FitRabiArgs),
    /// Exponential decay rate of one correlator.
    Decay(FitDecayArgs),
}

#[derive(Debug, Args)]
struct FitRabiArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Lag range a,b (default: one step to 2.5 µs).
    #[arg(long, value_parser = parse_pair)]
    range: Option<(f64, f64)>,
    /// Re-evaluate the decay rates at the fitted value until stable.
    #[arg(long)]
    self_consistent: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitDecayArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long, default_value = "zz")]
    pair: String,
    #[arg(long, value_parser = parse_pair)]
    range: (f64, f64),
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CavityArgs {
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    kappa_out: f64,
    #[arg(long)]
    detuning: f64,
    /// Sampling step (default 0.02/κ).
    #[arg(long)]
    dt: Option<f64>,
    /// Largest lag (default 10/κ).
    #[arg(long)]
    max_lag: Option<f64>,
    /// Simulated record length; omit to write the analytic terms only.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    batches: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    plus: PathBuf,
    #[arg(long)]
    minus: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated numbers, got '{s}'"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("not a number: '{v}'"))
    };
    Ok((parse(a)?, parse(b)?))
}

type CliResult<T> = std::result::Result<T, Error>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("{THREADS_ENV} must be a count, got '{v}'"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "thread count must be positive".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Correlate(a) => correlate(a),
        Command::Analytic(a) => analytic(a),
        Command::Fit(FitCommand::Rabi(a)) => fit_rabi(a),
        Command::Fit(FitCommand::Decay(a)) => fit_decay(a),
        Command::CavityCheck(a) => cavity_check(a),
        Command::Calibrate(a) => calibrate(a),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let doc = SetupDocument::read(&args.config)?;
    let (setup, config) = (doc.setup(), doc.config());
    for note in advisories(&setup, &config) {
        warn!("{note}");
    }
    if is_csv(&args.out) {
        let mut traces = Vec::with_capacity(config.n_traces);
        for_each_trace(&setup, &config, &NoProgress, |t| {
            traces.push(t);
            Ok(())
        })?;
        write_traces_csv(BufWriter::new(File::create(&args.out)?), &traces)?;
    } else {
        let header = QtrcHeader {
            n_traces: config.n_traces as u64,
            n_samples: config.n_samples() as u64,
            dt: config.dt,
            setup_json: doc.to_json(),
        };
        let mut writer = QtrcWriter::create(&args.out, header)?;
        for_each_trace(&setup, &config, &NoProgress, |t| writer.write_trace(&t))?;
        writer.finish()?.sync_all()?;
    }
    info!("wrote {} traces to {}", config.n_traces, args.out.display());
    Ok(())
}

fn load_traces(path: &Path) -> CliResult<Vec<TraceRecord>> {
    if is_csv(path) {
        read_traces_csv(BufReader::new(File::open(path)?))
    } else {
        Ok(read_qtrc(path)?.1)
    }
}

fn load_calibration(spec: &str) -> CliResult<Calibration> {
    if spec == "identity" {
        Ok(Calibration::IDENTITY)
    } else {
        Calibration::read(spec)
    }
}

fn parse_kinds(labels: &[String]) -> CliResult<Vec<CurveKind>> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no correlators requested".into()));
    }
    labels.iter().map(|l| CurveKind::parse(l.trim())).collect()
}

fn correlate(args: CorrelateArgs) -> CliResult<()> {
    let kinds = parse_kinds(&args.pairs)?;
    let calibration = load_calibration(&args.calibration)?;
    let window = EstimatorWindow::new(args.window.0, args.window.1, args.max_lag)?;
    let mut pairs: Vec<(Channel, Channel)> = Vec::new();
    for kind in &kinds {
        let needed: &[(Channel, Channel)] = match kind {
            CurveKind::Pair(i, j) => &[(*i, *j)],
            CurveKind::Antisymmetric => &[(Channel::Z, Channel::Phi), (Channel::Phi, Channel::Z)],
        };
        for p in needed {
            if !pairs.contains(p) {
                pairs.push(*p);
            }
        }
    }
    let traces = load_traces(&args.traces)?;
    info!("loaded {} traces", traces.len());
    let options = EstimatorOptions {
        n_resamples: args.resamples,
        seed: args.seed,
    };
    let estimate = estimate_correlators(&traces, &pairs, &window, &calibration, options)?;
    drop(traces);
    let curves = kinds
        .iter()
        .map(|kind| match kind {
            CurveKind::Pair(i, j) => estimate.curve(*i, *j),
            CurveKind::Antisymmetric => estimate.antisymmetric(),
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_curves_csv_path(&args.out, &curves)?;
    if let Some(reference) = &args.compare {
        let reference = read_curves_csv_path(reference)?;
        let summary = compare_curves(&curves, &reference, args.zscores.as_deref())?;
        println!("{}", serde_json::to_string_pretty(&summary)?);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ZSummary {
    curve: String,
    n_lags: usize,
    max_abs_z: f64,
    above_3: usize,
    /// Count expected above 3σ for independent Gaussian errors.
    expected_above_3: f64,
}

fn compare_curves(
    estimated: &[CorrelatorCurve],
    reference: &[CorrelatorCurve],
    zscore_path: Option<&Path>,
) -> CliResult<Vec<ZSummary>> {
    const TAIL_3SIGMA: f64 = 0.002_699_796_063_260_2;
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let mut summary = Vec::new();
    for est in estimated {
        let Some(r) = reference.iter().find(|r| r.kind == est.kind) else {
            continue;
        };
        let stderr = est.stderr.as_ref().ok_or_else(|| {
            Error::InvalidArgument("comparison needs error bars; use --resamples >= 2".into())
        })?;
        if r.len() != est.len()
            || r.lags
                .iter()
                .zip(&est.lags)
                .any(|(a, b)| (a - b).abs() > 1e-9 * b.abs().max(1.0))
        {
            return Err(Error::InvalidData(format!(
                "lag grids of K_{} differ",
                est.kind.label()
            )));
        }
        // lag 0 holds the white-noise spike of the detectors and is not tested;
        // neither are zero-variance lags
        let tested: Vec<bool> = est
            .lags
            .iter()
            .zip(stderr)
            .map(|(t, s)| *t > 0.0 && *s > 0.0)
            .collect();
        let z: Vec<f64> = est
            .values
            .iter()
            .zip(&r.values)
            .zip(stderr)
            .zip(&tested)
            .map(|(((e, a), s), &t)| if t { (e - a) / s } else { 0.0 })
            .collect();
        let n = tested.iter().filter(|&&t| t).count();
        summary.push(ZSummary {
            curve: est.kind.label().to_string(),
            n_lags: n,
            max_abs_z: z.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            above_3: z.iter().filter(|v| v.abs() > 3.0).count(),
            expected_above_3: TAIL_3SIGMA * n as f64,
        });
        columns.push((format!("z_{}", est.kind.label()), z));
    }
    if summary.is_empty() {
        return Err(Error::InvalidData(
            "reference shares no correlator with the estimate".into(),
        ));
    }
    if let Some(path) = zscore_path {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let mut header = vec!["tau".to_string()];
        header.extend(columns.iter().map(|(name, _)| name.clone()));
        w.write_record(&header).map_err(Error::from)?;
        for (k, tau) in estimated[0].lags.iter().enumerate() {
            let mut row = vec![tau.to_string()];
            row.extend(columns.iter().map(|(_, z)| z[k].to_string()));
            w.write_record(&row).map_err(Error::from)?;
        }
        w.flush()?;
    }
    Ok(summary)
}

fn analytic(args: AnalyticArgs) -> CliResult<()> {
    let kinds = parse_kinds(&args.pairs)?;
    let doc = SetupDocument::read(&args.config)?;
    let setup = doc.setup();
    let dt = args.dt.unwrap_or(doc.dt);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lag step must be positive, got {dt}"
        )));
    }
    if !(args.max_lag >= 0.0 && args.max_lag.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "max lag must be non-negative, got {}",
            args.max_lag
        )));
    }
    let lags = qubitcorr::curve::lag_grid(dt, args.max_lag);
    let curves = kinds
        .iter()
        .map(|&kind| analytic_curve(&setup, kind, &lags))
        .collect::<CliResult<Vec<_>>>()?;
    write_curves_csv_path(&args.out, &curves)
}

fn find_curve(curves: &[CorrelatorCurve], kind: CurveKind) -> Option<&CorrelatorCurve> {
    curves.iter().find(|c| c.kind == kind)
}

fn lag_step(curve: &CorrelatorCurve) -> CliResult<f64> {
    match curve.lags.as_slice() {
        [a, b, ..] => Ok(b - a),
        _ => Err(Error::InvalidData("curve needs at least two lags".into())),
    }
}

fn fit_rabi(args: FitRabiArgs) -> CliResult<()> {
    let curves = read_curves_csv_path(&args.curve)?;
    let setup = SetupDocument::read(&args.config)?.setup();
    let antisym = match find_curve(&curves, CurveKind::Antisymmetric) {
        Some(c) => c.clone(),
        None => {
            let zphi = find_curve(&curves, CurveKind::Pair(Channel::Z, Channel::Phi));
            let phiz = find_curve(&curves, CurveKind::Pair(Channel::Phi, Channel::Z));
            match (zphi, phiz) {
                (Some(a), Some(b)) => CorrelatorCurve::antisymmetric(a, b)?,
                _ => {
                    return Err(Error::InvalidData(
                        "curve file needs K_antisym or both K_zphi and K_phiz".into(),
                    ))
                }
            }
        }
    };
    let range = match args.range {
        Some((a, b)) => LagRange::new(a, b),
        None => LagRange::default_for(lag_step(&antisym)?),
    };
    let fit = if args.self_consistent {
        fit_rabi_mismatch_self_consistent(&antisym, &setup, range)?
    } else {
        fit_rabi_mismatch(&antisym, &setup, range)?
    };
    write_text(&args.out, &fit.to_json())
}

fn fit_decay(args: FitDecayArgs) -> CliResult<()> {
    let curves = read_curves_csv_path(&args.curve)?;
    let kind = CurveKind::parse(&args.pair)?;
    let curve = find_curve(&curves, kind)
        .ok_or_else(|| Error::InvalidData(format!("curve file has no K_{}", kind.label())))?;
    let fit = fit_decay_rate(curve, LagRange::new(args.range.0, args.range.1))?;
    write_text(&args.out, &fit.to_json())
}

fn cavity_check(args: CavityArgs) -> CliResult<()> {
    let params = ResonatorParams::new(args.kappa, args.kappa_out, args.detuning)?;
    let dt = args.dt.unwrap_or(0.02 / params.kappa);
    let max_lag = args.max_lag.unwrap_or(10.0 / params.kappa);
    if !(dt > 0.0 && max_lag >= dt) {
        return Err(Error::InvalidArgument("need 0 < dt <= max lag".into()));
    }
    let n_lags = (max_lag / dt).round() as usize;
    let simulated = match args.duration {
        Some(duration) => {
            let samples = simulate_output_noise(&params, dt, duration, args.seed)?;
            Some(lagged_correlator(&samples, n_lags, args.batches)?)
        }
        None => None,
    };
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&args.out)?));
    let mut header = vec!["tau", "K2", "K3", "K2+K3"];
    if simulated.is_some() {
        header.extend(["K_sim", "err_sim"]);
    }
    w.write_record(&header)?;
    let mut worst = 0.0f64;
    for k in 1..=n_lags {
        let tau = k as f64 * dt;
        let (k2, k3) = analytic_noise_terms(&params, tau)?;
        let mut row = vec![
            tau.to_string(),
            k2.to_string(),
            k3.to_string(),
            (k2 + k3).to_string(),
        ];
        if let Some(s) = &simulated {
            let (v, e) = (s.values[k], s.stderr[k]);
            if e > 0.0 {
                worst = worst.max((v - (k2 + k3)).abs() / e);
            }
            row.extend([v.to_string(), e.to_string()]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    if simulated.is_some() {
        println!(
            "{}",
            serde_json::json!({ "n_lags": n_lags, "max_abs_z": worst })
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CalibrationReport {
    response: [f64; 2],
    response_stderr: [f64; 2],
    offset: [f64; 2],
    offset_stderr: [f64; 2],
    offset_time_variation: [f64; 2],
}

fn calibrate(args: CalibrateArgs) -> CliResult<()> {
    let setup = SetupDocument::read(&args.config)?.setup();
    let plus = load_traces(&args.plus)?;
    let minus = load_traces(&args.minus)?;
    let response = calibrate_response(&plus, &minus, &setup)?;
    let offsets = estimate_offsets(&plus, &minus)?;
    let calibration = Calibration::new(response.response, offsets.offset)?;
    write_text(&args.out, &calibration.to_json())?;
    let report = CalibrationReport {
        response: response.response,
        response_stderr: response.stderr,
        offset: offsets.offset,
        offset_stderr: offsets.stderr,
        offset_time_variation: offsets.time_variation,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}
