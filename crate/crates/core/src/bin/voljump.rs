//! Command-line front end: ingest observation series (or simulate them),
//! run the volatility jump test, localize the jump time, calibrate by
//! bootstrap, and run Monte Carlo studies. Every run writes a JSON report
//! echoing the resolved configuration; plot-ready tables go to CSV.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use voljump::bootstrap::{bootstrap_test, BootstrapConfig};
use voljump::changepoint::estimate_changepoint;
use voljump::config::TuningConfig;
use voljump::series::ObservationSeries;
use voljump::sim::{all_rules, monte_carlo_study, simulate_path, SimulationSpec, StudySpec};
use voljump::spectral::estimate_spot_vol;
use voljump::testing::{run_test_on_spot, RuleKind, TestRule};

const SCHEMA_VERSION: u32 = 1;
const OUT_DIR_ENV: &str = "VOLJUMP_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "voljump",
    about = "Volatility jump detection from noisy high-frequency observations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test for a volatility jump.
    Test(TestArgs),
    /// Estimate the spot volatility path and the jump time.
    Estimate(EstimateArgs),
    /// Bootstrap-calibrated test.
    Bootstrap(BootstrapArgs),
    /// Simulate an observation series and write it to a file.
    Simulate(SimulateArgs),
    /// Monte Carlo study over a grid of volatility jump sizes.
    Study(StudyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Input file with one observed value per line (or time,value pairs).
    #[arg(long, conflicts_with = "simulate")]
    input: Option<PathBuf>,

    /// Input format (defaults to csv, or binary for .bin/.f64 extensions).
    #[arg(long, value_enum)]
    format: Option<InputFormat>,

    /// Simulate the input instead of reading a file.
    #[arg(long, value_enum)]
    simulate: Option<Preset>,

    /// Seed for the simulated input.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory for reports and tables
    /// (default: $VOLJUMP_OUT_DIR, else the working directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Also write plot-ready CSV tables next to the JSON report.
    #[arg(long)]
    csv: bool,

    // tuning overrides
    /// Number of estimation bins (must divide the sample count).
    #[arg(long)]
    bins: Option<usize>,
    /// Bins per big block.
    #[arg(long)]
    block_len: Option<usize>,
    /// Truncation exponent in (0, 1).
    #[arg(long)]
    tau: Option<f64>,
    /// Assumed volatility regularity in (0, 1].
    #[arg(long)]
    regularity: Option<f64>,
    /// Frequencies in the pilot estimator.
    #[arg(long)]
    pilot_freqs: Option<usize>,
    /// Spectral frequency cutoff.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Known noise variance (estimated from the data when omitted).
    #[arg(long)]
    noise_variance: Option<f64>,
}

#[derive(Args)]
struct RuleArgs {
    /// Statistic variant.
    #[arg(long, value_enum)]
    rule: Option<RuleOpt>,
    /// Test level.
    #[arg(long)]
    level: Option<f64>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    rule: RuleArgs,
    /// Run all four statistic variants instead of one.
    #[arg(long)]
    all_rules: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Zero out truncated spot estimates before localizing.
    #[arg(long)]
    truncate: bool,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    rule: RuleArgs,
    /// Number of pseudo samples.
    #[arg(long)]
    replications: Option<usize>,
    /// Smoothing filter length in bins (even).
    #[arg(long)]
    filter_len: Option<usize>,
    /// Block shift of the pseudo statistic.
    #[arg(long)]
    pseudo_shift: Option<usize>,
    /// Re-estimate weights and noise level on each pseudo sample.
    #[arg(long)]
    reestimate_weights: bool,
    /// Seed for the pseudo-sample streams.
    #[arg(long)]
    bootstrap_seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Scenario to simulate.
    #[arg(long, value_enum, default_value_t = Preset::H0Default)]
    preset: Preset,
    /// Output file for the observed values, one per line.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Volatility jump size grid `start:end:step` (inclusive ends).
    #[arg(long)]
    grid: Option<String>,
    /// Replications per grid point.
    #[arg(long)]
    reps: Option<usize>,
    /// Test level.
    #[arg(long)]
    level: Option<f64>,
    /// Include a no-jump scenario for empirical size.
    #[arg(long)]
    with_null: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    /// Text, one value per line or `time,value` pairs.
    Csv,
    /// Little-endian 64-bit floats.
    Binary,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Semimartingale volatility, one uniform-time price jump, no
    /// volatility jump.
    H0Default,
    /// As the null preset plus a volatility jump of 0.2 at t = 2/3 with a
    /// common price jump.
    H1Default,
    /// Null with compound-Poisson price jumps.
    H0Compensator,
}

impl Preset {
    fn spec(self, seed: u64) -> SimulationSpec {
        match self {
            Preset::H0Default => SimulationSpec::h0_default(seed),
            Preset::H1Default => SimulationSpec::h1_default(seed),
            Preset::H0Compensator => SimulationSpec::h0_compensator(seed),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Preset::H0Default => "h0-default",
            Preset::H1Default => "h1-default",
            Preset::H0Compensator => "h0-compensator",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleOpt {
    NonOverlap,
    Overlap,
    NonOverlapTrunc,
    OverlapTrunc,
}

impl From<RuleOpt> for RuleKind {
    fn from(r: RuleOpt) -> Self {
        match r {
            RuleOpt::NonOverlap => RuleKind::NonOverlap,
            RuleOpt::Overlap => RuleKind::Overlap,
            RuleOpt::NonOverlapTrunc => RuleKind::NonOverlapTrunc,
            RuleOpt::OverlapTrunc => RuleKind::OverlapTrunc,
        }
    }
}

/// Flat TOML config mirroring the flags; any subset of keys may appear.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    bins: Option<usize>,
    block_len: Option<usize>,
    tau: Option<f64>,
    regularity: Option<f64>,
    pilot_freqs: Option<usize>,
    cutoff: Option<usize>,
    noise_variance: Option<f64>,
    rule: Option<String>,
    level: Option<f64>,
    replications: Option<usize>,
    filter_len: Option<usize>,
    pseudo_shift: Option<usize>,
    reps: Option<usize>,
    out_dir: Option<PathBuf>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading config file {}", p.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config file {}", p.display()))
            }
        }
    }

    fn rule_kind(&self) -> Result<Option<RuleKind>> {
        match self.rule.as_deref() {
            None => Ok(None),
            Some("non-overlap") => Ok(Some(RuleKind::NonOverlap)),
            Some("overlap") => Ok(Some(RuleKind::Overlap)),
            Some("non-overlap-trunc") => Ok(Some(RuleKind::NonOverlapTrunc)),
            Some("overlap-trunc") => Ok(Some(RuleKind::OverlapTrunc)),
            Some(other) => bail!("unknown rule '{other}' in config file"),
        }
    }
}

fn resolve_tuning(common: &CommonArgs, file: &FileConfig) -> TuningConfig {
    let d = TuningConfig::default();
    TuningConfig {
        bins: common.bins.or(file.bins).unwrap_or(d.bins),
        block_len: common.block_len.or(file.block_len).unwrap_or(d.block_len),
        tau: common.tau.or(file.tau).unwrap_or(d.tau),
        regularity: common
            .regularity
            .or(file.regularity)
            .unwrap_or(d.regularity),
        pilot_freqs: common
            .pilot_freqs
            .or(file.pilot_freqs)
            .unwrap_or(d.pilot_freqs),
        cutoff: common.cutoff.or(file.cutoff).unwrap_or(d.cutoff),
        noise_variance: common.noise_variance.or(file.noise_variance),
        use_known_eta_in_stat: false,
    }
}

fn resolve_rule(args: &RuleArgs, file: &FileConfig) -> Result<TestRule> {
    let kind = args
        .rule
        .map(RuleKind::from)
        .or(file.rule_kind()?)
        .unwrap_or(RuleKind::OverlapTrunc);
    let level = args.level.or(file.level).unwrap_or(0.1);
    Ok(TestRule::new(kind, level)?)
}

fn resolve_out_dir(common: &CommonArgs, file: &FileConfig) -> PathBuf {
    common
        .out_dir
        .clone()
        .or_else(|| file.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn detect_format(path: &Path, explicit: Option<InputFormat>) -> InputFormat {
    explicit.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("f64") => InputFormat::Binary,
            _ => InputFormat::Csv,
        }
    })
}

/// Reads a CSV observation file: one value per line, or `time,value` lines
/// whose time column must be the uniform grid i/n within 1e-9.
fn ingest_csv(path: &Path) -> Result<ObservationSeries> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<(usize, Option<f64>, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let (time, value) = match line.split_once(',') {
            Some((t, v)) => (Some(parse_float(t, lineno, "time")?), v),
            None => (None, line),
        };
        let value = parse_float(value, lineno, "value")?;
        rows.push((lineno, time, value));
    }
    if rows.len() < 2 {
        bail!("{}: need at least 2 observations", path.display());
    }
    let n = rows.len() - 1;
    let has_time = rows[0].1.is_some();
    let mut values = Vec::with_capacity(rows.len());
    for (i, (lineno, time, value)) in rows.into_iter().enumerate() {
        match (has_time, time) {
            (true, Some(t)) => {
                let expect = i as f64 / n as f64;
                if (t - expect).abs() > 1e-9 {
                    bail!(
                        "{} line {lineno}: time {t} is off the uniform grid \
                         (expected {expect})",
                        path.display()
                    );
                }
            }
            (false, None) => {}
            _ => bail!(
                "{} line {lineno}: mixed time,value and value-only rows",
                path.display()
            ),
        }
        values.push(value);
    }
    Ok(ObservationSeries::new(values)?)
}

fn parse_float(s: &str, lineno: usize, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .with_context(|| format!("line {lineno}: cannot parse {what} '{s}'"))?;
    if !v.is_finite() {
        bail!("line {lineno}: non-finite {what} '{s}'");
    }
    Ok(v)
}

fn ingest_binary(path: &Path) -> Result<ObservationSeries> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() % 8 != 0 {
        bail!(
            "{}: length {} is not a multiple of 8 bytes",
            path.display(),
            bytes.len()
        );
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ObservationSeries::new(values)?)
}

/// Resolved input: the series plus a JSON description for the config echo.
fn resolve_input(common: &CommonArgs) -> Result<(ObservationSeries, serde_json::Value)> {
    match (&common.input, common.simulate) {
        (Some(path), None) => {
            let series = match detect_format(path, common.format) {
                InputFormat::Csv => ingest_csv(path)?,
                InputFormat::Binary => ingest_binary(path)?,
            };
            Ok((series, json!({ "file": path.display().to_string() })))
        }
        (None, Some(preset)) => {
            let spec = preset.spec(common.seed);
            let path = simulate_path(&spec)?;
            Ok((
                path.observed,
                json!({ "simulate": preset.name(), "seed": common.seed }),
            ))
        }
        (None, None) => bail!("provide either --input or --simulate"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn write_report(out_dir: &Path, name: &str, report: &serde_json::Value) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let path = out_dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(report)?)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("{}", serde_json::to_string_pretty(report)?);
    eprintln!("report written to {}", path.display());
    Ok(path)
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut f = fs::File::create(path)
        .with_context(|| format!("writing {}", path.display()))?;
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{row}")?;
    }
    eprintln!("table written to {}", path.display());
    Ok(())
}

fn cmd_test(args: &TestArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let cfg = resolve_tuning(&args.common, &file);
    let (series, input_echo) = resolve_input(&args.common)?;
    let out_dir = resolve_out_dir(&args.common, &file);
    let spot = estimate_spot_vol(&series, &cfg)?;
    let rules = if args.all_rules {
        all_rules(args.rule.level.or(file.level).unwrap_or(0.1))?
    } else {
        vec![resolve_rule(&args.rule, &file)?]
    };
    let reports = rules
        .iter()
        .map(|rule| run_test_on_spot(&spot, rule, &cfg))
        .collect::<voljump::Result<Vec<_>>>()?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "test",
        "input": input_echo,
        "tuning": cfg,
        "noise_var_hat": spot.noise_var_hat,
        "results": reports,
    });
    write_report(&out_dir, "test-report.json", &report)?;
    if args.common.csv {
        write_spot_tables(&out_dir, &spot, &cfg)?;
    }
    Ok(())
}

fn write_spot_tables(
    out_dir: &Path,
    spot: &voljump::SpotVolSeries,
    cfg: &TuningConfig,
) -> Result<()> {
    let h = cfg.bin_width();
    write_csv(
        &out_dir.join("spot-volatility.csv"),
        "bin,time,spot_vol",
        spot.per_bin
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{},{},{}", i + 1, (i as f64) * h, v)),
    )?;
    write_csv(
        &out_dir.join("blocks.csv"),
        "index,plain,overlap,trunc",
        (0..spot.blocks.overlap.len()).map(|i| {
            let plain = if i % cfg.block_len == 0 && i / cfg.block_len < spot.blocks.plain.len()
            {
                spot.blocks.plain[i / cfg.block_len].to_string()
            } else {
                String::new()
            };
            format!(
                "{},{plain},{},{}",
                i + cfg.block_len,
                spot.blocks.overlap[i],
                spot.blocks.trunc[i]
            )
        }),
    )
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let cfg = resolve_tuning(&args.common, &file);
    let (series, input_echo) = resolve_input(&args.common)?;
    let out_dir = resolve_out_dir(&args.common, &file);
    let spot = estimate_spot_vol(&series, &cfg)?;
    let est = estimate_changepoint(&series, &cfg, args.truncate)?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "estimate",
        "input": input_echo,
        "tuning": cfg,
        "truncate": args.truncate,
        "noise_var_hat": spot.noise_var_hat,
        "theta_hat": est.theta_hat,
        "argmax_bin": est.argmax_bin,
    });
    write_report(&out_dir, "estimate-report.json", &report)?;
    if args.common.csv {
        write_spot_tables(&out_dir, &spot, &cfg)?;
        write_csv(
            &out_dir.join("diamond.csv"),
            "bin,value",
            est.diamond_values
                .iter()
                .enumerate()
                .map(|(i, v)| format!("{},{}", i + cfg.block_len, v)),
        )?;
    }
    Ok(())
}

fn cmd_bootstrap(args: &BootstrapArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let cfg = resolve_tuning(&args.common, &file);
    let rule = resolve_rule(&args.rule, &file)?;
    let (series, input_echo) = resolve_input(&args.common)?;
    let out_dir = resolve_out_dir(&args.common, &file);
    let defaults = BootstrapConfig::default();
    let bcfg = BootstrapConfig {
        replications: args
            .replications
            .or(file.replications)
            .unwrap_or(defaults.replications),
        filter_len: args
            .filter_len
            .or(file.filter_len)
            .unwrap_or(defaults.filter_len),
        seed: args.bootstrap_seed.unwrap_or(defaults.seed),
        pseudo_shift: args
            .pseudo_shift
            .or(file.pseudo_shift)
            .unwrap_or(defaults.pseudo_shift),
        reestimate_weights: args.reestimate_weights,
    };
    let result = bootstrap_test(&series, &rule, &cfg, &bcfg)?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "bootstrap",
        "input": input_echo,
        "tuning": cfg,
        "bootstrap": bcfg,
        "rule": rule,
        "result": result,
    });
    write_report(&out_dir, "bootstrap-report.json", &report)?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let out_dir = resolve_out_dir(&args.common, &file);
    let spec = args.preset.spec(args.common.seed);
    let path = simulate_path(&spec)?;
    // shortest round-trip float formatting: reading the file back
    // reproduces the observed values bit-exactly
    let mut f = fs::File::create(&args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    for v in path.observed.values() {
        writeln!(f, "{v}")?;
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "preset": args.preset.name(),
        "seed": args.common.seed,
        "spec": spec,
        "n": path.observed.n(),
        "true_theta": path.true_theta,
        "output": args.output.display().to_string(),
    });
    write_report(&out_dir, "simulate-report.json", &report)?;
    Ok(())
}

fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = grid.split(':').collect();
    let [start, end, step] = parts.as_slice() else {
        bail!("grid must be start:end:step, got '{grid}'");
    };
    let (start, end, step): (f64, f64, f64) =
        (start.parse()?, end.parse()?, step.parse()?);
    if step <= 0.0 || end < start {
        bail!("grid must satisfy start <= end and step > 0");
    }
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        let v = start + step * i as f64;
        if v > end + 1e-12 {
            break;
        }
        out.push(v);
        i += 1;
    }
    Ok(out)
}

fn cmd_study(args: &StudyArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let out_dir = resolve_out_dir(&args.common, &file);
    let reps = args.reps.or(file.reps).unwrap_or(500);
    let level = args.level.or(file.level).unwrap_or(0.1);
    let deltas = parse_grid(args.grid.as_deref().unwrap_or("0.15:0.45:0.05"))?;
    let mut specs = Vec::new();
    if args.with_null {
        specs.push(StudySpec {
            label: "delta=0".into(),
            spec: SimulationSpec::h0_compensator(0),
        });
    }
    for &delta in &deltas {
        specs.push(StudySpec {
            label: format!("delta={delta}"),
            spec: SimulationSpec::h1_compensator(delta, 0),
        });
    }
    let rules = all_rules(level)?;
    let cells = monte_carlo_study(&specs, &rules, reps, args.common.seed)?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "study",
        "seed": args.common.seed,
        "reps": reps,
        "level": level,
        "deltas": deltas,
        "with_null": args.with_null,
        "cells": cells,
    });
    write_report(&out_dir, "study-report.json", &report)?;
    write_csv(
        &out_dir.join("study.csv"),
        "label,rule,level,reps,rejection_rate,median_loc_error",
        cells.iter().map(|c| {
            let med = c
                .localization_error_quartiles
                .get(1)
                .map(|v| v.to_string())
                .unwrap_or_default();
            format!(
                "{},{},{},{},{},{med}",
                c.label,
                c.rule.kind.as_str(),
                c.rule.level,
                c.reps,
                c.rejection_rate
            )
        }),
    )?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Bootstrap(args) => cmd_bootstrap(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Study(args) => cmd_study(args),
    }
}
