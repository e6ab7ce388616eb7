//! Command-line front end.
//!
//! Exit codes: `0` on success, `2` for invalid input or arguments, `3` when
//! an engine fails on valid input. Every output document embeds the fully
//! resolved configuration, including the seed, so a rerun with those values
//! reproduces it byte for byte regardless of `--threads`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::assigners::{AssignerKind, AssignerSpec};
use crate::dataset::{load_csv, rotate_to_diagonal, LabelColumn};
use crate::engines::{
    diproperm, sigclust, sigpal, DiPropermConfig, LabelPlacement, SimulationTestConfig, Statistic, TestResult,
};
use crate::error::Error;
use crate::sim::{preset, preset_names, run_experiment, ExperimentConfig};
use crate::spectral::{EigenMethod, EigenSpectrum};
use crate::stream::Seed;
use crate::theory::{
    asymptotic_pvalue_study, decreasing_trend_test, tci_difference, tci_sigclust, tci_sigpal, AsymptoticStudyConfig,
    LambdaProfile, TheoryInput,
};

#[derive(Debug, Parser)]
#[command(
    name = "sigpal",
    version,
    about = "Significance tests for partially labeled HDLSS data"
)]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "SIGPAL_THREADS", global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a test on a CSV file.
    Test(TestArgs),
    /// Run a simulation preset or config file.
    Simulate(SimulateArgs),
    /// Emit population cluster index curves or the growing-dimension study.
    Theory(TheoryArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Sigpal,
    Sigclust,
    Diproperm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// `hard`, `soft` or `known:<file>` (eigenvalues separated by whitespace or
/// commas).
#[derive(Clone, Debug, PartialEq)]
pub enum EigenArg {
    Hard,
    Soft,
    Known(PathBuf),
}

impl FromStr for EigenArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hard" => Ok(EigenArg::Hard),
            "soft" => Ok(EigenArg::Soft),
            _ => match s.strip_prefix("known:") {
                Some(path) if !path.is_empty() => Ok(EigenArg::Known(PathBuf::from(path))),
                _ => Err(format!("expected hard, soft or known:<file>, got {s:?}")),
            },
        }
    }
}

fn parse_assigner(s: &str) -> Result<AssignerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long, value_enum, default_value = "sigpal")]
    pub method: MethodArg,
    /// two-means, cop-kmeans, s3lda or l1-lda.
    #[arg(long, default_value = "cop-kmeans", value_parser = parse_assigner)]
    pub assigner: AssignerKind,
    /// Assigner for simulated data (defaults to --assigner).
    #[arg(long, value_parser = parse_assigner)]
    pub sim_assigner: Option<AssignerKind>,
    #[arg(long, default_value = "soft")]
    pub eigen: EigenArg,
    #[arg(long, default_value_t = 100)]
    pub n_sim: usize,
    #[arg(long, default_value_t = 100)]
    pub n_perm: usize,
    /// DiProPerm statistic.
    #[arg(long, value_enum, default_value = "mean-diff")]
    pub statistic: StatisticArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Random when omitted; the value used is always reported.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rotate the data to a diagonal sample covariance first.
    #[arg(long)]
    pub rotate: bool,
    /// Use (count + 1) / (N + 1) p-values.
    #[arg(long)]
    pub add_one: bool,
    /// Give null replicates uniform random signs instead of the observed
    /// class counts.
    #[arg(long)]
    pub uniform_null_labels: bool,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long)]
    pub input: PathBuf,
    /// Label column name, or a zero-based index.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Result file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    MeanDiff,
    TStat,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Named preset (see --list-presets).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// JSON file holding one experiment config or an array of them.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Halve replicates and simulations.
    #[arg(long)]
    pub desk_scale: bool,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub n_sim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for per-setting CSV files and summary.json.
    #[arg(long, default_value = "sigpal-simulations")]
    pub out: PathBuf,
    #[arg(long)]
    pub list_presets: bool,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Top eigenvalue ratio lambda_1 / sum(lambda), in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Theta grid as start:end:step.
    #[arg(long, default_value = "0:1:0.01")]
    pub grid: String,
    /// Run the growing-dimension p-value study instead of the curve.
    #[arg(long)]
    pub d_sweep: bool,
    #[arg(long, default_value = "50,200,800", value_delimiter = ',')]
    pub d_grid: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_sim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// A failure together with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::NonNumeric { .. }
            | Error::NonFinite { .. }
            | Error::BadLabel { .. }
            | Error::MissingLabelColumn(_)
            | Error::RaggedRow { .. }
            | Error::TooFewRows { .. }
            | Error::InvalidData(_)
            | Error::SingleClass(_)
            | Error::ContradictoryConstraints(_)
            | Error::InvalidArgument(_) => 2,
            _ => 3,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_error(path: &Path, source: io::Error) -> CliError {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
    .into()
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| io_error(p, e)),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

fn materialize(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn read_spectrum(path: &Path) -> CliResult<EigenSpectrum> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::invalid(format!("{}: {t:?} is not a number", path.display())))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    Ok(EigenSpectrum::known(values)?)
}

/// Configuration echoed into every `test` output.
#[derive(Debug, Serialize)]
struct ResolvedTest {
    method: MethodArg,
    input: PathBuf,
    label_column: String,
    rotate: bool,
    alpha: f64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<SimulationTestConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    permutation: Option<DiPropermConfig>,
}

#[derive(Debug, Serialize)]
struct TestDocument<'a> {
    config: &'a ResolvedTest,
    result: &'a TestResult,
    reject: bool,
}

fn cmd_test(args: &TestArgs) -> CliResult<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::invalid(format!(
            "--alpha must lie in (0, 1), got {}",
            args.alpha
        )));
    }
    let Ok(label_column) = args.label_column.parse::<LabelColumn>();
    let eigen = match &args.eigen {
        EigenArg::Hard => EigenMethod::Hard,
        EigenArg::Soft => EigenMethod::Soft,
        EigenArg::Known(p) => EigenMethod::Known(read_spectrum(p)?),
    };
    let mut data = load_csv(&args.input, &label_column)?;
    if args.rotate {
        data = rotate_to_diagonal(&data)?.rotated;
    }
    let seed = materialize(args.seed);
    let spec = |kind| AssignerSpec {
        restarts: args.restarts,
        ..AssignerSpec::new(kind)
    };
    let mut resolved = ResolvedTest {
        method: args.method,
        input: args.input.clone(),
        label_column: args.label_column.clone(),
        rotate: args.rotate,
        alpha: args.alpha,
        seed,
        simulation: None,
        permutation: None,
    };
    let result = match args.method {
        MethodArg::Diproperm => {
            let cfg = DiPropermConfig {
                statistic: match args.statistic {
                    StatisticArg::MeanDiff => Statistic::MeanDiff,
                    StatisticArg::TStat => Statistic::TStat,
                },
                n_perm: args.n_perm,
                add_one: args.add_one,
                ..Default::default()
            };
            let result = diproperm(&data, &cfg, Seed(seed))?;
            resolved.permutation = Some(cfg);
            result
        }
        MethodArg::Sigpal | MethodArg::Sigclust => {
            let assigner = if args.method == MethodArg::Sigclust {
                AssignerKind::TwoMeans
            } else {
                args.assigner
            };
            let cfg = SimulationTestConfig {
                assigner: spec(assigner),
                sim_assigner: args.sim_assigner.filter(|_| args.method == MethodArg::Sigpal).map(spec),
                eigen,
                n_sim: args.n_sim,
                label_placement: if args.uniform_null_labels {
                    LabelPlacement::UniformSigns
                } else {
                    LabelPlacement::PreserveCounts
                },
                add_one: args.add_one,
            };
            let result = if args.method == MethodArg::Sigclust {
                sigclust(data.x(), &cfg, Seed(seed))?
            } else {
                sigpal(&data, &cfg, Seed(seed))?
            };
            resolved.simulation = Some(cfg);
            result
        }
    };
    let reject = result.rejects(args.alpha);
    let bytes = match args.format {
        Format::Json => to_json(&TestDocument {
            config: &resolved,
            result: &result,
            reject,
        }),
        Format::Csv => test_csv(&resolved, &result, reject),
    };
    write_output(args.output.as_deref(), &bytes)?;
    eprintln!("seed: {seed}");
    eprintln!(
        "p-value: {} ({} H0 at alpha = {})",
        result.p_value,
        if reject { "reject" } else { "do not reject" },
        args.alpha
    );
    Ok(())
}

/// `field,value` rows; the resolved config is stored as one JSON cell and
/// each null statistic as a `null_stat` row.
fn test_csv(resolved: &ResolvedTest, result: &TestResult, reject: bool) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let method = serde_json::to_value(result.method).expect("serializable");
    let rows = [
        ("method", method.as_str().unwrap_or_default().to_string()),
        ("observed_stat", format!("{:?}", result.observed_stat)),
        ("p_value", format!("{:?}", result.p_value)),
        ("reject", reject.to_string()),
        ("n_sim_or_perm", result.n_sim_or_perm.to_string()),
        ("seed", result.seed.to_string()),
        ("config", serde_json::to_string(resolved).expect("serializable")),
        (
            "metadata",
            serde_json::to_string(&result.metadata).expect("serializable"),
        ),
    ];
    w.write_record(["field", "value"]).expect("in-memory write");
    for (k, v) in rows {
        w.write_record([k, v.as_str()]).expect("in-memory write");
    }
    for v in &result.null_stats {
        w.write_record(["null_stat", &format!("{v:?}")])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn load_experiments(args: &SimulateArgs) -> CliResult<Vec<ExperimentConfig>> {
    let mut configs = match (&args.preset, &args.config) {
        (Some(name), _) => preset(name).ok_or_else(|| {
            CliError::invalid(format!(
                "unknown preset {name:?}; available presets: {}",
                preset_names().join(", ")
            ))
        })?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
            let parsed = if value.is_array() {
                serde_json::from_value::<Vec<ExperimentConfig>>(value)
            } else {
                serde_json::from_value::<ExperimentConfig>(value).map(|c| vec![c])
            };
            parsed.map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(CliError::invalid("simulate needs --preset or --config")),
    };
    for cfg in &mut configs {
        if let Some(reps) = args.reps {
            cfg.reps = reps;
        }
        if let Some(n_sim) = args.n_sim {
            cfg.n_sim = n_sim;
        }
        if args.desk_scale {
            *cfg = cfg.clone().desk_scaled();
        }
        cfg.validate()?;
        if cfg.name.is_empty() || cfg.name.contains(['/', '\\']) {
            return Err(CliError::invalid(format!(
                "experiment name {:?} is not a valid file stem",
                cfg.name
            )));
        }
    }
    Ok(configs)
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    if args.list_presets {
        println!("{}", preset_names().join("\n"));
        return Ok(());
    }
    let configs = load_experiments(args)?;
    let seed = materialize(args.seed);
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let mut summaries = Vec::new();
    for (k, cfg) in configs.iter().enumerate() {
        let report = run_experiment(cfg, Seed(seed).child(k as u64))?;
        let csv_path = args.out.join(format!("{}.csv", cfg.name));
        let mut bytes = Vec::new();
        report.write_csv(&mut bytes)?;
        fs::write(&csv_path, bytes).map_err(|e| io_error(&csv_path, e))?;
        let counts: Vec<String> = report
            .summary
            .rejections
            .iter()
            .map(|(m, c)| format!("{m}={c}/{}", cfg.reps))
            .collect();
        eprintln!("{}: rejections at {}: {}", cfg.name, cfg.alpha, counts.join(" "));
        summaries.push(report.summary);
    }
    #[derive(Serialize)]
    struct Summary<'a, T> {
        seed: u64,
        experiments: &'a [T],
    }
    let path = args.out.join("summary.json");
    fs::write(
        &path,
        to_json(&Summary {
            seed,
            experiments: &summaries,
        }),
    )
    .map_err(|e| io_error(&path, e))?;
    eprintln!("seed: {seed}");
    Ok(())
}

/// Parses `start:end:step` into the grid points `start + i * step <= end`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, end, step] = parts.as_slice() else {
        return Err(format!("grid must be start:end:step, got {spec:?}"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("{s:?} is not a number"));
    let (start, end, step) = (num(start)?, num(end)?, num(step)?);
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !end.is_finite() || end < start {
        return Err(format!("grid {spec:?} is empty"));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn cmd_theory(args: &TheoryArgs) -> CliResult<()> {
    if args.d_sweep {
        return cmd_d_sweep(args);
    }
    let grid = parse_grid(&args.grid).map_err(CliError::invalid)?;
    let inputs = grid
        .iter()
        .map(|&theta| TheoryInput::new(theta, args.r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta", "tci_sigpal", "tci_sigclust", "difference"])
        .expect("in-memory write");
    for t in inputs {
        w.write_record(
            [
                t.theta,
                tci_sigpal(t.theta, t.r),
                tci_sigclust(t.r),
                tci_difference(t.theta, t.r),
            ]
            .map(|v| format!("{v:?}")),
        )
        .expect("in-memory write");
    }
    write_output(args.output.as_deref(), &w.into_inner().expect("in-memory flush"))?;
    eprintln!("theory: r = {}, grid = {}", args.r, args.grid);
    Ok(())
}

fn cmd_d_sweep(args: &TheoryArgs) -> CliResult<()> {
    let defaults = AsymptoticStudyConfig::default();
    let cfg = AsymptoticStudyConfig {
        a: args.a,
        lambda: LambdaProfile::Constant { value: 1.0 },
        d_grid: args.d_grid.clone(),
        reps: args.reps,
        n: args.n.unwrap_or(defaults.n),
        n_sim: args.n_sim.unwrap_or(defaults.n_sim),
        ..defaults
    };
    let seed = materialize(args.seed);
    let rows = asymptotic_pvalue_study(&cfg, Seed(seed))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["d", "mean_p", "sd_p"]).expect("in-memory write");
    for row in &rows {
        w.write_record([
            row.d.to_string(),
            format!("{:?}", row.mean_p),
            format!("{:?}", row.sd_p),
        ])
        .expect("in-memory write");
    }
    write_output(args.output.as_deref(), &w.into_inner().expect("in-memory flush"))?;
    let trend = decreasing_trend_test(&rows)?;
    eprintln!("config: {}", serde_json::to_string(&cfg).expect("serializable"));
    eprintln!("seed: {seed}");
    eprintln!(
        "slope on ln d: {:.4}, one-sided p = {:.4}",
        trend.slope, trend.p_decreasing
    );
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    let work = || match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Theory(a) => cmd_theory(a),
    };
    let outcome = match cli.threads {
        Some(0) => Err(CliError::invalid("--threads must be at least 1")),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(work),
            Err(e) => Err(CliError {
                code: 3,
                message: e.to_string(),
            }),
        },
        None => work(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
