//! The `betting` command-line front end.
//!
//! ```text
//! betting simulate --case case-1 --strategy strategy-1 --n 10000 --seed 7 --out trace.csv
//! betting audit    --data forecasts.csv --strategy strategy-3 --prior 0:1,0:2,0:1
//! betting mle      --data forecasts.csv --strategy strategy-3
//! betting calib    --data forecasts.csv
//! ```
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::audit::{self, trace_to_csv, Strategy, TraceOptions};
use crate::error::Error;
use crate::features::FeatureSpec;
use crate::game::GameState;
use crate::hindsight::{self, small_mle_bound, MleOptions};
use crate::ingest::{self, calibration_table, ForecastSeries, DEFAULT_CLAMP_EPS};
use crate::logistic::Theta;
use crate::mixture::PriorSpec;
use crate::sim::{ForecasterModel, Observation, RealityModel, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "betting", version, about = "Audit binary probability forecasts with Bayesian logistic betting strategies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play a strategy against a simulated scenario and write the trace.
    Simulate(RunArgs),
    /// Play a strategy against recorded forecasts; write trace and summary.
    Audit(RunArgs),
    /// Hindsight maximum likelihood and the small-MLE bound report.
    Mle(RunArgs),
    /// Print the calibration table of recorded forecasts.
    Calib(CalibArgs),
}

/// Options shared by the game-playing subcommands.
#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    /// Scenario preset: case-1, case-2, case-3 or honest.
    #[arg(long)]
    pub case: Option<String>,
    /// Strategy preset (strategy-1..3) or feature list such as `const,logit,lag:1,exo:NAME`.
    #[arg(long, default_value = "strategy-1")]
    pub strategy: String,
    /// CSV file with header `date,p,x[,extra...]`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of rounds (required for simulations; truncates data otherwise).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Quadrature nodes per prior dimension.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Uniform prior box `lo:hi[,lo:hi...]`; logit coordinates are given on beta.
    #[arg(long)]
    pub prior: Option<String>,
    #[arg(long, default_value_t = DEFAULT_CLAMP_EPS)]
    pub clamp_eps: f64,
    /// Trace output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit hindsight and diagnostic columns every this many rounds (0: final only).
    #[arg(long, default_value_t = 10)]
    pub trace_every: usize,
    /// Override the scenario forecaster: one value (constant) or a comma list (cycled).
    #[arg(long)]
    pub forecast: Option<String>,
    /// Override the Bernoulli success probability of case-1/case-2.
    #[arg(long)]
    pub q: Option<f64>,
    /// Markov-chain reality: P(x=1 | previous 1).
    #[arg(long)]
    pub p11: Option<f64>,
    /// Markov-chain reality: P(x=1 | previous 0).
    #[arg(long)]
    pub p10: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct CalibArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CLAMP_EPS)]
    pub clamp_eps: f64,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::UnknownPreset(_)
            | Error::InvalidFeatureSpec(_)
            | Error::InvalidPrior(_)
            | Error::TooManyNodes { .. }
            | Error::InvalidScenario(_)
            | Error::DimensionMismatch { .. }
            | Error::ZeroDimension => EXIT_USAGE,
            Error::Io(_)
            | Error::Csv(_)
            | Error::Parse { .. }
            | Error::EmptyData
            | Error::MissingExogenous(_)
            | Error::InvalidProbability(_) => EXIT_DATA,
            Error::NonFinite(_)
            | Error::Inadmissible { .. }
            | Error::NotIdentifiable
            | Error::Separated { .. }
            | Error::NotConverged => EXIT_NUMERIC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses arguments and runs the command; returns the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args, stdout, stderr),
        Command::Audit(args) => cmd_audit(&args, stdout, stderr),
        Command::Mle(args) => cmd_mle(&args, stdout),
        Command::Calib(args) => cmd_calib(&args, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

pub fn parse_prior_bounds(text: &str) -> CliResult<Vec<(f64, f64)>> {
    text.split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("prior interval `{part}` is not lo:hi")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::usage(format!("prior bound `{s}` is not a number")))
            };
            Ok((parse(lo)?, parse(hi)?))
        })
        .collect()
}

/// Strategy from `--strategy`, `--prior` and `--nodes`.
pub fn strategy_from_args(args: &RunArgs) -> CliResult<Strategy> {
    let features = match FeatureSpec::preset(&args.strategy) {
        Ok(f) => f,
        Err(Error::UnknownPreset(_)) => args.strategy.parse::<FeatureSpec>()?,
        Err(e) => return Err(e.into()),
    };
    let prior = match &args.prior {
        Some(text) => PriorSpec::from_beta_box(&features, parse_prior_bounds(text)?, args.nodes)?,
        None => PriorSpec::unit_box(&features, args.nodes)?,
    };
    Ok(Strategy::new(features, prior)?)
}

fn parse_probabilities(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("forecast `{s}` is not a number")))
        })
        .collect()
}

/// Scenario from `--case`, `--n`, `--seed` and the override flags.
pub fn scenario_from_args(args: &RunArgs) -> CliResult<Scenario> {
    let case = args
        .case
        .as_deref()
        .ok_or_else(|| CliError::usage("--case is required"))?;
    let n = args.n.ok_or_else(|| CliError::usage("--n is required for simulations"))?;
    let mut scenario = Scenario::preset(case, n, args.seed)?;
    if let Some(text) = &args.forecast {
        let values = parse_probabilities(text)?;
        scenario.forecaster = match values.as_slice() {
            [p] => ForecasterModel::Constant(*p),
            _ => ForecasterModel::Alternating(values),
        };
    }
    match &mut scenario.reality {
        RealityModel::Bernoulli { q } => {
            if let Some(v) = args.q {
                *q = v;
            }
        }
        RealityModel::MarkovChain { p11, p10, .. } => {
            if let Some(v) = args.p11 {
                *p11 = v;
            }
            if let Some(v) = args.p10 {
                *p10 = v;
            }
        }
        RealityModel::Honest => {}
    }
    scenario.validate()?;
    Ok(scenario)
}

enum Source {
    Simulated(Vec<Observation>),
    Data(ForecastSeries),
}

impl Source {
    fn observations(&self) -> Vec<Observation> {
        match self {
            Source::Simulated(o) => o.clone(),
            Source::Data(s) => s.observations(),
        }
    }

    fn exogenous(&self) -> Option<Vec<BTreeMap<String, f64>>> {
        match self {
            Source::Data(s) if !s.extra_names.is_empty() => {
                Some(s.records.iter().map(|r| r.extras.clone()).collect())
            }
            _ => None,
        }
    }
}

fn load_data(args: &RunArgs, path: &std::path::Path, stderr: &mut dyn Write) -> CliResult<Source> {
    let mut series = ingest::load_csv(path, args.clamp_eps)?;
    for w in &series.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    if let Some(n) = args.n {
        series.records.truncate(n);
    }
    if series.is_empty() {
        return Err(Error::EmptyData.into());
    }
    Ok(Source::Data(series))
}

fn source_from_args(args: &RunArgs, stderr: &mut dyn Write) -> CliResult<Source> {
    match (&args.case, &args.data) {
        (Some(_), Some(_)) => Err(CliError::usage("--case and --data are mutually exclusive")),
        (None, None) => Err(CliError::usage("one of --case or --data is required")),
        (Some(_), None) => Ok(Source::Simulated(scenario_from_args(args)?.generate()?)),
        (None, Some(path)) => load_data(args, path, stderr),
    }
}

fn play_and_write(
    args: &RunArgs,
    source: &Source,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    always_summarise: bool,
) -> CliResult<()> {
    let strategy = strategy_from_args(args)?;
    let exo = source.exogenous();
    let run = audit::run(
        &strategy,
        &source.observations(),
        exo.as_deref(),
        TraceOptions {
            every: args.trace_every,
        },
    )?;
    let csv = trace_to_csv(&run.trace);
    let summary = run.summary().to_text();
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv)?;
            write!(stdout, "{summary}")?;
        }
        None => {
            stdout.write_all(csv.as_bytes())?;
            if always_summarise {
                write!(stderr, "{summary}")?;
            }
        }
    }
    Ok(())
}

pub fn cmd_simulate(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    if args.data.is_some() {
        return Err(CliError::usage("simulate takes --case, not --data"));
    }
    let source = Source::Simulated(scenario_from_args(args)?.generate()?);
    play_and_write(args, &source, stdout, stderr, false)
}

pub fn cmd_audit(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    if args.case.is_some() {
        return Err(CliError::usage("audit takes --data, not --case"));
    }
    let path = args
        .data
        .as_deref()
        .ok_or_else(|| CliError::usage("--data is required"))?;
    let source = load_data(args, path, stderr)?;
    play_and_write(args, &source, stdout, stderr, true)
}

pub fn cmd_mle(args: &RunArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut sink = std::io::sink();
    let source = source_from_args(args, &mut sink)?;
    let strategy = strategy_from_args(args)?;
    let exo = source.exogenous();
    let observations = source.observations();
    let mut history = Vec::with_capacity(observations.len());
    let mut rounds = Vec::with_capacity(observations.len());
    let mut state = GameState::new(strategy.dim())?;
    for (i, obs) in observations.iter().enumerate() {
        let c = strategy
            .features
            .build(&history, obs.p, exo.as_ref().map(|e| &e[i]))?;
        let round = crate::game::Round::new(obs.p, c, obs.x)?;
        state.play_round(&round, 0.0)?;
        history.push(obs.x);
        rounds.push(round);
    }
    let mle = hindsight::mle(&rounds, &Theta::zeros(strategy.dim()), &MleOptions::default())?;
    let fmt_vec = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let theta: Vec<f64> = mle.theta_star.0.iter().copied().collect();
    writeln!(stdout, "features:        {}", strategy.features)?;
    writeln!(stdout, "rounds:          {}", rounds.len())?;
    writeln!(stdout, "theta_star:      [{}]", fmt_vec(&theta))?;
    for i in strategy.features.logit_coordinates() {
        writeln!(stdout, "beta_star:       {:.6}", theta[i] + 1.0)?;
    }
    writeln!(stdout, "log_K_mle:       {:.6}", mle.log_capital)?;
    writeln!(stdout, "grad_norm:       {:.3e}", mle.grad_norm)?;
    writeln!(stdout, "converged:       {}", mle.converged)?;
    writeln!(stdout, "iterations:      {}", mle.iterations)?;
    let diag = state.diagnostics();
    if let Some(svs) = diag.svs {
        writeln!(stdout, "svs_half:        {:.6}", svs / 2.0)?;
    }
    if let Some(r) = diag.ratio {
        writeln!(stdout, "info_ratio:      {r:.6}")?;
    }
    if let Ok(b) = small_mle_bound(&rounds, &state, &mle) {
        writeln!(stdout, "L_c:             {:.6}", b.l_c)?;
        writeln!(stdout, "L_lambda:        {:.6}", b.l_lambda)?;
        writeln!(stdout, "vinv_s_norm:     {:.6}", b.vinv_s_norm)?;
        writeln!(stdout, "premise_holds:   {}", b.premise_holds)?;
        writeln!(stdout, "mle_bound:       {:.6}", b.bound)?;
    }
    if !mle.converged {
        return Err(Error::NotConverged.into());
    }
    Ok(())
}

pub fn cmd_calib(args: &CalibArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let series = ingest::load_csv(&args.data, args.clamp_eps)?;
    for w in &series.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    let table = calibration_table(&series)?;
    write!(stdout, "{}", table.to_text())?;
    writeln!(stdout)?;
    write!(stdout, "{}", table.to_csv())?;
    Ok(())
}
