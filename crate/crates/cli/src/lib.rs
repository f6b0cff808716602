//! Command-line surface for running, comparing and re-verifying aggregation experiments.
//!
//! Exit codes: 0 when every certificate passes, 1 on usage, parse or I/O errors,
//! 2 when a run completed but some certificate failed.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use expagg::diagnostics::RunCertifier;
use expagg::io::{read_run_log, read_stream, write_stream, RunLogWriter, RunSummary};
use expagg::{
    AggregatorConfig, Algorithm, Execution, Player, RegretReport, Round, ScenarioSpec,
    ScenarioStream, Stream,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CERTIFICATE: i32 = 2;

const SCENARIO_HELP: &str = "Scenario spec: comma-separated key=value pairs. Keys: \
family (noisy-regression|drifting-leader|scale-burst|density-grid, required), \
n, t, d (experts, rounds, dimension; defaults 5, 100, 1), seed (u64, default 0), \
sigma (>0, default 1), sigmas (per-expert levels joined by ':'), burst (M>0, default 100), \
p (burst probability, default 0.05), period (>=1, default 50), bandwidth (>0, default 0.1). \
Example: family=scale-burst,n=10,t=1000,d=4,seed=7";

#[derive(Debug, Parser)]
#[command(
    name = "expagg",
    version,
    about = "Exponential-weights aggregation of expert predictions with a self-tuned learning rate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one strategy over a stream, writing the run log and regret report.
    Run(RunArgs),
    /// Run several strategies on the same stream and write a plot-ready CSV.
    Compare(CompareArgs),
    /// Recompute every certificate from a stored run log.
    Verify(VerifyArgs),
    /// Write a synthetic scenario to a stream file.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct Source {
    /// Stream file to read.
    #[arg(long, group = "source")]
    pub input: Option<PathBuf>,
    #[arg(long, group = "source", help = SCENARIO_HELP)]
    pub scenario: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// paper | fixed-ew:<B> | ftl | uniform
    #[arg(long, default_value = "paper")]
    pub algo: String,
    /// Run log destination (JSON Lines).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Regret report destination (JSON); printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: Source,
    /// Comma-separated list of at least two algorithms.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub algos: Vec<String>,
    /// CSV destination; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, help = SCENARIO_HELP)]
    pub scenario: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Errors that end a command with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

type CmdResult = Result<i32, UsageError>;

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

enum Input {
    File(Stream),
    Scenario(ScenarioSpec),
}

impl Input {
    fn load(source: &Source) -> Result<Self, UsageError> {
        match (&source.input, &source.scenario) {
            (Some(path), None) => {
                Ok(Input::File(read_stream(path).map_err(|e| {
                    UsageError(format!("{}: {e}", path.display()))
                })?))
            }
            (None, Some(spec)) => Ok(Input::Scenario(spec.parse()?)),
            _ => Err(UsageError(
                "exactly one of --input or --scenario is required".into(),
            )),
        }
    }

    fn config(&self) -> Result<AggregatorConfig, UsageError> {
        let (n, d, t) = match self {
            Input::File(s) => (s.num_experts(), s.dimension(), s.len()),
            Input::Scenario(s) => (s.num_experts, s.dimension, s.rounds),
        };
        if t == 0 {
            return Err(UsageError(
                "stream has no rounds; nothing to certify".into(),
            ));
        }
        Ok(AggregatorConfig::new(n, d)?.with_horizon(t))
    }

    fn into_stream(self) -> Result<Stream, UsageError> {
        match self {
            Input::File(s) => Ok(s),
            Input::Scenario(spec) => Ok(expagg::generate(&spec)?),
        }
    }

    fn rounds(&self) -> Box<dyn Iterator<Item = std::borrow::Cow<'_, Round>> + '_> {
        match self {
            Input::File(s) => Box::new(s.rounds().iter().map(std::borrow::Cow::Borrowed)),
            Input::Scenario(spec) => Box::new(
                ScenarioStream::new(spec.clone())
                    .expect("spec validated at parse time")
                    .map(std::borrow::Cow::Owned),
            ),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, UsageError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn exit_for(report: &RegretReport) -> i32 {
    if report.all_passed {
        EXIT_OK
    } else {
        EXIT_CERTIFICATE
    }
}

fn describe(algorithm: &str, report: &RegretReport) -> String {
    format!(
        "{algorithm}: T={} regret={:?} bound_maxloss={:?} bound_dagger={:?} certified={}",
        report.rounds,
        report.regret,
        report.bound_maxloss,
        report.bound_dagger,
        if report.all_passed { "yes" } else { "NO" }
    )
}

/// Streams one algorithm over the input, certifying as it goes.
pub fn cmd_run(args: &RunArgs) -> CmdResult {
    let algorithm: Algorithm = args.algo.parse()?;
    let input = Input::load(&args.source)?;
    let config = input.config()?;

    let mut player = Player::new(algorithm, config)?;
    let mut certifier = RunCertifier::new(config.num_experts, algorithm.certification_mode());
    let mut log = args
        .out
        .as_deref()
        .map(create)
        .transpose()?
        .map(RunLogWriter::new);
    for (i, round) in input.rounds().enumerate() {
        let record = player
            .step(&round)
            .map_err(|e| UsageError(format!("round {}: {e}", i + 1)))?;
        certifier.observe(&record)?;
        if let Some(log) = log.as_mut() {
            log.record(&record)?;
        }
    }
    let report = certifier.finish()?;
    let summary = RunSummary {
        algorithm: algorithm.to_string(),
        report,
    };
    if let Some(log) = log {
        log.finish(&summary)?;
    }
    let json = serde_json::to_string_pretty(&summary.report)?;
    match &args.report {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{json}")?;
            w.flush()?;
            eprintln!("{}", describe(&summary.algorithm, &summary.report));
        }
        None => println!("{json}"),
    }
    Ok(exit_for(&summary.report))
}

/// Per-round cumulative losses of one algorithm on a stream.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub algorithm: Algorithm,
    pub cumulative_player_loss: Vec<f64>,
    pub cumulative_best_expert_loss: Vec<f64>,
    pub report: RegretReport,
}

pub fn trajectory(
    algorithm: Algorithm,
    config: AggregatorConfig,
    stream: &Stream,
) -> expagg::Result<Trajectory> {
    let mut certifier = RunCertifier::new(config.num_experts, algorithm.certification_mode());
    let mut cum_expert = vec![0.0; config.num_experts];
    let mut cum_player = 0.0;
    let mut player_curve = Vec::with_capacity(stream.len());
    let mut best_curve = Vec::with_capacity(stream.len());
    expagg::run_algorithm_with(algorithm, config, stream.rounds(), |record| {
        certifier.observe(&record)?;
        cum_player += record.player_loss;
        for (c, l) in cum_expert.iter_mut().zip(&record.expert_losses) {
            *c += l;
        }
        player_curve.push(cum_player);
        best_curve.push(cum_expert.iter().copied().fold(f64::INFINITY, f64::min));
        Ok(())
    })?;
    Ok(Trajectory {
        algorithm,
        cumulative_player_loss: player_curve,
        cumulative_best_expert_loss: best_curve,
        report: certifier.finish()?,
    })
}

pub fn write_comparison_csv<W: Write>(mut w: W, runs: &[Trajectory]) -> io::Result<()> {
    writeln!(
        w,
        "t,algo,cumulative_player_loss,cumulative_best_expert_loss,regret"
    )?;
    for run in runs {
        let name = run.algorithm.to_string();
        for (i, (p, b)) in run
            .cumulative_player_loss
            .iter()
            .zip(&run.cumulative_best_expert_loss)
            .enumerate()
        {
            writeln!(w, "{},{name},{p:?},{b:?},{:?}", i + 1, p - b)?;
        }
    }
    w.flush()
}

/// Runs every algorithm on one materialized stream, concurrently when enabled.
pub fn cmd_compare(args: &CompareArgs) -> CmdResult {
    let algorithms = args
        .algos
        .iter()
        .map(|a| a.parse::<Algorithm>())
        .collect::<Result<Vec<_>, _>>()?;
    if algorithms.len() < 2 {
        return Err(UsageError("--algos needs at least two algorithms".into()));
    }
    let input = Input::load(&args.source)?;
    let config = input.config()?;
    let stream = input.into_stream()?;
    let runs = expagg::parallel::map_slice(&algorithms, Execution::default(), |&a| {
        trajectory(a, config, &stream)
    })
    .into_iter()
    .collect::<expagg::Result<Vec<_>>>()?;

    match &args.out {
        Some(path) => write_comparison_csv(create(path)?, &runs)?,
        None => write_comparison_csv(io::stdout().lock(), &runs)?,
    }
    for run in &runs {
        eprintln!("{}", describe(&run.algorithm.to_string(), &run.report));
    }
    Ok(if runs.iter().all(|r| r.report.all_passed) {
        EXIT_OK
    } else {
        EXIT_CERTIFICATE
    })
}

/// Recomputes the report from the log's round records; the stored report is only
/// used for the algorithm name and a consistency warning.
pub fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    let log =
        read_run_log(&args.log).map_err(|e| UsageError(format!("{}: {e}", args.log.display())))?;
    let algorithm: Algorithm = log.summary.algorithm.parse()?;
    let num_experts = log
        .records
        .first()
        .map(|r| r.weights.len())
        .ok_or_else(|| UsageError("run log holds no round records".into()))?;
    let mut certifier = RunCertifier::new(num_experts, algorithm.certification_mode());
    for record in &log.records {
        certifier.observe(record)?;
    }
    let report = certifier.finish()?;
    if report != log.summary.report {
        eprintln!("warning: stored report differs from the recomputed one");
    }
    println!("{}", describe(&log.summary.algorithm, &report));
    if let Some(t) = report.summary.first_failure_round {
        println!("first failing round: {t}");
    }
    Ok(exit_for(&report))
}

pub fn cmd_generate(args: &GenerateArgs) -> CmdResult {
    let spec: ScenarioSpec = args.scenario.parse()?;
    let stream = expagg::generate(&spec)?;
    write_stream(&args.out, &stream)
        .map_err(|e| UsageError(format!("{}: {e}", args.out.display())))?;
    Ok(EXIT_OK)
}
