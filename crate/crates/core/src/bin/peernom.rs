use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use peer_nomination::analytic;
use peer_nomination::harness::{
    self, parse_epsilon, Algorithm, AssignmentMode, ConfigFile, EpsilonMode, ExperimentConfig,
    ResultRow,
};
use peer_nomination::report::{self, Format};
use peer_nomination::{
    exact_selection_probabilities, run_peer_nomination, Error, Instance, Profile,
};

#[derive(Parser)]
#[command(
    name = "peernom",
    version,
    about = "Impartial peer selection with PeerNomination"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo comparison of the selected mechanisms on an (m, k) grid
    Simulate(SimulateArgs),
    /// PeerNomination against EDP forced to select as many agents as PeerNomination did
    ForcedSize(SimulateArgs),
    /// Analytic expected size and recall of PeerNomination
    Analytic(AnalyticArgs),
    /// Slack ε giving an expected selection size equal to the target
    Calibrate(CalibrateArgs),
    /// Analytic ROC / precision-recall points over the nomination quota
    Curves(CurvesArgs),
    /// Run PeerNomination on a profile file
    Select(SelectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    ClusteredShared,
    Separate,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML file with any of the options below; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of agents [default: 120]
    #[arg(long)]
    n: Option<usize>,
    /// Reviews per agent, comma separated (required)
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Target selection sizes, comma separated (required)
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Number of clusters for Partition and EDP [default: 4]
    #[arg(long)]
    clusters: Option<usize>,
    /// Mallows dispersion in [0, 1]; 0 is truthful, 1 is uniform noise [default: 0.5]
    #[arg(long)]
    phi: Option<f64>,
    /// PeerNomination slack: a number or "calibrated" [default: calibrated]
    #[arg(long)]
    epsilon: Option<String>,
    /// Calibration tolerance on the expected size [default: 0.01]
    #[arg(long)]
    tol: Option<f64>,
    /// Trials per cell [default: 1000]
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Mechanisms, comma separated: peernomination, vanilla, partition, edp [default: all]
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    /// Assignment used by PeerNomination and Vanilla [default: clustered-shared]
    #[arg(long, value_enum)]
    assignment_mode: Option<ModeArg>,
    /// Result file; rows go to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Result format [default: csv]
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

impl SimulateArgs {
    fn to_config(&self) -> Result<ExperimentConfig, Error> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let mut missing = Vec::new();
        let m_values = self.m.clone().or(file.m.clone());
        let k_values = self.k.clone().or(file.k.clone());
        if m_values.is_none() {
            missing.push("--m");
        }
        if k_values.is_none() {
            missing.push("--k");
        }
        if !missing.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "missing required parameters: {} (pass them as flags or in --config)",
                missing.join(", ")
            )));
        }
        let defaults = ExperimentConfig::default();
        let algorithms = match self.algorithms.clone().or(file.algorithms.clone()) {
            Some(names) => names
                .iter()
                .map(|s| Algorithm::parse(s))
                .collect::<Result<Vec<_>, _>>()?,
            None => defaults.algorithms.clone(),
        };
        let epsilon_mode = match &self.epsilon {
            Some(s) => parse_epsilon(s)?,
            None => file.epsilon_mode()?.unwrap_or(defaults.epsilon_mode),
        };
        let assignment_mode = match self.assignment_mode {
            Some(ModeArg::ClusteredShared) => AssignmentMode::ClusteredShared,
            Some(ModeArg::Separate) => AssignmentMode::Separate,
            None => file.assignment_mode.unwrap_or(defaults.assignment_mode),
        };
        Ok(ExperimentConfig {
            n: self.n.or(file.n).unwrap_or(defaults.n),
            m_values: m_values.unwrap_or_default(),
            k_values: k_values.unwrap_or_default(),
            l: self.clusters.or(file.clusters).unwrap_or(defaults.l),
            phi: self.phi.or(file.phi).unwrap_or(defaults.phi),
            trials: self.trials.or(file.trials).unwrap_or(defaults.trials),
            master_seed: self.seed.or(file.seed).unwrap_or(defaults.master_seed),
            algorithms,
            epsilon_mode,
            assignment_mode,
            calibration_tolerance: self
                .tol
                .or(file.calibration_tolerance)
                .unwrap_or(defaults.calibration_tolerance),
            output_path: self.out.clone().or(file.out.clone()),
            format: self
                .format
                .map(Format::from)
                .or(file.format)
                .unwrap_or(defaults.format),
        })
    }
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, default_value_t = 120)]
    n: usize,
    /// Comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    /// Comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    /// A number or "calibrated"
    #[arg(long, default_value = "0")]
    epsilon: String,
    /// Calibration tolerance on the expected size
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Print the acceptance probability of every true rank instead (single cell only)
    #[arg(long)]
    per_rank: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 120)]
    n: usize,
    /// Comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    /// Comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    /// Expected size to hit [default: k]
    #[arg(long)]
    target: Option<f64>,
    /// Allowed gap between expected size and target
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long, default_value_t = 120)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    /// Number of quota values in [0, m]
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    /// Profile file with lines `reviewer: a>b>c`
    #[arg(long)]
    profile: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also print every agent's exact selection probability
    #[arg(long)]
    exact: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let failed = e.use_stderr();
            let _ = e.print();
            return if failed {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate(args) => simulate(&args, false),
        Command::ForcedSize(args) => simulate(&args, true),
        Command::Analytic(args) => analytic_table(&args),
        Command::Calibrate(args) => calibrate(&args),
        Command::Curves(args) => curves(&args),
        Command::Select(args) => select(&args),
    }
}

fn stdout_err(source: io::Error) -> Error {
    Error::Io {
        path: "<stdout>".into(),
        source,
    }
}

/// Writes `text` to `out` or stdout.
fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => io::stdout().write_all(text.as_bytes()).map_err(stdout_err),
    }
}

fn simulate(args: &SimulateArgs, forced: bool) -> Result<(), Error> {
    let config = args.to_config()?;
    let rows = if forced {
        harness::run_forced_size_experiment(&config)?
    } else {
        harness::run_experiment(&config)?
    };
    match &config.output_path {
        Some(path) => {
            report::write_results(&rows, path, config.format)?;
            print_summary(&rows).map_err(stdout_err)
        }
        None => report::write_results_to(&rows, io::stdout().lock(), config.format),
    }
}

fn print_summary(rows: &[ResultRow]) -> io::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<15} {:>4} {:>4} {:>4} {:>6} {:>16} {:>16} {:>16}",
        "algorithm", "m", "k", "l", "trials", "size", "recall", "precision"
    )?;
    for s in report::summarize(rows) {
        writeln!(
            out,
            "{:<15} {:>4} {:>4} {:>4} {:>6} {:>8.3} ± {:<5.3} {:>8.4} ± {:<5.4} {:>8.4} ± {:<5.4}",
            s.algorithm.name(),
            s.m,
            s.k,
            s.l,
            s.trials,
            s.size.mean,
            s.size.sd,
            s.tpr.mean,
            s.tpr.sd,
            s.ppv.mean,
            s.ppv.sd
        )?;
    }
    Ok(())
}

fn resolve_epsilon(mode: EpsilonMode, instance: &Instance, tol: f64) -> Result<f64, Error> {
    match mode {
        EpsilonMode::Fixed(eps) => Ok(eps),
        EpsilonMode::Calibrated => analytic::calibrate_epsilon(instance, instance.k() as f64, tol),
    }
}

fn analytic_table(args: &AnalyticArgs) -> Result<(), Error> {
    let mode = parse_epsilon(&args.epsilon)?;
    let mut text = String::new();
    if args.per_rank {
        let (&[m], &[k]) = (args.m.as_slice(), args.k.as_slice()) else {
            return Err(Error::InvalidParameter(
                "--per-rank needs a single --m and --k".into(),
            ));
        };
        let instance = Instance::new(args.n, m, k)?;
        let eps = resolve_epsilon(mode, &instance, args.tol)?;
        text.push_str("rank,accept_prob\n");
        for (r, p) in analytic::acceptance_curve(&instance, eps)?.points {
            text.push_str(&format!("{r},{}\n", report::round_sig6(p)));
        }
    } else {
        text.push_str("n,m,k,epsilon,expected_size,expected_recall\n");
        for &m in &args.m {
            for &k in &args.k {
                let instance = Instance::new(args.n, m, k)?;
                let eps = resolve_epsilon(mode, &instance, args.tol)?;
                let size = analytic::expected_size(&instance, eps)?;
                let recall = analytic::expected_recall(&instance, eps)?;
                text.push_str(&format!(
                    "{},{m},{k},{},{},{}\n",
                    args.n,
                    report::round_sig6(eps),
                    report::round_sig6(size),
                    report::round_sig6(recall)
                ));
            }
        }
    }
    emit(&text, args.out.as_ref())
}

/// A single cell prints the bare ε; several cells print a CSV table.
fn calibrate(args: &CalibrateArgs) -> Result<(), Error> {
    let single = args.m.len() == 1 && args.k.len() == 1;
    let mut text = if single {
        String::new()
    } else {
        "n,m,k,epsilon\n".to_string()
    };
    for &m in &args.m {
        for &k in &args.k {
            let instance = Instance::new(args.n, m, k)?;
            let eps =
                analytic::calibrate_epsilon(&instance, args.target.unwrap_or(k as f64), args.tol)?;
            if single {
                text.push_str(&format!("{eps:.6}\n"));
            } else {
                text.push_str(&format!("{},{m},{k},{eps:.6}\n", args.n));
            }
        }
    }
    emit(&text, None)
}

fn curves(args: &CurvesArgs) -> Result<(), Error> {
    let instance = Instance::new(args.n, args.m, args.k)?;
    let mut text = String::from("epsilon,quota,tpr,fpr,ppv,ppv_undefined\n");
    for p in analytic::roc_pr_curves(&instance, args.grid)? {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            report::round_sig6(p.epsilon),
            report::round_sig6(p.quota),
            report::round_sig6(p.tpr),
            report::round_sig6(p.fpr),
            report::round_sig6(p.ppv),
            p.ppv_undefined
        ));
    }
    emit(&text, args.out.as_ref())
}

fn select(args: &SelectArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.profile).map_err(|source| Error::Io {
        path: args.profile.clone(),
        source,
    })?;
    let (assignment, profile): (_, Profile) = Profile::parse(&text)?;
    let m = assignment.pool(1).len();
    let instance = Instance::new(assignment.n(), m, args.k)?;
    let report = peer_nomination::validate_assignment(&instance, &assignment);
    if !report.is_ok() {
        return Err(Error::InvalidProfile(report.to_string()));
    }
    let result = run_peer_nomination(&instance, &assignment, &profile, args.epsilon, args.seed)?;
    let accepted: Vec<String> = result.accepted.iter().map(|a| a.to_string()).collect();
    let mut out = io::stdout().lock();
    writeln!(out, "accepted: {}", accepted.join(" ")).map_err(stdout_err)?;
    writeln!(out, "size: {}", result.size()).map_err(stdout_err)?;
    if args.exact {
        let probs = exact_selection_probabilities(&instance, &assignment, &profile, args.epsilon)?;
        writeln!(out, "agent,nominations,probability").map_err(stdout_err)?;
        for (idx, p) in probs.iter().enumerate() {
            writeln!(
                out,
                "{},{},{}",
                idx + 1,
                result.nomination_counts[idx],
                report::round_sig6(*p)
            )
            .map_err(stdout_err)?;
        }
    }
    Ok(())
}
