use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use ttql::config::{ExperimentConfig, SuiteKind};
use ttql::error::{Error, Result};
use ttql::learner::{GatePolicy, InitQ, LearnerConfig};
use ttql::rng::rng_from_seed;
use ttql::solver::solve_q_star;
use ttql::synth::{perturb, random_mdp, PerturbSpec};
use ttql::{bounds, chart, experiment, files};

#[derive(Parser)]
#[command(
    name = "ttql",
    version,
    about = "Target-transfer Q-learning on finite tabular MDPs",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random MDP (optionally perturbed) and write it as JSON.
    Generate(GenerateArgs),
    /// Solve an MDP to its optimal Q-table with a certified tolerance.
    Solve(SolveArgs),
    /// Run the learner on an MDP, transferring from a source MDP's solution.
    Learn(LearnArgs),
    /// Run a full experiment suite from a config file.
    Suite(SuiteArgs),
    /// Sweep the closed-form decay bounds against exact weights; exit 1 on
    /// any violation.
    BoundsVerify(BoundsVerifyArgs),
    /// Draw the median error curves of a suite as an SVG chart.
    Chart(ChartArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 50)]
    states: usize,
    #[arg(long, default_value_t = 50)]
    actions: usize,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Perturbation axis (gamma, reward, or transition); needs --epsilon.
    #[arg(long, requires = "epsilon")]
    axis: Option<String>,
    /// Perturbation magnitude; needs --axis.
    #[arg(long, requires = "axis")]
    epsilon: Option<f64>,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    /// MDP to learn on.
    #[arg(long)]
    mdp: PathBuf,
    /// Source MDP whose solution seeds the transfer; required unless the
    /// gate is 'never'.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Gate policy: bellman, always, or never.
    #[arg(long, default_value = "bellman")]
    gate: String,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    /// Steps between gate re-evaluations.
    #[arg(long, default_value_t = 1)]
    period: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver tolerance for the optimal and source tables.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Write the per-step trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final Q-table here.
    #[arg(long)]
    final_q: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Config file; defaults are used when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Suite to run with default settings when no config is given
    /// (exp-similarity, exp-safecond, bounds-verify, or custom).
    #[arg(long, default_value = "exp-similarity", conflicts_with = "config")]
    suite: String,
    /// Override the config's output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsVerifyArgs {
    /// Write the sweep CSV here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ChartArgs {
    /// A suite's curves.csv.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Linear instead of logarithmic error axis.
    #[arg(long)]
    linear: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Learn(args) => learn(args),
        Command::Suite(args) => suite(args),
        Command::BoundsVerify(args) => bounds_verify(args),
        Command::Chart(args) => chart_cmd(args),
    }
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let mut rng = rng_from_seed(args.seed);
    let mut mdp = random_mdp(args.states, args.actions, args.gamma, &mut rng)?;
    if let (Some(axis), Some(eps)) = (&args.axis, args.epsilon) {
        let spec = PerturbSpec::new(axis.parse()?, eps)?;
        mdp = perturb(&mdp, &spec, &mut rng)?;
    }
    files::save_mdp(&args.output, &mdp)?;
    Ok(ExitCode::SUCCESS)
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let mdp = files::load_mdp(&args.input)?;
    let report = solve_q_star(&mdp, args.tol)?;
    files::save_q_table(&args.output, &report.q_star)?;
    println!("iterations = {}", report.iterations);
    println!("residual = {}", report.residual);
    println!("guaranteed_mne = {}", report.guaranteed_mne);
    Ok(ExitCode::SUCCESS)
}

fn learn(args: LearnArgs) -> Result<ExitCode> {
    let gate: GatePolicy = args.gate.parse()?;
    let mdp = files::load_mdp(&args.mdp)?;
    let q_star = solve_q_star(&mdp, args.tol)?.q_star;
    let source_q = match (&args.source, gate) {
        (Some(path), _) => {
            let source_mdp = files::load_mdp(path)?;
            if source_mdp.n_states() != mdp.n_states() || source_mdp.n_actions() != mdp.n_actions() {
                return Err(Error::ShapeMismatch(format!(
                    "source is {}x{}, target is {}x{}",
                    source_mdp.n_states(),
                    source_mdp.n_actions(),
                    mdp.n_states(),
                    mdp.n_actions()
                )));
            }
            Some(solve_q_star(&source_mdp, args.tol)?.q_star)
        }
        (None, GatePolicy::NeverTransfer) => None,
        (None, _) => {
            return Err(Error::InvalidArgument(format!(
                "gate '{}' needs --source",
                gate.name()
            )));
        }
    };

    let cfg = LearnerConfig {
        horizon: args.horizon,
        gate,
        safe_check_period: args.period,
        init: InitQ::Zero,
    };
    let mut rng = rng_from_seed(args.seed);
    let trace = ttql::learner::run(&mdp, source_q.as_ref(), &q_star, &cfg, &mut rng)?;

    if let Some(path) = &args.trace {
        let mut body = String::from("step,mne,mnbe,transfer_flag,beta_hat,alpha\n");
        for row in &trace.steps {
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.step,
                row.mne,
                row.mnbe,
                u8::from(row.transfer),
                row.beta_hat,
                row.alpha
            ));
        }
        std::fs::write(path, body)?;
    }
    if let Some(path) = &args.final_q {
        files::save_q_table(path, &trace.final_q)?;
    }

    let transferred = trace.steps.iter().filter(|r| r.transfer).count();
    println!("final_mne = {}", trace.final_q.sup_diff(&q_star)?);
    println!("final_mnbe = {}", ttql::metrics::mnbe_exact(&trace.final_q, &mdp)?);
    println!("transfer_steps = {transferred}/{}", trace.steps.len());
    Ok(ExitCode::SUCCESS)
}

fn suite(args: SuiteArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        // an unreadable config file is the caller's fault, not a runtime failure
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
            other => other,
        })?,
        None => ExperimentConfig::default_for(args.suite.parse::<SuiteKind>()?),
    };
    if let Some(out) = args.output {
        cfg.output_dir = out;
    }
    if cfg.suite == SuiteKind::BoundsVerify {
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.output_dir)?;
        std::fs::write(cfg.output_dir.join("config.cfg"), cfg.canonical())?;
        let (csv, violations) = bounds::verify_grid()?;
        std::fs::write(cfg.output_dir.join("bounds.csv"), csv)?;
        println!("wrote {}", cfg.output_dir.display());
        if violations > 0 {
            eprintln!("bound violations at {violations} grid entries");
            return Ok(ExitCode::from(1));
        }
        return Ok(ExitCode::SUCCESS);
    }
    let result = experiment::run_suite(&cfg)?;
    for v in &result.variants {
        println!(
            "variant={} gate={} distance={} median_final_mne={} q25={} q75={}",
            v.label, v.gate.name(), v.distance, v.median_final, v.q25_final, v.q75_final
        );
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn bounds_verify(args: BoundsVerifyArgs) -> Result<ExitCode> {
    let (csv, violations) = bounds::verify_grid()?;
    match &args.output {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    if violations > 0 {
        eprintln!("bound violations at {violations} grid entries");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn chart_cmd(args: ChartArgs) -> Result<ExitCode> {
    chart::chart_curves(&args.input, &args.output, !args.linear)?;
    Ok(ExitCode::SUCCESS)
}
