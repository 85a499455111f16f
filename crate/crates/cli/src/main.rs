//! `freqsec`: dataset generation, training, frequency-secure unit commitment
//! and experiment sweeps from the command line.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use freqsec_core::dataset::DatasetMeta;
use freqsec_core::experiments::{parse_grid, run_sweep, PipelineConfig, SweepMode};
use freqsec_core::solver::{Branching, NodeOrder};
use freqsec_core::uc::solve_uc;
use freqsec_core::{
    evaluate, generate_dataset, load_system_spec, train, Dataset, Error, LossFamily, LossSpec, MilpStatus,
    ModelFile, SimConfig, SolveConfig, Split, SystemSpec, Topology, TrainConfig,
};

#[derive(Parser)]
#[command(name = "freqsec", version, about = "Frequency-secure unit commitment with neural nadir constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample operating points, simulate the largest-unit trip and write a labelled dataset.
    GenData(GenDataArgs),
    /// Train a nadir predictor and print its test metrics as `mae,r2,conservative_proportion`.
    Train(TrainArgs),
    /// Solve unit commitment, optionally with a trained nadir constraint.
    SolveUc(SolveUcArgs),
    /// Train, encode and solve every configuration of a grid and write a report.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// System spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Number of operating points to sample.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives dataset.csv and dataset.meta.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    L1,
    L2,
}

impl From<LossArg> for LossFamily {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::L1 => LossFamily::L1,
            LossArg::L2 => LossFamily::L2,
        }
    }
}

#[derive(Args)]
struct LossArgs {
    #[arg(long, value_enum, default_value = "l1")]
    loss: LossArg,
    /// Weight on over-prediction.
    #[arg(long, default_value_t = 1.0)]
    cplus: f64,
    /// Weight on under-prediction.
    #[arg(long, default_value_t = 1.0)]
    cminus: f64,
}

impl LossArgs {
    fn spec(&self) -> Result<LossSpec, CliError> {
        let spec = LossSpec {
            family: self.loss.into(),
            c_plus: self.cplus,
            c_minus: self.cminus,
        };
        spec.validate().map_err(CliError::usage)?;
        Ok(spec)
    }
}

#[derive(Args)]
struct TrainingArgs {
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
}

impl TrainingArgs {
    fn config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let cfg = TrainConfig {
            epochs: self.epochs,
            learning_rate: self.lr,
            batch_size: self.batch_size,
            seed,
            ..TrainConfig::default()
        };
        cfg.validate().map_err(CliError::usage)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset CSV written by gen-data; its .meta.json sidecar must sit next to it.
    #[arg(long)]
    data: PathBuf,
    /// Hidden layer sizes, comma separated.
    #[arg(long, default_value = "32")]
    hidden: String,
    #[command(flatten)]
    loss: LossArgs,
    #[command(flatten)]
    training: TrainingArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives model.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchingArg {
    MostFractional,
    PseudoCost,
}

#[derive(Clone, Copy, ValueEnum)]
enum NodeOrderArg {
    BestBound,
    DepthFirst,
}

#[derive(Args)]
struct SolverArgs {
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 1000.0)]
    time_limit: f64,
    #[arg(long)]
    node_limit: Option<usize>,
    /// Stop once the relative gap is at most this value.
    #[arg(long, default_value_t = 0.0)]
    gap: f64,
    #[arg(long, value_enum, default_value = "most-fractional")]
    branching: BranchingArg,
    #[arg(long, value_enum, default_value = "best-bound")]
    node_order: NodeOrderArg,
    /// Nodes between solver log lines.
    #[arg(long, default_value_t = 100)]
    log_interval: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolveConfig, CliError> {
        let cfg = SolveConfig {
            time_limit: self.time_limit,
            node_limit: self.node_limit.unwrap_or(usize::MAX),
            mip_gap_target: self.gap,
            branching: match self.branching {
                BranchingArg::MostFractional => Branching::MostFractional,
                BranchingArg::PseudoCost => Branching::PseudoCost,
            },
            node_order: match self.node_order {
                NodeOrderArg::BestBound => NodeOrder::BestBound,
                NodeOrderArg::DepthFirst => NodeOrder::DepthFirst,
            },
            log_interval: self.log_interval,
        };
        cfg.validate().map_err(CliError::usage)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveUcArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Trained model JSON; without it the commitment has no frequency constraint.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Minimum predicted nadir in Hz; defaults to the spec's nadir limit.
    #[arg(long)]
    nadir_floor: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory; receives schedule.csv, schedule.txt and solver.log.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Loss,
    Size,
    Topology,
}

impl From<ModeArg> for SweepMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Loss => SweepMode::Loss,
            ModeArg::Size => SweepMode::Size,
            ModeArg::Topology => SweepMode::Topology,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Configurations: "l1:1,l1:5" (loss), "2,4,8,32" (size) or "[32];[16,16]" (topology).
    /// Defaults to the mode's standard grid.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    spec: PathBuf,
    /// Existing dataset CSV; generated from --n and --seed when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hidden sizes used in loss mode.
    #[arg(long, default_value = "8")]
    hidden: String,
    /// Loss used in size and topology modes.
    #[command(flatten)]
    loss: LossArgs,
    #[command(flatten)]
    training: TrainingArgs,
    #[arg(long)]
    nadir_floor: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory; receives report.csv.
    #[arg(long)]
    out: PathBuf,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(e: impl fmt::Display) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }

    fn other(e: impl fmt::Display) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Self::usage(e),
            _ => Self::other(e),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::other(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::other(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::other(format!("{}: {e}", dir.display())))
}

fn load_spec(path: &Path) -> Result<SystemSpec, CliError> {
    load_system_spec(&read(path)?).map_err(|e| CliError::other(format!("{}: {e}", path.display())))
}

fn meta_path(data: &Path) -> PathBuf {
    data.with_extension("meta.json")
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let meta_file = meta_path(path);
    let meta: DatasetMeta = serde_json::from_str(&read(&meta_file)?)
        .map_err(|e| CliError::other(format!("{}: {e}", meta_file.display())))?;
    Ok(Dataset::from_csv(&read(path)?, &meta)?)
}

fn parse_hidden(text: &str) -> Result<Vec<usize>, CliError> {
    Topology::parse_hidden(text).map_err(CliError::usage)
}

fn gen_data(args: &GenDataArgs) -> Result<(), CliError> {
    let spec = load_spec(&args.spec)?;
    let n = args.n as usize;
    let data = generate_dataset(&spec, n, args.seed, &SimConfig::default())?;
    create_dir(&args.out)?;
    let csv = write(&args.out, "dataset.csv", &data.to_csv())?;
    let meta = serde_json::to_string_pretty(&data.meta(&spec, n)).map_err(CliError::other)?;
    fs::write(meta_path(&csv), meta + "\n").map_err(CliError::other)?;
    println!("{} of {n} samples converged; wrote {}", data.len(), csv.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let data = load_dataset(&args.data)?;
    let hidden = parse_hidden(&args.hidden)?;
    let loss = args.loss.spec()?;
    let cfg = args.training.config(args.seed)?;
    let (params, _) = train(&data, &hidden, &loss, &cfg)?;
    let metrics = evaluate(&params, &data, Split::Test)?;
    create_dir(&args.out)?;
    write(&args.out, "model.json", &(ModelFile::new(&params, loss, args.seed).to_json() + "\n"))?;
    println!("{},{},{}", metrics.mae, metrics.r2, metrics.conservative_proportion);
    Ok(())
}

fn solve(args: &SolveUcArgs) -> Result<(), CliError> {
    let spec = load_spec(&args.spec)?;
    let cfg = args.solver.config()?;
    let network = match &args.model {
        Some(path) => Some(ModelFile::from_json(&read(path)?)?.params()?),
        None => None,
    };
    let floor = match (&network, args.nadir_floor) {
        (None, _) => f64::NEG_INFINITY,
        (Some(_), Some(f)) => f,
        (Some(_), None) => spec.nadir_limit_hz,
    };
    let (_, result, solution) = solve_uc(&spec, network.as_ref(), floor, &cfg)?;
    create_dir(&args.out)?;
    let mut log = result.log.join("\n");
    log.push_str(&format!(
        "\nstatus,{},objective,{},bound,{},gap,{},nodes,{},time_s,{:.3}\n",
        result.status.label(),
        result.objective,
        result.best_bound,
        result.mip_gap,
        result.nodes,
        result.wall_time
    ));
    write(&args.out, "solver.log", log.trim_start())?;
    match result.status {
        MilpStatus::Infeasible => {
            return Err(CliError {
                code: 3,
                message: "model is infeasible: no schedule meets load and the nadir floor".into(),
            })
        }
        MilpStatus::LimitNoIncumbent => {
            return Err(CliError {
                code: 4,
                message: format!("limit reached after {} nodes without a feasible schedule", result.nodes),
            })
        }
        MilpStatus::Unbounded => return Err(CliError::other("model is unbounded")),
        MilpStatus::Optimal | MilpStatus::FeasibleLimitHit => {}
    }
    let solution = solution.ok_or_else(|| CliError::other("solver returned no schedule"))?;
    write(&args.out, "schedule.csv", &solution.to_csv(&spec))?;
    write(&args.out, "schedule.txt", &solution.to_grid(&spec))?;
    print!("{}", solution.to_grid(&spec));
    println!(
        "status {}  cost {}  gap {}  nodes {}",
        result.status.label(),
        result.objective,
        result.mip_gap,
        result.nodes
    );
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let spec = load_spec(&args.spec)?;
    let mode: SweepMode = args.mode.into();
    let loss = args.loss.spec()?;
    let hidden = parse_hidden(&args.hidden)?;
    let grid = args.grid.as_deref().unwrap_or(mode.default_grid());
    let entries = parse_grid(mode, grid, &hidden, &loss)?;
    let cfg = PipelineConfig {
        train: args.training.config(args.seed)?,
        solve: args.solver.config()?,
        nadir_floor: args.nadir_floor.unwrap_or(spec.nadir_limit_hz),
    };
    let data = match &args.data {
        Some(path) => load_dataset(path)?,
        None => generate_dataset(&spec, args.n as usize, args.seed, &SimConfig::default())?,
    };
    let report = run_sweep(&spec, &data, &entries, &cfg);
    create_dir(&args.out)?;
    let csv = report.to_csv();
    write(&args.out, "report.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

/// Caps the worker pool at `FREQSEC_THREADS` when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("FREQSEC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("FREQSEC_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(CliError::other)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::SolveUc(a) => solve(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
