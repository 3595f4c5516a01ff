use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shrinkmean::estimators::{parse_estimator_list, EstimatorKind};
use shrinkmean::finance::{
    load_returns_csv, rolling_backtest, synthetic_panel, write_returns_csv, BacktestConfig,
    TargetStrategy,
};
use shrinkmean::harness::{
    ks_critical_value, ks_statistic, qq_data, run_study, write_intensities_csv, write_losses_csv,
    write_qq_csv, write_table1_csv, McConfig, QqRow, Quantity, TargetMode,
};
use shrinkmean::Error;

#[derive(Parser)]
#[command(name = "shrinkmean", version, about = "Shrinkage estimators of high-dimensional mean vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo losses and shrinkage intensities over a (p, c) grid.
    Simulate(SimulateArgs),
    /// Frequencies of negative oracle and bona fide shrinkage intensities.
    Table1(GridArgs),
    /// Standardized intensities against normal quantiles.
    Qq(QqArgs),
    /// Rolling-window backtest on a returns CSV.
    Backtest(BacktestArgs),
    /// Generates a synthetic returns panel and backtests it.
    Demo(DemoArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Root seed [default: from config, else 12345].
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: all cores].
    #[arg(long, env = "SHRINKMEAN_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct GridArgs {
    /// TOML file with McConfig keys; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dimensions, comma separated [default: 20,100,250,500].
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    /// Concentrations p/n, comma separated [default: 0.5,0.9,2.0].
    #[arg(long, value_delimiter = ',')]
    c: Option<Vec<f64>>,
    /// Replications per cell [default: 1000].
    #[arg(long)]
    n_reps: Option<usize>,
    /// Growth exponent of the mean norm, 0 or 1 [default: 0].
    #[arg(long)]
    gamma: Option<f64>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Estimators, comma separated [default: sample-mean,olse,olse-oracle].
    #[arg(long)]
    estimators: Option<String>,
    /// Target: drawn, equal-to-mu_n, naive or constant:<v> [default: drawn].
    #[arg(long)]
    target: Option<String>,
    /// Use the positive-part James-Stein correction with the printed sign [default: true].
    #[arg(long)]
    as_printed_jsplus: Option<bool>,
}

#[derive(Args)]
struct QqArgs {
    /// alpha-oracle, beta-oracle, alpha-bf or beta-bf.
    #[arg(long)]
    quantity: String,
    /// TOML file with McConfig keys; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dimension.
    #[arg(long, default_value_t = 250)]
    p: usize,
    /// Concentration p/n; bona fide quantities need c < 1.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Replications.
    #[arg(long, default_value_t = 1000)]
    n_reps: usize,
    /// Growth exponent of the mean norm, 0 or 1.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct BacktestOptions {
    /// TOML file with BacktestConfig keys; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Window sizes, comma separated [default: 25,50,75,100].
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    /// Estimators, comma separated [default: sample-mean,olse,js-high-dim,js-positive-part,wang].
    #[arg(long)]
    estimators: Option<String>,
    /// Targets, comma separated [default: uniform-range-draw,signs,ones].
    #[arg(long, value_delimiter = ',')]
    target: Option<Vec<String>>,
    /// Start every window size at the largest window.
    #[arg(long)]
    align_start: bool,
    /// Draw random targets once per window size instead of once per window.
    #[arg(long)]
    fixed_targets: bool,
    /// Use the positive-part James-Stein correction with the printed sign [default: true].
    #[arg(long)]
    as_printed_jsplus: Option<bool>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct BacktestArgs {
    /// Returns CSV: one row per period, one column per asset.
    #[arg(long)]
    returns: PathBuf,
    /// The CSV has no header row.
    #[arg(long)]
    no_header: bool,
    #[command(flatten)]
    options: BacktestOptions,
}

#[derive(Args)]
struct DemoArgs {
    /// Assets in the generated panel.
    #[arg(long, default_value_t = 30)]
    assets: usize,
    /// Periods in the generated panel.
    #[arg(long, default_value_t = 150)]
    periods: usize,
    #[command(flatten)]
    options: BacktestOptions,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidRecipe(_)
            | Error::UnsupportedGamma(_)
            | Error::InvalidLaw(_)
            | Error::UnsupportedConcentration(_)
            | Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::RaggedRows { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure::Usage(message.into())
}

fn with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(job()),
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Failure::Runtime(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| usage(format!("cannot create output directory {}: {e}", dir.display())))
}

fn load_mc_config(path: Option<&Path>) -> CliResult<McConfig> {
    match path {
        Some(p) => Ok(McConfig::from_path(p)?),
        None => Ok(McConfig::default()),
    }
}

fn grid_config(args: &GridArgs) -> CliResult<McConfig> {
    let mut config = load_mc_config(args.config.as_deref())?;
    if let Some(p) = &args.p {
        config.p_grid = p.clone();
    }
    if let Some(c) = &args.c {
        config.c_grid = c.clone();
    }
    if let Some(n) = args.n_reps {
        config.replications = n;
    }
    if let Some(g) = args.gamma {
        config.gamma = g;
    }
    if let Some(s) = args.run.seed {
        config.seed = s;
    }
    Ok(config)
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let mut config = grid_config(&args.grid)?;
    if let Some(list) = &args.estimators {
        config.estimators = parse_estimator_list(list)?;
    }
    if let Some(t) = &args.target {
        config.target = t.parse::<TargetMode>()?;
    }
    if let Some(v) = args.as_printed_jsplus {
        config.as_printed_jsplus = v;
    }
    config.validate()?;
    prepare_out(&args.grid.run.out)?;
    let report = with_threads(args.grid.run.threads, || run_study(&config))??;
    write_losses_csv(&args.grid.run.out.join("losses.csv"), &report)?;
    write_intensities_csv(&args.grid.run.out.join("intensities.csv"), &report)?;
    Ok(())
}

fn table1(args: GridArgs) -> CliResult<()> {
    let mut config = grid_config(&args)?;
    config.estimators = vec![EstimatorKind::Olse, EstimatorKind::OlseOracle];
    config.validate()?;
    prepare_out(&args.run.out)?;
    let report = with_threads(args.run.threads, || run_study(&config))??;
    let rows = report.negative_frequency_table();
    write_table1_csv(&args.run.out.join("table1.csv"), &rows)?;
    for r in &rows {
        println!(
            "p = {:>4}  c = {:<4}  oracle {:.3}  bona fide {:.3}",
            r.p, r.c, r.oracle, r.bona_fide
        );
    }
    Ok(())
}

fn qq(args: QqArgs) -> CliResult<()> {
    let quantity: Quantity = args.quantity.parse()?;
    let mut config = load_mc_config(args.config.as_deref())?;
    config.p_grid = vec![args.p];
    config.c_grid = vec![args.c];
    config.replications = args.n_reps;
    config.gamma = args.gamma;
    config.estimators = vec![EstimatorKind::Olse];
    if let Some(s) = args.run.seed {
        config.seed = s;
    }
    config.validate()?;
    if quantity.is_bona_fide() && !(args.c < 1.0) {
        return Err(Error::UnsupportedConcentration(args.c).into());
    }
    prepare_out(&args.run.out)?;
    let report = with_threads(args.run.threads, || run_study(&config))??;
    let cell = &report.cells[0];
    let z = cell.standardized(quantity)?;
    let pairs = qq_data(&z)?;
    let rows: Vec<QqRow> = pairs
        .into_iter()
        .map(|(theoretical, empirical)| QqRow {
            quantity: quantity.to_string(),
            p: cell.p,
            c: cell.c,
            theoretical,
            empirical,
        })
        .collect();
    write_qq_csv(&args.run.out.join("qq.csv"), &rows)?;
    let ks = ks_statistic(&z)?;
    let critical = ks_critical_value(z.len(), 0.01)?;
    println!("ks_statistic = {ks:.6}  critical_1pct = {critical:.6}  samples = {}", z.len());
    Ok(())
}

fn backtest_config(options: &BacktestOptions) -> CliResult<BacktestConfig> {
    let mut config = match &options.config {
        Some(p) => BacktestConfig::from_path(p)?,
        None => BacktestConfig::default(),
    };
    if let Some(w) = &options.windows {
        config.windows = w.clone();
    }
    if let Some(list) = &options.estimators {
        config.estimators = parse_estimator_list(list)?;
    }
    if let Some(targets) = &options.target {
        config.targets = targets
            .iter()
            .map(|t| t.parse::<TargetStrategy>())
            .collect::<Result<_, _>>()?;
    }
    config.align_start |= options.align_start;
    config.fixed_targets |= options.fixed_targets;
    if let Some(v) = options.as_printed_jsplus {
        config.as_printed_jsplus = v;
    }
    if let Some(s) = options.run.seed {
        config.seed = s;
    }
    Ok(config)
}

fn run_backtest(panel: &shrinkmean::finance::ReturnsPanel, options: &BacktestOptions) -> CliResult<()> {
    let config = backtest_config(options)?;
    prepare_out(&options.run.out)?;
    let report = with_threads(options.run.threads, || rolling_backtest(panel, &config))??;
    report.write_csv(&options.run.out.join("backtest.csv"))?;
    for r in &report.rows {
        println!(
            "n = {:>4}  {:<17} {:<18} L = {:.4}  windows = {}",
            r.window_n, r.estimator, r.target, r.loss_x1e4, r.windows_evaluated
        );
    }
    Ok(())
}

fn backtest(args: BacktestArgs) -> CliResult<()> {
    let panel = load_returns_csv(&args.returns, !args.no_header).map_err(|e| match e {
        Error::Io(msg) => usage(msg),
        other => Failure::from(other),
    })?;
    run_backtest(&panel, &args.options)
}

fn demo(args: DemoArgs) -> CliResult<()> {
    let seed = args.options.run.seed.unwrap_or(shrinkmean::harness::DEFAULT_SEED);
    let mut panel = synthetic_panel(args.assets, args.periods, 0.01, seed)?;
    panel.asset_labels = Some((1..=args.assets).map(|i| format!("asset{i}")).collect());
    prepare_out(&args.options.run.out)?;
    write_returns_csv(&args.options.run.out.join("demo_returns.csv"), &panel)?;
    run_backtest(&panel, &args.options)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Table1(a) => table1(a),
        Command::Qq(a) => qq(a),
        Command::Backtest(a) => backtest(a),
        Command::Demo(a) => demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
