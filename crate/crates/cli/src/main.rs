use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlmc_sr::driver::{run, Method, RunRecord};
use mlmc_sr::harness::{
    build_model, fit_cost_slope, read_summary, run_experiment, theoretical_cost, write_outputs,
    ExperimentConfig, RateMethod, ShippedModel,
};
use mlmc_sr::par::Execution;
use mlmc_sr::refinement::Model;
use mlmc_sr::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_IO: u8 = 4;

/// Failure-probability estimation with multilevel Monte Carlo and
/// selective refinement.
#[derive(Parser)]
#[command(name = "mlmc-sr", version)]
struct Cli {
    /// Worker threads for the sampling loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run at one tolerance; prints the run record as key-value lines.
    Estimate {
        #[command(flatten)]
        run: RunArgs,
        /// Tolerance to use (default: the first entry of `epsilons`).
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Repeated runs over the whole epsilon grid; writes CSV files.
    Experiment {
        #[command(flatten)]
        run: RunArgs,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Asymptotic cost of MC, MLMC and MLMC-SR with unit constants.
    Rates {
        /// Cost exponents to tabulate.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0])]
        q: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Fit cost slopes from a summary.csv written by `experiment`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Shipped models.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
}

#[derive(Subcommand)]
enum ModelsAction {
    List,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the solve at tolerance index 0 when it would be repeated.
    #[arg(long)]
    skip_redundant: bool,
    /// `mlmc-sr` or `mc`.
    #[arg(long)]
    method: Option<Method>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(method) = self.method {
            cfg.method = method;
        }
        cfg.skip_redundant |= self.skip_redundant;
        Ok(cfg)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::ModelInit(_) => EXIT_CONFIG,
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        _ => 1,
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), Error> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    eprintln!("warning: built without the parallel feature; --threads {n} is ignored");
    Ok(())
}

fn single_run<M: Model>(model: &M, cfg: &ExperimentConfig, epsilon: f64) -> Result<RunRecord, Error> {
    let estimator = cfg.estimator(epsilon)?;
    run(cfg.method, model, &estimator, cfg.seed, &cfg.run_options(Execution::Parallel))
}

fn print_record(cfg: &ExperimentConfig, reference: Option<f64>, r: &RunRecord) {
    let join = |v: Vec<String>| v.join(" ");
    println!("method = {}", r.method.as_str());
    println!("model = {}", cfg.model.name);
    println!("seed = {}", r.seed);
    println!("epsilon = {}", r.config.epsilon);
    println!("estimate_raw = {}", r.estimate_raw);
    println!("estimate_clamped = {}", r.estimate_clamped);
    if let Some(p) = reference {
        println!("reference = {p}");
        println!("abs_error = {}", (r.estimate_raw - p).abs());
    }
    println!("final_L = {}", r.final_level);
    println!("total_cost = {}", r.total_cost);
    println!("converged = {}", r.converged);
    println!("N = {}", join(r.drawn().iter().map(u64::to_string).collect()));
    println!(
        "level_cost = {}",
        join(r.levels.iter().map(|l| l.cost.to_string()).collect())
    );
    for (l, row) in r.refinement_histogram.iter().enumerate() {
        println!(
            "histogram_{l} = {}",
            join(row.iter().map(u64::to_string).collect())
        );
    }
}

fn estimate(args: &RunArgs, epsilon: Option<f64>) -> Result<(), Error> {
    let cfg = args.load()?;
    let epsilon = epsilon.unwrap_or(cfg.epsilons[0]);
    let model = build_model(&cfg.model, cfg.q)?;
    let (outcome, exact) = match &model {
        ShippedModel::Synthetic(m) => (single_run(m, &cfg, epsilon), m.exact_probability(cfg.y)),
        ShippedModel::Elliptic(m) => (single_run(m, &cfg, epsilon), m.exact_probability(cfg.y)),
        ShippedModel::Constant(m) => (single_run(m, &cfg, epsilon), m.exact_probability(cfg.y)),
    };
    let reference = exact.or(cfg.reference.map(|r| r.probability));
    match outcome {
        Ok(r) => {
            print_record(&cfg, reference, &r);
            Ok(())
        }
        Err(Error::NonConvergence { level_cap, record }) => {
            print_record(&cfg, reference, &record);
            Err(Error::NonConvergence { level_cap, record })
        }
        Err(e) => Err(e),
    }
}

fn experiment(args: &RunArgs, output_dir: Option<PathBuf>) -> Result<(), Error> {
    let cfg = args.load()?;
    let dir = output_dir
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: set output_dir or pass --output-dir".into()))?;
    let report = run_experiment(&cfg, Execution::Parallel)?;
    write_outputs(&report, &dir)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("epsilon,rmse,mean_cost,median_cost,mean_L");
    for s in report.summaries() {
        println!(
            "{},{},{},{},{}",
            s.epsilon, s.rmse, s.mean_cost, s.median_cost, s.mean_level
        );
    }
    println!("wrote {}", dir.display());
    let stalled = report.nonconverged();
    if stalled > 0 {
        return Err(Error::NonConvergence {
            level_cap: cfg.l_max,
            record: Box::new(
                report
                    .points
                    .iter()
                    .flat_map(|p| &p.records)
                    .find(|r| !r.converged)
                    .expect("a non-converged record")
                    .clone(),
            ),
        });
    }
    Ok(())
}

fn rates(qs: &[f64], epsilon: f64, summary: Option<&Path>) -> Result<(), Error> {
    println!("epsilon = {epsilon}");
    println!("q,{}", RateMethod::ALL.map(|m| m.as_str()).join(","));
    for &q in qs {
        let row = RateMethod::ALL
            .iter()
            .map(|&m| theoretical_cost(m, q, epsilon).map(|c| format!("{c:.6e}")))
            .collect::<Result<Vec<_>, _>>()?;
        println!("{q},{}", row.join(","));
    }
    if let Some(path) = summary {
        let rows = read_summary(io::BufReader::new(fs::File::open(path)?))?;
        let mut qs: Vec<f64> = rows.iter().map(|r| r.q).collect();
        qs.sort_by(f64::total_cmp);
        qs.dedup();
        for q in qs {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.q == q)
                .map(|r| (r.epsilon, r.mean_cost))
                .collect();
            let fit = fit_cost_slope(&points, q)?;
            match fit.log_corrected_slope {
                Some(c) => println!("fit q={q}: slope {:.4}, log-corrected slope {c:.4}", fit.slope),
                None => println!("fit q={q}: slope {:.4}", fit.slope),
            }
        }
    }
    Ok(())
}

fn list_models() {
    println!("synthetic-normal  params: b (default 0.1); cost h^-q from the config");
    println!("elliptic-flux-1d  params: master_cells (default 4096), sigma (default 1), rho (default 0.1)");
    println!("constant          params: value (required)");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads(cli.threads).and_then(|()| match &cli.command {
        Command::Estimate { run, epsilon } => estimate(run, *epsilon),
        Command::Experiment { run, output_dir } => experiment(run, output_dir.clone()),
        Command::Rates { q, epsilon, summary } => rates(q, *epsilon, summary.as_deref()),
        Command::Models {
            action: ModelsAction::List,
        } => {
            list_models();
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
