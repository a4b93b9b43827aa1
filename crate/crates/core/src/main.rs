use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use riskdispatch::dispatch::DispatchSolution;
use riskdispatch::experiments::{
    generate_synthetic_trace, run_sweep, Experiment, ExperimentConfig, Scenario, TraceSource,
};
use riskdispatch::risk::{validate, DEFAULT_TRIALS};
use riskdispatch::scenario::ForecastModel;
use riskdispatch::{Error, Result};

/// Risk-aware DC optimal power flow with wind reserves.
#[derive(Parser)]
#[command(name = "dispatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one dispatch and print the solution as JSON.
    Solve(SolveArgs),
    /// Run the α and β sweeps of a config file and write CSV tables.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides the config's worker count.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Estimate the risk of a solved schedule by Monte Carlo.
    Validate {
        /// Dispatch solution JSON written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        /// Forecast model JSON written by `solve --model-out`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Write a synthetic normalized wind trace as CSV.
    GenTrace {
        #[arg(long, default_value_t = 589)]
        hours: usize,
        #[arg(long, default_value_t = 7)]
        farms: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    case: PathBuf,
    /// `low-wind`, `high-wind`, `trace-hour:T` or a comma-separated MW vector.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Wind trace CSV for the covariance; a synthetic trace is used otherwise.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// The trace is already in MW rather than normalized to capacity.
    #[arg(long)]
    trace_mw: bool,
    #[arg(long, default_value_t = 589)]
    trace_hours: usize,
    /// External bus ids for wind farms, e.g. `1,2,5`.
    #[arg(long, value_delimiter = ',')]
    wind_buses: Option<Vec<u32>>,
    #[arg(long)]
    conventional_scale: Option<f64>,
    #[arg(long)]
    penetration: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    mean_scale: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Loads scaled by this factor.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the per-bus and per-line CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Save the forecast model JSON for `validate`.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let penetration = match (args.conventional_scale, args.penetration) {
        (None, None) => None,
        (Some(s), Some(p)) => Some((s, p)),
        (None, Some(p)) => Some((1.0 - p, p)),
        (Some(_), None) => return Err(Error::InvalidArgument("--conventional-scale needs --penetration".into())),
    };
    let trace = match args.trace {
        Some(path) => TraceSource::File {
            path,
            normalized: !args.trace_mw,
        },
        None => TraceSource::Synthetic {
            hours: args.trace_hours,
            seed: args.seed,
        },
    };
    let config = ExperimentConfig {
        case_path: args.case,
        wind_buses: args.wind_buses,
        penetration,
        trace,
        scenario: args.scenario.parse::<Scenario>()?,
        mean_scale: args.mean_scale,
        alpha_list: vec![args.alpha],
        beta_list: vec![args.beta],
        samples: args.samples,
        n_trials: 1,
        seed: args.seed,
        output_dir: PathBuf::from("."),
        jobs: 1,
        clip_to_capacity: false,
        tol: args.tol,
    };
    let exp = Experiment::prepare(&config)?;
    let (_, solution) = exp.solve(args.alpha, args.beta)?;
    if let Some(path) = &args.model_out {
        fs::write(path, exp.model.to_json()?)?;
    }
    if let Some(path) = &args.csv {
        solution.write_csv(&exp.case, fs::File::create(path)?)?;
    }
    write_or_print(args.output.as_ref(), &solution.to_json()?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => solve(args),
        Command::Sweep {
            config,
            output_dir,
            jobs,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(dir) = output_dir {
                config.output_dir = dir;
            }
            if let Some(j) = jobs {
                config.jobs = j;
            }
            let out = run_sweep(&config)?;
            for p in [&out.alpha_sweep, &out.beta_sweep, &out.lmp_profiles, &out.schedules] {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Validate {
            solution,
            model,
            trials,
            seed,
            alpha,
        } => {
            let read = |p: &PathBuf| {
                fs::read_to_string(p)
                    .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", p.display())))
            };
            let solution = DispatchSolution::<f64>::from_json(&read(&solution)?)?;
            let model = ForecastModel::<f64>::from_json(&read(&model)?)?;
            let report = validate(&solution.w, &model, trials, seed, alpha)?;
            write_or_print(None, &report.to_json()?)
        }
        Command::GenTrace {
            hours,
            farms,
            seed,
            output,
        } => {
            let trace = generate_synthetic_trace(hours, farms, seed)?;
            match output {
                Some(p) => trace.write_csv(fs::File::create(p)?),
                None => trace.write_csv(std::io::stdout().lock()),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
