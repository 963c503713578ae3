//! Command-line runner for weighted least-squares sampling experiments.
//!
//! Subcommands: `weights` tabulates the sampling density, `sample` draws
//! one sample through a pipeline, `schedule` prints split constants, and
//! `experiment` runs seeded Monte Carlo trials to CSV plus a JSON
//! summary. Outputs are byte-stable for a fixed config and seed.

mod config;
mod report;

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::ExperimentConfig;
use report::{ExperimentSummary, ScheduleJson, TrialFailure, TrialFrame};
use wlsq::estimator::stage_sample;
use wlsq::sparsify::build_schedule;
use wlsq::{monte_carlo, FunctionSpace, Pipeline, RngStream, TrialOutcome};

#[derive(Parser)]
#[command(
    name = "wlsq",
    version,
    about = "Experiment runner for Christoffel-weighted least-squares sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the squared basis sum and sampling weight on a uniform grid
    Weights {
        /// Basis name: legendre, fourier, or piecewise_constant
        #[arg(long)]
        basis: String,
        /// Space dimension (odd for fourier)
        #[arg(long)]
        n: usize,
        /// Quadrature order override
        #[arg(long)]
        quadrature_order: Option<usize>,
        /// Grid points; 1 evaluates the domain midpoint only
        #[arg(long, default_value_t = 201)]
        grid_size: usize,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one sample through a pipeline and list its points as CSV
    Sample {
        /// JSON experiment config
        #[arg(long)]
        config: PathBuf,
        /// Seed override
        #[arg(long)]
        seed: Option<u64>,
        /// Pipeline override: iid, conditioned, subsampled, bss, greedy_removed
        #[arg(long)]
        pipeline: Option<String>,
        /// Output file; falls back to the config output_path, then stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the recursive split schedule for dimension n and sample size m
    Schedule {
        /// Space dimension
        #[arg(long)]
        n: usize,
        /// Parent sample size
        #[arg(long)]
        m: usize,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run Monte Carlo trials; writes <out>.csv and <out>.json per pipeline
    Experiment {
        /// JSON experiment config
        #[arg(long)]
        config: PathBuf,
        /// Seed override
        #[arg(long)]
        seed: Option<u64>,
        /// Trial-count override
        #[arg(long)]
        trials: Option<usize>,
        /// Pipeline override: iid, conditioned, subsampled, bss, greedy_removed
        #[arg(long)]
        pipeline: Option<String>,
        /// Output basename; overrides the config output_path
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Runtime(String),
}

fn usage<E: std::fmt::Display>(error: E) -> CliError {
    CliError::Usage(error.to_string())
}

fn runtime<E: std::fmt::Display>(error: E) -> CliError {
    CliError::Runtime(error.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Weights {
            basis,
            n,
            quadrature_order,
            grid_size,
            out,
        } => cmd_weights(&basis, n, quadrature_order, grid_size, out.as_deref()),
        Command::Sample {
            config,
            seed,
            pipeline,
            out,
        } => cmd_sample(&config, seed, pipeline, out),
        Command::Schedule { n, m, out } => cmd_schedule(n, m, out.as_deref()),
        Command::Experiment {
            config,
            seed,
            trials,
            pipeline,
            out,
        } => cmd_experiment(&config, seed, trials, pipeline, out),
    }
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_weights(
    basis: &str,
    n: usize,
    quadrature_order: Option<usize>,
    grid_size: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let basis = config::parse_basis(basis).map_err(CliError::Usage)?;
    let space = FunctionSpace::new(basis, n, quadrature_order).map_err(usage)?;
    if grid_size == 0 {
        return Err(CliError::Usage("grid size must be positive".to_string()));
    }
    let grid = space.uniform_grid(grid_size);
    let csv = report::weights_csv(&space, &grid).map_err(runtime)?;
    write_output(out, &csv)
}

fn cmd_sample(
    config_path: &Path,
    seed: Option<u64>,
    pipeline: Option<String>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(config_path).map_err(CliError::Usage)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(name) = pipeline {
        cfg.pipeline = Some(name);
        cfg.pipelines = None;
    }
    let space = cfg.build_space().map_err(CliError::Usage)?;
    let m = cfg.resolve_m().map_err(CliError::Usage)?;
    let opts = cfg.pipeline_options().map_err(CliError::Usage)?;
    let pipelines = cfg.pipeline_list(None).map_err(CliError::Usage)?;
    if pipelines.len() != 1 {
        return Err(CliError::Usage(
            "sample draws exactly one pipeline; pick one with --pipeline".to_string(),
        ));
    }
    let mut rng = RngStream::new(cfg.seed, 0).rng();
    let staged = stage_sample(&space, pipelines[0], m, &opts, &mut rng).map_err(runtime)?;
    let csv = report::sample_csv(&staged, &space).map_err(runtime)?;
    let out = out.or_else(|| cfg.output_path.as_ref().map(PathBuf::from));
    write_output(out.as_deref(), &csv)
}

fn cmd_schedule(n: usize, m: usize, out: Option<&Path>) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("dimension must be positive".to_string()));
    }
    if n > m {
        return Err(CliError::Usage(format!(
            "sample size m = {m} must be at least the dimension n = {n}"
        )));
    }
    let schedule = build_schedule(n, m).map_err(usage)?;
    let mut json = serde_json::to_string_pretty(&ScheduleJson::new(n, m, &schedule))
        .expect("schedule serializes");
    json.push('\n');
    write_output(out, &json)
}

fn cmd_experiment(
    config_path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    pipeline: Option<String>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(config_path).map_err(CliError::Usage)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(trials) = trials {
        cfg.trials = trials;
    }
    if let Some(name) = pipeline {
        cfg.pipeline = Some(name);
        cfg.pipelines = None;
    }
    if let Some(out) = out {
        cfg.output_path = Some(out.display().to_string());
    }
    let base = cfg.output_path.clone().ok_or_else(|| {
        CliError::Usage("experiment needs --out or output_path in the config".to_string())
    })?;

    let space = cfg.build_space().map_err(CliError::Usage)?;
    let m = cfg.resolve_m().map_err(CliError::Usage)?;
    let opts = cfg.pipeline_options().map_err(CliError::Usage)?;
    let pipelines = cfg.pipeline_list(None).map_err(CliError::Usage)?;
    let target = cfg
        .build_target(&space, cfg.seed)
        .map_err(CliError::Usage)?;
    let fan_out = pipelines.len() > 1;

    for &pipeline in &pipelines {
        let stem = if fan_out {
            format!("{base}.{}", pipeline.as_str())
        } else {
            base.clone()
        };
        let csv_path = format!("{stem}.csv");
        let json_path = format!("{stem}.json");

        let report = match monte_carlo(
            &space,
            &target,
            pipeline,
            m,
            &opts,
            cfg.trials,
            RngStream::new(cfg.seed, 0),
        ) {
            Ok(report) => report,
            Err(error) => {
                let record = report::error_json(&error.to_string());
                std::fs::write(&json_path, record)
                    .map_err(|e| runtime(format!("cannot write {json_path}: {e}")))?;
                return Err(runtime(error));
            }
        };

        std::fs::write(&csv_path, report::trials_csv(&report))
            .map_err(|e| runtime(format!("cannot write {csv_path}: {e}")))?;

        let (schedule, achieved_frames) = if pipeline == Pipeline::Subsampled {
            let schedule = build_schedule(space.dim(), m).map_err(runtime)?;
            let frames: Vec<TrialFrame> = report
                .outcomes
                .iter()
                .enumerate()
                .filter_map(|(trial, outcome)| match outcome {
                    TrialOutcome::Success(r) => r.achieved_frame.map(|(lo, hi)| TrialFrame {
                        trial,
                        c_lower: lo,
                        c_upper: hi,
                    }),
                    TrialOutcome::Failure(_) => None,
                })
                .collect();
            (
                Some(ScheduleJson::new(space.dim(), m, &schedule)),
                Some(frames),
            )
        } else {
            (None, None)
        };
        let trial_failures: Vec<TrialFailure> = report
            .outcomes
            .iter()
            .enumerate()
            .filter_map(|(trial, outcome)| match outcome {
                TrialOutcome::Failure(message) => Some(TrialFailure {
                    trial,
                    error: message.clone(),
                }),
                TrialOutcome::Success(_) => None,
            })
            .collect();

        let summary = ExperimentSummary {
            pipeline: pipeline.as_str(),
            seed: cfg.seed,
            trials: cfg.trials,
            m,
            failures: report.failures,
            failure_fraction: report.failure_fraction,
            e_n_sq: report.best_error_sq,
            mean_error_sq: report.mean_error_sq,
            se_error_sq: report.se_error_sq,
            mean_ratio: report.mean_ratio,
            se_ratio: report.se_ratio,
            mean_lambda_min: report.mean_lambda_min,
            mean_final_size: report.mean_final_size,
            mean_redraws: report.mean_redraws,
            schedule,
            achieved_frames,
            trial_failures,
            config: &cfg,
        };
        std::fs::write(&json_path, report::summary_json(&summary))
            .map_err(|e| runtime(format!("cannot write {json_path}: {e}")))?;
    }
    Ok(())
}
