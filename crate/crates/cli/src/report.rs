//! Deterministic CSV and JSON rendering.
//!
//! Floating-point values in CSV are printed with 17 significant digits so
//! they round-trip exactly; JSON uses serde_json's shortest round-trip
//! form. Neither format embeds timestamps, so equal inputs give equal
//! bytes.

use serde::Serialize;
use wlsq::estimator::StagedSample;
use wlsq::gramian;
use wlsq::sampling::Provenance;
use wlsq::sparsify::SplitSchedule;
use wlsq::{FunctionSpace, MonteCarloReport, TrialOutcome};

use crate::config::ExperimentConfig;

pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Table of the basis square sum and Christoffel weight over a grid.
pub fn weights_csv(space: &FunctionSpace, grid: &[f64]) -> wlsq::Result<String> {
    let mut out = String::from("x,basis_sum_sq,weight\n");
    let n = space.dim() as f64;
    for &x in grid {
        let weight = space.christoffel_weight(x)?;
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(x),
            fmt_f64(n / weight),
            fmt_f64(weight)
        ));
    }
    Ok(out)
}

/// Point listing of one staged sample; conditioned draws append the
/// spectral distance of their Gram matrix to the identity as a footer.
pub fn sample_csv(staged: &StagedSample, space: &FunctionSpace) -> wlsq::Result<String> {
    let mut out = String::from("index,x,weight,provenance,redraw_count\n");
    let sample = &staged.sample;
    for (i, (&x, &w)) in sample.points.iter().zip(&sample.weights).enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            fmt_f64(x),
            fmt_f64(w),
            sample.provenance.as_str(),
            staged.redraw_count
        ));
    }
    if sample.provenance == Provenance::Conditioned {
        let gram = gramian::gram(sample, space)?;
        out.push_str(&format!(
            "# spectral_distance_to_identity = {}\n",
            fmt_f64(gram.spectral_distance_to_identity())
        ));
    }
    Ok(out)
}

/// Per-trial rows of a Monte Carlo run; failed trials become footer
/// comments so the data columns stay uniform.
pub fn trials_csv(report: &MonteCarloReport) -> String {
    let mut out =
        String::from("trial,m_final,error_sq,e_n_sq,ratio,lambda_min,redraws,split_failures\n");
    for (trial, outcome) in report.outcomes.iter().enumerate() {
        if let TrialOutcome::Success(r) = outcome {
            let ratio = r.ratio.map(fmt_f64).unwrap_or_default();
            out.push_str(&format!(
                "{trial},{},{},{},{ratio},{},{},{}\n",
                r.final_size,
                fmt_f64(r.error_sq),
                fmt_f64(r.best_error_sq),
                fmt_f64(r.gram_lambda_min),
                r.redraw_count,
                r.split_rejections
            ));
        }
    }
    for (trial, outcome) in report.outcomes.iter().enumerate() {
        if let TrialOutcome::Failure(message) = outcome {
            out.push_str(&format!("# trial {trial} failed: {message}\n"));
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct ScheduleJson {
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub levels: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub c_lower: f64,
    pub c_upper: f64,
}

impl ScheduleJson {
    pub fn new(n: usize, m: usize, schedule: &SplitSchedule) -> Self {
        ScheduleJson {
            n,
            m,
            delta: schedule.delta,
            levels: schedule.levels,
            alphas: schedule.alphas.clone(),
            betas: schedule.betas.clone(),
            c_lower: schedule.c_lower,
            c_upper: schedule.c_upper,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TrialFrame {
    pub trial: usize,
    pub c_lower: f64,
    pub c_upper: f64,
}

#[derive(Debug, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct ExperimentSummary<'a> {
    pub pipeline: &'a str,
    pub seed: u64,
    pub trials: usize,
    pub m: usize,
    pub failures: usize,
    pub failure_fraction: f64,
    pub e_n_sq: f64,
    pub mean_error_sq: f64,
    pub se_error_sq: f64,
    pub mean_ratio: Option<f64>,
    pub se_ratio: Option<f64>,
    pub mean_lambda_min: f64,
    pub mean_final_size: f64,
    pub mean_redraws: f64,
    /// Theoretical schedule for the parent size, subsampled runs only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleJson>,
    /// Verified frame bounds per successful trial, subsampled runs only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub achieved_frames: Option<Vec<TrialFrame>>,
    pub trial_failures: Vec<TrialFailure>,
    pub config: &'a ExperimentConfig,
}

pub fn summary_json(summary: &ExperimentSummary<'_>) -> String {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    text
}

pub fn error_json(message: &str) -> String {
    let mut text = serde_json::to_string_pretty(&serde_json::json!({ "error": message }))
        .expect("error record serializes");
    text.push('\n');
    text
}
