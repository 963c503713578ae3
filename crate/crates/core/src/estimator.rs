//! Weighted least-squares reconstruction and the Monte Carlo harness.
//!
//! A trial draws a sample by one of five pipelines, evaluates the target
//! only at the surviving points, solves the weighted normal equations, and
//! reports the exact squared error against the best-approximation error.
//! [`monte_carlo`] repeats trials on independent random streams and
//! aggregates; failed trials are recorded, not hidden.

use num_complex::Complex64;
use rand::Rng;

use crate::gramian::{self};
use crate::sampling::{
    conditioned_sample, draw_iid, Provenance, RngStream, Sample, DEFAULT_MAX_REDRAWS,
};
use crate::spaces::{FunctionSpace, TargetFunction};
use crate::sparsify::{
    bss_sparsify, build_partition, greedy_removal, random_subsample, SplitOptions,
};
use crate::{Error, Result};

const SINGULARITY_FLOOR: f64 = 1e-12;
const RATIO_FLOOR: f64 = 1e-14;

/// Sampling pipelines a trial can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    /// Plain i.i.d. draw from the optimal density.
    Iid,
    /// I.i.d. draw conditioned on `‖G - I‖₂ ≤ 1/2`.
    Conditioned,
    /// Conditioned draw, spectrally partitioned, one random cell kept.
    Subsampled,
    /// Conditioned draw shrunk by twice-barrier selection.
    Bss,
    /// Conditioned draw pruned by greedy point removal.
    GreedyRemoved,
}

impl Pipeline {
    pub const ALL: [Pipeline; 5] = [
        Pipeline::Iid,
        Pipeline::Conditioned,
        Pipeline::Subsampled,
        Pipeline::Bss,
        Pipeline::GreedyRemoved,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Iid => "iid",
            Pipeline::Conditioned => "conditioned",
            Pipeline::Subsampled => "subsampled",
            Pipeline::Bss => "bss",
            Pipeline::GreedyRemoved => "greedy_removed",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "iid" => Ok(Pipeline::Iid),
            "conditioned" => Ok(Pipeline::Conditioned),
            "subsampled" => Ok(Pipeline::Subsampled),
            "bss" => Ok(Pipeline::Bss),
            "greedy_removed" => Ok(Pipeline::GreedyRemoved),
            other => Err(Error::InvalidParameter(format!(
                "unknown pipeline '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knobs for the sparsifying stages of a pipeline.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub max_redraws: usize,
    pub split: SplitOptions,
    /// Oversampling factor of the twice-barrier stage.
    pub bss_c: f64,
    /// Smallest Gram eigenvalue greedy removal must preserve.
    pub lambda_floor: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            max_redraws: DEFAULT_MAX_REDRAWS,
            split: SplitOptions::default(),
            bss_c: 2.0,
            lambda_floor: 0.5,
        }
    }
}

/// A least-squares fit with the spectral context it was solved in.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub coeffs: Vec<Complex64>,
    pub gram_lambda_min: f64,
    pub sample_size: usize,
    pub provenance: Provenance,
}

/// Everything measured in one trial.
#[derive(Debug, Clone)]
pub struct TrialReport {
    pub pipeline: Pipeline,
    pub provenance: Provenance,
    /// Points the target was actually evaluated at.
    pub eval_count: usize,
    pub final_size: usize,
    pub parent_size: usize,
    pub redraw_count: usize,
    pub error_sq: f64,
    pub best_error_sq: f64,
    /// `error_sq / best_error_sq`, absent when the target lies in the
    /// space and the denominator is numerically zero.
    pub ratio: Option<f64>,
    pub gram_lambda_min: f64,
    /// Verified frame range of the partition for the subsampled pipeline.
    pub achieved_frame: Option<(f64, f64)>,
    /// Candidate bipartitions examined across all splits.
    pub split_candidates: usize,
    /// Candidates examined and rejected before each split was accepted.
    pub split_rejections: usize,
}

/// One Monte Carlo trial outcome; failures carry the rendered error.
#[derive(Debug, Clone)]
pub enum TrialOutcome {
    Success(TrialReport),
    Failure(String),
}

/// Aggregated Monte Carlo results.
///
/// Means and standard errors run over successful trials only;
/// `failure_fraction` accounts for the rest.
#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub pipeline: Pipeline,
    pub trials: usize,
    pub failures: usize,
    pub failure_fraction: f64,
    pub outcomes: Vec<TrialOutcome>,
    pub best_error_sq: f64,
    pub mean_error_sq: f64,
    pub se_error_sq: f64,
    pub mean_ratio: Option<f64>,
    pub se_ratio: Option<f64>,
    pub mean_lambda_min: f64,
    pub mean_final_size: f64,
    pub mean_redraws: f64,
}

/// Solves the weighted least-squares problem on a sample.
///
/// `values[i]` is the target evaluated at `sample.points[i]`. The discrete
/// objective `(1/m) Σ w_i |v(x_i) - y_i|²` is minimized over the space by
/// the normal equations `G a = b` with
/// `b_j = (1/m) Σ w_i L_j(x_i) conj(y_i)`; their solution is the
/// conjugated coefficient vector, so the returned coefficients are
/// `conj(a)`.
pub fn weighted_least_squares(
    space: &FunctionSpace,
    sample: &Sample,
    values: &[Complex64],
) -> Result<Reconstruction> {
    let gram = gramian::gram(sample, space)?;
    let lambda_min = gram.lambda_min();
    if lambda_min <= SINGULARITY_FLOOR {
        return Err(Error::ReconstructionFailure { lambda_min });
    }
    let rhs = gramian::rhs_vector(sample, space, values)?;
    let solution = gramian::solve_normal_equations(&gram, &rhs).map_err(|e| match e {
        Error::SingularSystem { lambda_min } => Error::ReconstructionFailure { lambda_min },
        other => other,
    })?;
    Ok(Reconstruction {
        coeffs: solution.iter().map(Complex64::conj).collect(),
        gram_lambda_min: lambda_min,
        sample_size: sample.len(),
        provenance: sample.provenance,
    })
}

/// The exact squared distance `‖u - Σ_j c_j L_j‖²`.
///
/// Splits orthogonally as `e_n(u)² + Σ_j |⟨u, L_j⟩ - c_j|²`.
pub fn l2_error_sq(space: &FunctionSpace, u: &TargetFunction, coeffs: &[Complex64]) -> Result<f64> {
    if coeffs.len() != space.dim() {
        return Err(Error::ShapeMismatch {
            expected: space.dim(),
            got: coeffs.len(),
        });
    }
    let best_sq = space.best_approx_error_sq(u)?;
    let exact = space.coeffs(u)?;
    let head: f64 = exact
        .iter()
        .zip(coeffs)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(best_sq + head)
}

/// A drawn sample together with the staging diagnostics of its pipeline.
#[derive(Debug, Clone)]
pub struct StagedSample {
    pub sample: Sample,
    pub redraw_count: usize,
    pub achieved_frame: Option<(f64, f64)>,
    pub split_candidates: usize,
    pub split_rejections: usize,
}

/// Draws the sample a pipeline reconstructs from, without touching the
/// target.
pub fn stage_sample<R: Rng>(
    space: &FunctionSpace,
    pipeline: Pipeline,
    m: usize,
    opts: &PipelineOptions,
    rng: &mut R,
) -> Result<StagedSample> {
    match pipeline {
        Pipeline::Iid => Ok(StagedSample {
            sample: draw_iid(space, m, rng)?,
            redraw_count: 0,
            achieved_frame: None,
            split_candidates: 0,
            split_rejections: 0,
        }),
        Pipeline::Conditioned => {
            let sample = conditioned_sample(space, m, opts.max_redraws, rng)?;
            let redraw_count = sample.redraw_count;
            Ok(StagedSample {
                sample,
                redraw_count,
                achieved_frame: None,
                split_candidates: 0,
                split_rejections: 0,
            })
        }
        Pipeline::Subsampled => {
            let parent = conditioned_sample(space, m, opts.max_redraws, rng)?;
            let partition = build_partition(&parent, space, &opts.split, rng)?;
            let sample = random_subsample(&partition, &parent, rng)?;
            Ok(StagedSample {
                sample,
                redraw_count: parent.redraw_count,
                achieved_frame: Some((partition.achieved_c_lower(), partition.achieved_c_upper())),
                split_candidates: partition
                    .search_stats
                    .iter()
                    .map(|s| s.candidates_tried)
                    .sum(),
                split_rejections: partition
                    .search_stats
                    .iter()
                    .map(|s| s.candidates_tried.saturating_sub(1))
                    .sum(),
            })
        }
        Pipeline::Bss => {
            let parent = conditioned_sample(space, m, opts.max_redraws, rng)?;
            let sample = bss_sparsify(&parent, space, opts.bss_c)?;
            Ok(StagedSample {
                sample,
                redraw_count: parent.redraw_count,
                achieved_frame: None,
                split_candidates: 0,
                split_rejections: 0,
            })
        }
        Pipeline::GreedyRemoved => {
            let parent = conditioned_sample(space, m, opts.max_redraws, rng)?;
            let sample = greedy_removal(&parent, space, opts.lambda_floor)?;
            Ok(StagedSample {
                sample,
                redraw_count: parent.redraw_count,
                achieved_frame: None,
                split_candidates: 0,
                split_rejections: 0,
            })
        }
    }
}

/// Runs one pipeline end to end and measures the reconstruction error.
///
/// The target is evaluated only at the points of the final sample.
pub fn run_trial<R: Rng>(
    space: &FunctionSpace,
    u: &TargetFunction,
    pipeline: Pipeline,
    m: usize,
    opts: &PipelineOptions,
    rng: &mut R,
) -> Result<TrialReport> {
    let staged = stage_sample(space, pipeline, m, opts, rng)?;
    let sample = &staged.sample;
    let values: Vec<Complex64> = sample.points.iter().map(|&x| u.value(x)).collect();
    let eval_count = values.len();
    let rec = weighted_least_squares(space, sample, &values)?;
    let error_sq = l2_error_sq(space, u, &rec.coeffs)?;
    let best_error_sq = space.best_approx_error_sq(u)?;
    let ratio = if best_error_sq > RATIO_FLOOR {
        Some(error_sq / best_error_sq)
    } else {
        None
    };
    Ok(TrialReport {
        pipeline,
        provenance: sample.provenance,
        eval_count,
        final_size: sample.len(),
        parent_size: sample.parent_size,
        redraw_count: staged.redraw_count,
        error_sq,
        best_error_sq,
        ratio,
        gram_lambda_min: rec.gram_lambda_min,
        achieved_frame: staged.achieved_frame,
        split_candidates: staged.split_candidates,
        split_rejections: staged.split_rejections,
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Repeats [`run_trial`] on consecutive random streams and aggregates.
///
/// Trial `t` uses `stream.offset(t)`, so results are reproducible and
/// independent of how many trials ran before. Errors inside a trial are
/// collected as failures; only a run with no successes at all is an error.
pub fn monte_carlo(
    space: &FunctionSpace,
    u: &TargetFunction,
    pipeline: Pipeline,
    m: usize,
    opts: &PipelineOptions,
    trials: usize,
    stream: RngStream,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "trial count must be positive".into(),
        ));
    }
    let mut outcomes = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = stream.offset(t as u64).rng();
        match run_trial(space, u, pipeline, m, opts, &mut rng) {
            Ok(report) => outcomes.push(TrialOutcome::Success(report)),
            Err(e) => outcomes.push(TrialOutcome::Failure(e.to_string())),
        }
    }

    let successes: Vec<&TrialReport> = outcomes
        .iter()
        .filter_map(|o| match o {
            TrialOutcome::Success(r) => Some(r),
            TrialOutcome::Failure(_) => None,
        })
        .collect();
    let failures = trials - successes.len();
    if successes.is_empty() {
        let last_reason = outcomes
            .iter()
            .rev()
            .find_map(|o| match o {
                TrialOutcome::Failure(msg) => Some(msg.clone()),
                TrialOutcome::Success(_) => None,
            })
            .unwrap_or_default();
        return Err(Error::AllTrialsFailed {
            trials,
            last_reason,
        });
    }

    let errors: Vec<f64> = successes.iter().map(|r| r.error_sq).collect();
    let (mean_error_sq, se_error_sq) = mean_and_se(&errors);
    let ratios: Vec<f64> = successes.iter().filter_map(|r| r.ratio).collect();
    let (mean_ratio, se_ratio) = if ratios.len() == successes.len() {
        let (m, s) = mean_and_se(&ratios);
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    let mean_lambda_min =
        successes.iter().map(|r| r.gram_lambda_min).sum::<f64>() / successes.len() as f64;
    let mean_final_size =
        successes.iter().map(|r| r.final_size as f64).sum::<f64>() / successes.len() as f64;
    let mean_redraws =
        successes.iter().map(|r| r.redraw_count as f64).sum::<f64>() / successes.len() as f64;

    Ok(MonteCarloReport {
        pipeline,
        trials,
        failures,
        failure_fraction: failures as f64 / trials as f64,
        best_error_sq: space.best_approx_error_sq(u)?,
        outcomes,
        mean_error_sq,
        se_error_sq,
        mean_ratio,
        se_ratio,
        mean_lambda_min,
        mean_final_size,
        mean_redraws,
    })
}

/// Result of checking the deterministic worst-case error bound.
#[derive(Debug, Clone, Copy)]
pub struct WorstCaseCheck {
    pub holds: bool,
    /// Reconstruction error `‖u - ũ‖`.
    pub error: f64,
    /// The certified ceiling `(1 + √(αβ)) · sup |u - P u|`.
    pub bound: f64,
}

/// Checks `‖u - ũ‖ ≤ (1 + √(αβ)) sup|u - P u|` for a sample whose Gram
/// matrix certifies the norm equivalence
/// `β^{-1} ‖v‖² ≤ ‖v‖_X² ≤ α ‖v‖²` on the space, i.e.
/// `λ(G) ⊂ [1/β, α]`.
pub fn verify_worst_case_bound(
    space: &FunctionSpace,
    u: &TargetFunction,
    sample: &Sample,
    coeffs: &[Complex64],
    alpha: f64,
    beta: f64,
    grid_size: usize,
) -> Result<WorstCaseCheck> {
    if alpha.is_nan() || alpha <= 0.0 || beta.is_nan() || beta <= 0.0 {
        return Err(Error::InvalidParameter(
            "frame constants must be positive".into(),
        ));
    }
    let gram = gramian::gram(sample, space)?;
    let slack = 1e-9;
    if gram.lambda_min() < 1.0 / beta - slack || gram.lambda_max() > alpha + slack {
        return Err(Error::Precondition(format!(
            "Gram spectrum [{}, {}] escapes the declared frame [{}, {alpha}]",
            gram.lambda_min(),
            gram.lambda_max(),
            1.0 / beta
        )));
    }
    let error = l2_error_sq(space, u, coeffs)?.sqrt();
    let sup = space.sup_error_proxy(u, grid_size)?;
    let bound = (1.0 + (alpha * beta).sqrt()) * sup;
    Ok(WorstCaseCheck {
        holds: error <= bound + 1e-12,
        error,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::minimal_budget;
    use crate::targets;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn recovers_in_space_target_exactly() {
        let space = FunctionSpace::legendre(3).unwrap();
        let coeffs = vec![c(0.2, -0.8), c(-1.4, 0.3), c(0.9, 1.1)];
        let u = targets::element_from_coeffs(&space, coeffs.clone()).unwrap();
        let mut rng = RngStream::new(7, 0).rng();
        let sample = conditioned_sample(&space, 60, 100, &mut rng).unwrap();
        let values: Vec<Complex64> = sample.points.iter().map(|&x| u.value(x)).collect();
        let rec = weighted_least_squares(&space, &sample, &values).unwrap();
        for (got, want) in rec.coeffs.iter().zip(&coeffs) {
            assert!((got - want).norm() < 1e-9, "{got} vs {want}");
        }
        let err = l2_error_sq(&space, &u, &rec.coeffs).unwrap();
        assert!(err < 1e-12);
    }

    #[test]
    fn error_matches_direct_quadrature() {
        let space = FunctionSpace::legendre(4).unwrap();
        let u = targets::exp_target(&space);
        let mut rng = RngStream::new(11, 0).rng();
        let sample = conditioned_sample(&space, 111, 100, &mut rng).unwrap();
        let values: Vec<Complex64> = sample.points.iter().map(|&x| u.value(x)).collect();
        let rec = weighted_least_squares(&space, &sample, &values).unwrap();

        let err_sq = l2_error_sq(&space, &u, &rec.coeffs).unwrap();
        let coeffs = rec.coeffs.clone();
        let eval_space = space.clone();
        let diff = TargetFunction::new(move |x| {
            let vals = eval_space.basis_eval(x).unwrap();
            let fit: Complex64 = coeffs.iter().zip(&vals).map(|(a, b)| a * b).sum();
            Complex64::new(x.exp(), 0.0) - fit
        });
        let direct = space.norm_sq(&diff);
        assert!(
            (err_sq - direct).abs() < 1e-10 * direct.max(1e-10),
            "{err_sq} vs {direct}"
        );
    }

    #[test]
    fn trial_reports_are_complete() {
        let space = FunctionSpace::legendre(4).unwrap();
        let u = targets::exp_target(&space);
        let m = minimal_budget(4, 0.5).unwrap();
        let opts = PipelineOptions::default();
        for pipeline in Pipeline::ALL {
            let mut rng = RngStream::new(19, 1000).rng();
            let report = run_trial(&space, &u, pipeline, m, &opts, &mut rng).unwrap();
            assert_eq!(report.pipeline, pipeline);
            assert_eq!(report.eval_count, report.final_size);
            assert!(report.final_size <= m);
            assert!(report.error_sq >= 0.0);
            assert!(report.ratio.unwrap() >= 1.0 - 1e-12);
            assert_eq!(report.parent_size, m);
            match pipeline {
                Pipeline::Iid | Pipeline::Conditioned => {
                    assert_eq!(report.final_size, m);
                }
                // At this scale the split schedule has zero levels, so the
                // subsample is the whole conditioned draw.
                Pipeline::Subsampled => {
                    assert_eq!(report.final_size, m);
                    assert!(report.achieved_frame.is_some());
                }
                Pipeline::Bss => assert!(report.final_size <= 8),
                Pipeline::GreedyRemoved => assert!(report.final_size < m),
            }
        }
    }

    #[test]
    fn ratio_is_none_inside_the_space() {
        let space = FunctionSpace::legendre(2).unwrap();
        let u = targets::element_from_coeffs(&space, vec![c(1.0, 0.0), c(0.5, 0.0)]).unwrap();
        let mut rng = RngStream::new(3, 0).rng();
        let report = run_trial(
            &space,
            &u,
            Pipeline::Conditioned,
            40,
            &PipelineOptions::default(),
            &mut rng,
        )
        .unwrap();
        assert!(report.ratio.is_none());
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let space = FunctionSpace::legendre(3).unwrap();
        let u = targets::exp_target(&space);
        let opts = PipelineOptions::default();
        let run = || {
            monte_carlo(
                &space,
                &u,
                Pipeline::Conditioned,
                80,
                &opts,
                20,
                RngStream::new(99, 0),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.mean_error_sq.to_bits(), b.mean_error_sq.to_bits());
        assert_eq!(a.failures, b.failures);
    }

    #[test]
    fn monte_carlo_counts_failures() {
        let space = FunctionSpace::piecewise_constant(4).unwrap();
        let u = targets::exp_target(&space);
        let opts = PipelineOptions {
            max_redraws: 0,
            ..Default::default()
        };
        // With m = n = 4 a draw succeeds only when every cell is hit, an
        // event of probability 4!/4⁴ = 3/32, so single-attempt trials fail
        // most of the time.
        let report = monte_carlo(
            &space,
            &u,
            Pipeline::Conditioned,
            4,
            &opts,
            60,
            RngStream::new(123, 0),
        )
        .unwrap();
        assert!(report.failures > 30);
        assert!(report.failures < 60);
        assert_eq!(report.failures as f64 / 60.0, report.failure_fraction);
    }

    #[test]
    fn worst_case_bound_holds_for_square() {
        let space = FunctionSpace::legendre(2).unwrap();
        let u = targets::monomial_target(&space, 2).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        let sample = conditioned_sample(&space, 40, 100, &mut rng).unwrap();
        let values: Vec<Complex64> = sample.points.iter().map(|&x| u.value(x)).collect();
        let rec = weighted_least_squares(&space, &sample, &values).unwrap();
        let check =
            verify_worst_case_bound(&space, &u, &sample, &rec.coeffs, 1.5, 2.0, 1000).unwrap();
        assert!(check.holds, "error {} > bound {}", check.error, check.bound);
        assert!(check.error > 0.0);
    }

    #[test]
    fn worst_case_bound_needs_the_frame() {
        let space = FunctionSpace::legendre(2).unwrap();
        let u = targets::monomial_target(&space, 2).unwrap();
        let mut rng = RngStream::new(5, 1).rng();
        let sample = conditioned_sample(&space, 40, 100, &mut rng).unwrap();
        let values: Vec<Complex64> = sample.points.iter().map(|&x| u.value(x)).collect();
        let rec = weighted_least_squares(&space, &sample, &values).unwrap();
        let err = verify_worst_case_bound(&space, &u, &sample, &rec.coeffs, 1.001, 1.001, 1000);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }
}
