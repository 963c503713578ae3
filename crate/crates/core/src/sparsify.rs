//! Shrinking a conditioned sample to a near-linear number of points while
//! keeping the weighted Gram matrix well framed.
//!
//! Three routes are provided:
//!
//! * [`build_partition`] + [`random_subsample`]: recursively split the
//!   rank-one decomposition of the Gram matrix into verified spectrally
//!   balanced halves, then keep one cell of the partition at random.
//! * [`bss_sparsify`]: deterministic twice-barrier selection of at most
//!   `⌈c n⌉` reweighted points with two-sided frame guarantees.
//! * [`greedy_removal`]: drop points one at a time while the smallest Gram
//!   eigenvalue stays above a floor.
//!
//! Throughout, a sample of size `m` is identified with the vectors
//! `a_i = √(w_i/m) (L_1(x_i), ..., L_n(x_i))`, whose outer products sum to
//! the Gram matrix and satisfy `|a_i|² = n/m`.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::gramian::{self, GramMatrix};
use crate::linalg::CMatrix;
use crate::sampling::{Provenance, Sample, CONDITIONING_RADIUS};
use crate::spaces::FunctionSpace;
use crate::{Error, Result};

/// Largest set size accepted by the exhaustive split strategy.
pub const EXHAUSTIVE_LIMIT: usize = 24;

/// Ratio `α_L / δ` stays above this for every schedule with at least one
/// level.
pub const MIN_C_LOWER: f64 = 25.0;

/// Ratio `β_L / δ` stays below this for every valid schedule.
pub const MAX_C_UPPER: f64 = 11_000.0;

const SPECTRAL_SLACK: f64 = 1e-9;
const VERIFY_SLACK: f64 = 1e-12;

/// Level-by-level frame constants for the recursive partition.
///
/// `alphas[l] I ≤ Σ_{i ∈ J} a_i a_i^* ≤ betas[l] I` is the invariant for
/// every set `J` alive at level `l`; `delta = n/m` bounds each `|a_i|²`.
/// The derived constants frame the subsampled Gram matrix:
/// `c_lower = α_L/δ` and `c_upper = β_L/δ` (pinned to `1/2` and `300` when
/// no splitting is needed), giving `λ_min(G_X) ≥ c_lower/c_upper` and
/// `|X| ≤ c_upper · n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSchedule {
    pub delta: f64,
    pub levels: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub c_lower: f64,
    pub c_upper: f64,
}

/// How [`split_once`] searches for a feasible bipartition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    /// Enumerate all bipartitions (sets of at most [`EXHAUSTIVE_LIMIT`]).
    Exhaustive,
    /// Try random equal-size bipartitions.
    Randomized,
    /// Hill-climb single-element moves from a random balanced start.
    Local,
}

impl SplitStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitStrategy::Exhaustive => "exhaustive",
            SplitStrategy::Randomized => "randomized",
            SplitStrategy::Local => "local",
        }
    }
}

/// Options shared by all split searches.
///
/// `theta` relaxes verification: lower frame targets are multiplied by it
/// and upper targets divided by it. One means exact.
#[derive(Debug, Clone)]
pub struct SplitOptions {
    pub strategy: SplitStrategy,
    pub trial_budget: usize,
    pub theta: f64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            strategy: SplitStrategy::Local,
            trial_budget: 10_000,
            theta: 1.0,
        }
    }
}

impl SplitOptions {
    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if self.trial_budget == 0 {
            return Err(Error::InvalidParameter(
                "trial budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A verified bipartition of vector indices.
#[derive(Debug, Clone)]
pub struct Split {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub candidates_tried: usize,
}

/// Smallest and largest eigenvalue of a framed sum.
#[derive(Debug, Clone, Copy)]
pub struct FrameBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Per-split search effort.
#[derive(Debug, Clone, Copy)]
pub struct SplitStats {
    pub level: usize,
    pub set_index: usize,
    pub candidates_tried: usize,
}

/// The output of [`build_partition`]: disjoint index sets covering the
/// sample, each with verified frame bounds for `(m/n) Σ_{i ∈ J} a_i a_i^*`.
#[derive(Debug, Clone)]
pub struct PartitionResult {
    pub schedule: SplitSchedule,
    pub sets: Vec<Vec<usize>>,
    pub framing: Vec<FrameBounds>,
    pub search_stats: Vec<SplitStats>,
}

impl PartitionResult {
    /// Worst verified lower frame bound across sets.
    pub fn achieved_c_lower(&self) -> f64 {
        self.framing
            .iter()
            .map(|f| f.lambda_min)
            .fold(f64::INFINITY, f64::min)
    }

    /// Worst verified upper frame bound across sets.
    pub fn achieved_c_upper(&self) -> f64 {
        self.framing
            .iter()
            .map(|f| f.lambda_max)
            .fold(0.0, f64::max)
    }
}

/// Computes the split schedule for dimension `n` and sample size `m`.
///
/// With `δ = n/m ≥ 1/200` no splitting is needed and the constants are
/// pinned to `(1/2, 300)`. Otherwise levels follow the recursion
/// `α' = α (1 - 5√(δ/α)) / 2`, `β' = β (1 + 5√(δ/α)) / 2` from
/// `(1/2, 3/2)` until `α_L ≤ 100 δ`.
pub fn build_schedule(n: usize, m: usize) -> Result<SplitSchedule> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "space dimension must be positive".into(),
        ));
    }
    if m < n {
        return Err(Error::InvalidParameter(format!(
            "sample size {m} below dimension {n}"
        )));
    }
    let delta = n as f64 / m as f64;
    let mut alphas = vec![0.5];
    let mut betas = vec![1.5];

    if delta >= 1.0 / 200.0 {
        return Ok(SplitSchedule {
            delta,
            levels: 0,
            alphas,
            betas,
            c_lower: 0.5,
            c_upper: 300.0,
        });
    }

    while *alphas.last().unwrap() > 100.0 * delta {
        let alpha = *alphas.last().unwrap();
        let beta = *betas.last().unwrap();
        let r = 5.0 * (delta / alpha).sqrt();
        alphas.push(alpha * (1.0 - r) / 2.0);
        betas.push(beta * (1.0 + r) / 2.0);
    }
    let levels = alphas.len() - 1;
    let c_lower = alphas[levels] / delta;
    let c_upper = betas[levels] / delta;
    Ok(SplitSchedule {
        delta,
        levels,
        alphas,
        betas,
        c_lower,
        c_upper,
    })
}

fn outer_sum(vectors: &[Vec<Complex64>], indices: &[usize], n: usize) -> CMatrix {
    let mut sum = CMatrix::zeros(n);
    for &i in indices {
        sum.add_scaled_outer(&vectors[i], 1.0);
    }
    sum
}

fn frame_bounds(matrix: &CMatrix) -> Result<FrameBounds> {
    let values = matrix.eigenvalues()?;
    Ok(FrameBounds {
        lambda_min: values.first().copied().unwrap_or(0.0),
        lambda_max: values.last().copied().unwrap_or(0.0),
    })
}

fn bounds_ok(bounds: FrameBounds, lo: f64, hi: f64, theta: f64) -> bool {
    bounds.lambda_min >= theta * lo - VERIFY_SLACK && bounds.lambda_max <= hi / theta + VERIFY_SLACK
}

/// Splits a set of vectors into two verified halves.
///
/// The parent set must satisfy `|a_i|² ≤ δ` and
/// `α I ≤ Σ a_i a_i^* ≤ β I` with `δ < α`; the returned halves each
/// satisfy the child bounds `α' = α(1 - 5√(δ/α))/2` and
/// `β' = β(1 + 5√(δ/α))/2`, checked explicitly (up to `theta` relaxation)
/// before the split is accepted. Both halves are nonempty.
pub fn split_once<R: Rng>(
    vectors: &[Vec<Complex64>],
    alpha: f64,
    beta: f64,
    delta: f64,
    opts: &SplitOptions,
    rng: &mut R,
) -> Result<Split> {
    opts.validate()?;
    let size = vectors.len();
    if size < 2 {
        return Err(Error::Precondition(format!(
            "cannot bipartition a set of {size} vectors"
        )));
    }
    let n = vectors[0].len();
    if n == 0 || vectors.iter().any(|v| v.len() != n) {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: vectors.iter().map(Vec::len).find(|&l| l != n).unwrap_or(0),
        });
    }
    if delta >= alpha {
        return Err(Error::Precondition(format!(
            "delta = {delta} must be below alpha = {alpha}"
        )));
    }
    for (i, v) in vectors.iter().enumerate() {
        let norm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq > delta + VERIFY_SLACK {
            return Err(Error::Precondition(format!(
                "|a_{i}|² = {norm_sq} exceeds delta = {delta}"
            )));
        }
    }
    let all: Vec<usize> = (0..size).collect();
    let parent = frame_bounds(&outer_sum(vectors, &all, n))?;
    if !bounds_ok(parent, alpha, beta, opts.theta) {
        return Err(Error::Precondition(format!(
            "parent frame [{}, {}] violates [{alpha}, {beta}]",
            parent.lambda_min, parent.lambda_max
        )));
    }

    let r = 5.0 * (delta / alpha).sqrt();
    let alpha_child = alpha * (1.0 - r) / 2.0;
    let beta_child = beta * (1.0 + r) / 2.0;

    match opts.strategy {
        SplitStrategy::Exhaustive => {
            split_exhaustive(vectors, n, alpha_child, beta_child, opts.theta)
        }
        SplitStrategy::Randomized => {
            split_randomized(vectors, n, alpha_child, beta_child, opts, rng)
        }
        SplitStrategy::Local => split_local(vectors, n, alpha_child, beta_child, opts, rng),
    }
}

fn verify_pair(
    vectors: &[Vec<Complex64>],
    first: &[usize],
    second: &[usize],
    n: usize,
    alpha_child: f64,
    beta_child: f64,
    theta: f64,
) -> Result<bool> {
    for side in [first, second] {
        let bounds = frame_bounds(&outer_sum(vectors, side, n))?;
        if !bounds_ok(bounds, alpha_child, beta_child, theta) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn split_exhaustive(
    vectors: &[Vec<Complex64>],
    n: usize,
    alpha_child: f64,
    beta_child: f64,
    theta: f64,
) -> Result<Split> {
    let size = vectors.len();
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::ExhaustiveTooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    // Index 0 always goes in the first half, so each unordered bipartition
    // appears exactly once, in deterministic mask order.
    let masks = 1u64 << (size - 1);
    let mut candidates = 0usize;
    for mask in 0..masks {
        let mut first = vec![0usize];
        let mut second = Vec::new();
        for i in 1..size {
            if mask >> (i - 1) & 1 == 1 {
                first.push(i);
            } else {
                second.push(i);
            }
        }
        if second.is_empty() {
            continue;
        }
        candidates += 1;
        if verify_pair(vectors, &first, &second, n, alpha_child, beta_child, theta)? {
            return Ok(Split {
                first,
                second,
                candidates_tried: candidates,
            });
        }
    }
    Err(Error::SplitSearchFailure {
        level: 0,
        set_index: 0,
        candidates,
    })
}

fn split_randomized<R: Rng>(
    vectors: &[Vec<Complex64>],
    n: usize,
    alpha_child: f64,
    beta_child: f64,
    opts: &SplitOptions,
    rng: &mut R,
) -> Result<Split> {
    let size = vectors.len();
    let half = size / 2;
    let mut order: Vec<usize> = (0..size).collect();
    let mut candidates = 0usize;
    while candidates < opts.trial_budget {
        order.shuffle(rng);
        let mut first = order[..half].to_vec();
        let mut second = order[half..].to_vec();
        first.sort_unstable();
        second.sort_unstable();
        candidates += 1;
        if verify_pair(
            vectors,
            &first,
            &second,
            n,
            alpha_child,
            beta_child,
            opts.theta,
        )? {
            return Ok(Split {
                first,
                second,
                candidates_tried: candidates,
            });
        }
    }
    Err(Error::SplitSearchFailure {
        level: 0,
        set_index: 0,
        candidates,
    })
}

fn split_local<R: Rng>(
    vectors: &[Vec<Complex64>],
    n: usize,
    alpha_child: f64,
    beta_child: f64,
    opts: &SplitOptions,
    rng: &mut R,
) -> Result<Split> {
    let size = vectors.len();
    let mut candidates = 0usize;

    let mut order: Vec<usize> = (0..size).collect();
    let mut in_first = vec![false; size];
    let restart = |order: &mut Vec<usize>, in_first: &mut Vec<bool>, rng: &mut R| {
        order.shuffle(rng);
        for (pos, &i) in order.iter().enumerate() {
            in_first[i] = pos < size / 2;
        }
    };
    restart(&mut order, &mut in_first, rng);

    while candidates < opts.trial_budget {
        let first: Vec<usize> = (0..size).filter(|&i| in_first[i]).collect();
        let second: Vec<usize> = (0..size).filter(|&i| !in_first[i]).collect();

        candidates += 1;
        if !first.is_empty()
            && !second.is_empty()
            && verify_pair(
                vectors,
                &first,
                &second,
                n,
                alpha_child,
                beta_child,
                opts.theta,
            )?
        {
            return Ok(Split {
                first,
                second,
                candidates_tried: candidates,
            });
        }

        let sum_first = outer_sum(vectors, &first, n);
        let sum_second = outer_sum(vectors, &second, n);
        let objective = |a: &CMatrix, b: &CMatrix| -> Result<f64> {
            Ok(frame_bounds(a)?.lambda_min.min(frame_bounds(b)?.lambda_min))
        };
        let current = objective(&sum_first, &sum_second)?;

        // Steepest single-element move by the min-eigenvalue objective.
        let mut best: Option<(usize, f64)> = None;
        for i in 0..size {
            let (from_len, to_len) = if in_first[i] {
                (first.len(), second.len())
            } else {
                (second.len(), first.len())
            };
            if from_len <= 1 {
                continue;
            }
            let _ = to_len;
            if candidates >= opts.trial_budget {
                break;
            }
            candidates += 1;
            let mut from = if in_first[i] {
                sum_first.clone()
            } else {
                sum_second.clone()
            };
            let mut to = if in_first[i] {
                sum_second.clone()
            } else {
                sum_first.clone()
            };
            from.add_scaled_outer(&vectors[i], -1.0);
            to.add_scaled_outer(&vectors[i], 1.0);
            let moved = objective(&from, &to)?;
            if moved > current + 1e-15 && best.is_none_or(|(_, b)| moved > b) {
                best = Some((i, moved));
            }
        }
        match best {
            Some((i, _)) => in_first[i] = !in_first[i],
            None => restart(&mut order, &mut in_first, rng),
        }
    }
    Err(Error::SplitSearchFailure {
        level: 0,
        set_index: 0,
        candidates,
    })
}

fn sample_vectors(sample: &Sample, space: &FunctionSpace) -> Result<Vec<Vec<Complex64>>> {
    let m = sample.len() as f64;
    sample
        .points
        .iter()
        .zip(&sample.weights)
        .map(|(&x, &w)| {
            let scale = (w / m).sqrt();
            Ok(space
                .eval_basis(x)?
                .into_iter()
                .map(|v| Complex64::new(scale * v, 0.0))
                .collect())
        })
        .collect()
}

fn require_conditioned(gram: &GramMatrix) -> Result<()> {
    let dist = gram.spectral_distance_to_identity();
    if dist > CONDITIONING_RADIUS + SPECTRAL_SLACK {
        return Err(Error::Precondition(format!(
            "sample Gram matrix has spectral distance {dist:.6} > 1/2 from the identity"
        )));
    }
    Ok(())
}

/// Recursively partitions a conditioned sample per its split schedule.
///
/// Each returned set `J` carries the verified eigenvalue range of
/// `(m/n) Σ_{i ∈ J} a_i a_i^*`, which lies within
/// `[θ c_lower, c_upper / θ]`.
pub fn build_partition<R: Rng>(
    sample: &Sample,
    space: &FunctionSpace,
    opts: &SplitOptions,
    rng: &mut R,
) -> Result<PartitionResult> {
    opts.validate()?;
    let gram = gramian::gram(sample, space)?;
    require_conditioned(&gram)?;

    let m = sample.len();
    let n = space.dim();
    let schedule = build_schedule(n, m)?;
    let vectors = sample_vectors(sample, space)?;

    let mut sets: Vec<Vec<usize>> = vec![(0..m).collect()];
    let mut search_stats = Vec::new();
    for level in 0..schedule.levels {
        let mut next = Vec::with_capacity(sets.len() * 2);
        for (set_index, set) in sets.iter().enumerate() {
            let subset: Vec<Vec<Complex64>> = set.iter().map(|&i| vectors[i].clone()).collect();
            let split = split_once(
                &subset,
                schedule.alphas[level],
                schedule.betas[level],
                schedule.delta,
                opts,
                rng,
            )
            .map_err(|e| match e {
                Error::SplitSearchFailure { candidates, .. } => Error::SplitSearchFailure {
                    level,
                    set_index,
                    candidates,
                },
                other => other,
            })?;
            search_stats.push(SplitStats {
                level,
                set_index,
                candidates_tried: split.candidates_tried,
            });
            next.push(split.first.iter().map(|&i| set[i]).collect());
            next.push(split.second.iter().map(|&i| set[i]).collect());
        }
        sets = next;
    }

    let scale = m as f64 / n as f64;
    let mut framing = Vec::with_capacity(sets.len());
    for set in &sets {
        let mut sum = outer_sum(&vectors, set, n);
        sum.scale(scale);
        let bounds = frame_bounds(&sum)?;
        let lo = opts.theta * schedule.c_lower - SPECTRAL_SLACK;
        let hi = schedule.c_upper / opts.theta + SPECTRAL_SLACK;
        if bounds.lambda_min < lo || bounds.lambda_max > hi {
            return Err(Error::Inconsistency(format!(
                "partition cell frame [{}, {}] escapes [{lo}, {hi}]",
                bounds.lambda_min, bounds.lambda_max
            )));
        }
        framing.push(bounds);
    }

    Ok(PartitionResult {
        schedule,
        sets,
        framing,
        search_stats,
    })
}

/// Keeps one cell of the partition, chosen with probability `|J_k| / m`.
///
/// The result has at most `c_upper · n` points and its Gram matrix
/// satisfies `λ_min(G_X) ≥ c_lower / c_upper` up to the `theta` relaxation
/// used when the partition was built.
pub fn random_subsample<R: Rng>(
    partition: &PartitionResult,
    sample: &Sample,
    rng: &mut R,
) -> Result<Sample> {
    let m = sample.len();
    let covered: usize = partition.sets.iter().map(Vec::len).sum();
    if covered != m || partition.sets.iter().flatten().any(|&i| i >= m) {
        return Err(Error::Inconsistency(
            "partition does not cover the sample".into(),
        ));
    }
    let mut pick = rng.gen_range(0..m);
    let mut chosen = partition.sets.len() - 1;
    for (k, set) in partition.sets.iter().enumerate() {
        if pick < set.len() {
            chosen = k;
            break;
        }
        pick -= set.len();
    }
    let set = &partition.sets[chosen];
    Ok(Sample {
        points: set.iter().map(|&i| sample.points[i]).collect(),
        weights: set.iter().map(|&i| sample.weights[i]).collect(),
        provenance: Provenance::Subsampled,
        parent_size: m,
        redraw_count: 0,
    })
}

/// Removes points one at a time, always the one whose removal leaves the
/// largest `λ_min`, while that value stays at or above `lambda_floor`.
/// Ties pick the lowest index.
pub fn greedy_removal(sample: &Sample, space: &FunctionSpace, lambda_floor: f64) -> Result<Sample> {
    if lambda_floor.is_nan() || lambda_floor <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda floor must be positive, got {lambda_floor}"
        )));
    }
    let gram = gramian::gram(sample, space)?;
    if gram.lambda_min() < lambda_floor - VERIFY_SLACK {
        return Err(Error::Precondition(format!(
            "initial λ_min = {} already below the floor {lambda_floor}",
            gram.lambda_min()
        )));
    }

    let m = sample.len();
    let n = space.dim();
    let basis: Vec<Vec<f64>> = sample
        .points
        .iter()
        .map(|&x| space.eval_basis(x))
        .collect::<Result<_>>()?;

    // Unnormalized sum Σ w_i ℓ_i ℓ_i^*; the Gram matrix after removing
    // index p from k survivors is (M - w_p ℓ_p ℓ_p^*) / (k - 1).
    let mut total = CMatrix::zeros(n);
    let mut alive: Vec<usize> = (0..m).collect();
    let lifted: Vec<Vec<Complex64>> = basis
        .iter()
        .map(|row| row.iter().map(|&v| Complex64::new(v, 0.0)).collect())
        .collect();
    for (v, &w) in lifted.iter().zip(&sample.weights) {
        total.add_scaled_outer(v, w);
    }

    while alive.len() > 1 {
        let k = alive.len();
        let mut best: Option<(usize, f64)> = None;
        for (pos, &i) in alive.iter().enumerate() {
            let mut reduced = total.clone();
            reduced.add_scaled_outer(&lifted[i], -sample.weights[i]);
            reduced.scale(1.0 / (k - 1) as f64);
            let lambda = reduced.eigenvalues()?[0];
            if best.is_none_or(|(_, b)| lambda > b) {
                best = Some((pos, lambda));
            }
        }
        let (pos, lambda) = best.expect("nonempty candidate set");
        if lambda < lambda_floor - VERIFY_SLACK {
            break;
        }
        let removed = alive.remove(pos);
        total.add_scaled_outer(&lifted[removed], -sample.weights[removed]);
    }

    Ok(Sample {
        points: alive.iter().map(|&i| sample.points[i]).collect(),
        weights: alive.iter().map(|&i| sample.weights[i]).collect(),
        provenance: Provenance::GreedyRemoved,
        parent_size: m,
        redraw_count: 0,
    })
}

/// Deterministic twice-barrier sparsification.
///
/// Selects at most `⌈c n⌉` points of a conditioned sample and rescales
/// their weights so the output Gram matrix `G_X = Σ s_i a_i a_i^*`
/// satisfies
///
/// ```text
/// (1/2) (1 - 1/√c)² I ≤ G_X ≤ (3/2) (1 + 1/√c)² I.
/// ```
///
/// Vectors are first whitened by `G^{-1/2}`; each of the `N = ⌈c n⌉` steps
/// advances an upper and a lower spectral barrier and adds the rank-one
/// update keeping both potentials bounded.
pub fn bss_sparsify(sample: &Sample, space: &FunctionSpace, c: f64) -> Result<Sample> {
    if !c.is_finite() || c <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "oversampling factor must exceed one, got {c}"
        )));
    }
    let gram = gramian::gram(sample, space)?;
    require_conditioned(&gram)?;

    let m = sample.len();
    let n = space.dim();
    let vectors = sample_vectors(sample, space)?;
    let white = gram.entries().inv_sqrt()?;
    let whitened: Vec<Vec<Complex64>> = vectors.iter().map(|v| white.matvec(v)).collect();

    let sc = c.sqrt();
    let delta_l = 1.0;
    let eps_l = 1.0 / sc;
    let delta_u = (sc + 1.0) / (sc - 1.0);
    let eps_u = (sc - 1.0) / (c + sc);
    let steps = (c * n as f64).ceil() as usize;

    let mut a = CMatrix::zeros(n);
    let mut s = vec![0.0f64; m];
    let mut upper = n as f64 / eps_u;
    let mut lower = -(n as f64) / eps_l;

    for step in 0..steps {
        let eig = a.eigen()?;
        let next_upper = upper + delta_u;
        let next_lower = lower + delta_l;

        if eig.values[n - 1] >= next_upper || eig.values[0] <= next_lower {
            return Err(Error::SparsificationFailure {
                step,
                gap: f64::NEG_INFINITY,
            });
        }

        let pot_u_old: f64 = eig.values.iter().map(|&l| 1.0 / (upper - l)).sum();
        let pot_u_new: f64 = eig.values.iter().map(|&l| 1.0 / (next_upper - l)).sum();
        let pot_l_old: f64 = eig.values.iter().map(|&l| 1.0 / (l - lower)).sum();
        let pot_l_new: f64 = eig.values.iter().map(|&l| 1.0 / (l - next_lower)).sum();
        let du = pot_u_old - pot_u_new;
        let dl = pot_l_new - pot_l_old;

        let q = &eig.vectors;
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for (i, v) in whitened.iter().enumerate() {
            // Components of v in the eigenbasis of A.
            let mut quad_u1 = 0.0;
            let mut quad_u2 = 0.0;
            let mut quad_l1 = 0.0;
            let mut quad_l2 = 0.0;
            for k in 0..n {
                let mut comp = Complex64::new(0.0, 0.0);
                for r in 0..n {
                    comp += q[(r, k)].conj() * v[r];
                }
                let w2 = comp.norm_sqr();
                let gu = next_upper - eig.values[k];
                let gl = eig.values[k] - next_lower;
                quad_u1 += w2 / (gu * gu);
                quad_u2 += w2 / gu;
                quad_l1 += w2 / (gl * gl);
                quad_l2 += w2 / gl;
            }
            let u_i = quad_u1 / du + quad_u2;
            let l_i = quad_l1 / dl - quad_l2;
            let gap = l_i - u_i;
            if best.is_none_or(|(_, g, _, _)| gap > g) {
                best = Some((i, gap, u_i, l_i));
            }
        }
        let (idx, gap, u_i, l_i) = best.expect("nonempty sample");
        if gap < 0.0 || u_i <= 0.0 {
            return Err(Error::SparsificationFailure { step, gap });
        }
        let t = 2.0 / (u_i + l_i);
        a.add_scaled_outer(&whitened[idx], t);
        s[idx] += t;
        upper = next_upper;
        lower = next_lower;
    }

    let sigma = (1.0 - 1.0 / sc).powi(2) / (steps as f64 - n as f64 * sc);
    let kept: Vec<usize> = (0..m).filter(|&i| s[i] > 0.0).collect();

    let out_size = kept.len();
    let out = Sample {
        points: kept.iter().map(|&i| sample.points[i]).collect(),
        weights: kept
            .iter()
            .map(|&i| sigma * s[i] * sample.weights[i] * out_size as f64 / m as f64)
            .collect(),
        provenance: Provenance::Bss,
        parent_size: m,
        redraw_count: 0,
    };

    let lo = 0.5 * (1.0 - 1.0 / sc).powi(2);
    let hi = 1.5 * (1.0 + 1.0 / sc).powi(2);
    let out_gram = gramian::gram(&out, space)?;
    if out_gram.lambda_min() < lo - SPECTRAL_SLACK || out_gram.lambda_max() > hi + SPECTRAL_SLACK {
        return Err(Error::Inconsistency(format!(
            "sparsified frame [{}, {}] escapes [{lo}, {hi}]",
            out_gram.lambda_min(),
            out_gram.lambda_max()
        )));
    }
    Ok(out)
}
