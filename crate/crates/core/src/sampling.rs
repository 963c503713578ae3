//! Random point generation for weighted least squares.
//!
//! Points are drawn i.i.d. from the density `(1/n) Σ_j |L_j|² dμ` and carry
//! the Christoffel weight `w(x) = n / Σ_j |L_j(x)|²`, so that the weighted
//! empirical Gram matrix has the identity as its expectation.
//! [`conditioned_sample`] additionally redraws until that matrix lies
//! within spectral distance 1/2 of the identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::gramian;
use crate::spaces::{DomainId, FunctionSpace};
use crate::{Error, Result};

/// Proposals a single rejection draw may consume before giving up.
pub const DEFAULT_REJECTION_CAP: u64 = 1_000_000;

/// Draws a conditioned sample may attempt before giving up.
pub const DEFAULT_MAX_REDRAWS: usize = 1000;

/// Spectral radius around the identity accepted by conditioning.
pub const CONDITIONING_RADIUS: f64 = 0.5;

/// A seeded random source split into independent streams.
///
/// The same `(seed, stream_id)` pair always yields the same generator, so
/// every randomized result in the crate is reproducible. Parallel or
/// repeated trials use consecutive stream ids derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    pub fn offset(&self, k: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream_id: self.stream_id.wrapping_add(k),
        }
    }
}

/// How a sample was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Iid,
    Conditioned,
    Subsampled,
    Bss,
    GreedyRemoved,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Iid => "iid",
            Provenance::Conditioned => "conditioned",
            Provenance::Subsampled => "subsampled",
            Provenance::Bss => "bss",
            Provenance::GreedyRemoved => "greedy_removed",
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A weighted point set.
///
/// `weights[i]` is the Christoffel weight of `points[i]` for samples drawn
/// directly; sparsified samples may carry rescaled weights so that the
/// weighted Gram matrix of the survivors reproduces their frame.
/// `parent_size` is the size of the sample this one was derived from, and
/// `redraw_count` is the number of rejected draws during conditioning
/// (zero otherwise).
#[derive(Debug, Clone)]
pub struct Sample {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub provenance: Provenance,
    pub parent_size: usize,
    pub redraw_count: usize,
}

impl Sample {
    /// Builds a sample from raw points, attaching Christoffel weights.
    pub fn from_points(
        space: &FunctionSpace,
        points: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let weights = points
            .iter()
            .map(|&x| space.christoffel_weight(x))
            .collect::<Result<Vec<f64>>>()?;
        let parent_size = points.len();
        Ok(Sample {
            points,
            weights,
            provenance,
            parent_size,
            redraw_count: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sample size `⌈10 n ln(2n/ε)⌉` sufficient for the conditioning event to
/// have probability at least `1 - ε`.
pub fn minimal_budget(n: usize, epsilon: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "space dimension must be positive".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let raw = 10.0 * n as f64 * (2.0 * n as f64 / epsilon).ln();
    Ok(raw.ceil() as usize)
}

/// One draw from the base measure `μ`.
pub fn sample_mu<R: Rng>(space: &FunctionSpace, rng: &mut R) -> f64 {
    match space.domain() {
        DomainId::SymmetricInterval => rng.gen_range(-1.0..1.0),
        DomainId::Circle | DomainId::UnitInterval => rng.gen_range(0.0..1.0),
    }
}

/// One draw from the density `(1/n) Σ_j |L_j|² dμ`.
///
/// Uses the mixture form: pick a basis index uniformly, then rejection
/// sample `|L_j|² dμ` under the constant envelope `sup |L_j|²`.
pub fn sample_rho<R: Rng>(space: &FunctionSpace, rng: &mut R) -> Result<f64> {
    sample_rho_capped(space, rng, DEFAULT_REJECTION_CAP)
}

pub fn sample_rho_capped<R: Rng>(space: &FunctionSpace, rng: &mut R, cap: u64) -> Result<f64> {
    let j = rng.gen_range(0..space.dim());
    let envelope = space.basis_sup_sq(j);
    for _ in 0..cap {
        let x = sample_mu(space, rng);
        let threshold: f64 = rng.gen::<f64>() * envelope;
        let v = space.eval_basis_unchecked(x)[j];
        if threshold <= v * v {
            return Ok(x);
        }
    }
    Err(Error::SamplingStall { cap })
}

/// `m` i.i.d. draws from the optimal density with Christoffel weights.
pub fn draw_iid<R: Rng>(space: &FunctionSpace, m: usize, rng: &mut R) -> Result<Sample> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "sample size must be positive".into(),
        ));
    }
    let mut points = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for _ in 0..m {
        let x = sample_rho(space, rng)?;
        points.push(x);
        weights.push(space.christoffel_weight(x)?);
    }
    Ok(Sample {
        points,
        weights,
        provenance: Provenance::Iid,
        parent_size: m,
        redraw_count: 0,
    })
}

/// An i.i.d. draw conditioned on `‖G - I‖₂ ≤ 1/2`, realized by redrawing
/// whole samples until the bound holds.
///
/// At most `1 + max_redraws` draws are attempted; `redraw_count` on the
/// returned sample counts the rejected ones. A warning is logged when `m`
/// is below the `ε = 1/2` budget, where acceptance is no longer guaranteed
/// to be likely.
pub fn conditioned_sample<R: Rng>(
    space: &FunctionSpace,
    m: usize,
    max_redraws: usize,
    rng: &mut R,
) -> Result<Sample> {
    let budget = minimal_budget(space.dim(), 0.5)?;
    if m < budget {
        log::warn!(
            "sample size {m} is below the conditioning budget {budget} for n = {}",
            space.dim()
        );
    }
    let mut last_distance = f64::INFINITY;
    for attempt in 0..=max_redraws {
        let mut sample = draw_iid(space, m, rng)?;
        let gram = gramian::gram(&sample, space)?;
        last_distance = gram.spectral_distance_to_identity();
        if last_distance <= CONDITIONING_RADIUS {
            sample.provenance = Provenance::Conditioned;
            sample.redraw_count = attempt;
            return Ok(sample);
        }
    }
    Err(Error::ConditioningFailure {
        max_redraws,
        last_distance,
    })
}
