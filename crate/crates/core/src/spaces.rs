//! Approximation spaces, their quadrature rules, and target functions.
//!
//! A [`FunctionSpace`] is an `n`-dimensional span of an orthonormal basis
//! `L_1, ..., L_n` over a probability measure `μ` on a one-dimensional
//! domain. Three built-in families are provided:
//!
//! * normalized Legendre polynomials on `[-1, 1]` with `dμ = dx/2`,
//! * the real Fourier basis `1, √2 cos 2πkx, √2 sin 2πkx` on the circle
//!   `[0, 1)` (odd dimension),
//! * scaled indicators `√n · 1_{[(i-1)/n, i/n)}` on `[0, 1)`.
//!
//! The space owns a quadrature rule exact (or effectively exact) for the
//! inner products it is asked to compute; integrands with known jump
//! locations are handled by refining the rule at those breakpoints.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

const ORTHONORMALITY_TOL: f64 = 1e-10;
const COEFF_CONSISTENCY_TOL: f64 = 1e-8;
const ERROR_SQ_FLOOR: f64 = -1e-10;

/// Domains on which the built-in spaces live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainId {
    /// The interval `[-1, 1]` with the uniform probability measure `dx/2`.
    SymmetricInterval,
    /// The circle represented as `[0, 1)` with Lebesgue measure.
    Circle,
    /// The interval `[0, 1)` with Lebesgue measure.
    UnitInterval,
}

/// Built-in orthonormal bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisId {
    Legendre,
    Fourier,
    PiecewiseConstant,
}

impl BasisId {
    pub fn domain(self) -> DomainId {
        match self {
            BasisId::Legendre => DomainId::SymmetricInterval,
            BasisId::Fourier => DomainId::Circle,
            BasisId::PiecewiseConstant => DomainId::UnitInterval,
        }
    }
}

/// Nodes and weights of a quadrature rule for the measure `μ`.
///
/// Weights sum to one since `μ` is a probability measure.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// An `n`-dimensional approximation space with its quadrature rule.
#[derive(Debug, Clone)]
pub struct FunctionSpace {
    basis: BasisId,
    n: usize,
    quadrature_order: usize,
    base_rule: QuadratureRule,
}

/// Anything that can be evaluated pointwise on the domain.
///
/// `breakpoints` lists interior jump locations so quadrature rules can be
/// refined around them; smooth functions leave it empty.
pub trait Evaluable {
    fn value(&self, x: f64) -> Complex64;

    fn breakpoints(&self) -> &[f64] {
        &[]
    }
}

/// A single basis function viewed as an evaluable integrand.
pub struct BasisElement<'a> {
    space: &'a FunctionSpace,
    index: usize,
}

impl Evaluable for BasisElement<'_> {
    fn value(&self, x: f64) -> Complex64 {
        Complex64::new(self.space.eval_basis_unchecked(x)[self.index], 0.0)
    }
}

/// A function to approximate, given by a pointwise evaluator.
///
/// Exact expansion coefficients and the exact squared norm may be attached
/// when closed forms are known; operations fall back to quadrature
/// otherwise. Attached coefficients are interpreted against the space used
/// to attach them.
#[derive(Clone)]
pub struct TargetFunction {
    f: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    exact_coeffs: Option<Vec<Complex64>>,
    exact_norm_sq: Option<f64>,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("exact_coeffs", &self.exact_coeffs)
            .field("exact_norm_sq", &self.exact_norm_sq)
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

impl TargetFunction {
    pub fn new(f: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        TargetFunction {
            f: Arc::new(f),
            exact_coeffs: None,
            exact_norm_sq: None,
            breakpoints: Vec::new(),
        }
    }

    pub fn from_real(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TargetFunction::new(move |x| Complex64::new(f(x), 0.0))
    }

    /// Declares interior jump locations of the evaluator.
    pub fn with_breakpoints(mut self, mut breakpoints: Vec<f64>) -> Self {
        breakpoints.sort_by(f64::total_cmp);
        self.breakpoints = breakpoints;
        self
    }

    pub fn with_exact_norm_sq(mut self, norm_sq: f64) -> Self {
        self.exact_norm_sq = Some(norm_sq);
        self
    }

    /// Attaches exact expansion coefficients, checking them against the
    /// quadrature inner products of `space`.
    pub fn with_exact_coeffs(
        mut self,
        space: &FunctionSpace,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        if coeffs.len() != space.n {
            return Err(Error::ShapeMismatch {
                expected: space.n,
                got: coeffs.len(),
            });
        }
        let numeric = space.quadrature_coeffs(&self);
        let worst = coeffs
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        if worst > COEFF_CONSISTENCY_TOL {
            return Err(Error::Inconsistency(format!(
                "declared coefficients deviate from quadrature by {worst:.3e}"
            )));
        }
        self.exact_coeffs = Some(coeffs);
        Ok(self)
    }

    pub fn value(&self, x: f64) -> Complex64 {
        (self.f)(x)
    }

    pub fn exact_coeffs(&self) -> Option<&[Complex64]> {
        self.exact_coeffs.as_deref()
    }

    pub fn exact_norm_sq(&self) -> Option<f64> {
        self.exact_norm_sq
    }
}

impl Evaluable for TargetFunction {
    fn value(&self, x: f64) -> Complex64 {
        (self.f)(x)
    }

    fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

impl FunctionSpace {
    /// Builds a space of dimension `n`, choosing the domain from the basis.
    ///
    /// `quadrature_order` overrides the default resolution (Gauss-Legendre
    /// node count for `Legendre`, midpoint count for `Fourier`, per-cell
    /// node count for `PiecewiseConstant`) and is clamped from below so the
    /// rule stays exact for products of basis functions.
    pub fn new(basis: BasisId, n: usize, quadrature_order: Option<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "space dimension must be positive".into(),
            ));
        }
        if basis == BasisId::Fourier && n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "fourier dimension must be odd, got {n}"
            )));
        }
        let min_order = match basis {
            BasisId::Legendre => 4 * n,
            BasisId::Fourier => 64 * n,
            BasisId::PiecewiseConstant => 2,
        };
        let default_order = match basis {
            BasisId::PiecewiseConstant => 16,
            _ => min_order,
        };
        let quadrature_order = quadrature_order.unwrap_or(default_order).max(min_order);

        let mut space = FunctionSpace {
            basis,
            n,
            quadrature_order,
            base_rule: QuadratureRule {
                nodes: Vec::new(),
                weights: Vec::new(),
            },
        };
        space.base_rule = space.build_base_rule();
        space.check_orthonormality()?;
        Ok(space)
    }

    pub fn legendre(n: usize) -> Result<Self> {
        FunctionSpace::new(BasisId::Legendre, n, None)
    }

    pub fn fourier(n: usize) -> Result<Self> {
        FunctionSpace::new(BasisId::Fourier, n, None)
    }

    pub fn piecewise_constant(n: usize) -> Result<Self> {
        FunctionSpace::new(BasisId::PiecewiseConstant, n, None)
    }

    pub fn basis(&self) -> BasisId {
        self.basis
    }

    pub fn domain(&self) -> DomainId {
        self.basis.domain()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn quadrature_rule(&self) -> &QuadratureRule {
        &self.base_rule
    }

    pub fn basis_element(&self, index: usize) -> BasisElement<'_> {
        assert!(index < self.n, "basis index {index} out of range");
        BasisElement { space: self, index }
    }

    fn domain_bounds(&self) -> (f64, f64) {
        match self.domain() {
            DomainId::SymmetricInterval => (-1.0, 1.0),
            DomainId::Circle | DomainId::UnitInterval => (0.0, 1.0),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self.domain() {
            DomainId::SymmetricInterval => (-1.0..=1.0).contains(&x),
            DomainId::Circle | DomainId::UnitInterval => (0.0..1.0).contains(&x),
        }
    }

    fn check_in_domain(&self, x: f64) -> Result<()> {
        if !x.is_finite() || !self.contains(x) {
            return Err(Error::OutsideDomain {
                x,
                domain: self.domain(),
            });
        }
        Ok(())
    }

    /// Evaluates all basis functions at `x`.
    pub fn basis_eval(&self, x: f64) -> Result<Vec<Complex64>> {
        Ok(self
            .eval_basis(x)?
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect())
    }

    pub(crate) fn eval_basis(&self, x: f64) -> Result<Vec<f64>> {
        self.check_in_domain(x)?;
        Ok(self.eval_basis_unchecked(x))
    }

    pub(crate) fn eval_basis_unchecked(&self, x: f64) -> Vec<f64> {
        let n = self.n;
        match self.basis {
            BasisId::Legendre => {
                let mut out = Vec::with_capacity(n);
                let mut p_prev = 1.0;
                let mut p = x;
                out.push(1.0);
                for j in 1..n {
                    if j > 1 {
                        let k = (j - 1) as f64;
                        let p_next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
                        p_prev = p;
                        p = p_next;
                    }
                    out.push(((2 * j + 1) as f64).sqrt() * p);
                }
                out
            }
            BasisId::Fourier => {
                let mut out = Vec::with_capacity(n);
                out.push(1.0);
                let sqrt2 = std::f64::consts::SQRT_2;
                let mut k = 1usize;
                while out.len() < n {
                    let arg = 2.0 * PI * (k as f64) * x;
                    out.push(sqrt2 * arg.cos());
                    out.push(sqrt2 * arg.sin());
                    k += 1;
                }
                out
            }
            BasisId::PiecewiseConstant => {
                let cell = ((x * n as f64).floor() as usize).min(n - 1);
                let mut out = vec![0.0; n];
                out[cell] = (n as f64).sqrt();
                out
            }
        }
    }

    /// Supremum of `|L_j|²` over the domain, used as a rejection envelope.
    pub(crate) fn basis_sup_sq(&self, index: usize) -> f64 {
        match self.basis {
            BasisId::Legendre => (2 * index + 1) as f64,
            BasisId::Fourier => {
                if index == 0 {
                    1.0
                } else {
                    2.0
                }
            }
            BasisId::PiecewiseConstant => self.n as f64,
        }
    }

    /// The Christoffel weight `w(x) = n / Σ_j |L_j(x)|²`.
    pub fn christoffel_weight(&self, x: f64) -> Result<f64> {
        let values = self.eval_basis(x)?;
        let denom: f64 = values.iter().map(|v| v * v).sum();
        if denom <= f64::MIN_POSITIVE {
            return Err(Error::SingularPoint { x });
        }
        Ok(self.n as f64 / denom)
    }

    fn build_base_rule(&self) -> QuadratureRule {
        match self.basis {
            BasisId::Legendre => self.composite_rule(&[]),
            BasisId::Fourier => {
                let q = self.quadrature_order;
                let nodes = (0..q).map(|i| (i as f64 + 0.5) / q as f64).collect();
                let weights = vec![1.0 / q as f64; q];
                QuadratureRule { nodes, weights }
            }
            BasisId::PiecewiseConstant => self.composite_rule(&[]),
        }
    }

    /// Composite Gauss-Legendre rule over the domain split at cell
    /// boundaries and the given interior breakpoints.
    fn composite_rule(&self, breakpoints: &[f64]) -> QuadratureRule {
        let (lo, hi) = self.domain_bounds();
        let density = match self.domain() {
            DomainId::SymmetricInterval => 0.5,
            _ => 1.0,
        };
        let mut cuts = vec![lo];
        if self.basis == BasisId::PiecewiseConstant {
            for i in 1..self.n {
                cuts.push(i as f64 / self.n as f64);
            }
        }
        cuts.extend(breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);

        let per_segment = match self.basis {
            BasisId::PiecewiseConstant => self.quadrature_order,
            _ => self.quadrature_order.max(2 * self.n),
        };
        let (gl_nodes, gl_weights) = gauss_legendre(per_segment);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if b - a <= 1e-15 {
                continue;
            }
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (t, w) in gl_nodes.iter().zip(&gl_weights) {
                nodes.push(mid + half * t);
                weights.push(w * half * density);
            }
        }
        QuadratureRule { nodes, weights }
    }

    /// Quadrature rule refined at the interior breakpoints of integrands.
    pub fn refined_rule(&self, breakpoints: &[f64]) -> QuadratureRule {
        if breakpoints
            .iter()
            .all(|&b| !self.contains(b) || b == self.domain_bounds().0)
        {
            return self.base_rule.clone();
        }
        self.composite_rule(breakpoints)
    }

    fn check_orthonormality(&self) -> Result<()> {
        let rule = &self.base_rule;
        let n = self.n;
        let mut gram = vec![0.0; n * n];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let vals = self.eval_basis_unchecked(x);
            for i in 0..n {
                for j in 0..n {
                    gram[i * n + j] += w * vals[i] * vals[j];
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[i * n + j] - target).abs());
            }
        }
        if worst > ORTHONORMALITY_TOL {
            return Err(Error::Inconsistency(format!(
                "quadrature rule fails basis orthonormality by {worst:.3e}"
            )));
        }
        Ok(())
    }

    /// The inner product `⟨f, g⟩ = ∫ f ḡ dμ`, conjugate-linear in `g`.
    pub fn inner_product(&self, f: &dyn Evaluable, g: &dyn Evaluable) -> Complex64 {
        let mut cuts: Vec<f64> = f
            .breakpoints()
            .iter()
            .chain(g.breakpoints())
            .copied()
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let rule = self.refined_rule(&cuts);
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            acc += f.value(x) * g.value(x).conj() * w;
        }
        acc
    }

    fn quadrature_coeffs(&self, u: &TargetFunction) -> Vec<Complex64> {
        let rule = self.refined_rule(&u.breakpoints);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.n];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let vals = self.eval_basis_unchecked(x);
            let fx = u.value(x) * w;
            for (c, v) in coeffs.iter_mut().zip(&vals) {
                *c += fx * v;
            }
        }
        coeffs
    }

    /// Expansion coefficients `⟨u, L_j⟩`, exact when attached.
    pub fn coeffs(&self, u: &TargetFunction) -> Result<Vec<Complex64>> {
        match &u.exact_coeffs {
            Some(c) if c.len() == self.n => Ok(c.clone()),
            Some(c) => Err(Error::ShapeMismatch {
                expected: self.n,
                got: c.len(),
            }),
            None => Ok(self.quadrature_coeffs(u)),
        }
    }

    /// The squared norm `‖u‖² = ∫ |u|² dμ`, exact when attached.
    pub fn norm_sq(&self, u: &TargetFunction) -> f64 {
        if let Some(v) = u.exact_norm_sq {
            return v;
        }
        let rule = self.refined_rule(&u.breakpoints);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * u.value(x).norm_sqr())
            .sum()
    }

    /// Squared best-approximation error `e_n(u)² = ‖u‖² - Σ_j |⟨u, L_j⟩|²`.
    pub fn best_approx_error_sq(&self, u: &TargetFunction) -> Result<f64> {
        let coeffs = self.coeffs(u)?;
        let norm_sq = self.norm_sq(u);
        let projected: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let e_sq = norm_sq - projected;
        if e_sq < ERROR_SQ_FLOOR {
            return Err(Error::Inconsistency(format!(
                "negative squared error {e_sq:.3e}: norm and coefficients disagree"
            )));
        }
        Ok(e_sq.max(0.0))
    }

    pub fn best_approx_error(&self, u: &TargetFunction) -> Result<f64> {
        Ok(self.best_approx_error_sq(u)?.sqrt())
    }

    /// Uniform evaluation grid of the given size.
    ///
    /// Size one yields the domain midpoint; the symmetric interval includes
    /// both endpoints, while half-open domains use left cell edges.
    pub fn uniform_grid(&self, size: usize) -> Vec<f64> {
        if size == 1 {
            return vec![match self.domain() {
                DomainId::SymmetricInterval => 0.0,
                _ => 0.5,
            }];
        }
        match self.domain() {
            DomainId::SymmetricInterval => (0..size)
                .map(|i| -1.0 + 2.0 * i as f64 / (size - 1) as f64)
                .collect(),
            _ => (0..size).map(|i| i as f64 / size as f64).collect(),
        }
    }

    /// Max deviation between `u` and its orthogonal projection on a uniform
    /// grid, a stand-in for the sup-norm error.
    pub fn sup_error_proxy(&self, u: &TargetFunction, grid_size: usize) -> Result<f64> {
        if grid_size < 10 * self.n {
            return Err(Error::InvalidParameter(format!(
                "grid size {grid_size} below 10 * n = {}",
                10 * self.n
            )));
        }
        let coeffs = self.coeffs(u)?;
        let mut worst = 0.0f64;
        for x in self.uniform_grid(grid_size) {
            let vals = self.eval_basis_unchecked(x);
            let mut proj = Complex64::new(0.0, 0.0);
            for (c, v) in coeffs.iter().zip(&vals) {
                proj += c * v;
            }
            worst = worst.max((u.value(x) - proj).norm());
        }
        Ok(worst)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`; weights sum to two.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q > 0);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q {
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(q, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(q, x);
        nodes[q - 1 - i] = x;
        weights[q - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..q {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = q as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}
