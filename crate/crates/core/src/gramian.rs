//! Empirical Gram matrices and weighted least-squares normal equations.
//!
//! For a weighted sample `{(x_i, w_i)}` of size `m` the Gram matrix is
//!
//! ```text
//! G_jk = (1/m) Σ_i w_i L_j(x_i) conj(L_k(x_i))
//! ```
//!
//! the matrix of the discrete inner product behind the seminorm
//! `‖v‖_X² = (1/m) Σ_i w_i |v(x_i)|²`. With Christoffel weights and draws
//! from the optimal density, `E[G] = I`.

use num_complex::Complex64;

use crate::linalg::CMatrix;
use crate::sampling::Sample;
use crate::spaces::{Evaluable, FunctionSpace};
use crate::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_FLOOR: f64 = -1e-10;
const SINGULARITY_FLOOR: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-8;

/// A validated empirical Gram matrix with cached spectrum.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: CMatrix,
    sample_size: usize,
    eigenvalues: Vec<f64>,
}

impl GramMatrix {
    /// Wraps raw entries, checking Hermitian symmetry and positive
    /// semi-definiteness up to roundoff.
    pub fn from_entries(entries: CMatrix, sample_size: usize) -> Result<Self> {
        entries.require_hermitian(HERMITIAN_TOL)?;
        let eigenvalues = entries.eigenvalues()?;
        if let Some(&lo) = eigenvalues.first() {
            if lo < PSD_FLOOR {
                return Err(Error::NotPositiveSemiDefinite { lambda_min: lo });
            }
        }
        Ok(GramMatrix {
            entries,
            sample_size,
            eigenvalues,
        })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// The operator norm `‖G - I‖₂ = max_i |λ_i - 1|`.
    pub fn spectral_distance_to_identity(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| (l - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }
}

/// Assembles the weighted Gram matrix of a sample.
pub fn gram(sample: &Sample, space: &FunctionSpace) -> Result<GramMatrix> {
    let m = sample.len();
    if m == 0 {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    if sample.weights.len() != m {
        return Err(Error::ShapeMismatch {
            expected: m,
            got: sample.weights.len(),
        });
    }
    let n = space.dim();
    let mut entries = CMatrix::zeros(n);
    let scale = 1.0 / m as f64;
    for (&x, &w) in sample.points.iter().zip(&sample.weights) {
        let vals = space.eval_basis(x)?;
        let s = w * scale;
        for j in 0..n {
            let vj = vals[j] * s;
            for k in 0..n {
                entries[(j, k)] += Complex64::new(vj * vals[k], 0.0);
            }
        }
    }
    GramMatrix::from_entries(entries, m)
}

/// The discrete squared seminorm `(1/m) Σ_i w_i |v(x_i)|²`.
pub fn discrete_norm_sq(sample: &Sample, v: &dyn Evaluable) -> f64 {
    let values: Vec<Complex64> = sample.points.iter().map(|&x| v.value(x)).collect();
    discrete_norm_sq_from_values(sample, &values).expect("lengths match by construction")
}

/// Same as [`discrete_norm_sq`] for precomputed point values.
pub fn discrete_norm_sq_from_values(sample: &Sample, values: &[Complex64]) -> Result<f64> {
    if values.len() != sample.len() {
        return Err(Error::ShapeMismatch {
            expected: sample.len(),
            got: values.len(),
        });
    }
    let m = sample.len() as f64;
    Ok(sample
        .weights
        .iter()
        .zip(values)
        .map(|(&w, y)| w * y.norm_sqr())
        .sum::<f64>()
        / m)
}

/// Right-hand side of the normal equations,
/// `b_j = (1/m) Σ_i w_i L_j(x_i) conj(y_i)`.
pub fn rhs_vector(
    sample: &Sample,
    space: &FunctionSpace,
    values: &[Complex64],
) -> Result<Vec<Complex64>> {
    let m = sample.len();
    if values.len() != m {
        return Err(Error::ShapeMismatch {
            expected: m,
            got: values.len(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    let n = space.dim();
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    let scale = 1.0 / m as f64;
    for ((&x, &w), y) in sample.points.iter().zip(&sample.weights).zip(values) {
        let vals = space.eval_basis(x)?;
        let yw = y.conj() * (w * scale);
        for (bj, &vj) in b.iter_mut().zip(&vals) {
            *bj += yw * vj;
        }
    }
    Ok(b)
}

/// Solves `G a = b`, refusing nearly singular systems.
pub fn solve_normal_equations(gram: &GramMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if b.len() != gram.dim() {
        return Err(Error::ShapeMismatch {
            expected: gram.dim(),
            got: b.len(),
        });
    }
    let lambda_min = gram.lambda_min();
    if lambda_min <= SINGULARITY_FLOOR {
        return Err(Error::SingularSystem { lambda_min });
    }
    let x = gram.entries.solve_hpd(b)?;
    let gx = gram.entries.matvec(&x);
    let residual = gx
        .iter()
        .zip(b)
        .map(|(u, v)| (u - v).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let b_norm = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if residual > RESIDUAL_TOL * b_norm.max(1e-300) {
        return Err(Error::Inconsistency(format!(
            "normal equation residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e} * ‖b‖"
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{draw_iid, Provenance, RngStream, Sample};
    use crate::spaces::FunctionSpace;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Sample whose weighted Gram matrix is the continuous one: quadrature
    /// nodes with weights `m * ω_i` reproduce `∫ L_j L_k dμ = δ_jk`.
    fn quadrature_sample(space: &FunctionSpace) -> Sample {
        let rule = space.quadrature_rule();
        let m = rule.len();
        Sample {
            points: rule.nodes.clone(),
            weights: rule.weights.iter().map(|w| w * m as f64).collect(),
            provenance: Provenance::Iid,
            parent_size: m,
            redraw_count: 0,
        }
    }

    #[test]
    fn gram_of_quadrature_sample_is_identity() {
        for space in [
            FunctionSpace::legendre(4).unwrap(),
            FunctionSpace::fourier(5).unwrap(),
            FunctionSpace::piecewise_constant(3).unwrap(),
        ] {
            let sample = quadrature_sample(&space);
            let g = gram(&sample, &space).unwrap();
            assert!(g.spectral_distance_to_identity() < 1e-12);
        }
    }

    #[test]
    fn trace_of_christoffel_gram_is_dimension() {
        let space = FunctionSpace::legendre(5).unwrap();
        let mut rng = RngStream::new(17, 0).rng();
        let sample = draw_iid(&space, 40, &mut rng).unwrap();
        let g = gram(&sample, &space).unwrap();
        assert!((g.trace() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_quantities_of_diagonal_matrix() {
        let mut m = CMatrix::zeros(2);
        m[(0, 0)] = c(0.6, 0.0);
        m[(1, 1)] = c(1.3, 0.0);
        let g = GramMatrix::from_entries(m, 10).unwrap();
        assert!((g.spectral_distance_to_identity() - 0.4).abs() < 1e-14);
        assert!((g.lambda_min() - 0.6).abs() < 1e-14);
        assert!((g.lambda_max() - 1.3).abs() < 1e-14);
    }

    #[test]
    fn from_entries_rejects_bad_matrices() {
        let mut skew = CMatrix::zeros(2);
        skew[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            GramMatrix::from_entries(skew, 1),
            Err(Error::NotHermitian { .. })
        ));

        let mut indefinite = CMatrix::identity(2);
        indefinite[(1, 1)] = c(-0.5, 0.0);
        assert!(matches!(
            GramMatrix::from_entries(indefinite, 1),
            Err(Error::NotPositiveSemiDefinite { .. })
        ));
    }

    #[test]
    fn solve_recovers_conjugated_coefficients() {
        let space = FunctionSpace::legendre(3).unwrap();
        let mut rng = RngStream::new(23, 0).rng();
        let sample = draw_iid(&space, 200, &mut rng).unwrap();
        let g = gram(&sample, &space).unwrap();

        let coeffs = [c(0.3, 0.7), c(-1.1, 0.2), c(0.0, -0.4)];
        let values: Vec<Complex64> = sample
            .points
            .iter()
            .map(|&x| {
                let basis = space.basis_eval(x).unwrap();
                coeffs.iter().zip(&basis).map(|(a, b)| a * b).sum()
            })
            .collect();
        let b = rhs_vector(&sample, &space, &values).unwrap();
        let a = solve_normal_equations(&g, &b).unwrap();
        for (ai, ci) in a.iter().zip(&coeffs) {
            assert!((ai.conj() - ci).norm() < 1e-10);
        }
    }

    #[test]
    fn solve_rejects_singular_gram() {
        let space = FunctionSpace::piecewise_constant(4).unwrap();
        // All points in one cell leave three basis directions unseen.
        let sample = Sample::from_points(&space, vec![0.1, 0.15, 0.2], Provenance::Iid).unwrap();
        let g = gram(&sample, &space).unwrap();
        let b = vec![c(1.0, 0.0); 4];
        assert!(matches!(
            solve_normal_equations(&g, &b),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn discrete_norm_matches_quadratic_form() {
        let space = FunctionSpace::legendre(4).unwrap();
        let mut rng = RngStream::new(31, 0).rng();
        let sample = draw_iid(&space, 60, &mut rng).unwrap();
        let g = gram(&sample, &space).unwrap();

        let nu = [c(0.5, -0.2), c(1.0, 0.0), c(-0.3, 0.9), c(0.0, 0.1)];
        let values: Vec<Complex64> = sample
            .points
            .iter()
            .map(|&x| {
                let basis = space.basis_eval(x).unwrap();
                nu.iter().zip(&basis).map(|(a, b)| a * b).sum()
            })
            .collect();
        let lhs = discrete_norm_sq_from_values(&sample, &values).unwrap();
        let gnu = g.entries().matvec(&nu);
        let rhs: f64 = nu.iter().zip(&gnu).map(|(a, b)| (a.conj() * b).re).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let space = FunctionSpace::legendre(2).unwrap();
        let sample = Sample::from_points(&space, vec![0.0, 0.5], Provenance::Iid).unwrap();
        assert!(matches!(
            rhs_vector(&sample, &space, &[c(1.0, 0.0)]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            discrete_norm_sq_from_values(&sample, &[c(1.0, 0.0)]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn trace_identity_holds_for_any_points(
            raw in proptest::collection::vec(-0.999f64..0.999, 5..40),
        ) {
            let space = FunctionSpace::legendre(3).unwrap();
            let sample = Sample::from_points(&space, raw, Provenance::Iid).unwrap();
            let g = gram(&sample, &space).unwrap();
            prop_assert!((g.trace() - 3.0).abs() < 1e-12);
        }

        #[test]
        fn quadratic_form_identity(
            raw in proptest::collection::vec(0.0f64..0.999, 6..30),
            nu_raw in proptest::collection::vec(-2.0f64..2.0, 10),
        ) {
            let space = FunctionSpace::fourier(5).unwrap();
            let sample = Sample::from_points(&space, raw, Provenance::Iid).unwrap();
            let g = gram(&sample, &space).unwrap();
            let nu: Vec<Complex64> = nu_raw
                .chunks(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect();
            let values: Vec<Complex64> = sample
                .points
                .iter()
                .map(|&x| {
                    let basis = space.basis_eval(x).unwrap();
                    nu.iter().zip(&basis).map(|(a, b)| a * b).sum()
                })
                .collect();
            let lhs = discrete_norm_sq_from_values(&sample, &values).unwrap();
            let gnu = g.entries().matvec(&nu);
            let rhs: f64 = nu.iter().zip(&gnu).map(|(a, b)| (a.conj() * b).re).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10 * lhs.max(1.0));
        }
    }
}
