//! Built-in target functions.
//!
//! Each constructor attaches exact expansion coefficients and squared
//! norms when closed forms exist and the space's quadrature rule is able
//! to verify them; otherwise the target falls back to quadrature.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

use crate::spaces::{gauss_legendre, BasisId, DomainId, FunctionSpace, TargetFunction};
use crate::{Error, Result};

/// Jump location of [`step_target`], irrational so it never coincides with
/// quadrature nodes or cell boundaries.
pub fn step_offset() -> f64 {
    0.5 - 1.0 / PI
}

/// The exponential `x ↦ e^x` with its exact squared norm.
pub fn exp_target(space: &FunctionSpace) -> TargetFunction {
    let norm_sq = match space.domain() {
        DomainId::SymmetricInterval => (2.0f64.exp() - (-2.0f64).exp()) / 4.0,
        DomainId::Circle | DomainId::UnitInterval => (2.0f64.exp() - 1.0) / 2.0,
    };
    TargetFunction::from_real(f64::exp).with_exact_norm_sq(norm_sq)
}

/// The monomial `x ↦ x^k` with exact data where the quadrature rule can
/// verify it.
pub fn monomial_target(space: &FunctionSpace, k: usize) -> Result<TargetFunction> {
    let ki = i32::try_from(k)
        .map_err(|_| Error::InvalidParameter(format!("monomial degree {k} too large")))?;
    let u = TargetFunction::from_real(move |x: f64| x.powi(ki));
    let n = space.dim();
    match space.basis() {
        BasisId::Legendre => {
            let u = u.with_exact_norm_sq(1.0 / (2.0 * k as f64 + 1.0));
            if k + n <= 8 * n {
                let q = k / 2 + n + 1;
                let (nodes, weights) = gauss_legendre(q);
                let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
                for (&x, &w) in nodes.iter().zip(&weights) {
                    let vals = space.basis_eval(x)?;
                    let fx = x.powi(ki) * w / 2.0;
                    for (c, v) in coeffs.iter_mut().zip(&vals) {
                        *c += v * fx;
                    }
                }
                u.with_exact_coeffs(space, coeffs)
            } else {
                Ok(u)
            }
        }
        BasisId::PiecewiseConstant => {
            let u = u.with_exact_norm_sq(1.0 / (2.0 * k as f64 + 1.0));
            if k < 2 * space.quadrature_order() {
                let nf = n as f64;
                let coeffs = (0..n)
                    .map(|i| {
                        let a = i as f64 / nf;
                        let b = (i + 1) as f64 / nf;
                        let v = nf.sqrt() * (b.powi(ki + 1) - a.powi(ki + 1)) / (k as f64 + 1.0);
                        Complex64::new(v, 0.0)
                    })
                    .collect();
                u.with_exact_coeffs(space, coeffs)
            } else {
                Ok(u)
            }
        }
        // The midpoint rule is not exact for polynomials, so only the norm
        // is attached.
        BasisId::Fourier => Ok(u.with_exact_norm_sq(1.0 / (2.0 * k as f64 + 1.0))),
    }
}

fn legendre_values(x: f64, max_degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree + 1);
    out.push(1.0);
    if max_degree == 0 {
        return out;
    }
    out.push(x);
    for k in 1..max_degree {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// The indicator of `[s, 1)` (or `[s, 1]` on the symmetric interval) with
/// `s = 1/2 - 1/π`, with exact coefficients on every basis.
pub fn step_target(space: &FunctionSpace) -> Result<TargetFunction> {
    let s = step_offset();
    let u = TargetFunction::from_real(move |x| if x >= s { 1.0 } else { 0.0 })
        .with_breakpoints(vec![s]);
    let n = space.dim();
    match space.basis() {
        BasisId::Legendre => {
            // c_j = ∫_s^1 L_j dx/2 with ∫ P_j = (P_{j+1} - P_{j-1})/(2j+1).
            let p = legendre_values(s, n);
            let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
            coeffs[0] = Complex64::new((1.0 - s) / 2.0, 0.0);
            for (j, c) in coeffs.iter_mut().enumerate().skip(1) {
                let scale = (2.0 * j as f64 + 1.0).sqrt();
                let prev = p[j - 1];
                let next = if j + 1 < p.len() {
                    p[j + 1]
                } else {
                    let jf = j as f64;
                    ((2.0 * jf + 1.0) * s * p[j] - jf * p[j - 1]) / (jf + 1.0)
                };
                *c = Complex64::new(scale * (prev - next) / (2.0 * (2.0 * j as f64 + 1.0)), 0.0);
            }
            u.with_exact_norm_sq((1.0 - s) / 2.0)
                .with_exact_coeffs(space, coeffs)
        }
        BasisId::Fourier => {
            let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
            coeffs[0] = Complex64::new(1.0 - s, 0.0);
            let sqrt2 = std::f64::consts::SQRT_2;
            for freq in 1..=(n - 1) / 2 {
                let arg = 2.0 * PI * freq as f64 * s;
                let denom = 2.0 * PI * freq as f64;
                coeffs[2 * freq - 1] = Complex64::new(-sqrt2 * arg.sin() / denom, 0.0);
                coeffs[2 * freq] = Complex64::new(sqrt2 * (arg.cos() - 1.0) / denom, 0.0);
            }
            u.with_exact_norm_sq(1.0 - s)
                .with_exact_coeffs(space, coeffs)
        }
        BasisId::PiecewiseConstant => {
            let nf = n as f64;
            let coeffs = (0..n)
                .map(|i| {
                    let a = i as f64 / nf;
                    let b = (i + 1) as f64 / nf;
                    let overlap = (b - a.max(s)).clamp(0.0, b - a);
                    Complex64::new(nf.sqrt() * overlap, 0.0)
                })
                .collect();
            u.with_exact_norm_sq(1.0 - s)
                .with_exact_coeffs(space, coeffs)
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * PI * u2;
    (r * theta.cos(), r * theta.sin())
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let (a, b) = standard_normal(rng);
    Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// The element of the space with the given coefficient vector.
pub fn element_from_coeffs(
    space: &FunctionSpace,
    coeffs: Vec<Complex64>,
) -> Result<TargetFunction> {
    if coeffs.len() != space.dim() {
        return Err(Error::ShapeMismatch {
            expected: space.dim(),
            got: coeffs.len(),
        });
    }
    let eval_space = space.clone();
    let eval_coeffs = coeffs.clone();
    let norm_sq = coeffs.iter().map(|c| c.norm_sqr()).sum();
    TargetFunction::new(move |x| {
        let vals = eval_space.eval_basis_unchecked(x);
        eval_coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum()
    })
    .with_exact_norm_sq(norm_sq)
    .with_exact_coeffs(space, coeffs)
}

/// A random element of the space with standard complex normal
/// coefficients (`E |c_j|² = 1`).
pub fn random_element<R: Rng>(space: &FunctionSpace, rng: &mut R) -> Result<TargetFunction> {
    let coeffs = (0..space.dim()).map(|_| complex_normal(rng)).collect();
    element_from_coeffs(space, coeffs)
}

/// A random element of the doubled space, carrying its exact coefficients
/// and norm with respect to the base space, so its best-approximation
/// error is known in closed form and strictly positive.
///
/// The doubled dimension is `2n` for nested bases (`2n + 1` for Fourier,
/// keeping it odd); for piecewise constants the base coefficients are
/// `(c_{2j} + c_{2j+1})/√2` since each coarse cell merges two fine ones.
pub fn random_double_element<R: Rng>(space: &FunctionSpace, rng: &mut R) -> Result<TargetFunction> {
    let n = space.dim();
    let n2 = match space.basis() {
        BasisId::Fourier => 2 * n + 1,
        _ => 2 * n,
    };
    let big = FunctionSpace::new(space.basis(), n2, None)?;
    let coeffs2: Vec<Complex64> = (0..n2).map(|_| complex_normal(rng)).collect();
    let norm_sq: f64 = coeffs2.iter().map(|c| c.norm_sqr()).sum();

    let base_coeffs: Vec<Complex64> = match space.basis() {
        BasisId::Legendre | BasisId::Fourier => coeffs2[..n].to_vec(),
        BasisId::PiecewiseConstant => (0..n)
            .map(|j| (coeffs2[2 * j] + coeffs2[2 * j + 1]) * std::f64::consts::FRAC_1_SQRT_2)
            .collect(),
    };
    let breakpoints = match space.basis() {
        BasisId::PiecewiseConstant => (1..n2).map(|i| i as f64 / n2 as f64).collect(),
        _ => Vec::new(),
    };

    let eval_coeffs = coeffs2;
    TargetFunction::new(move |x| {
        let vals = big.eval_basis_unchecked(x);
        eval_coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum()
    })
    .with_breakpoints(breakpoints)
    .with_exact_norm_sq(norm_sq)
    .with_exact_coeffs(space, base_coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngStream;

    #[test]
    fn exp_norm_matches_quadrature() {
        for space in [
            FunctionSpace::legendre(4).unwrap(),
            FunctionSpace::fourier(5).unwrap(),
            FunctionSpace::piecewise_constant(4).unwrap(),
        ] {
            let u = exp_target(&space);
            let exact = u.exact_norm_sq().unwrap();
            let plain = TargetFunction::from_real(f64::exp);
            let numeric = space.norm_sq(&plain);
            assert!(
                (exact - numeric).abs() < 1e-5,
                "{:?}: {exact} vs {numeric}",
                space.basis()
            );
        }
    }

    #[test]
    fn monomial_exact_data_is_consistent() {
        let space = FunctionSpace::legendre(4).unwrap();
        for k in 0..8 {
            let u = monomial_target(&space, k).unwrap();
            assert!(u.exact_coeffs().is_some(), "k = {k}");
        }
        let pwc = FunctionSpace::piecewise_constant(5).unwrap();
        let u = monomial_target(&pwc, 3).unwrap();
        assert!(u.exact_coeffs().is_some());
    }

    #[test]
    fn square_error_on_two_dims() {
        let space = FunctionSpace::legendre(2).unwrap();
        let u = monomial_target(&space, 2).unwrap();
        let e = space.best_approx_error(&u).unwrap();
        assert!((e - 2.0 / 45.0f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn step_exact_coeffs_verify_on_all_bases() {
        for space in [
            FunctionSpace::legendre(5).unwrap(),
            FunctionSpace::fourier(7).unwrap(),
            FunctionSpace::piecewise_constant(6).unwrap(),
        ] {
            let u = step_target(&space).unwrap();
            assert!(u.exact_coeffs().is_some(), "{:?}", space.basis());
            let e_sq = space.best_approx_error_sq(&u).unwrap();
            assert!(e_sq > 0.0 && e_sq < 1.0, "{:?}: {e_sq}", space.basis());
        }
    }

    #[test]
    fn step_offset_value() {
        assert!((step_offset() - 0.1816901138162093).abs() < 1e-16);
    }

    #[test]
    fn random_element_has_zero_best_error() {
        let space = FunctionSpace::fourier(5).unwrap();
        let mut rng = RngStream::new(40, 0).rng();
        let u = random_element(&space, &mut rng).unwrap();
        let e_sq = space.best_approx_error_sq(&u).unwrap();
        assert!(e_sq.abs() < 1e-12);
    }

    #[test]
    fn double_element_error_matches_tail() {
        let mut rng = RngStream::new(41, 0).rng();
        for space in [
            FunctionSpace::legendre(3).unwrap(),
            FunctionSpace::fourier(3).unwrap(),
            FunctionSpace::piecewise_constant(4).unwrap(),
        ] {
            let u = random_double_element(&space, &mut rng).unwrap();
            let e_sq = space.best_approx_error_sq(&u).unwrap();
            assert!(e_sq > 0.0, "{:?}", space.basis());
            let norm = u.exact_norm_sq().unwrap();
            let head: f64 = u.exact_coeffs().unwrap().iter().map(|c| c.norm_sqr()).sum();
            assert!((e_sq - (norm - head)).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_generator_moments() {
        let mut rng = RngStream::new(4242, 0).rng();
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let z = complex_normal(&mut rng);
            sum += z.re + z.im;
            sum_sq += z.norm_sqr();
        }
        assert!((sum / n as f64).abs() < 0.01);
        assert!((sum_sq / n as f64 - 1.0).abs() < 0.01);
    }
}
