//! Dense complex Hermitian linear algebra sized for small problems.
//!
//! Everything here is written for matrices of dimension at most a few
//! hundred: storage is a flat row-major `Vec`, eigenvalues come from a
//! cyclic Jacobi iteration with complex rotations, and positive definite
//! solves use an unpivoted Cholesky factorization.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};

use crate::{Error, Result};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted ascending; column `k` of `vectors` is the unit
/// eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *yi = acc;
        }
        y
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                if aik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_in_place(&mut self, other: &CMatrix) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    /// Adds `s * v v^*` to the matrix.
    pub fn add_scaled_outer(&mut self, v: &[Complex64], s: f64) {
        assert_eq!(v.len(), self.n);
        for i in 0..self.n {
            let vi = v[i] * s;
            for j in 0..self.n {
                self[(i, j)] += vi * v[j].conj();
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation from the adjoint.
    pub fn hermitian_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i..self.n {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn require_hermitian(&self, tol: f64) -> Result<()> {
        let residual = self.hermitian_residual();
        if residual > tol {
            return Err(Error::NotHermitian { residual });
        }
        Ok(())
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    acc += self[(i, j)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }

    /// Eigenvalues of a Hermitian matrix, sorted ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigen()?.values)
    }

    /// Full eigendecomposition of a Hermitian matrix by cyclic Jacobi
    /// iteration with complex plane rotations.
    pub fn eigen(&self) -> Result<Eigen> {
        self.require_hermitian(1e-12 * self.frobenius_norm().max(1.0))?;
        let n = self.n;
        let mut a = self.clone();
        let mut v = CMatrix::identity(n);
        let scale = self.frobenius_norm();
        let tol = JACOBI_TOL * scale;

        let mut converged = scale == 0.0 || n < 2;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if a.off_diagonal_norm() <= tol {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let r = apq.norm();
                    if r <= JACOBI_TOL * scale / (n as f64) {
                        continue;
                    }
                    let phase = apq / r;
                    let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * r);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    // A <- J^* A J with J the rotation in the (p, q) plane.
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * c - akq * s * phase.conj();
                        a[(k, q)] = akp * s * phase + akq * c;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = apk * c - aqk * s * phase;
                        a[(q, k)] = apk * s * phase.conj() + aqk * c;
                    }
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);

                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * c - vkq * s * phase.conj();
                        v[(k, q)] = vkp * s * phase + vkq * c;
                    }
                }
            }
        }
        if !converged && a.off_diagonal_norm() > tol {
            return Err(Error::EigenNoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
            });
        }

        let mut order: Vec<usize> = (0..n).collect();
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
        let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
        let vectors = CMatrix::from_fn(n, |i, j| v[(i, order[j])]);
        Ok(Eigen { values, vectors })
    }

    /// Solves `A x = b` for Hermitian positive definite `A` by Cholesky
    /// factorization.
    pub fn solve_hpd(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.n {
            return Err(Error::ShapeMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let l = self.cholesky()?;
        let n = self.n;

        // L y = b, then L^* x = y.
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = l[(i, k)];
                y[i] = y[i] - lik * y[k];
            }
            y[i] /= l[(i, i)].re;
        }
        let mut x = y;
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = l[(k, i)].conj();
                x[i] = x[i] - lki * x[k];
            }
            x[i] /= l[(i, i)].re;
        }
        Ok(x)
    }

    fn cholesky(&self) -> Result<CMatrix> {
        let n = self.n;
        let mut l = CMatrix::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if d <= 0.0 {
                return Err(Error::SingularSystem { lambda_min: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut acc = self[(i, j)];
                for k in 0..j {
                    acc -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = acc / ljj;
            }
        }
        Ok(l)
    }

    /// Inverse square root of a Hermitian positive definite matrix.
    pub fn inv_sqrt(&self) -> Result<CMatrix> {
        let eig = self.eigen()?;
        if let Some(&lo) = eig.values.first() {
            if lo <= 0.0 {
                return Err(Error::NotPositiveSemiDefinite { lambda_min: lo });
            }
        }
        let n = self.n;
        let q = eig.vectors;
        let mut out = CMatrix::zeros(n);
        for k in 0..n {
            let w = 1.0 / eig.values[k].sqrt();
            for i in 0..n {
                let qik = q[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += qik * q[(j, k)].conj();
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
        let b = CMatrix::from_fn(n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let mut h = b.adjoint();
        h.add_in_place(&b);
        h
    }

    fn random_hpd(n: usize, rng: &mut impl Rng) -> CMatrix {
        let b = CMatrix::from_fn(n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let mut h = b.matmul(&b.adjoint());
        for i in 0..n {
            h[(i, i)] += 0.5;
        }
        h
    }

    fn power_iteration_lambda_max(a: &CMatrix, iters: usize) -> f64 {
        let n = a.dim();
        let mut x = vec![c(1.0, 0.0); n];
        let mut lambda = 0.0;
        for _ in 0..iters {
            let y = a.matvec(&x);
            let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            lambda = x
                .iter()
                .zip(&y)
                .map(|(xi, yi)| (xi.conj() * yi).re)
                .sum::<f64>()
                / x.iter().map(|v| v.norm_sqr()).sum::<f64>();
            x = y.iter().map(|v| v / norm).collect();
        }
        lambda
    }

    #[test]
    fn eigen_of_two_by_two() {
        let mut a = CMatrix::zeros(2);
        a[(0, 0)] = c(2.0, 0.0);
        a[(0, 1)] = c(1.0, -1.0);
        a[(1, 0)] = c(1.0, 1.0);
        a[(1, 1)] = c(3.0, 0.0);
        let values = a.eigenvalues().unwrap();
        assert!((values[0] - 1.0).abs() < 1e-12);
        assert!((values[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 5, 8, 12] {
            let a = random_hermitian(n, &mut rng);
            let eig = a.eigen().unwrap();
            let q = &eig.vectors;

            let qhq = q.adjoint().matmul(q);
            assert!(
                qhq.sub(&CMatrix::identity(n)).frobenius_norm() < 1e-10,
                "eigenvectors not orthonormal for n = {n}"
            );

            let mut lam = CMatrix::zeros(n);
            for i in 0..n {
                lam[(i, i)] = c(eig.values[i], 0.0);
            }
            let back = q.matmul(&lam).matmul(&q.adjoint());
            assert!(
                back.sub(&a).frobenius_norm() < 1e-10 * a.frobenius_norm().max(1.0),
                "Q L Q^* != A for n = {n}"
            );
        }
    }

    #[test]
    fn eigen_matches_power_iteration() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for n in [2usize, 4, 9] {
            let a = random_hpd(n, &mut rng);
            let values = a.eigenvalues().unwrap();
            let lmax = power_iteration_lambda_max(&a, 2000);
            assert!(
                (values[n - 1] - lmax).abs() < 1e-8 * lmax.max(1.0),
                "jacobi {} vs power iteration {}",
                values[n - 1],
                lmax
            );
        }
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let mut a = CMatrix::zeros(2);
        a[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(a.eigen(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eigen_of_zero_matrix() {
        let values = CMatrix::zeros(3).eigenvalues().unwrap();
        assert_eq!(values, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn cholesky_solve_matches_residual() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for n in [1usize, 3, 6, 10] {
            let a = random_hpd(n, &mut rng);
            let b: Vec<Complex64> = (0..n)
                .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let x = a.solve_hpd(&b).unwrap();
            let ax = a.matvec(&x);
            let res = ax
                .iter()
                .zip(&b)
                .map(|(u, v)| (u - v).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let bnorm = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!(res <= 1e-10 * bnorm, "residual {res} too large for n = {n}");
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = CMatrix::identity(2);
        a[(1, 1)] = c(-1.0, 0.0);
        assert!(matches!(
            a.solve_hpd(&[c(1.0, 0.0), c(1.0, 0.0)]),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn inv_sqrt_whitens() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let a = random_hpd(5, &mut rng);
        let s = a.inv_sqrt().unwrap();
        let w = s.matmul(&a).matmul(&s);
        assert!(w.sub(&CMatrix::identity(5)).frobenius_norm() < 1e-10);
    }
}
