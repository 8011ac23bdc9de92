//! Dense complex matrices and the spectral routines the rest of the crate
//! leans on: a cyclic Jacobi eigensolver for Hermitian matrices, power
//! iteration for the largest singular value, and a Lanczos top-eigenpair
//! solver for restricted Gram matrices.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{cone, creal, czero, Real};

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = cone();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        Self::from_fn(r, c, |i, j| creal(T::lit(rows[i][j])))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, alpha: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * alpha).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: Complex<T>, other: &Self, beta: Complex<T>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a * alpha + b * beta)
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(cone(), other, cone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(cone(), other, -cone::<T>())
    }

    /// Matrix product. Zero entries of `self` are skipped, which makes
    /// products of band matrices cheap without a sparse format.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        let zero = czero::<T>();
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == zero {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(czero(), |acc, (&a, &x)| acc + a * x)
            })
            .collect()
    }

    /// `self^* v` without materialising the adjoint.
    pub fn adjoint_mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![czero(); self.cols];
        for (i, &x) in v.iter().enumerate() {
            if x == czero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a.conj() * x;
            }
        }
        out
    }

    /// Principal/rectangular submatrix on the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|a| a.norm()).fold(T::zero(), T::max)
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn hermitian_defect(&self) -> T {
        self.max_abs_diff(&self.adjoint())
    }

    /// Block matrix from a square grid of equally sized blocks.
    pub fn from_blocks(blocks: &[Vec<Matrix<T>>]) -> Self {
        let k = blocks.len();
        let n = blocks[0][0].rows;
        let m = blocks[0][0].cols;
        Self::from_fn(k * n, blocks[0].len() * m, |i, j| blocks[i / n][j / m][(i % n, j % m)])
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
    /// Eigenvalues are returned in descending order.
    pub fn hermitian_eigen(&self) -> Result<HermitianEigen<T>> {
        jacobi_hermitian(self)
    }

    /// Spectral norm from the full eigen-decomposition of `A^*A`.
    pub fn spectral_norm_full(&self) -> Result<T> {
        if self.rows == 0 || self.cols == 0 {
            return Ok(T::zero());
        }
        let gram = self.adjoint().matmul(self);
        let eig = gram.hermitian_eigen()?;
        Ok(eig.values[0].max(T::zero()).sqrt())
    }

    /// Norm of a Hermitian matrix: the largest absolute eigenvalue.
    pub fn hermitian_norm(&self) -> Result<T> {
        if self.rows == 0 {
            return Ok(T::zero());
        }
        let eig = self.hermitian_eigen()?;
        Ok(eig
            .values
            .iter()
            .map(|v| v.abs())
            .fold(T::zero(), T::max))
    }
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    /// Descending.
    pub values: Vec<T>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: Matrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn vector(&self, k: usize) -> Vec<Complex<T>> {
        (0..self.vectors.rows()).map(|i| self.vectors[(i, k)]).collect()
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

fn jacobi_hermitian<T: Real>(input: &Matrix<T>) -> Result<HermitianEigen<T>> {
    if !input.is_square() {
        return Err(Error::input("eigen-decomposition needs a square matrix"));
    }
    let n = input.rows;
    // Symmetrise so tiny asymmetries from upstream arithmetic cannot stall
    // the rotations.
    let mut a = Matrix::from_fn(n, n, |i, j| {
        (input[(i, j)] + input[(j, i)].conj()) * creal(T::lit(0.5))
    });
    let mut v = Matrix::<T>::identity(n);
    let scale = a.frobenius();
    let threshold = T::epsilon() * T::lit(0.5) * scale;

    let mut converged = n <= 1 || scale == T::zero();
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        if off_diagonal_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= T::min_positive_value() || r <= T::epsilon() * T::lit(1e-3) * scale {
                    continue;
                }
                // Rotate the phase of a_pq onto the positive real axis.
                let phase = apq / creal(r);
                let conj_phase = phase.conj();
                for k in 0..n {
                    a[(k, q)] = a[(k, q)] * conj_phase;
                }
                for k in 0..n {
                    a[(q, k)] = a[(q, k)] * phase;
                }
                for k in 0..n {
                    v[(k, q)] = v[(k, q)] * conj_phase;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (T::lit(2.0) * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let new_kp = akp * creal(c) - akq * creal(s);
                    let new_kq = akp * creal(s) + akq * creal(c);
                    a[(k, p)] = new_kp;
                    a[(p, k)] = new_kp.conj();
                    a[(k, q)] = new_kq;
                    a[(q, k)] = new_kq.conj();
                }
                a[(p, p)] = creal(app - t * r);
                a[(q, q)] = creal(aqq + t * r);
                a[(p, q)] = czero();
                a[(q, p)] = czero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * creal(c) - vkq * creal(s);
                    v[(k, q)] = vkp * creal(s) + vkq * creal(c);
                }
            }
        }
    }
    if !converged {
        let off = off_diagonal_norm(&a);
        if off > threshold * T::lit(16.0) {
            return Err(Error::NonConvergence {
                iterations: JACOBI_MAX_SWEEPS,
                residual: off.to_f64_lossy(),
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(j, j)]
            .re
            .partial_cmp(&a[(i, i)].re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(HermitianEigen { values, vectors })
}

fn off_diagonal_norm<T: Real>(a: &Matrix<T>) -> T {
    let n = a.rows;
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s = s + a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

pub fn vec_norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|x| x.norm_sqr()).sum::<T>().sqrt()
}

pub fn inner<T: Real>(u: &[Complex<T>], v: &[Complex<T>]) -> Complex<T> {
    u.iter().zip(v).fold(czero(), |acc, (&a, &b)| acc + a.conj() * b)
}

fn normalize<T: Real>(v: &mut [Complex<T>]) -> T {
    let n = vec_norm(v);
    if n > T::zero() {
        for x in v.iter_mut() {
            *x = *x / creal(n);
        }
    }
    n
}

/// Deterministic pseudo-random start vector (fixed seed, independent of any
/// user-supplied ensemble seed).
pub fn start_vector<T: Real>(n: usize) -> Vec<Complex<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05ee_d0fc_0a5e);
    let mut v: Vec<Complex<T>> = (0..n)
        .map(|_| {
            Complex::new(
                T::lit(rng.random_range(0.5..1.5)),
                T::lit(rng.random_range(-0.5..0.5)),
            )
        })
        .collect();
    normalize(&mut v);
    v
}

#[derive(Clone, Copy, Debug)]
pub struct PowerResult<T> {
    pub value: T,
    pub residual: T,
    pub iterations: usize,
}

/// Largest singular value by power iteration on `A^*A`.
///
/// Stops once the relative eigen-residual `|A^*A v - mu v| / mu` drops to
/// `tol`; the returned value is `sqrt(mu)`.
pub fn spectral_norm_power<T: Real>(a: &Matrix<T>, tol: T, max_iter: usize) -> Result<PowerResult<T>> {
    if a.rows == 0 || a.cols == 0 || a.max_abs() == T::zero() {
        return Ok(PowerResult {
            value: T::zero(),
            residual: T::zero(),
            iterations: 0,
        });
    }
    let mut v = start_vector::<T>(a.cols);
    let mut residual = T::infinity();
    for it in 1..=max_iter {
        let av = a.mul_vec(&v);
        let w = a.adjoint_mul_vec(&av);
        let mu = inner(&v, &w).re;
        if mu <= T::zero() {
            // Start vector orthogonal to the range; restart from a basis vector.
            v = vec![czero(); a.cols];
            v[it % a.cols] = cone();
            continue;
        }
        let r: Vec<Complex<T>> = w.iter().zip(&v).map(|(&wi, &vi)| wi - vi * creal(mu)).collect();
        residual = vec_norm(&r) / mu;
        if residual <= tol {
            return Ok(PowerResult {
                value: mu.sqrt(),
                residual,
                iterations: it,
            });
        }
        v = w;
        normalize(&mut v);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: residual.to_f64_lossy(),
    })
}

/// Largest eigenpair of the real symmetric tridiagonal matrix with diagonal
/// `a` and off-diagonal `b`: Sturm bisection for the value, then inverse
/// iteration shifted just above it (where the shifted matrix is definite, so
/// elimination needs no pivoting).
fn tridiagonal_top<T: Real>(a: &[T], b: &[T]) -> (T, Vec<T>) {
    let k = a.len();
    let off = |i: usize| if i < b.len() { b[i].abs() } else { T::zero() };
    let mut lo = a[0] - off(0);
    let mut hi = a[0] + off(0);
    for i in 1..k {
        let r = off(i - 1) + off(i);
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(T::min_positive_value());
    // Number of eigenvalues below x.
    let below = |x: T| {
        let mut count = 0;
        let mut d = T::one();
        for i in 0..k {
            let sub = if i == 0 { T::zero() } else { b[i - 1] * b[i - 1] / d };
            d = a[i] - x - sub;
            if d == T::zero() {
                d = -T::epsilon() * scale;
            }
            if d < T::zero() {
                count += 1;
            }
        }
        count
    };
    hi = hi + T::epsilon() * scale;
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi || hi - lo <= T::epsilon() * scale * T::lit(2.0) {
            break;
        }
        if below(mid) == k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = (lo + hi) / T::lit(2.0);
    let sigma = hi + T::lit(16.0) * T::epsilon() * scale;
    let mut x = vec![T::one(); k];
    let mut d = vec![T::zero(); k];
    for _ in 0..3 {
        // Solve (sigma I - T) z = x by elimination; the matrix is positive
        // definite with off-diagonal -b.
        let mut y = x.clone();
        d[0] = sigma - a[0];
        for i in 1..k {
            let l = -b[i - 1] / d[i - 1];
            d[i] = (sigma - a[i] + l * b[i - 1]).max(T::min_positive_value());
            y[i] = y[i] - l * y[i - 1];
        }
        y[k - 1] = y[k - 1] / d[k - 1];
        for i in (0..k - 1).rev() {
            y[i] = (y[i] + b[i] * y[i + 1]) / d[i];
        }
        let norm = y.iter().map(|&v| v * v).sum::<T>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
    }
    (theta, x)
}

/// Largest eigenpair of a Hermitian positive semidefinite matrix by Lanczos
/// with full reorthogonalisation. Small matrices go straight to Jacobi.
pub fn top_eigenpair_psd<T: Real>(h: &Matrix<T>, tol: T) -> Result<(T, Vec<Complex<T>>)> {
    let n = h.rows;
    if n == 0 {
        return Ok((T::zero(), Vec::new()));
    }
    if n <= 24 {
        let eig = h.hermitian_eigen()?;
        return Ok((eig.values[0], eig.vector(0)));
    }
    if h.max_abs() == T::zero() {
        let mut e = vec![czero(); n];
        e[0] = cone();
        return Ok((T::zero(), e));
    }
    let mut basis: Vec<Vec<Complex<T>>> = Vec::new();
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut q = start_vector::<T>(n);
    let mut best: Option<(T, Vec<Complex<T>>)> = None;
    for step in 0..n {
        basis.push(q.clone());
        let mut w = h.mul_vec(&q);
        let alpha = inner(&q, &w).re;
        alphas.push(alpha);
        // Full reorthogonalisation (twice is enough).
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &w);
                for (wi, &bi) in w.iter_mut().zip(b) {
                    *wi = *wi - bi * c;
                }
            }
        }
        let beta = vec_norm(&w);
        let k = alphas.len();
        let done = beta <= T::epsilon() * T::lit(64.0) * h.max_abs() || step + 1 == n;
        if done || k.is_multiple_of(6) {
            let (theta, s) = tridiagonal_top(&alphas, &betas);
            let ritz_residual = beta * s[k - 1].abs();
            let mut ritz = vec![czero(); n];
            for (coef, b) in s.iter().zip(&basis) {
                for (ri, &bi) in ritz.iter_mut().zip(b) {
                    *ri = *ri + bi * creal(*coef);
                }
            }
            normalize(&mut ritz);
            best = Some((theta, ritz));
            if done || ritz_residual <= tol * theta.abs().max(T::min_positive_value()) {
                break;
            }
        }
        betas.push(beta);
        q = w.iter().map(|&x| x / creal(beta)).collect();
    }
    best.ok_or(Error::NonConvergence {
        iterations: n,
        residual: f64::NAN,
    })
}

/// Top singular value of `a` restricted to the columns `cols`, with the
/// right singular vector expressed on those columns.
pub fn column_restricted_top<T: Real>(a: &Matrix<T>, cols: &[usize], tol: T) -> Result<(T, Vec<Complex<T>>)> {
    if cols.is_empty() {
        return Ok((T::zero(), Vec::new()));
    }
    let rows: Vec<usize> = (0..a.rows).collect();
    let sub = a.select(&rows, cols);
    let gram = sub.adjoint().matmul(&sub);
    let (mu, v) = top_eigenpair_psd(&gram, tol)?;
    Ok((mu.max(T::zero()).sqrt(), v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cycle_adjacency(n: usize) -> Matrix<f64> {
        Matrix::from_fn(n, n, |i, j| {
            let d = (i + n - j) % n;
            if d == 1 || d == n - 1 {
                creal(1.0)
            } else {
                czero()
            }
        })
    }

    #[test]
    fn tridiagonal_top_matches_dense() {
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for k in [1usize, 2, 5, 17, 40] {
            let a: Vec<f64> = (0..k).map(|_| next()).collect();
            let b: Vec<f64> = (1..k).map(|_| next().abs() + 0.01).collect();
            let dense = Matrix::from_fn(k, k, |i, j| {
                if i == j {
                    creal(a[i])
                } else if i + 1 == j {
                    creal(b[i])
                } else if j + 1 == i {
                    creal(b[j])
                } else {
                    czero()
                }
            });
            let eig = dense.hermitian_eigen().unwrap();
            let (theta, v) = tridiagonal_top(&a, &b);
            assert_abs_diff_eq!(theta, eig.values[0], epsilon = 1e-12);
            let tv = dense.mul_vec(&v.iter().map(|&x| creal(x)).collect::<Vec<_>>());
            for (i, x) in tv.iter().enumerate() {
                assert_abs_diff_eq!(x.re, theta * v[i], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn jacobi_reconstructs_hermitian_matrix() {
        let h = Matrix::from_fn(4, 4, |i, j| {
            if i == j {
                creal(i as f64)
            } else if i < j {
                Complex::new(0.3 * (i + j) as f64, 0.1 * (j - i) as f64)
            } else {
                Complex::new(0.3 * (i + j) as f64, -0.1 * (i - j) as f64)
            }
        });
        let eig = h.hermitian_eigen().unwrap();
        let d = Matrix::from_fn(4, 4, |i, j| if i == j { creal(eig.values[i]) } else { czero() });
        let back = eig.vectors.matmul(&d).matmul(&eig.vectors.adjoint());
        assert!(back.max_abs_diff(&h) < 1e-12);
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn cycle_adjacency_spectrum() {
        let a = cycle_adjacency(10);
        let eig = a.hermitian_eigen().unwrap();
        let mut expected: Vec<f64> = (0..10)
            .map(|k| 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 10.0).cos())
            .collect();
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in eig.values.iter().zip(&expected) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn power_iteration_matches_full() {
        for n in [3, 8, 17, 33] {
            let a = cycle_adjacency(n);
            let p = spectral_norm_power(&a, 1e-12, 200_000).unwrap();
            let f = a.spectral_norm_full().unwrap();
            assert_abs_diff_eq!(p.value, f, epsilon = 1e-9);
            assert_abs_diff_eq!(f, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lanczos_top_eigenvalue_of_gram() {
        let a = cycle_adjacency(60);
        let gram = a.adjoint().matmul(&a);
        let (top, v) = top_eigenpair_psd(&gram, 1e-13).unwrap();
        assert_abs_diff_eq!(top, 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(vec_norm(&v), 1.0, epsilon = 1e-12);
        let av = a.mul_vec(&v);
        assert_abs_diff_eq!(vec_norm(&av), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn zero_matrix_norm_is_zero() {
        let z = Matrix::<f64>::zeros(5, 5);
        assert_eq!(spectral_norm_power(&z, 1e-10, 10).unwrap().value, 0.0);
        assert_eq!(z.spectral_norm_full().unwrap(), 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let a = Matrix::<f32>::from_real_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let eig = a.hermitian_eigen().unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-5);
        assert!((eig.values[1] - 1.0).abs() < 1e-5);
    }
}
