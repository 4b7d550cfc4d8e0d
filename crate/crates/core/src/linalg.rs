//! Small dense linear algebra and the RMSprop update shared by both forecasters.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major matrix of finite `f64` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero-width chunks
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok(self.row_iter().map(|r| dot(r, x)).collect())
    }

    /// `Mᵀ y` without materializing the transpose.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: y.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in self.row_iter().zip(y) {
            for (o, &v) in out.iter_mut().zip(r) {
                *o += v * yr;
            }
        }
        Ok(out)
    }

    /// Replaces the matrix with `(A + Aᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        debug_assert!(self.is_square());
        let n = self.rows;
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram matrix `MᵀM`, exactly symmetric.
pub fn gram(m: &DenseMatrix) -> Result<DenseMatrix> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::invalid("gram of an empty matrix"));
    }
    let c = m.cols();
    let mut g = DenseMatrix::zeros(c, c);
    for r in m.row_iter() {
        for i in 0..c {
            let ri = r[i];
            if ri == 0.0 {
                continue;
            }
            let gi = &mut g.data[i * c..(i + 1) * c];
            for j in i..c {
                gi[j] += ri * r[j];
            }
        }
    }
    for i in 0..c {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g.symmetrize();
    Ok(g)
}

/// Number of jittered retries after the first factorization attempt.
pub const JITTER_RETRIES: usize = 4;
const JITTER_BASE: f64 = 1e-10;
/// A pivot below this fraction of its (scaled) diagonal counts as a breakdown.
const PIVOT_RTOL: f64 = 1e-12;
const REFINE_STEPS: usize = 4;

/// Solves `(A + λI) x = b` for symmetric positive (semi-)definite `A`.
///
/// The system is Jacobi-scaled to unit diagonal and factored with Cholesky.
/// When a pivot breaks down, the scaled diagonal is raised by
/// `1e-10 · trace/dim`, escalating ×10 for up to [`JITTER_RETRIES`] retries,
/// and the jittered solution is polished by a few refinement steps.
pub fn solve_spd(a: &DenseMatrix, b: &[f64], ridge_lambda: f64) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "solve_spd needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if !(ridge_lambda >= 0.0) || !ridge_lambda.is_finite() {
        return Err(Error::invalid(format!(
            "ridge lambda must be finite and >= 0, got {ridge_lambda}"
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = a[(i, i)] + ridge_lambda;
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)] + if i == j { ridge_lambda } else { 0.0 };
            scaled[(i, j)] = v * scale[i] * scale[j];
        }
    }
    let mean_diag = scaled.trace() / n as f64;

    let mut jitter = 0.0;
    for attempt in 0..=JITTER_RETRIES {
        if attempt > 0 {
            jitter = JITTER_BASE * 10f64.powi(attempt as i32 - 1) * mean_diag;
            if !(jitter > 0.0) {
                break;
            }
            debug!("cholesky breakdown, retry {attempt} with jitter {jitter:e}");
        }
        if let Some(l) = cholesky_lower(&scaled, jitter) {
            let bs: Vec<f64> = b.iter().zip(&scale).map(|(v, s)| v * s).collect();
            let mut y = cholesky_solve(&l, n, &bs);
            if jitter > 0.0 {
                // refine against the unjittered system; on a consistent
                // singular system this converges to a least-squares solution
                for _ in 0..REFINE_STEPS {
                    let ay = scaled.mul_vec(&y)?;
                    let r: Vec<f64> = bs.iter().zip(&ay).map(|(b, a)| b - a).collect();
                    let dy = cholesky_solve(&l, n, &r);
                    y.iter_mut().zip(&dy).for_each(|(v, d)| *v += d);
                }
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("solution".into()));
            }
            return Ok(y.iter().zip(&scale).map(|(v, s)| v * s).collect());
        }
    }
    Err(Error::Singular {
        retries: JITTER_RETRIES,
    })
}

/// Lower Cholesky factor of `A + jitter·I` (row-major, full storage), or
/// `None` when a pivot is not safely positive.
fn cholesky_lower(a: &DenseMatrix, jitter: f64) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let diag = a[(j, j)] + jitter;
        let mut s = diag;
        for k in 0..j {
            s -= l[j * n + k] * l[j * n + k];
        }
        if !(s > PIVOT_RTOL * diag.abs()) || !s.is_finite() {
            return None;
        }
        let ljj = s.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Running mean of squared gradients for RMSprop.
#[derive(Debug, Clone, PartialEq)]
pub struct RmspropState {
    decay_rho: f64,
    epsilon: f64,
    accum: Vec<f64>,
}

impl RmspropState {
    pub const DEFAULT_RHO: f64 = 0.9;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(n_params: usize) -> Self {
        Self::with_hyperparameters(n_params, Self::DEFAULT_RHO, Self::DEFAULT_EPSILON)
            .expect("default hyperparameters are valid")
    }

    pub fn with_hyperparameters(n_params: usize, decay_rho: f64, epsilon: f64) -> Result<Self> {
        if !(decay_rho > 0.0 && decay_rho < 1.0) {
            return Err(Error::invalid(format!(
                "rmsprop rho must lie in (0, 1), got {decay_rho}"
            )));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!(
                "rmsprop epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            decay_rho,
            epsilon,
            accum: vec![0.0; n_params],
        })
    }

    pub fn decay_rho(&self) -> f64 {
        self.decay_rho
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn accum(&self) -> &[f64] {
        &self.accum
    }

    /// In-place form of [`rmsprop_step`].
    pub fn apply(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.accum.len() || grads.len() != self.accum.len() {
            return Err(Error::DimensionMismatch {
                expected: self.accum.len(),
                found: if params.len() != self.accum.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i}")));
        }
        if !(lr > 0.0) {
            return Err(Error::invalid(format!("learning rate must be positive, got {lr}")));
        }
        let rho = self.decay_rho;
        for ((p, a), &g) in params.iter_mut().zip(self.accum.iter_mut()).zip(grads) {
            *a = rho * *a + (1.0 - rho) * g * g;
            *p -= lr * g / (a.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// One RMSprop update; returns the new state and parameters without touching the inputs.
pub fn rmsprop_step(state: &RmspropState, params: &[f64], grads: &[f64], lr: f64) -> Result<(RmspropState, Vec<f64>)> {
    let mut next = state.clone();
    let mut p = params.to_vec();
    next.apply(&mut p, grads, lr)?;
    Ok((next, p))
}

/// Central-difference gradient `(f(x+h·e_i) − f(x−h·e_i)) / 2h`.
pub fn finite_diff_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("function value near coordinate {i}")));
        }
        let g = (up - down) / (2.0 * h);
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("difference quotient at coordinate {i}")));
        }
        grad.push(g);
    }
    Ok(grad)
}
