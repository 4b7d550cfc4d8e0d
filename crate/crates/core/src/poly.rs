//! Polynomial classifier used as a one-step-ahead regressor.
//!
//! Each lag window is mapped through every monomial of total degree at most `K`
//! and a weight vector is fitted in closed form by (optionally ridge-penalized)
//! least squares. Predictions are the dot product of the weights with the
//! expanded window.
//!
//! Basis order is graded: ascending total degree, and within a degree the
//! exponent tuples run in descending lexicographic order, so `d = 2, K = 2`
//! gives `1, y₁, y₂, y₁², y₁y₂, y₂²`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, gram, solve_spd, DenseMatrix};
use crate::series::WindowedDataset;

/// Upper bound on basis size accepted by [`enumerate_monomials`].
pub const DEFAULT_BASIS_CAP: usize = 100_000;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// `C(n, k)` in 128-bit arithmetic, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc.checked_mul(n as u128 - i)? / (i + 1);
    }
    Some(acc)
}

/// Ordered set of exponent tuples describing a polynomial feature map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    window_d: usize,
    degree_k: u32,
    exponents: Vec<Vec<u32>>,
}

impl MonomialBasis {
    /// Accepts a caller-supplied ordering. Tuples must be unique, of length `d`,
    /// with total degree at most `K`, and the set must be complete.
    pub fn from_exponents(window_d: usize, degree_k: u32, exponents: Vec<Vec<u32>>) -> Result<Self> {
        let canonical = enumerate_monomials(window_d, degree_k)?;
        let mut sorted = exponents.clone();
        sorted.sort();
        let mut expected = canonical.exponents.clone();
        expected.sort();
        if sorted != expected {
            return Err(Error::invalid(format!(
                "exponent list is not the complete degree-{degree_k} basis in {window_d} variables"
            )));
        }
        Ok(Self {
            window_d,
            degree_k,
            exponents,
        })
    }

    pub fn window_d(&self) -> usize {
        self.window_d
    }

    pub fn degree_k(&self) -> u32 {
        self.degree_k
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Evaluates every monomial at `x`.
    pub fn expand(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.expand_into(x, &mut out)?;
        Ok(out)
    }

    fn expand_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.window_d {
            return Err(Error::DimensionMismatch {
                expected: self.window_d,
                found: x.len(),
            });
        }
        let k = self.degree_k as usize;
        // powers[i * (k+1) + e] = x_i^e
        let mut powers = vec![1.0; self.window_d * (k + 1)];
        for (i, &xi) in x.iter().enumerate() {
            for e in 1..=k {
                powers[i * (k + 1) + e] = powers[i * (k + 1) + e - 1] * xi;
            }
        }
        for (o, exps) in out.iter_mut().zip(&self.exponents) {
            *o = exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| powers[i * (k + 1) + e as usize])
                .product();
        }
        Ok(())
    }

    /// Expanded design matrix, one row per window.
    pub fn design_matrix(&self, inputs: &DenseMatrix) -> Result<DenseMatrix> {
        let m = self.len();
        let mut data = vec![0.0; inputs.rows() * m];
        for (r, chunk) in inputs.row_iter().zip(data.chunks_mut(m)) {
            self.expand_into(r, chunk)?;
        }
        DenseMatrix::from_vec(inputs.rows(), m, data)
    }
}

/// Lists all monomials in `d` variables of total degree `0..=K`, canonical order.
pub fn enumerate_monomials(d: usize, k: u32) -> Result<MonomialBasis> {
    enumerate_monomials_capped(d, k, DEFAULT_BASIS_CAP)
}

pub fn enumerate_monomials_capped(d: usize, k: u32, cap: usize) -> Result<MonomialBasis> {
    if d == 0 {
        return Err(Error::invalid("window size must be positive"));
    }
    if k == 0 {
        return Err(Error::invalid("polynomial degree must be positive"));
    }
    let count = binomial(d as u64 + k as u64, k as u64).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::BasisTooLarge { count, cap });
    }
    let mut exponents = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; d];
    for total in 0..=k {
        push_tuples(&mut current, 0, total, &mut exponents);
    }
    debug_assert_eq!(exponents.len() as u128, count);
    Ok(MonomialBasis {
        window_d: d,
        degree_k: k,
        exponents,
    })
}

// Fills positions `pos..` with tuples summing to `remaining`, largest leading exponent first.
fn push_tuples(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(current.to_vec());
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        push_tuples(current, pos + 1, remaining - e, out);
    }
    current[pos] = 0;
}

/// Fitted weights over a monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialModel {
    basis: MonomialBasis,
    weights: Vec<f64>,
    ridge_lambda: f64,
}

impl PolynomialModel {
    pub fn new(basis: MonomialBasis, weights: Vec<f64>, ridge_lambda: f64) -> Result<Self> {
        if weights.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("polynomial weight".into()));
        }
        Ok(Self {
            basis,
            weights,
            ridge_lambda,
        })
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ridge_lambda(&self) -> f64 {
        self.ridge_lambda
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.weights, &self.basis.expand(x)?))
    }

    /// Sum of squared residuals over a dataset.
    pub fn sse(&self, data: &WindowedDataset) -> Result<f64> {
        let preds = rolling_forecast(self, data)?;
        Ok(preds.iter().zip(data.targets()).map(|(p, t)| (p - t) * (p - t)).sum())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PolynomialModelDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<PolynomialModelDoc>(text)?.try_into()
    }
}

/// Serialized form of a [`PolynomialModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModelDoc {
    pub schema_version: u32,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: u32,
    pub lambda: f64,
    pub exponents: Vec<Vec<u32>>,
    pub weights: Vec<f64>,
}

impl From<&PolynomialModel> for PolynomialModelDoc {
    fn from(m: &PolynomialModel) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            d: m.basis.window_d,
            k: m.basis.degree_k,
            lambda: m.ridge_lambda,
            exponents: m.basis.exponents.clone(),
            weights: m.weights.clone(),
        }
    }
}

impl TryFrom<PolynomialModelDoc> for PolynomialModel {
    type Error = Error;

    fn try_from(doc: PolynomialModelDoc) -> Result<Self> {
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: doc.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let basis = MonomialBasis::from_exponents(doc.d, doc.k, doc.exponents)?;
        PolynomialModel::new(basis, doc.weights, doc.lambda)
    }
}

/// Closed-form fit over the canonical degree-`k` basis.
pub fn fit(data: &WindowedDataset, k: u32, ridge_lambda: f64) -> Result<PolynomialModel> {
    let basis = enumerate_monomials(data.window_d(), k)?;
    fit_with_basis(data, basis, ridge_lambda)
}

/// Solves `(MᵀM + λI) w = Mᵀt` where row `r` of `M` is the expanded window `r`.
pub fn fit_with_basis(data: &WindowedDataset, basis: MonomialBasis, ridge_lambda: f64) -> Result<PolynomialModel> {
    if data.window_d() != basis.window_d() {
        return Err(Error::DimensionMismatch {
            expected: basis.window_d(),
            found: data.window_d(),
        });
    }
    if data.len() < basis.len() {
        warn!(
            "{} training windows for {} polynomial terms: the design is rank deficient",
            data.len(),
            basis.len()
        );
    }
    let design = basis.design_matrix(data.inputs())?;
    let g = gram(&design)?;
    let rhs = design.tr_mul_vec(data.targets())?;
    let weights = solve_spd(&g, &rhs, ridge_lambda)?;
    PolynomialModel::new(basis, weights, ridge_lambda)
}

pub fn predict(model: &PolynomialModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// One-step-ahead forecasts on true lagged values, one per dataset row.
pub fn rolling_forecast(model: &PolynomialModel, test: &WindowedDataset) -> Result<Vec<f64>> {
    if test.window_d() != model.basis.window_d() {
        return Err(Error::DimensionMismatch {
            expected: model.basis.window_d(),
            found: test.window_d(),
        });
    }
    test.inputs().row_iter().map(|r| model.predict(r)).collect()
}
