//! Kernel-smoothing baselines and the attention identity.
//!
//! The Nadaraya-Watson estimator averages training targets with normalized
//! kernel weights `w_i = K(x, x_i) / sum_j K(x, x_j)`. Scaled dot-product
//! attention `softmax(Q K^T / sqrt(d_k)) V` computes, for a single query,
//! exactly the same weights under the exponential inner-product kernel
//! `K(q, k_i) = exp(q . k_i / sqrt(d_k))` — the two routes are kept
//! algebraically distinct here (naive normalization vs max-subtracted
//! softmax) precisely so the identity is a meaningful cross-check.
//!
//! The logistic-regression baseline is fit by iteratively reweighted least
//! squares (Newton steps on the log-likelihood).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Ridge jitter added to the IRLS normal equations to survive
/// near-collinearity.
const IRLS_RIDGE: f64 = 1e-10;

/// Coefficient magnitude beyond which a logistic fit is flagged as
/// quasi-separated.
const SEPARATION_BOUND: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmootherError {
    #[error("need at least one training point")]
    NoTrainingData,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("kernel bandwidth/scale must be positive")]
    BadBandwidth,
    #[error("design matrix is singular near column {column}; drop collinear columns")]
    Singular { column: usize },
    #[error("glm_fit needs n > p + 1 (got n = {n}, p = {p})")]
    TooFewRows { n: usize, p: usize },
    #[error("glm targets must be exactly 0 or 1")]
    NonBinaryTarget,
}

/// Smoothing kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-|x - x'|^2 / (2 sigma^2))`.
    GaussianDistance { sigma: f64 },
    /// `exp(<x, x'> / scale)`; `scale = sqrt(d_k)` matches attention.
    ExpInnerProduct { scale: f64 },
}

impl KernelSpec {
    fn validate(&self) -> Result<(), SmootherError> {
        let ok = match *self {
            KernelSpec::GaussianDistance { sigma } => sigma > 0.0,
            KernelSpec::ExpInnerProduct { scale } => scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SmootherError::BadBandwidth)
        }
    }

    /// Log-kernel score; the kernel itself is `exp(score)`.
    fn score(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::GaussianDistance { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                -d2 / (2.0 * sigma * sigma)
            }
            KernelSpec::ExpInnerProduct { scale } => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                dot / scale
            }
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        libm::exp(self.score(a, b))
    }
}

/// A Nadaraya-Watson estimate; `used_fallback` flags the nearest-neighbor
/// rescue that fires when every kernel weight underflowed to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NwPrediction {
    pub value: f64,
    pub used_fallback: bool,
}

/// Kernel-weighted average `sum_i y_i K(x, x_i) / sum_i K(x, x_i)`.
pub fn nw_predict(
    train_x: &[Vec<f64>],
    train_y: &[f64],
    query: &[f64],
    kernel: &KernelSpec,
) -> Result<NwPrediction, SmootherError> {
    kernel.validate()?;
    if train_x.is_empty() {
        return Err(SmootherError::NoTrainingData);
    }
    if train_x.len() != train_y.len() {
        return Err(SmootherError::DimensionMismatch(format!(
            "{} training points vs {} targets",
            train_x.len(),
            train_y.len()
        )));
    }
    for x in train_x {
        if x.len() != query.len() {
            return Err(SmootherError::DimensionMismatch(format!(
                "query dim {} vs training dim {}",
                query.len(),
                x.len()
            )));
        }
    }
    let weights: Vec<f64> = train_x.iter().map(|x| kernel.eval(x, query)).collect();
    let mass: f64 = weights.iter().sum();
    if mass > 0.0 && mass.is_finite() {
        let value = weights
            .iter()
            .zip(train_y)
            .map(|(w, y)| w * y)
            .sum::<f64>()
            / mass;
        return Ok(NwPrediction { value, used_fallback: false });
    }
    // All weights underflowed: fall back to the nearest neighbor in the
    // kernel's own similarity (highest log-score wins, lowest index ties).
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, x) in train_x.iter().enumerate() {
        let s = kernel.score(x, query);
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    Ok(NwPrediction { value: train_y[best], used_fallback: true })
}

/// Max-subtracted softmax; shift-invariant and overflow-safe.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = scores.iter().map(|&s| libm::exp(s - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `softmax(Q K^T / sqrt(d_k)) V`, row-wise over queries.
///
/// Every output row is a convex combination of the rows of `V`.
pub fn attention(
    queries: &[Vec<f64>],
    keys: &[Vec<f64>],
    values: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, SmootherError> {
    if keys.len() != values.len() {
        return Err(SmootherError::DimensionMismatch(format!(
            "{} keys vs {} value rows",
            keys.len(),
            values.len()
        )));
    }
    if keys.is_empty() {
        return Err(SmootherError::NoTrainingData);
    }
    let d_k = keys[0].len();
    if d_k == 0 {
        return Err(SmootherError::DimensionMismatch("d_k must be >= 1".into()));
    }
    if keys.iter().any(|k| k.len() != d_k) {
        return Err(SmootherError::DimensionMismatch("ragged key matrix".into()));
    }
    let d_v = values[0].len();
    if values.iter().any(|v| v.len() != d_v) {
        return Err(SmootherError::DimensionMismatch("ragged value matrix".into()));
    }
    let scale = libm::sqrt(d_k as f64);
    let mut out = Vec::with_capacity(queries.len());
    for q in queries {
        if q.len() != d_k {
            return Err(SmootherError::DimensionMismatch(format!(
                "query dim {} vs key dim {d_k}",
                q.len()
            )));
        }
        let scores: Vec<f64> = keys
            .iter()
            .map(|k| q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / scale)
            .collect();
        let weights = softmax(&scores);
        let mut row = vec![0.0; d_v];
        for (w, v) in weights.iter().zip(values) {
            for (acc, x) in row.iter_mut().zip(v) {
                *acc += w * x;
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// A fitted logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    /// Intercept first, then one coefficient per feature.
    pub coefficients: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// True iff the log-likelihood gradient norm dropped below tolerance.
    pub converged: bool,
    /// `2(p+1) - 2 ll`.
    pub aic: f64,
    /// `(p+1) ln n - 2 ll`.
    pub bic: f64,
    /// Set when any |coefficient| exceeds 1e3, the usual symptom of
    /// (quasi-)separated data.
    pub quasi_separated: bool,
    /// Log-likelihood after each IRLS iteration (diagnostic).
    pub ll_trace: Vec<f64>,
}

/// Logistic regression via IRLS Newton steps.
///
/// Convergence requires both the score `X^T (y - p)` and the Newton step
/// to be small in L2 norm; on separated data the score underflows while
/// the step keeps marching, which is exactly the non-convergence the flag
/// should report. The weighted normal equations carry a 1e-10 ridge so
/// that near-collinear designs still solve; exactly collinear ones are
/// diagnosed on the un-ridged system and name the offending pivot column.
pub fn glm_fit(
    x: &[Vec<f64>],
    y: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<GlmFit, SmootherError> {
    let n = x.len();
    if n == 0 {
        return Err(SmootherError::NoTrainingData);
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(SmootherError::DimensionMismatch("ragged design matrix".into()));
    }
    if y.len() != n {
        return Err(SmootherError::DimensionMismatch(format!(
            "{n} rows vs {} targets",
            y.len()
        )));
    }
    if n <= p + 1 {
        return Err(SmootherError::TooFewRows { n, p });
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(SmootherError::NonBinaryTarget);
    }

    let dim = p + 1; // intercept column prepended
    let design = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            x[i][j - 1]
        }
    };
    let mut beta = vec![0.0; dim];
    let mut iterations = 0;
    let mut converged = false;
    let mut ll_trace = Vec::new();

    for _ in 0..max_iter {
        // p_i = sigmoid(x_i . beta), score g = X^T (y - p)
        let probs: Vec<f64> = (0..n)
            .map(|i| {
                let eta: f64 = (0..dim).map(|j| design(i, j) * beta[j]).sum();
                crate::kgam::sigmoid(eta)
            })
            .collect();
        let mut score = vec![0.0; dim];
        for i in 0..n {
            let r = y[i] - probs[i];
            for (j, s) in score.iter_mut().enumerate() {
                *s += design(i, j) * r;
            }
        }
        let score_norm = libm::sqrt(score.iter().map(|s| s * s).sum());
        // Newton system: (X^T W X + ridge I) delta = score, W = p (1 - p)
        let mut a = vec![vec![0.0; dim]; dim];
        for i in 0..n {
            let w = probs[i] * (1.0 - probs[i]);
            for j in 0..dim {
                let xij = design(i, j);
                for k in j..dim {
                    a[j][k] += w * xij * design(i, k);
                }
            }
        }
        for j in 0..dim {
            for k in 0..j {
                a[j][k] = a[k][j];
            }
        }
        diagnose_collinearity(&a)?;
        for (j, row) in a.iter_mut().enumerate() {
            row[j] += IRLS_RIDGE;
        }
        let delta = solve_linear(a, score.clone())?;
        let step_norm = libm::sqrt(delta.iter().map(|d| d * d).sum());
        if score_norm < tol && step_norm < 1e-6 {
            converged = true;
            break;
        }
        iterations += 1;
        for (b, d) in beta.iter_mut().zip(&delta) {
            *b += d;
        }
        ll_trace.push(log_likelihood(x, y, &beta));
    }

    let log_lik = log_likelihood(x, y, &beta);
    let k = dim as f64;
    Ok(GlmFit {
        quasi_separated: beta.iter().any(|b| b.abs() > SEPARATION_BOUND),
        aic: 2.0 * k - 2.0 * log_lik,
        bic: k * libm::log(n as f64) - 2.0 * log_lik,
        coefficients: beta,
        log_likelihood: log_lik,
        iterations,
        converged,
        ll_trace,
    })
}

/// Predicted probabilities under a fitted GLM.
pub fn glm_predict(fit: &GlmFit, x: &[Vec<f64>]) -> Vec<f64> {
    x.iter()
        .map(|row| {
            let eta = fit.coefficients[0]
                + row
                    .iter()
                    .zip(&fit.coefficients[1..])
                    .map(|(v, c)| v * c)
                    .sum::<f64>();
            crate::kgam::sigmoid(eta)
        })
        .collect()
}

fn log_likelihood(x: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let eta =
            beta[0] + row.iter().zip(&beta[1..]).map(|(v, c)| v * c).sum::<f64>();
        let p = crate::kgam::sigmoid(eta);
        ll += yi * libm::log(p) + (1.0 - yi) * libm::log(1.0 - p);
    }
    ll
}

/// Detects exact collinearity by eliminating the *un-ridged* normal
/// matrix: a pivot collapsing relative to the diagonal scale means two
/// design columns are linearly dependent.
fn diagnose_collinearity(a: &[Vec<f64>]) -> Result<(), SmootherError> {
    let n = a.len();
    let scale = (0..n).map(|j| a[j][j].abs()).fold(1e-30, f64::max);
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()))
            .unwrap();
        if m[pivot_row][col].abs() < 1e-12 * scale {
            return Err(SmootherError::Singular { column: col });
        }
        m.swap(col, pivot_row);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    Ok(())
}

/// Gaussian elimination with partial pivoting for the small symmetric
/// Newton systems; reports the column where a zero pivot appears.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, SmootherError> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-300 {
            return Err(SmootherError::Singular { column: col });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut out = vec![0.0; n];
    for col in (0..n).rev() {
        let mut v = b[col];
        for k in col + 1..n {
            v -= a[col][k] * out[k];
        }
        out[col] = v / a[col][col];
    }
    Ok(out)
}
