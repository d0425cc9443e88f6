//! The fixed KST embedding from `[0,1]^d` into `R^{2d+1}`.
//!
//! Channel `q` of the embedding is
//! `z_q = sum_p lambda_p psi(x_p + q a) + delta_q`, `q = 0..2d`. Nothing in
//! it depends on the function being learned, which is the whole point: the
//! embedding is computed once and frozen, and only the outer univariate
//! nets train.
//!
//! Since `psi` is only defined on `[0, 1]`, raw features are first mapped
//! affinely onto `[0, 1 - 2d*a - margin]` so that every shifted argument
//! `x_p + q a` stays strictly inside the domain. The single-channel B-adic
//! variant `z = sum_p B^-p psi(x_p)` is also provided.

use alloc::vec::Vec;

use thiserror::Error;

use crate::koppen::{KoppenError, KstParams, PsiEvaluator};

/// Safety margin keeping `x_p + 2d*a` strictly below 1.
const NORMALIZER_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("feature {index} is constant ({value}); cannot normalize")]
    ConstantColumn { index: usize, value: f64 },
    #[error("need at least 2 rows to fit a normalizer, got {0}")]
    TooFewRows(usize),
    #[error("row has {got} features, expected {expected}")]
    SchemaMismatch { got: usize, expected: usize },
    #[error("normalized value {value} for feature {index} lies outside [0, {hi}]")]
    OutOfDomain { index: usize, value: f64, hi: f64 },
    #[error("B-adic base must be >= 2, got {0}")]
    BadBase(u32),
    #[error(transparent)]
    Koppen(#[from] KoppenError),
}

/// Per-feature affine map onto `[0, target_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub target_hi: f64,
}

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    /// Maps one raw row into the normalized domain. Values outside the
    /// fitted range are rejected beyond a 1e-12 slack (and clamped within
    /// it), because `psi` is undefined past the shifted domain.
    pub fn normalize(&self, row: &[f64]) -> Result<Vec<f64>, EmbedError> {
        if row.len() != self.dim() {
            return Err(EmbedError::SchemaMismatch { got: row.len(), expected: self.dim() });
        }
        let mut out = Vec::with_capacity(row.len());
        for (p, &v) in row.iter().enumerate() {
            let scaled = (v - self.mins[p]) / (self.maxs[p] - self.mins[p]) * self.target_hi;
            if !scaled.is_finite()
                || scaled < -1e-12
                || scaled > self.target_hi + 1e-12
            {
                return Err(EmbedError::OutOfDomain {
                    index: p,
                    value: scaled,
                    hi: self.target_hi,
                });
            }
            out.push(scaled.clamp(0.0, self.target_hi));
        }
        Ok(out)
    }
}

/// Upper end of the normalized range for these parameters.
pub fn normalized_hi(params: &KstParams) -> f64 {
    1.0 - 2.0 * params.d as f64 * params.a - NORMALIZER_MARGIN
}

/// Fits the affine per-feature map onto `[0, 1 - 2d*a - margin]`.
pub fn fit_normalizer(rows: &[Vec<f64>], params: &KstParams) -> Result<Normalizer, EmbedError> {
    if rows.len() < 2 {
        return Err(EmbedError::TooFewRows(rows.len()));
    }
    let d = rows[0].len();
    for row in rows {
        if row.len() != d {
            return Err(EmbedError::SchemaMismatch { got: row.len(), expected: d });
        }
    }
    let mut mins = rows[0].clone();
    let mut maxs = rows[0].clone();
    for row in rows.iter().skip(1) {
        for (p, &v) in row.iter().enumerate() {
            mins[p] = mins[p].min(v);
            maxs[p] = maxs[p].max(v);
        }
    }
    for p in 0..d {
        if mins[p] == maxs[p] {
            return Err(EmbedError::ConstantColumn { index: p, value: mins[p] });
        }
    }
    Ok(Normalizer { mins, maxs, target_hi: normalized_hi(params) })
}

/// One embedded point, channels `q = 0..2d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub z: Vec<f64>,
}

/// `z_q = sum_p lambda_p psi(x_p + q a) + delta_q` over a shared evaluator.
pub fn kst_embed_with(
    x: &[f64],
    psi: &mut PsiEvaluator<'_>,
) -> Result<Embedding, EmbedError> {
    let params = psi.params().clone();
    if x.len() != params.d {
        return Err(EmbedError::SchemaMismatch { got: x.len(), expected: params.d });
    }
    let top_shift = 2.0 * params.d as f64 * params.a;
    for (p, &xp) in x.iter().enumerate() {
        if xp + top_shift >= 1.0 {
            return Err(EmbedError::OutOfDomain {
                index: p,
                value: xp + top_shift,
                hi: 1.0,
            });
        }
    }
    let mut z = Vec::with_capacity(params.num_channels());
    for q in 0..params.num_channels() {
        let mut sum = 0.0;
        for (p, &xp) in x.iter().enumerate() {
            sum += params.lambda[p] * psi.eval(xp + q as f64 * params.a)?;
        }
        z.push(sum + params.delta(q));
    }
    Ok(Embedding { z })
}

/// Embeds one normalized point, with a throwaway evaluator.
pub fn kst_embed(x: &[f64], params: &KstParams) -> Result<Embedding, EmbedError> {
    let mut psi = PsiEvaluator::new(params)?;
    kst_embed_with(x, &mut psi)
}

/// Single-channel B-adic variant `z = sum_p B^-p psi(x_p)`; no shifts.
pub fn badic_embed(x: &[f64], base: u32, params: &KstParams) -> Result<f64, EmbedError> {
    let mut psi = PsiEvaluator::new(params)?;
    badic_embed_with(x, base, &mut psi)
}

pub fn badic_embed_with(
    x: &[f64],
    base: u32,
    psi: &mut PsiEvaluator<'_>,
) -> Result<f64, EmbedError> {
    if base < 2 {
        return Err(EmbedError::BadBase(base));
    }
    let d = psi.params().d;
    if x.len() != d {
        return Err(EmbedError::SchemaMismatch { got: x.len(), expected: d });
    }
    let b = base as f64;
    let mut weight = 1.0;
    let mut sum = 0.0;
    for &xp in x {
        weight /= b;
        sum += weight * psi.eval(xp)?;
    }
    Ok(sum)
}

/// Row-wise normalize-then-embed. Deterministic: two invocations produce
/// bit-identical output.
pub fn embed_batch(
    rows: &[Vec<f64>],
    normalizer: &Normalizer,
    params: &KstParams,
) -> Result<Vec<Vec<f64>>, EmbedError> {
    if normalizer.dim() != params.d {
        return Err(EmbedError::SchemaMismatch { got: normalizer.dim(), expected: params.d });
    }
    let mut psi = PsiEvaluator::new(params)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let x = normalizer.normalize(row)?;
        out.push(kst_embed_with(&x, &mut psi)?.z);
    }
    Ok(out)
}
