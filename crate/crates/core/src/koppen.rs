//! Exact evaluation of the Köppen inner function.
//!
//! The inner function `psi` is the monotone, Hölder-continuous, fractal map
//! that makes the superposition representation work. It is defined through
//! a recursion over base-`gamma` digit expansions: writing a terminating
//! rational `d = sum_{l<=k} i_l gamma^-l` with final digit `i_k`,
//!
//! - `psi(d) = d` when `d` has a single digit,
//! - `psi_k(d) = psi_{k-1}(d - i_k gamma^-k) + i_k gamma^-beta(k)` when
//!   `i_k < gamma - 1`,
//! - `psi_k(d) = (psi_k(d - gamma^-k) + psi_{k-1}(d + gamma^-k)) / 2` when
//!   `i_k = gamma - 1`, where the `+ gamma^-k` propagates carries through
//!   trailing `gamma - 1` digits,
//!
//! with `beta(r) = (n^r - 1)/(n - 1)`. Arbitrary inputs are truncated to
//! `k_digits` digits first.
//!
//! Branch selection happens on integer digit tuples, never on floats, so
//! the recursion is exact; only the final value assembly rounds. A
//! [`PsiEvaluator`] memoizes digit tuples within a batch of evaluations.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Digit-extraction keeps `gamma^k` at or below 2^53 so that the scaled
/// input is exact in an `f64`.
const MAX_SCALE: u64 = 1 << 53;

/// Terms below this threshold are dropped from the `lambda_p` series.
const LAMBDA_TERM_CUTOFF: f64 = 1e-18;

/// Slack for classifying inputs as inside `[0, 1]`.
const DOMAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KoppenError {
    #[error("input {x} lies outside [0, 1]")]
    Domain { x: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("beta({r}) with branching {n} exceeds the representable integer range")]
    BetaOverflow { r: u32, n: u32 },
}

/// How the coordinate weights `lambda_p` are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    /// `lambda_1 = 1`, `lambda_p = sum_r gamma^{-(p-1) beta(r)}` for `p >= 2`.
    Sprecher,
    /// `lambda_p = lambda^p` for a supplied `0 < lambda < 1`.
    Geometric { lambda: f64 },
}

/// Per-channel shift `delta_q` added to the inner sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMode {
    /// `delta_q = q`; separates the channels into disjoint intervals.
    Index,
    /// `delta_q = 0`; ablation variant.
    Zero,
}

/// Everything the inner function and the embedding need: dimension `d`,
/// expansion base `gamma >= d + 2`, branching `n` of `beta(r)`, truncation
/// depth `k`, the shift `a = 1/(gamma (gamma - 1))` and the weights
/// `lambda_1 > lambda_2 > ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct KstParams {
    pub d: usize,
    pub gamma: u32,
    /// Branching parameter of `beta(r)`. Defaults to `d`; the sources
    /// overload the symbol `n`, so it stays configurable.
    pub n_beta: u32,
    pub k_digits: u32,
    pub a: f64,
    pub lambda: Vec<f64>,
    pub lambda_mode: LambdaMode,
    pub delta_mode: DeltaMode,
}

impl KstParams {
    /// Sprecher weights with the default branching `n_beta = d`.
    pub fn new(d: usize, gamma: u32, k_digits: u32) -> Result<Self, KoppenError> {
        Self::sprecher(d, gamma, d.max(1) as u32, k_digits)
    }

    /// Sprecher weights with explicit branching.
    pub fn sprecher(
        d: usize,
        gamma: u32,
        n_beta: u32,
        k_digits: u32,
    ) -> Result<Self, KoppenError> {
        let mode = LambdaMode::Sprecher;
        let params = Self {
            d,
            gamma,
            n_beta,
            k_digits,
            a: shift_constant(gamma),
            lambda: lambda_coeffs(d, gamma, n_beta, &mode)?,
            lambda_mode: mode,
            delta_mode: DeltaMode::Index,
        };
        params.validate()?;
        Ok(params)
    }

    /// Geometric weights `lambda_p = lambda^p`, `0 < lambda < 1`.
    pub fn geometric(
        d: usize,
        gamma: u32,
        lambda: f64,
        k_digits: u32,
    ) -> Result<Self, KoppenError> {
        let mode = LambdaMode::Geometric { lambda };
        let params = Self {
            d,
            gamma,
            n_beta: d.max(1) as u32,
            k_digits,
            a: shift_constant(gamma),
            lambda: lambda_coeffs(d, gamma, d.max(1) as u32, &mode)?,
            lambda_mode: mode,
            delta_mode: DeltaMode::Index,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_delta_mode(mut self, mode: DeltaMode) -> Self {
        self.delta_mode = mode;
        self
    }

    /// Replaces the branching parameter and recomputes the weights.
    pub fn with_n_beta(mut self, n_beta: u32) -> Result<Self, KoppenError> {
        self.n_beta = n_beta;
        self.lambda = lambda_coeffs(self.d, self.gamma, n_beta, &self.lambda_mode)?;
        self.validate()?;
        Ok(self)
    }

    /// Number of embedding channels, `2d + 1`.
    pub fn num_channels(&self) -> usize {
        2 * self.d + 1
    }

    /// The shift `delta_q` for channel `q`.
    pub fn delta(&self, q: usize) -> f64 {
        match self.delta_mode {
            DeltaMode::Index => q as f64,
            DeltaMode::Zero => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), KoppenError> {
        if self.d < 1 {
            return Err(KoppenError::InvalidParams("d must be >= 1"));
        }
        if (self.gamma as u64) < self.d as u64 + 2 {
            return Err(KoppenError::InvalidParams("gamma must be >= d + 2"));
        }
        if self.n_beta < 1 {
            return Err(KoppenError::InvalidParams("n_beta must be >= 1"));
        }
        if self.k_digits < 1 {
            return Err(KoppenError::InvalidParams("k_digits must be >= 1"));
        }
        scale(self.gamma, self.k_digits)?;
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(KoppenError::InvalidParams("shift a must lie in (0, 1)"));
        }
        if self.lambda.len() != self.d {
            return Err(KoppenError::InvalidParams("lambda length must equal d"));
        }
        for w in &self.lambda {
            if !(w.is_finite() && *w > 0.0) {
                return Err(KoppenError::InvalidParams("lambda entries must be positive"));
            }
        }
        if self.lambda.windows(2).any(|w| w[1] >= w[0]) {
            return Err(KoppenError::InvalidParams("lambda must be strictly decreasing"));
        }
        match self.lambda_mode {
            LambdaMode::Sprecher => {
                if self.lambda[0] != 1.0 {
                    return Err(KoppenError::InvalidParams("lambda_1 must be 1 in sprecher mode"));
                }
            }
            LambdaMode::Geometric { lambda } => {
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(KoppenError::InvalidParams(
                        "geometric lambda must lie in (0, 1)",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `a = 1/(gamma (gamma - 1))`.
pub fn shift_constant(gamma: u32) -> f64 {
    1.0 / (gamma as f64 * (gamma as f64 - 1.0))
}

/// The shift used in Sprecher's Lipschitz decomposition,
/// `a = 1/((2n+1)(2n+2))`. The default constructors use
/// [`shift_constant`]; this one is available for that variant.
pub fn sprecher_shift_constant(n: u32) -> f64 {
    let n = n as f64;
    1.0 / ((2.0 * n + 1.0) * (2.0 * n + 2.0))
}

/// `beta(r) = (n^r - 1)/(n - 1)`, with `beta(r) = r` at `n = 1`.
pub fn beta(r: u32, n: u32) -> Result<u64, KoppenError> {
    if r < 1 || n < 1 {
        return Err(KoppenError::InvalidParams("beta requires r >= 1 and n >= 1"));
    }
    if n == 1 {
        return Ok(r as u64);
    }
    let pow = (n as u128)
        .checked_pow(r)
        .ok_or(KoppenError::BetaOverflow { r, n })?;
    u64::try_from((pow - 1) / (n as u128 - 1)).map_err(|_| KoppenError::BetaOverflow { r, n })
}

/// Coordinate weights `lambda_1..lambda_d`.
///
/// Sprecher mode fixes `lambda_1 = 1` (the series diverges at `p = 1`) and
/// truncates each remaining series at the first term below 1e-18.
pub fn lambda_coeffs(
    d: usize,
    gamma: u32,
    n_beta: u32,
    mode: &LambdaMode,
) -> Result<Vec<f64>, KoppenError> {
    if d < 1 {
        return Err(KoppenError::InvalidParams("d must be >= 1"));
    }
    match *mode {
        LambdaMode::Sprecher => {
            if (gamma as u64) < d as u64 + 2 {
                return Err(KoppenError::InvalidParams("gamma must be >= d + 2"));
            }
            if n_beta < 1 {
                return Err(KoppenError::InvalidParams("n_beta must be >= 1"));
            }
            let mut out = Vec::with_capacity(d);
            out.push(1.0);
            for p in 2..=d {
                let mut sum = 0.0;
                for r in 1.. {
                    let term = match beta(r, n_beta) {
                        Ok(b) => match (p as u64 - 1).checked_mul(b) {
                            Some(e) => pow_neg(gamma, e),
                            None => 0.0,
                        },
                        Err(_) => 0.0,
                    };
                    if term < LAMBDA_TERM_CUTOFF {
                        break;
                    }
                    sum += term;
                }
                out.push(sum);
            }
            Ok(out)
        }
        LambdaMode::Geometric { lambda } => {
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(KoppenError::InvalidParams("geometric lambda must lie in (0, 1)"));
            }
            let mut out = Vec::with_capacity(d);
            let mut w = 1.0;
            for _ in 0..d {
                w *= lambda;
                out.push(w);
            }
            Ok(out)
        }
    }
}

/// `gamma^-e`, exact reciprocal while `gamma^e` fits an integer.
fn pow_neg(gamma: u32, e: u64) -> f64 {
    if e == 0 {
        return 1.0;
    }
    if e <= u32::MAX as u64 {
        if let Some(p) = (gamma as u128).checked_pow(e as u32) {
            return 1.0 / p as f64;
        }
    }
    // Beyond u128 the value is far below f64 resolution anyway.
    libm::exp(-(e as f64) * libm::log(gamma as f64))
}

fn scale(gamma: u32, k: u32) -> Result<u64, KoppenError> {
    if gamma < 2 {
        return Err(KoppenError::InvalidParams("gamma must be >= 2"));
    }
    if k < 1 {
        return Err(KoppenError::InvalidParams("k must be >= 1"));
    }
    match (gamma as u64).checked_pow(k) {
        Some(s) if s <= MAX_SCALE => Ok(s),
        _ => Err(KoppenError::InvalidParams("gamma^k exceeds the exact integer range")),
    }
}

/// Base-`gamma` digit sequence of an input, most significant first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digits {
    pub digits: Vec<u32>,
    pub gamma: u32,
}

impl Digits {
    pub fn k(&self) -> usize {
        self.digits.len()
    }

    /// `sum_l i_l gamma^-l`.
    pub fn value(&self) -> f64 {
        let g = self.gamma as f64;
        self.digits.iter().rev().fold(0.0, |acc, &d| (acc + d as f64) / g)
    }
}

/// Truncates `x` to its first `k` base-`gamma` digits.
///
/// The scaled input gets a guard of half a grid-cell of the *next* level,
/// `gamma^-k` in scaled units, before flooring. That absorbs the
/// representation error of decimal literals (`0.29 * 100` lands a hair
/// below 29) without ever moving a point past a genuine digit boundary.
/// `x = 1` clamps to the all-`(gamma-1)` tuple.
pub fn extract_digits(x: f64, gamma: u32, k: u32) -> Result<Digits, KoppenError> {
    let cap = scale(gamma, k)?;
    if !(-DOMAIN_TOLERANCE..=1.0 + DOMAIN_TOLERANCE).contains(&x) {
        return Err(KoppenError::Domain { x });
    }
    let x = x.clamp(0.0, 1.0);
    let scale = cap as f64;
    let m = (libm::floor(x * scale + 0.5 / scale) as u64).min(cap - 1);
    let g = gamma as u64;
    let mut digits = vec![0u32; k as usize];
    let mut rest = m;
    for slot in digits.iter_mut().rev() {
        *slot = (rest % g) as u32;
        rest /= g;
    }
    Ok(Digits { digits, gamma })
}

/// Memoizing evaluator for `psi` under fixed parameters.
///
/// Values are cached per digit tuple, so batch evaluation (a plot grid, a
/// whole dataset) pays for each distinct prefix once. Construction
/// validates the parameters; a cache is cheap to build, so share one per
/// batch or per thread rather than locking.
pub struct PsiEvaluator<'a> {
    params: &'a KstParams,
    memo: BTreeMap<u64, f64>,
    beta_pow: Vec<f64>,
}

impl<'a> PsiEvaluator<'a> {
    pub fn new(params: &'a KstParams) -> Result<Self, KoppenError> {
        params.validate()?;
        // gamma^-beta(level) for level = 1..=k_digits (index 0 unused).
        let mut beta_pow = Vec::with_capacity(params.k_digits as usize + 1);
        beta_pow.push(f64::NAN);
        for level in 1..=params.k_digits {
            let p = match beta(level, params.n_beta) {
                Ok(b) => pow_neg(params.gamma, b),
                Err(_) => 0.0,
            };
            beta_pow.push(p);
        }
        Ok(Self { params, memo: BTreeMap::new(), beta_pow })
    }

    pub fn params(&self) -> &KstParams {
        self.params
    }

    /// `psi` at the `k_digits`-digit truncation of `x`.
    pub fn eval(&mut self, x: f64) -> Result<f64, KoppenError> {
        let d = extract_digits(x, self.params.gamma, self.params.k_digits)?;
        Ok(self.eval_digits(d.digits))
    }

    /// `psi` of an explicit digit tuple.
    pub fn eval_digits(&mut self, mut digits: Vec<u32>) -> f64 {
        // Appending a zero digit is a no-op (second branch with i_k = 0),
        // so psi_k restricted to D_{k-1} equals psi_{k-1} exactly.
        while digits.len() > 1 && digits.last() == Some(&0) {
            digits.pop();
        }
        let k = digits.len();
        if k == 0 {
            return 0.0;
        }
        let gamma = self.params.gamma;
        debug_assert!(digits.iter().all(|&i| i < gamma));
        if k == 1 {
            return digits[0] as f64 / gamma as f64;
        }
        let key = encode(&digits, gamma);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let i_k = digits[k - 1];
        let value = if i_k < gamma - 1 {
            let mut prefix = digits.clone();
            prefix.pop();
            self.eval_digits(prefix) + i_k as f64 * self.beta_pow(k)
        } else {
            // Averaging branch: neighbours one grid step either side.
            let mut below = digits.clone();
            below[k - 1] -= 1;
            let left = self.eval_digits(below);
            let right = match carry_up(&digits, gamma) {
                Some(above) => self.eval_digits(above),
                // Carried past the leading digit: d + gamma^-k = 1.
                None => 1.0,
            };
            0.5 * (left + right)
        };
        self.memo.insert(key, value);
        value
    }

    fn beta_pow(&mut self, level: usize) -> f64 {
        while self.beta_pow.len() <= level {
            let l = self.beta_pow.len() as u32;
            let p = match beta(l, self.params.n_beta) {
                Ok(b) => pow_neg(self.params.gamma, b),
                Err(_) => 0.0,
            };
            self.beta_pow.push(p);
        }
        self.beta_pow[level]
    }
}

/// `d + gamma^-k` with carries; `None` means the sum reached 1.
fn carry_up(digits: &[u32], gamma: u32) -> Option<Vec<u32>> {
    let mut out = digits.to_vec();
    for slot in out.iter_mut().rev() {
        if *slot == gamma - 1 {
            *slot = 0;
        } else {
            *slot += 1;
            return Some(out);
        }
    }
    None
}

/// Memo key: digit count in the top byte, digit value below (< 2^53).
fn encode(digits: &[u32], gamma: u32) -> u64 {
    let mut value = 0u64;
    for &d in digits {
        value = value * u64::from(gamma) + u64::from(d);
    }
    ((digits.len() as u64) << 56) | value
}

/// Convenience wrapper: one-off evaluation of `psi` at `x`.
pub fn koppen_psi(x: f64, params: &KstParams) -> Result<f64, KoppenError> {
    PsiEvaluator::new(params)?.eval(x)
}

/// Equally spaced samples of `psi` on `[lo, hi]`, endpoints included.
pub fn psi_series_on(
    params: &KstParams,
    lo: f64,
    hi: f64,
    grid_points: usize,
) -> Result<Vec<(f64, f64)>, KoppenError> {
    if grid_points < 2 {
        return Err(KoppenError::InvalidParams("grid needs at least 2 points"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(KoppenError::InvalidParams("grid range must satisfy lo < hi"));
    }
    let mut eval = PsiEvaluator::new(params)?;
    let step = (hi - lo) / (grid_points - 1) as f64;
    let mut out = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let x = if i + 1 == grid_points { hi } else { lo + step * i as f64 };
        out.push((x, eval.eval(x)?));
    }
    Ok(out)
}

/// Samples of `psi` on `[0, 1]`.
pub fn psi_series(params: &KstParams, grid_points: usize) -> Result<Vec<(f64, f64)>, KoppenError> {
    psi_series_on(params, 0.0, 1.0, grid_points)
}
