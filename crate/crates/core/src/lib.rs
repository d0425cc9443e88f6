//! Kolmogorov-GAM (K-GAM) networks.
//!
//! A K-GAM predicts `f(x) = sum_q g(z_q)` where the channels
//! `z_q = sum_p lambda_p * psi(x_p + q*a) + delta_q` come from a fixed,
//! function-independent embedding built on the Köppen inner function `psi`,
//! and the univariate outer function `g` is a trainable ReLU network.
//!
//! The crate is split along that seam:
//!
//! - [`koppen`]: exact evaluation of `psi` via its base-`gamma` digit
//!   recursion, plus the Sprecher constants (`lambda_p`, `beta(r)`, `a`).
//! - [`embedding`]: the `[0,1]^d -> R^{2d+1}` KST embedding, the single
//!   channel B-adic variant, and input normalization.
//! - [`neural`]: a minimal scalar-in/scalar-out dense ReLU network with
//!   exact backprop and SGD (+momentum) updates.
//! - [`kgam`]: model assembly and the regression / binary-classification
//!   training loops. Only the outer nets (and the intercept) train; the
//!   embedding is frozen.
//! - [`smoothers`]: Nadaraya-Watson kernel regression, scaled dot-product
//!   attention (for a single query the two coincide under the
//!   exponential inner-product kernel), and an IRLS logistic GLM baseline.
//! - [`dataset`]: the Friedman #1 simulator, Iris parsing/binarization,
//!   and deterministic train/test splits.
//! - [`rng`]: the splitmix64 generator every randomized path goes through.
//!
//! All floating point math routes through [`libm`] so results are identical
//! with or without `std`. File formats, checkpoints and the CLI live in the
//! companion `kgam-cli` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dataset;
pub mod embedding;
pub mod kgam;
pub mod koppen;
pub mod neural;
pub mod rng;
pub mod smoothers;

pub use dataset::Dataset;
pub use embedding::Normalizer;
pub use kgam::{KgamModel, LossKind, Metrics, OuterMode, Task};
pub use koppen::{DeltaMode, KstParams, LambdaMode, PsiEvaluator};
pub use neural::{Mlp, TrainConfig};
pub use rng::SplitMix64;
