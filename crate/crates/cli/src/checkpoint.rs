//! Checkpoint JSON: everything needed to reload a trained model and
//! reproduce its predictions bit for bit.
//!
//! JSON keeps checkpoints interoperable with other implementations.
//! serde_json prints floats in shortest-round-trip form, so
//! save -> load -> save is byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use kgam_core::embedding::Normalizer;
use kgam_core::kgam::{InputScaling, KgamModel};
use kgam_core::neural::Mlp;

use crate::config::RunConfig;
use crate::csvio::write_atomic;
use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerDto {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub target_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpDto {
    pub dims: Vec<usize>,
    /// Row-major `dims[l+1] x dims[l]` matrices.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingDto {
    pub center: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: RunConfig,
    pub normalizer: NormalizerDto,
    pub lambda: Vec<f64>,
    pub intercept: f64,
    pub nets: Vec<MlpDto>,
    /// Fixed input conditioning per net.
    pub scalings: Vec<ScalingDto>,
    /// Observed `[min, max]` of each channel over the training rows;
    /// the sampling range for `gplot`.
    pub channel_ranges: Vec<[f64; 2]>,
    /// Per-epoch mean training loss.
    pub trace: Vec<f64>,
}

impl Checkpoint {
    pub fn from_model(
        config: &RunConfig,
        model: &KgamModel,
        channel_ranges: Vec<[f64; 2]>,
        trace: Vec<f64>,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            normalizer: NormalizerDto {
                mins: model.normalizer.mins.clone(),
                maxs: model.normalizer.maxs.clone(),
                target_hi: model.normalizer.target_hi,
            },
            lambda: model.params.lambda.clone(),
            intercept: model.intercept,
            nets: model
                .nets
                .iter()
                .map(|n| MlpDto {
                    dims: n.dims.clone(),
                    weights: n.weights.clone(),
                    biases: n.biases.clone(),
                })
                .collect(),
            scalings: model
                .scalings
                .iter()
                .map(|s| ScalingDto { center: s.center, half_width: s.half_width })
                .collect(),
            channel_ranges,
            trace,
        }
    }

    /// Rebuilds the model. The embedding parameters are re-derived from
    /// the config snapshot and must reproduce the stored lambda vector
    /// exactly, otherwise the checkpoint is inconsistent.
    pub fn to_model(&self) -> Result<KgamModel, CliError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::data(format!(
                "unsupported checkpoint format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let params = self.config.kst_params()?;
        if params.lambda != self.lambda {
            return Err(CliError::data(
                "checkpoint lambda vector does not match its config".to_string(),
            ));
        }
        let normalizer = Normalizer {
            mins: self.normalizer.mins.clone(),
            maxs: self.normalizer.maxs.clone(),
            target_hi: self.normalizer.target_hi,
        };
        let nets: Vec<Mlp> = self
            .nets
            .iter()
            .map(|n| Mlp {
                dims: n.dims.clone(),
                weights: n.weights.clone(),
                biases: n.biases.clone(),
            })
            .collect();
        let scalings: Vec<InputScaling> = self
            .scalings
            .iter()
            .map(|s| InputScaling { center: s.center, half_width: s.half_width })
            .collect();
        if nets.len() != scalings.len() || nets.is_empty() {
            return Err(CliError::data("checkpoint nets/scalings are inconsistent".to_string()));
        }
        Ok(KgamModel {
            params,
            normalizer,
            outer_mode: self.config.outer_mode(),
            nets,
            scalings,
            intercept: self.intercept,
            task: self.config.task(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        write_atomic(path, &json)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}
