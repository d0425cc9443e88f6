//! K-GAM model assembly and training.
//!
//! A model is the frozen embedding (parameters + normalizer) plus the
//! trainable part: one shared outer net, one net per channel, or a single
//! net over the B-adic channel, and an intercept for classification.
//! Training touches only the nets and the intercept; the embedding never
//! moves, so per-row channel values are computed once up front and reused
//! across every epoch.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::dataset::{Dataset, SplitPart};
use crate::embedding::{badic_embed_with, kst_embed_with, EmbedError, Normalizer};
use crate::koppen::{KoppenError, KstParams, PsiEvaluator};
use crate::neural::{Mlp, MlpGrads, NeuralError, Sgd, TrainConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KgamError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Koppen(#[from] KoppenError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("outer mode expects {expected} nets, got {got}")]
    NetCount { expected: usize, got: usize },
    #[error("evaluation split is empty")]
    EmptySplit,
    #[error("targets do not match the {0} loss")]
    TargetMismatch(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Model(#[from] KgamError),
}

/// How the outer function is shared across channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterMode {
    /// One `g` applied to every channel; `delta_q = q` lets it specialize
    /// by interval.
    SharedG,
    /// Separate `g_q` per channel, trained jointly under one loss.
    PerChannelG,
    /// One `g` over the single B-adic channel.
    BadicSingleG { base: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    BinaryClassification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    L2,
    Logistic,
}

/// One recorded loss value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub kind: LossKind,
    pub value: f64,
}

/// Fit metrics for one split.
#[derive(Debug, Clone, PartialEq)]
pub enum Metrics {
    Regression {
        rmse: f64,
        r_squared: f64,
        n: usize,
    },
    Classification {
        /// RMSE of predicted probabilities against the 0/1 labels.
        rmse: f64,
        accuracy: f64,
        /// `confusion[actual][predicted]` at threshold 0.5.
        confusion: [[usize; 2]; 2],
        n: usize,
    },
}

/// Fixed affine map `z -> (z - center) / half_width` applied to a net's
/// input.
///
/// The He-initialized nets start with zero biases, which puts every ReLU
/// kink at input zero; fed the raw channel values (which live in
/// `[delta_q, delta_q + sum(lambda)]`), such a net is exactly linear over
/// its data and SGD stalls at the linear fit. Conditioning the input onto
/// `[-1, 1]` from the *theoretical* channel range (never from data) puts
/// the initial kinks in the middle of the data. The map is constant,
/// absorbable into the first layer, so the model class
/// `f = sum_q g(z_q)` with `g` a ReLU network is unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputScaling {
    pub center: f64,
    pub half_width: f64,
}

impl InputScaling {
    pub fn identity() -> Self {
        Self { center: 0.0, half_width: 1.0 }
    }

    pub fn apply(&self, z: f64) -> f64 {
        (z - self.center) / self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgamModel {
    pub params: KstParams,
    pub normalizer: Normalizer,
    pub outer_mode: OuterMode,
    pub nets: Vec<Mlp>,
    /// Input conditioning per net, aligned with `nets`.
    pub scalings: Vec<InputScaling>,
    /// `beta_0`; only enters classification predictions.
    pub intercept: f64,
    pub task: Task,
}

impl KgamModel {
    /// Builds the model with freshly initialized outer nets. Net `i` is
    /// seeded with `seed + i` so per-channel nets differ.
    pub fn new(
        params: KstParams,
        normalizer: Normalizer,
        outer_mode: OuterMode,
        task: Task,
        net_dims: &[usize],
        seed: u64,
    ) -> Result<Self, KgamError> {
        let count = match outer_mode {
            OuterMode::PerChannelG => params.num_channels(),
            OuterMode::SharedG | OuterMode::BadicSingleG { .. } => 1,
        };
        let nets = (0..count)
            .map(|i| Mlp::new(net_dims, seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        let scalings = net_input_scalings(&params, outer_mode);
        let model =
            Self { params, normalizer, outer_mode, nets, scalings, intercept: 0.0, task };
        model.check_net_count()?;
        Ok(model)
    }

    fn check_net_count(&self) -> Result<(), KgamError> {
        let expected = match self.outer_mode {
            OuterMode::PerChannelG => self.params.num_channels(),
            _ => 1,
        };
        if self.nets.len() != expected {
            return Err(KgamError::NetCount { expected, got: self.nets.len() });
        }
        Ok(())
    }

    /// Number of channels the outer stage consumes: `2d+1`, or 1 in
    /// B-adic mode.
    pub fn channel_count(&self) -> usize {
        match self.outer_mode {
            OuterMode::BadicSingleG { .. } => 1,
            _ => self.params.num_channels(),
        }
    }

    /// Embeds one raw row: normalize, then KST or B-adic channels.
    pub fn embed_row(
        &self,
        raw: &[f64],
        psi: &mut PsiEvaluator<'_>,
    ) -> Result<Vec<f64>, KgamError> {
        let x = self.normalizer.normalize(raw)?;
        match self.outer_mode {
            OuterMode::BadicSingleG { base } => {
                Ok(vec![badic_embed_with(&x, base, psi)?])
            }
            _ => Ok(kst_embed_with(&x, psi)?.z),
        }
    }

    /// Embeds many raw rows with a shared evaluator cache.
    pub fn embed_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, KgamError> {
        let params = self.params.clone();
        let mut psi = PsiEvaluator::new(&params)?;
        rows.iter().map(|r| self.embed_row(r, &mut psi)).collect()
    }

    /// Sum of the outer nets over already computed channel values.
    fn additive_sum(&self, z: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (q, &zq) in z.iter().enumerate() {
            sum += self.outer_value(self.net_index(q), zq);
        }
        sum
    }

    fn predict_embedded(&self, z: &[f64]) -> f64 {
        let sum = self.additive_sum(z);
        match self.task {
            Task::Regression => sum,
            Task::BinaryClassification => sigmoid(self.intercept + sum),
        }
    }

    /// Prediction from a raw feature row: `sum_q g(z_q)` for regression,
    /// `sigmoid(beta_0 + sum_q g(z_q))` for classification.
    pub fn predict(&self, raw: &[f64]) -> Result<f64, KgamError> {
        let params = self.params.clone();
        let mut psi = PsiEvaluator::new(&params)?;
        let z = self.embed_row(raw, &mut psi)?;
        Ok(self.predict_embedded(&z))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, KgamError> {
        let embedded = self.embed_rows(rows)?;
        Ok(embedded.iter().map(|z| self.predict_embedded(z)).collect())
    }

    /// Mini-batch SGD on the outer nets (and the intercept) only.
    ///
    /// The embedding is computed once for the training rows and stays
    /// fixed. Rows are reshuffled every epoch from a splitmix64 stream
    /// seeded with `config.seed`; batches, channels and samples are
    /// visited in a fixed order, so the trajectory is deterministic.
    /// Returns the per-epoch mean loss trace (length = epochs).
    pub fn train(
        &mut self,
        data: &Dataset,
        config: &TrainConfig,
        loss: LossKind,
    ) -> Result<Vec<Loss>, TrainError> {
        config.validate().map_err(KgamError::from)?;
        self.check_net_count()?;
        let train_idx = data.indices(SplitPart::Train);
        if train_idx.is_empty() {
            return Err(KgamError::EmptySplit.into());
        }
        let targets: Vec<f64> = train_idx.iter().map(|&i| data.y[i]).collect();
        match loss {
            LossKind::Logistic => {
                if targets.iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(KgamError::TargetMismatch("logistic").into());
                }
            }
            LossKind::L2 => {
                if targets.iter().any(|v| !v.is_finite()) {
                    return Err(KgamError::TargetMismatch("l2").into());
                }
            }
        }
        let rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| data.x[i].clone()).collect();
        let embedded = self.embed_rows(&rows)?;

        let momentum = config.effective_momentum();
        let mut optimizers: Vec<Sgd> = self
            .nets
            .iter()
            .map(|net| Sgd::new(net, config.learning_rate, momentum))
            .collect();
        let mut grads: Vec<MlpGrads> = self.nets.iter().map(MlpGrads::zeros_like).collect();
        // One activation cache per channel (channels may share a net).
        let mut caches: Vec<crate::neural::ForwardCache> = (0..self.channel_count())
            .map(|q| crate::neural::ForwardCache::new(&self.nets[self.net_index(q)]))
            .collect();
        let mut intercept_velocity = 0.0;

        let mut order: Vec<usize> = (0..embedded.len()).collect();
        let mut rng = crate::rng::SplitMix64::new(config.seed);
        let mut trace = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            rng.shuffle(&mut order);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(config.batch_size) {
                for g in &mut grads {
                    g.zero();
                }
                let mut intercept_grad = 0.0;
                let inv = 1.0 / batch.len() as f64;
                for &row in batch {
                    let z = &embedded[row];
                    let target = targets[row];
                    // Forward through every channel, keeping activations.
                    let mut sum = 0.0;
                    for (q, &zq) in z.iter().enumerate() {
                        let idx = self.net_index(q);
                        let net = &self.nets[idx];
                        sum += net.forward_cached(self.scalings[idx].apply(zq), &mut caches[q]);
                    }
                    let (sample_loss, upstream) = match loss {
                        LossKind::L2 => {
                            let err = sum - target;
                            (err * err, 2.0 * err * inv)
                        }
                        LossKind::Logistic => {
                            let p = sigmoid(self.intercept + sum);
                            (log_loss(p, target), (p - target) * inv)
                        }
                    };
                    epoch_loss += sample_loss;
                    if matches!(loss, LossKind::Logistic) {
                        intercept_grad += upstream;
                    }
                    for q in 0..z.len() {
                        let net_idx = self.net_index(q);
                        self.nets[net_idx]
                            .backward_accumulate(&caches[q], upstream, &mut grads[net_idx])
                            .map_err(KgamError::from)?;
                    }
                }
                for (net, (opt, g)) in
                    self.nets.iter_mut().zip(optimizers.iter_mut().zip(&grads))
                {
                    opt.step(net, g).map_err(|_| TrainError::Diverged { epoch })?;
                }
                if matches!(loss, LossKind::Logistic) {
                    intercept_velocity = momentum * intercept_velocity + intercept_grad;
                    self.intercept -= config.learning_rate * intercept_velocity;
                }
            }
            let mean = epoch_loss / embedded.len() as f64;
            if !mean.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            trace.push(Loss { kind: loss, value: mean });
        }
        Ok(trace)
    }

    fn net_index(&self, q: usize) -> usize {
        match self.outer_mode {
            OuterMode::PerChannelG => q,
            _ => 0,
        }
    }

    /// The outer function of net `index` as seen by the model:
    /// conditioning map, then the ReLU net.
    pub fn outer_value(&self, index: usize, z: f64) -> f64 {
        self.nets[index].forward(self.scalings[index].apply(z))
    }

    /// RMSE/R^2 for regression; probability-RMSE, accuracy and the 2x2
    /// confusion matrix (threshold 0.5) for classification.
    pub fn evaluate(&self, data: &Dataset, part: SplitPart) -> Result<Metrics, KgamError> {
        let idx = data.indices(part);
        if idx.is_empty() {
            return Err(KgamError::EmptySplit);
        }
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| data.x[i].clone()).collect();
        let preds = self.predict_batch(&rows)?;
        let ys: Vec<f64> = idx.iter().map(|&i| data.y[i]).collect();
        let n = ys.len();
        let mse = preds
            .iter()
            .zip(&ys)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>()
            / n as f64;
        let rmse = libm::sqrt(mse);
        match self.task {
            Task::Regression => {
                let mean = ys.iter().sum::<f64>() / n as f64;
                let sst = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>();
                let sse = mse * n as f64;
                let r_squared = if sst > 0.0 {
                    1.0 - sse / sst
                } else if sse == 0.0 {
                    1.0
                } else {
                    f64::NEG_INFINITY
                };
                Ok(Metrics::Regression { rmse, r_squared, n })
            }
            Task::BinaryClassification => {
                let mut confusion = [[0usize; 2]; 2];
                for (p, y) in preds.iter().zip(&ys) {
                    let predicted = usize::from(*p > 0.5);
                    let actual = usize::from(*y == 1.0);
                    confusion[actual][predicted] += 1;
                }
                let correct = confusion[0][0] + confusion[1][1];
                Ok(Metrics::Classification {
                    rmse,
                    accuracy: correct as f64 / n as f64,
                    confusion,
                    n,
                })
            }
        }
    }
}

/// Conditioning maps per net from the theoretical channel ranges:
/// channel `q` lives in `[delta_q, delta_q + sum(lambda)]`, the B-adic
/// channel in `[0, sum_p B^-p]`.
fn net_input_scalings(params: &KstParams, mode: OuterMode) -> Vec<InputScaling> {
    let lambda_sum: f64 = params.lambda.iter().sum();
    let scaling = |lo: f64, hi: f64| InputScaling {
        center: 0.5 * (lo + hi),
        half_width: 0.5 * (hi - lo),
    };
    match mode {
        OuterMode::PerChannelG => (0..params.num_channels())
            .map(|q| scaling(params.delta(q), params.delta(q) + lambda_sum))
            .collect(),
        OuterMode::SharedG => {
            let top = params.delta(params.num_channels() - 1);
            alloc::vec![scaling(params.delta(0).min(0.0), top + lambda_sum)]
        }
        OuterMode::BadicSingleG { base } => {
            let b = base as f64;
            let mut hi = 0.0;
            let mut w = 1.0;
            for _ in 0..params.d {
                w /= b;
                hi += w;
            }
            alloc::vec![scaling(0.0, hi)]
        }
    }
}

/// Numerically stable logistic function, clamped into the open interval.
pub fn sigmoid(u: f64) -> f64 {
    let p = if u >= 0.0 {
        1.0 / (1.0 + libm::exp(-u))
    } else {
        let e = libm::exp(u);
        e / (1.0 + e)
    };
    p.clamp(1e-15, 1.0 - 1e-15)
}

fn log_loss(p: f64, y: f64) -> f64 {
    -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;
    use crate::embedding::{fit_normalizer, normalized_hi};
    use crate::neural::{OptimizerKind, TrainConfig};
    use crate::rng::SplitMix64;

    fn unit_identity_net() -> Mlp {
        Mlp {
            dims: vec![1, 1, 1],
            weights: vec![vec![1.0], vec![1.0]],
            biases: vec![vec![0.0], vec![0.0]],
        }
    }

    fn zeroed(mut net: Mlp) -> Mlp {
        for w in &mut net.weights {
            w.fill(0.0);
        }
        for b in &mut net.biases {
            b.fill(0.0);
        }
        net
    }

    fn unit_normalizer(params: &KstParams, d: usize) -> Normalizer {
        Normalizer {
            mins: vec![0.0; d],
            maxs: vec![1.0; d],
            target_hi: normalized_hi(params),
        }
    }

    fn toy_dataset(n: usize, d: usize, seed: u64, binary: bool) -> Dataset {
        let mut rng = SplitMix64::new(seed);
        let x: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| rng.next_f64()).collect()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum::<f64>() / d as f64;
                if binary {
                    f64::from(u8::from(s > 0.5))
                } else {
                    libm::sin(3.0 * s) + s
                }
            })
            .collect();
        Dataset {
            feature_names: (0..d).map(|i| alloc::format!("f{i}")).collect(),
            x,
            y,
            split: None,
            provenance: Provenance::InMemory,
        }
    }

    #[test]
    fn zero_nets_predict_zero_and_half() {
        let params = KstParams::sprecher(2, 10, 2, 3).unwrap();
        let norm = unit_normalizer(&params, 2);
        let mut model = KgamModel::new(
            params.clone(),
            norm.clone(),
            OuterMode::SharedG,
            Task::Regression,
            &[1, 4, 1],
            0,
        )
        .unwrap();
        model.nets[0] = zeroed(model.nets[0].clone());
        assert_eq!(model.predict(&[0.4, 0.6]).unwrap(), 0.0);

        let mut clf = KgamModel::new(
            params,
            norm,
            OuterMode::SharedG,
            Task::BinaryClassification,
            &[1, 4, 1],
            0,
        )
        .unwrap();
        clf.nets[0] = zeroed(clf.nets[0].clone());
        assert_eq!(clf.predict(&[0.4, 0.6]).unwrap(), 0.5);
    }

    #[test]
    fn shared_identity_net_hand_value() {
        // d=1, gamma=10, k=2, n=2, delta_q=q, raw x=0 -> z = (0, 1.001, 2.002)
        // and g = ReLU identity, so f = 3.003.
        let params = KstParams::sprecher(1, 10, 2, 2).unwrap();
        let model = KgamModel {
            normalizer: unit_normalizer(&params, 1),
            params,
            outer_mode: OuterMode::SharedG,
            nets: vec![unit_identity_net()],
            scalings: vec![InputScaling::identity()],
            intercept: 0.0,
            task: Task::Regression,
        };
        let f = model.predict(&[0.0]).unwrap();
        assert!((f - 3.003).abs() < 1e-12, "f = {f}");
    }

    #[test]
    fn per_channel_prediction_is_additive() {
        let params = KstParams::sprecher(2, 10, 2, 4).unwrap();
        let data = toy_dataset(20, 2, 3, false);
        let norm = fit_normalizer(&data.x, &params).unwrap();
        let model = KgamModel::new(
            params,
            norm,
            OuterMode::PerChannelG,
            Task::Regression,
            &[1, 6, 1],
            7,
        )
        .unwrap();
        for row in &data.x {
            let z = model.embed_rows(core::slice::from_ref(row)).unwrap().remove(0);
            let independent: f64 =
                z.iter().enumerate().map(|(q, &v)| model.outer_value(q, v)).sum();
            let direct = model.predict(row).unwrap();
            assert_eq!(direct.to_bits(), independent.to_bits());
        }
    }

    #[test]
    fn badic_mode_uses_one_channel() {
        let params = KstParams::sprecher(2, 10, 2, 4).unwrap();
        let data = toy_dataset(10, 2, 5, false);
        let norm = fit_normalizer(&data.x, &params).unwrap();
        let model = KgamModel::new(
            params,
            norm,
            OuterMode::BadicSingleG { base: 10 },
            Task::Regression,
            &[1, 4, 1],
            1,
        )
        .unwrap();
        assert_eq!(model.channel_count(), 1);
        let z = model.embed_rows(&data.x).unwrap();
        assert!(z.iter().all(|r| r.len() == 1));
        let f = model.predict(&data.x[0]).unwrap();
        assert_eq!(f, model.outer_value(0, z[0][0]));
    }

    #[test]
    fn zero_epochs_change_nothing() {
        let params = KstParams::sprecher(2, 10, 2, 3).unwrap();
        let data = toy_dataset(12, 2, 9, false);
        let norm = fit_normalizer(&data.x, &params).unwrap();
        let mut model = KgamModel::new(
            params,
            norm,
            OuterMode::SharedG,
            Task::Regression,
            &[1, 5, 1],
            11,
        )
        .unwrap();
        let before = model.clone();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let trace = model.train(&data, &cfg, LossKind::L2).unwrap();
        assert!(trace.is_empty());
        assert_eq!(model, before);
    }

    #[test]
    fn constant_target_beats_zero_predictor() {
        let c = 4.2;
        let params = KstParams::sprecher(2, 10, 2, 3).unwrap();
        let mut data = toy_dataset(24, 2, 13, false);
        for y in &mut data.y {
            *y = c;
        }
        let norm = fit_normalizer(&data.x, &params).unwrap();
        let mut model = KgamModel::new(
            params,
            norm,
            OuterMode::SharedG,
            Task::Regression,
            &[1, 8, 1],
            5,
        )
        .unwrap();
        let cfg = TrainConfig {
            learning_rate: 5e-3,
            epochs: 400,
            batch_size: 24,
            seed: 1,
            ..TrainConfig::default()
        };
        let trace = model.train(&data, &cfg, LossKind::L2).unwrap();
        assert_eq!(trace.len(), 400);
        let final_mse = trace.last().unwrap().value;
        assert!(final_mse <= c * c, "final {final_mse} vs zero-predictor {}", c * c);
    }

    #[test]
    fn training_leaves_embedding_untouched() {
        let params = KstParams::sprecher(2, 10, 2, 3).unwrap();
        let data = toy_dataset(16, 2, 21, false);
        let norm = fit_normalizer(&data.x, &params).unwrap();
        let mut model = KgamModel::new(
            params,
            norm,
            OuterMode::PerChannelG,
            Task::Regression,
            &[1, 4, 1],
            2,
        )
        .unwrap();
        let params_before = model.params.clone();
        let norm_before = model.normalizer.clone();
        let embedded_before = model.embed_rows(&data.x).unwrap();
        let cfg = TrainConfig { epochs: 20, seed: 3, ..TrainConfig::default() };
        model.train(&data, &cfg, LossKind::L2).unwrap();
        assert_eq!(model.params, params_before);
        assert_eq!(model.normalizer, norm_before);
        let embedded_after = model.embed_rows(&data.x).unwrap();
        for (a, b) in embedded_before.iter().flatten().zip(embedded_after.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn tiny_full_batch_step_never_increases_loss() {
        for seed in 0..20u64 {
            let params = KstParams::sprecher(2, 10, 2, 3).unwrap();
            let data = toy_dataset(10, 2, 100 + seed, false);
            let norm = fit_normalizer(&data.x, &params).unwrap();
            let mut model = KgamModel::new(
                params,
                norm,
                OuterMode::SharedG,
                Task::Regression,
                &[1, 6, 1],
                seed,
            )
            .unwrap();
            let mse = |m: &KgamModel| {
                let p = m.predict_batch(&data.x).unwrap();
                p.iter().zip(&data.y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    / data.n() as f64
            };
            let before = mse(&model);
            let cfg = TrainConfig {
                learning_rate: 1e-6,
                epochs: 1,
                batch_size: data.n(),
                seed,
                ..TrainConfig::default()
            };
            model.train(&data, &cfg, LossKind::L2).unwrap();
            let after = mse(&model);
            assert!(
                after <= before + 1e-12,
                "seed {seed}: loss rose {before} -> {after}"
            );
        }
    }

    #[test]
    fn classification_outputs_stay_in_open_interval() {
        let params = KstParams::sprecher(2, 10, 2, 3).unwrap();
        let data = toy_dataset(30, 2, 4, true);
        let norm = fit_normalizer(&data.x, &params).unwrap();
        let mut model = KgamModel::new(
            params,
            norm,
            OuterMode::SharedG,
            Task::BinaryClassification,
            &[1, 6, 1],
            8,
        )
        .unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 8,
            seed: 5,
            ..TrainConfig::default()
        };
        model.train(&data, &cfg, LossKind::Logistic).unwrap();
        for p in model.predict_batch(&data.x).unwrap() {
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn logistic_loss_rejects_non_binary_targets() {
        let params = KstParams::sprecher(2, 10, 2, 3).unwrap();
        let data = toy_dataset(10, 2, 6, false); // real-valued targets
        let norm = fit_normalizer(&data.x, &params).unwrap();
        let mut model = KgamModel::new(
            params,
            norm,
            OuterMode::SharedG,
            Task::BinaryClassification,
            &[1, 4, 1],
            0,
        )
        .unwrap();
        let cfg = TrainConfig::default();
        assert!(matches!(
            model.train(&data, &cfg, LossKind::Logistic),
            Err(TrainError::Model(KgamError::TargetMismatch("logistic")))
        ));
    }

    #[test]
    fn explosive_learning_rate_reports_divergence() {
        let params = KstParams::sprecher(2, 10, 2, 3).unwrap();
        let data = toy_dataset(16, 2, 31, false);
        let norm = fit_normalizer(&data.x, &params).unwrap();
        let mut model = KgamModel::new(
            params,
            norm,
            OuterMode::SharedG,
            Task::Regression,
            &[1, 8, 1],
            3,
        )
        .unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e12,
            epochs: 50,
            batch_size: 4,
            seed: 2,
            ..TrainConfig::default()
        };
        assert!(matches!(
            model.train(&data, &cfg, LossKind::L2),
            Err(TrainError::Diverged { .. })
        ));
    }

    #[test]
    fn evaluate_perfect_and_constant_predictors() {
        let params = KstParams::sprecher(2, 10, 2, 3).unwrap();
        let mut data = toy_dataset(20, 2, 41, false);
        let norm = fit_normalizer(&data.x, &params).unwrap();
        let model = KgamModel::new(
            params.clone(),
            norm.clone(),
            OuterMode::SharedG,
            Task::Regression,
            &[1, 5, 1],
            17,
        )
        .unwrap();
        // Perfect by construction: targets are the model's own outputs.
        data.y = model.predict_batch(&data.x).unwrap();
        match model.evaluate(&data, SplitPart::All).unwrap() {
            Metrics::Regression { rmse, r_squared, n } => {
                assert_eq!(rmse, 0.0);
                assert_eq!(n, 20);
                assert!((r_squared - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected metrics {other:?}"),
        }
        // Constant-0.5 classifier on balanced labels: accuracy one half.
        let mut clf = KgamModel::new(
            params,
            norm,
            OuterMode::SharedG,
            Task::BinaryClassification,
            &[1, 5, 1],
            17,
        )
        .unwrap();
        clf.nets[0] = zeroed(clf.nets[0].clone());
        let mut balanced = data.clone();
        balanced.y = (0..20).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
        match clf.evaluate(&balanced, SplitPart::All).unwrap() {
            Metrics::Classification { accuracy, confusion, .. } => {
                assert_eq!(accuracy, 0.5);
                // threshold is strict: p = 0.5 predicts class 0
                assert_eq!(confusion[0][1] + confusion[1][1], 0);
            }
            other => panic!("unexpected metrics {other:?}"),
        }
        // Empty split errors.
        assert!(matches!(
            model.evaluate(&data, SplitPart::Test),
            Err(KgamError::EmptySplit)
        ));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let params = KstParams::sprecher(2, 10, 2, 3).unwrap();
        let data = toy_dataset(18, 2, 51, false);
        let norm = fit_normalizer(&data.x, &params).unwrap();
        let cfg = TrainConfig {
            learning_rate: 2e-3,
            epochs: 25,
            batch_size: 4,
            momentum: 0.9,
            optimizer: OptimizerKind::SgdMomentum,
            seed: 33,
        };
        let run = || {
            let mut m = KgamModel::new(
                params.clone(),
                norm.clone(),
                OuterMode::PerChannelG,
                Task::Regression,
                &[1, 4, 1],
                9,
            )
            .unwrap();
            let trace = m.train(&data, &cfg, LossKind::L2).unwrap();
            (m, trace)
        };
        let (m1, t1) = run();
        let (m2, t2) = run();
        assert_eq!(m1, m2);
        assert_eq!(t1.len(), t2.len());
        for (a, b) in t1.iter().zip(&t2) {
            assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }
}
