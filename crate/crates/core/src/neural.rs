//! Minimal dense ReLU network for the outer function `g`.
//!
//! `g` maps one channel value to one output, so the network is scalar-in /
//! scalar-out: `dims = [1, h, ..., h, 1]` with ReLU on hidden layers and an
//! identity output layer. The single-hidden-layer case is exactly
//! `g(x) = sum_k beta_k ReLU(w_k x + b_k)`; depth generalizes it.
//!
//! Backprop is exact (checked against central finite differences in the
//! tests), `ReLU'(0) = 0`, and everything is deterministic given a seed.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("invalid dims: {0}")]
    InvalidDims(&'static str),
    #[error("forward cache does not match this network")]
    CacheMismatch,
    #[error("gradient shape does not match this network")]
    GradMismatch,
    #[error("non-finite value encountered during update")]
    NonFinite,
}

/// Which update rule [`Sgd::step`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    SgdMomentum,
}

/// Hyper-parameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 2000,
            batch_size: 16,
            momentum: 0.0,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl TrainConfig {
    /// Momentum actually applied: zero under plain SGD.
    pub fn effective_momentum(&self) -> f64 {
        match self.optimizer {
            OptimizerKind::Sgd => 0.0,
            OptimizerKind::SgdMomentum => self.momentum,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NeuralError::InvalidDims("learning_rate must be positive"));
        }
        if self.batch_size < 1 {
            return Err(NeuralError::InvalidDims("batch_size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NeuralError::InvalidDims("momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Dense scalar-to-scalar ReLU network.
///
/// `weights[l]` is row-major with shape `dims[l+1] x dims[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// He-uniform initialization: weights from
    /// `U(-sqrt(6/fan_in), +sqrt(6/fan_in))` and biases from
    /// `U(-1/sqrt(fan_in), +1/sqrt(fan_in))`, drawn layer by layer
    /// (weights row-major, then biases) from one splitmix64 stream.
    ///
    /// Nonzero biases matter here: a ReLU net with all-zero biases is
    /// positively homogeneous, so every kink sits at input zero and SGD on
    /// 1-D inputs stalls at the best linear fit. Spreading the kinks over
    /// the input range at init is what makes the outer functions trainable.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self, NeuralError> {
        if dims.len() < 2 {
            return Err(NeuralError::InvalidDims("need at least input and output layers"));
        }
        if dims[0] != 1 || dims[dims.len() - 1] != 1 {
            return Err(NeuralError::InvalidDims("g is scalar: dims must start and end with 1"));
        }
        if dims.contains(&0) {
            return Err(NeuralError::InvalidDims("layer widths must be >= 1"));
        }
        let mut rng = SplitMix64::new(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let w_bound = libm::sqrt(6.0 / fan_in as f64);
            let w: Vec<f64> =
                (0..fan_in * fan_out).map(|_| rng.next_range(-w_bound, w_bound)).collect();
            weights.push(w);
            let b_bound = 1.0 / libm::sqrt(fan_in as f64);
            let b: Vec<f64> =
                (0..fan_out).map(|_| rng.next_range(-b_bound, b_bound)).collect();
            biases.push(b);
        }
        Ok(Self { dims: dims.to_vec(), weights, biases })
    }

    /// `[1, width, ..., width, 1]` with `depth` hidden layers.
    pub fn layer_dims(width: usize, depth: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(depth + 2);
        dims.push(1);
        dims.extend(core::iter::repeat_n(width, depth));
        dims.push(1);
        dims
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().flatten().all(|w| w.is_finite())
            && self.biases.iter().flatten().all(|b| b.is_finite())
    }

    /// Plain forward pass.
    pub fn forward(&self, x: f64) -> f64 {
        let mut cache = ForwardCache::new(self);
        self.forward_cached(x, &mut cache)
    }

    /// Forward pass that records pre- and post-activations for backprop.
    pub fn forward_cached(&self, x: f64, cache: &mut ForwardCache) -> f64 {
        debug_assert_eq!(cache.post.len(), self.num_layers());
        cache.input = x;
        let last = self.num_layers() - 1;
        for l in 0..=last {
            let (in_dim, out_dim) = (self.dims[l], self.dims[l + 1]);
            let (done, rest) = cache.post.split_at_mut(l);
            let prev: &[f64] = if l == 0 { &[] } else { &done[l - 1] };
            let out = &mut rest[0];
            let pre = &mut cache.pre[l];
            for o in 0..out_dim {
                let row = &self.weights[l][o * in_dim..(o + 1) * in_dim];
                let mut z = self.biases[l][o];
                if l == 0 {
                    z += row[0] * x;
                } else {
                    for (w, p) in row.iter().zip(prev) {
                        z += w * p;
                    }
                }
                pre[o] = z;
                out[o] = if l == last { z } else { relu(z) };
            }
        }
        cache.post[last][0]
    }

    /// Exact gradients of `upstream * output` w.r.t. every parameter,
    /// accumulated into `grads`. Requires the cache of a forward pass
    /// through this same network.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        upstream: f64,
        grads: &mut MlpGrads,
    ) -> Result<(), NeuralError> {
        if !cache.matches(self) {
            return Err(NeuralError::CacheMismatch);
        }
        if !grads.matches(self) {
            return Err(NeuralError::GradMismatch);
        }
        let last = self.num_layers() - 1;
        // d loss / d post-activation of the current layer
        let mut delta = vec![upstream];
        for l in (0..=last).rev() {
            let (in_dim, out_dim) = (self.dims[l], self.dims[l + 1]);
            // identity output layer: dz = delta; hidden: dz = delta * relu'(pre)
            let mut dz = delta;
            if l != last {
                for (v, &z) in dz.iter_mut().zip(cache.pre[l].iter()) {
                    *v *= relu_grad(z);
                }
            }
            let mut next_delta = vec![0.0; in_dim];
            for o in 0..out_dim {
                grads.d_biases[l][o] += dz[o];
                let row = &self.weights[l][o * in_dim..(o + 1) * in_dim];
                let grow = &mut grads.d_weights[l][o * in_dim..(o + 1) * in_dim];
                if l == 0 {
                    grow[0] += dz[o] * cache.input;
                    next_delta[0] += row[0] * dz[o];
                } else {
                    let prev = &cache.post[l - 1];
                    for i in 0..in_dim {
                        grow[i] += dz[o] * prev[i];
                        next_delta[i] += row[i] * dz[o];
                    }
                }
            }
            delta = next_delta;
        }
        Ok(())
    }

    /// Gradients for one `(cache, upstream)` pair.
    pub fn backward(&self, cache: &ForwardCache, upstream: f64) -> Result<MlpGrads, NeuralError> {
        let mut grads = MlpGrads::zeros_like(self);
        self.backward_accumulate(cache, upstream, &mut grads)?;
        Ok(grads)
    }
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

// Subgradient convention: ReLU'(0) = 0.
fn relu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: f64,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn new(net: &Mlp) -> Self {
        let shapes: Vec<Vec<f64>> = net.dims[1..].iter().map(|&w| vec![0.0; w]).collect();
        Self { input: 0.0, pre: shapes.clone(), post: shapes }
    }

    fn matches(&self, net: &Mlp) -> bool {
        self.post.len() == net.num_layers()
            && self.post.iter().zip(net.dims[1..].iter()).all(|(v, &w)| v.len() == w)
    }
}

/// Parameter gradients, same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            d_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            d_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.d_weights {
            w.fill(0.0);
        }
        for b in &mut self.d_biases {
            b.fill(0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.d_weights {
            for v in w.iter_mut() {
                *v *= s;
            }
        }
        for b in &mut self.d_biases {
            for v in b.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.d_weights.iter().flatten().all(|v| v.is_finite())
            && self.d_biases.iter().flatten().all(|v| v.is_finite())
    }

    fn matches(&self, net: &Mlp) -> bool {
        self.d_weights.len() == net.weights.len()
            && self.d_weights.iter().zip(&net.weights).all(|(a, b)| a.len() == b.len())
            && self.d_biases.iter().zip(&net.biases).all(|(a, b)| a.len() == b.len())
    }
}

/// SGD with optional momentum; the velocity lives here.
///
/// Update: `v <- momentum * v + g`, `theta <- theta - lr * v`. With zero
/// momentum this is plain SGD.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: MlpGrads,
}

impl Sgd {
    pub fn new(net: &Mlp, learning_rate: f64, momentum: f64) -> Self {
        Self { learning_rate, momentum, velocity: MlpGrads::zeros_like(net) }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) -> Result<(), NeuralError> {
        if !grads.matches(net) || !self.velocity.matches(net) {
            return Err(NeuralError::GradMismatch);
        }
        if !grads.all_finite() {
            return Err(NeuralError::NonFinite);
        }
        for l in 0..net.weights.len() {
            for (i, g) in grads.d_weights[l].iter().enumerate() {
                let v = &mut self.velocity.d_weights[l][i];
                *v = self.momentum * *v + g;
                net.weights[l][i] -= self.learning_rate * *v;
            }
            for (i, g) in grads.d_biases[l].iter().enumerate() {
                let v = &mut self.velocity.d_biases[l][i];
                *v = self.momentum * *v + g;
                net.biases[l][i] -= self.learning_rate * *v;
            }
        }
        if !net.all_finite() {
            return Err(NeuralError::NonFinite);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_net(w: f64, b: f64, beta: f64) -> Mlp {
        Mlp {
            dims: vec![1, 1, 1],
            weights: vec![vec![w], vec![beta]],
            biases: vec![vec![b], vec![0.0]],
        }
    }

    #[test]
    fn paper_architecture_shapes() {
        // Per-channel g: 16x1 input map, eighteen 16x16 maps, 1x16 output.
        let dims = Mlp::layer_dims(16, 19);
        let net = Mlp::new(&dims, 0).unwrap();
        assert_eq!(net.weights[0].len(), 16);
        let square = net.weights[1..net.num_layers() - 1]
            .iter()
            .filter(|w| w.len() == 16 * 16)
            .count();
        assert_eq!(square, 18);
        assert_eq!(net.weights.last().unwrap().len(), 16);
        // Shared g widens to 200.
        let wide = Mlp::new(&Mlp::layer_dims(200, 19), 0).unwrap();
        assert_eq!(wide.dims[1], 200);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = Mlp::new(&[1, 8, 8, 1], 42).unwrap();
        let b = Mlp::new(&[1, 8, 8, 1], 42).unwrap();
        assert_eq!(a, b);
        let c = Mlp::new(&[1, 8, 8, 1], 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_rejects_bad_dims() {
        assert!(Mlp::new(&[2, 4, 1], 0).is_err());
        assert!(Mlp::new(&[1, 4, 2], 0).is_err());
        assert!(Mlp::new(&[1], 0).is_err());
        assert!(Mlp::new(&[1, 0, 1], 0).is_err());
    }

    #[test]
    fn forward_zero_net_is_zero() {
        let mut net = Mlp::new(&[1, 4, 1], 0).unwrap();
        for w in &mut net.weights {
            w.fill(0.0);
        }
        for b in &mut net.biases {
            b.fill(0.0);
        }
        assert_eq!(net.forward(3.7), 0.0);
        assert_eq!(net.forward(-123.0), 0.0);
    }

    #[test]
    fn forward_single_unit_relu() {
        let net = unit_net(1.0, 0.0, 1.0);
        assert_eq!(net.forward(-2.0), 0.0);
        assert_eq!(net.forward(3.0), 3.0);
    }

    #[test]
    fn backward_by_hand() {
        // w=1, b=0, beta=2 at x=3: d out/d beta = relu(3) = 3, d out/d w = 2*3.
        let net = unit_net(1.0, 0.0, 2.0);
        let mut cache = ForwardCache::new(&net);
        let y = net.forward_cached(3.0, &mut cache);
        assert_eq!(y, 6.0);
        let grads = net.backward(&cache, 1.0).unwrap();
        assert_eq!(grads.d_weights[1][0], 3.0);
        assert_eq!(grads.d_weights[0][0], 6.0);
        assert_eq!(grads.d_biases[0][0], 2.0);
        assert_eq!(grads.d_biases[1][0], 1.0);
    }

    #[test]
    fn backward_zero_upstream_gives_zero_grads() {
        let net = Mlp::new(&[1, 5, 5, 1], 9).unwrap();
        let mut cache = ForwardCache::new(&net);
        net.forward_cached(0.41, &mut cache);
        let grads = net.backward(&cache, 0.0).unwrap();
        assert!(grads.d_weights.iter().flatten().all(|&g| g == 0.0));
        assert!(grads.d_biases.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let a = Mlp::new(&[1, 4, 1], 0).unwrap();
        let b = Mlp::new(&[1, 6, 1], 0).unwrap();
        let mut cache = ForwardCache::new(&a);
        a.forward_cached(0.5, &mut cache);
        assert_eq!(b.backward(&cache, 1.0).unwrap_err(), NeuralError::CacheMismatch);
    }

    /// Central finite differences with h = 1e-6 * max(1, |theta|).
    fn numeric_grad(net: &mut Mlp, layer: usize, idx: usize, bias: bool, x: f64) -> f64 {
        let read = |n: &Mlp| if bias { n.biases[layer][idx] } else { n.weights[layer][idx] };
        let orig = read(net);
        let h = 1e-6 * orig.abs().max(1.0);
        let write = |n: &mut Mlp, v: f64| {
            if bias {
                n.biases[layer][idx] = v;
            } else {
                n.weights[layer][idx] = v;
            }
        };
        write(net, orig + h);
        let up = net.forward(x);
        write(net, orig - h);
        let down = net.forward(x);
        write(net, orig);
        (up - down) / (2.0 * h)
    }

    fn any_preactivation_near_kink(net: &Mlp, x: f64) -> bool {
        let mut cache = ForwardCache::new(net);
        net.forward_cached(x, &mut cache);
        cache.pre.iter().flatten().any(|z| z.abs() < 1e-4)
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = SplitMix64::new(2024);
        let mut checked = 0;
        for trial in 0..100u64 {
            let depth = 1 + (trial % 3) as usize;
            let width = 2 + (trial % 7) as usize;
            let mut net = Mlp::new(&Mlp::layer_dims(width, depth), trial).unwrap();
            // Resample the input while any pre-activation sits near the kink.
            let mut x = rng.next_range(-2.0, 2.0);
            let mut tries = 0;
            while any_preactivation_near_kink(&net, x) && tries < 50 {
                x = rng.next_range(-2.0, 2.0);
                tries += 1;
            }
            if tries == 50 {
                continue;
            }
            let mut cache = ForwardCache::new(&net);
            net.forward_cached(x, &mut cache);
            let grads = net.backward(&cache, 1.0).unwrap();
            // The absolute escape covers gradients below the resolution of
            // the central difference itself (cancellation noise ~1e-9).
            let close = |num: f64, ana: f64| {
                let diff = (num - ana).abs();
                diff < 1e-8 || diff / num.abs().max(ana.abs()) < 1e-5
            };
            for l in 0..net.num_layers() {
                for i in 0..net.weights[l].len() {
                    let num = numeric_grad(&mut net, l, i, false, x);
                    let ana = grads.d_weights[l][i];
                    assert!(close(num, ana), "trial {trial} w[{l}][{i}]: ana {ana} vs num {num}");
                    checked += 1;
                }
                for i in 0..net.biases[l].len() {
                    let num = numeric_grad(&mut net, l, i, true, x);
                    let ana = grads.d_biases[l][i];
                    assert!(close(num, ana), "trial {trial} b[{l}][{i}]: ana {ana} vs num {num}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000, "too few parameters exercised: {checked}");
    }

    #[test]
    fn sgd_plain_step() {
        let mut net = unit_net(1.0, 0.0, 1.0);
        let mut grads = MlpGrads::zeros_like(&net);
        grads.d_weights[0][0] = 1.0;
        let mut opt = Sgd::new(&net, 0.1, 0.0);
        opt.step(&mut net, &grads).unwrap();
        assert!((net.weights[0][0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn sgd_zero_gradient_is_identity() {
        let mut net = Mlp::new(&[1, 4, 1], 3).unwrap();
        let before = net.clone();
        let grads = MlpGrads::zeros_like(&net);
        Sgd::new(&net, 0.5, 0.9).step(&mut net, &grads).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn sgd_momentum_two_steps_by_hand() {
        // v1 = 1, theta = -0.1; v2 = 1.9, theta = -0.1 - 0.19 = -0.29.
        let mut net = unit_net(0.0, 0.0, 0.0);
        let mut grads = MlpGrads::zeros_like(&net);
        grads.d_weights[0][0] = 1.0;
        let mut opt = Sgd::new(&net, 0.1, 0.9);
        opt.step(&mut net, &grads).unwrap();
        opt.step(&mut net, &grads).unwrap();
        assert!((net.weights[0][0] + 0.29).abs() < 1e-15, "theta = {}", net.weights[0][0]);
    }

    #[test]
    fn sgd_rejects_non_finite_gradients() {
        let mut net = unit_net(1.0, 0.0, 1.0);
        let mut grads = MlpGrads::zeros_like(&net);
        grads.d_weights[0][0] = f64::NAN;
        let err = Sgd::new(&net, 0.1, 0.0).step(&mut net, &grads).unwrap_err();
        assert_eq!(err, NeuralError::NonFinite);
    }
}
