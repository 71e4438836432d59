//! Frame-wise regression networks mapping posteriorgram frames to speech
//! parameter frames. Two architectures: a deep feed-forward net and a
//! bidirectional LSTM stack, both with hand-written backprop (verified
//! against finite differences) and a deterministic Adam trainer.

mod dense;
pub mod gradcheck;
mod lstm;
mod train;

pub mod checkpoint;

pub use dense::Dense;
pub use lstm::{BiLstm, LstmDir};
pub(crate) use train::run_training;
pub use train::{train, AdamParams, AdamState, TrainHyper};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{ParamLayout, SpeechParams};
use crate::ppg::{context_stack, MultiPpg};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    FeedForward,
    BiRecurrent,
}

/// Architecture description. Hidden defaults follow the two reference
/// systems: 1024x6 feed-forward and 256x4 bidirectional-recurrent.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NetworkConfig {
    pub kind: NetworkKind,
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn feedforward(input_dim: usize, output_dim: usize, seed: u64) -> Self {
        NetworkConfig {
            kind: NetworkKind::FeedForward,
            input_dim,
            output_dim,
            hidden: vec![1024; 6],
            seed,
        }
    }

    pub fn birecurrent(input_dim: usize, output_dim: usize, seed: u64) -> Self {
        NetworkConfig {
            kind: NetworkKind::BiRecurrent,
            input_dim,
            output_dim,
            hidden: vec![256; 4],
            seed,
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::InvalidConfig("hidden layer list is empty".into()));
        }
        if self.input_dim == 0
            || self.output_dim == 0
            || self.hidden.iter().any(|&h| h == 0)
        {
            return Err(Error::InvalidConfig("zero-sized layer".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hidden {
    Dense(Dense),
    BiLstm(BiLstm),
}


/// A trained (or trainable) regression network. The same struct doubles
/// as the gradient container: `zeros_like` gives a network-shaped
/// accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub hidden: Vec<Hidden>,
    pub output: Dense,
}

enum LayerCache {
    Dense { out: Array2<f64> },
    BiLstm(lstm::BiLstmCache),
}

/// Activations kept from a forward pass for backprop.
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>, // input to each hidden layer, then to output
    layers: Vec<LayerCache>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

/// Seeded Glorot-uniform initialization; biases start at zero.
pub fn init_network(cfg: &NetworkConfig) -> Result<Network> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut glorot = |m: &mut Array2<f64>| {
        let bound = (6.0 / (m.nrows() + m.ncols()) as f64).sqrt();
        for v in m.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
    };
    let mut hidden = Vec::with_capacity(cfg.hidden.len());
    let mut in_dim = cfg.input_dim;
    for &h in &cfg.hidden {
        match cfg.kind {
            NetworkKind::FeedForward => {
                let mut layer = Dense::zeros(h, in_dim);
                glorot(&mut layer.w);
                hidden.push(Hidden::Dense(layer));
                in_dim = h;
            }
            NetworkKind::BiRecurrent => {
                let mut layer = BiLstm::zeros(h, in_dim);
                glorot(&mut layer.fwd.w_ih);
                glorot(&mut layer.fwd.w_hh);
                glorot(&mut layer.bwd.w_ih);
                glorot(&mut layer.bwd.w_hh);
                hidden.push(Hidden::BiLstm(layer));
                in_dim = 2 * h;
            }
        }
    }
    let mut output = Dense::zeros(cfg.output_dim, in_dim);
    glorot(&mut output.w);
    Ok(Network {
        config: cfg.clone(),
        hidden,
        output,
    })
}

/// All-zero network of the configured shape.
pub fn zero_network(cfg: &NetworkConfig) -> Result<Network> {
    cfg.validate()?;
    let mut hidden = Vec::with_capacity(cfg.hidden.len());
    let mut in_dim = cfg.input_dim;
    for &h in &cfg.hidden {
        match cfg.kind {
            NetworkKind::FeedForward => {
                hidden.push(Hidden::Dense(Dense::zeros(h, in_dim)));
                in_dim = h;
            }
            NetworkKind::BiRecurrent => {
                hidden.push(Hidden::BiLstm(BiLstm::zeros(h, in_dim)));
                in_dim = 2 * h;
            }
        }
    }
    Ok(Network {
        config: cfg.clone(),
        hidden,
        output: Dense::zeros(cfg.output_dim, in_dim),
    })
}

/// Total parameter count implied by a config, without allocating it.
pub fn param_count(cfg: &NetworkConfig) -> usize {
    let mut total = 0;
    let mut in_dim = cfg.input_dim;
    for &h in &cfg.hidden {
        match cfg.kind {
            NetworkKind::FeedForward => {
                total += h * in_dim + h;
                in_dim = h;
            }
            NetworkKind::BiRecurrent => {
                total += 2 * (4 * h * in_dim + 4 * h * h + 4 * h);
                in_dim = 2 * h;
            }
        }
    }
    total + cfg.output_dim * in_dim + cfg.output_dim
}

impl Network {
    pub fn zeros_like(&self) -> Network {
        let mut z = self.clone();
        for s in z.param_slices_mut() {
            for v in s {
                *v = 0.0;
            }
        }
        z
    }

    /// All parameter blocks in a fixed declaration order (layer by layer,
    /// weights then biases). Serialization, Adam, and the checks iterate
    /// this order.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.hidden {
            match layer {
                Hidden::Dense(d) => {
                    out.push(d.w.as_slice().unwrap());
                    out.push(d.b.as_slice().unwrap());
                }
                Hidden::BiLstm(l) => {
                    for dir in [&l.fwd, &l.bwd] {
                        out.push(dir.w_ih.as_slice().unwrap());
                        out.push(dir.w_hh.as_slice().unwrap());
                        out.push(dir.b.as_slice().unwrap());
                    }
                }
            }
        }
        out.push(self.output.w.as_slice().unwrap());
        out.push(self.output.b.as_slice().unwrap());
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.hidden {
            match layer {
                Hidden::Dense(d) => {
                    out.push(d.w.as_slice_mut().unwrap());
                    out.push(d.b.as_slice_mut().unwrap());
                }
                Hidden::BiLstm(l) => {
                    for dir in [&mut l.fwd, &mut l.bwd] {
                        out.push(dir.w_ih.as_slice_mut().unwrap());
                        out.push(dir.w_hh.as_slice_mut().unwrap());
                        out.push(dir.b.as_slice_mut().unwrap());
                    }
                }
            }
        }
        out.push(self.output.w.as_slice_mut().unwrap());
        out.push(self.output.b.as_slice_mut().unwrap());
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.param_slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, inputs: &Array2<f64>) -> Result<()> {
        if inputs.ncols() != self.config.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "input width {} vs network input_dim {}",
                inputs.ncols(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Forward pass keeping every activation for backprop.
    pub fn forward_cached(&self, inputs: &Array2<f64>) -> Result<ForwardCache> {
        self.check_input(inputs)?;
        let mut x = inputs.to_owned();
        let mut cache_inputs = Vec::with_capacity(self.hidden.len() + 1);
        let mut layers = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            cache_inputs.push(x.clone());
            match layer {
                Hidden::Dense(d) => {
                    let out = d.forward_tanh(&x);
                    x = out.clone();
                    layers.push(LayerCache::Dense { out });
                }
                Hidden::BiLstm(l) => {
                    let (out, c) = l.forward(&x);
                    x = out;
                    layers.push(LayerCache::BiLstm(c));
                }
            }
        }
        cache_inputs.push(x.clone());
        let output = self.output.affine(&x);
        Ok(ForwardCache {
            inputs: cache_inputs,
            layers,
            output,
        })
    }

    /// Plain forward pass. For the feed-forward kind every row is
    /// independent; for the recurrent kind each output row depends on the
    /// entire sequence.
    pub fn forward(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(inputs)?.output)
    }

    /// Gradients for an already-computed forward pass given the loss
    /// gradient at the output.
    pub fn backprop(&self, cache: &ForwardCache, d_output: &Array2<f64>) -> Network {
        self.backprop_with_input(cache, d_output).0
    }

    /// Like `backprop`, but also returns the gradient with respect to the
    /// network input (needed when another network's loss flows through
    /// this one).
    pub fn backprop_with_input(
        &self,
        cache: &ForwardCache,
        d_output: &Array2<f64>,
    ) -> (Network, Array2<f64>) {
        let mut grads = self.zeros_like();
        let mut d = self
            .output
            .backward_linear(&cache.inputs[self.hidden.len()], d_output, &mut grads.output);
        for idx in (0..self.hidden.len()).rev() {
            let input = &cache.inputs[idx];
            d = match (&self.hidden[idx], &cache.layers[idx], &mut grads.hidden[idx]) {
                (Hidden::Dense(layer), LayerCache::Dense { out }, Hidden::Dense(g)) => {
                    layer.backward_tanh(input, out, &d, g)
                }
                (Hidden::BiLstm(layer), LayerCache::BiLstm(c), Hidden::BiLstm(g)) => {
                    layer.backward(input, c, &d, g)
                }
                _ => unreachable!("cache shape follows network shape"),
            };
        }
        (grads, d)
    }
}

/// Mean squared error over all frames and dimensions.
pub fn loss_mse(pred: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::DimensionMismatch(format!(
            "pred {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n as f64)
}

/// Analytic gradients of `loss_mse` w.r.t. every weight, plus the loss.
pub fn backward(net: &Network, inputs: &Array2<f64>, target: &Array2<f64>) -> Result<(Network, f64)> {
    let cache = net.forward_cached(inputs)?;
    let loss = loss_mse(&cache.output, target)?;
    let n = cache.output.len().max(1) as f64;
    let d_output = (&cache.output - target) * (2.0 / n);
    Ok((net.backprop(&cache, &d_output), loss))
}

/// Per-dimension z-normalization statistics for the input and output
/// streams, computed on the training split only.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub input_mean: Array1<f64>,
    pub input_std: Array1<f64>,
    pub output_mean: Array1<f64>,
    pub output_std: Array1<f64>,
}

const STD_FLOOR: f64 = 1e-8;

impl FeatureStats {
    pub fn compute(pairs: &[(Array2<f64>, Array2<f64>)]) -> Result<FeatureStats> {
        if pairs.is_empty() || pairs.iter().all(|(x, _)| x.nrows() == 0) {
            return Err(Error::EmptyInput("no frames to compute stats from".into()));
        }
        let (in_dim, out_dim) = (pairs[0].0.ncols(), pairs[0].1.ncols());
        let (input_mean, input_std) = stream_stats(pairs.iter().map(|(x, _)| x), in_dim);
        let (output_mean, output_std) = stream_stats(pairs.iter().map(|(_, y)| y), out_dim);
        Ok(FeatureStats {
            input_mean,
            input_std,
            output_mean,
            output_std,
        })
    }

    pub fn normalize_input(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.input_mean) / &self.input_std
    }

    pub fn normalize_output(&self, y: &Array2<f64>) -> Array2<f64> {
        (y - &self.output_mean) / &self.output_std
    }

    pub fn denormalize_output(&self, y: &Array2<f64>) -> Array2<f64> {
        y * &self.output_std + &self.output_mean
    }
}

fn stream_stats<'a>(
    mats: impl Iterator<Item = &'a Array2<f64>> + Clone,
    dim: usize,
) -> (Array1<f64>, Array1<f64>) {
    let mut sum = Array1::<f64>::zeros(dim);
    let mut count = 0usize;
    for m in mats.clone() {
        sum += &m.sum_axis(Axis(0));
        count += m.nrows();
    }
    let mean = sum / count.max(1) as f64;
    let mut sq = Array1::<f64>::zeros(dim);
    for m in mats {
        for row in m.rows() {
            let d = &row.to_owned() - &mean;
            sq += &(&d * &d);
        }
    }
    let std = (sq / count.max(1) as f64).mapv(|v| v.sqrt().max(STD_FLOOR));
    (mean, std)
}

/// Run a multilingual posteriorgram through the network and unpack the
/// de-normalized output into parameter streams.
pub fn predict_params(
    net: &Network,
    ppg: &MultiPpg,
    stats: &FeatureStats,
    layout: &ParamLayout,
    context_width: usize,
) -> Result<SpeechParams> {
    let stacked = context_stack(ppg, context_width);
    if stacked.ncols() != net.config.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "stacked ppg width {} vs network input_dim {}",
            stacked.ncols(),
            net.config.input_dim
        )));
    }
    if net.config.output_dim != layout.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "network output_dim {} vs layout {}",
            net.config.output_dim,
            layout.total_dim()
        )));
    }
    let norm = stats.normalize_input(&stacked);
    let pred = net.forward(&norm)?;
    let denorm = stats.denormalize_output(&pred);
    SpeechParams::from_matrix(&denorm, layout)
}
