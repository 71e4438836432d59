//! Deterministic minibatch training with Adam. The same engine backs both
//! plain MSE training and adversarial training: the latter injects an
//! extra output-space gradient per batch through a hook, and injecting
//! nothing leaves the code path bit-for-bit identical to plain training.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss_mse, FeatureStats, Network, NetworkKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub learning_rate: f64,
    /// Rows per step for the feed-forward kind; recurrent training always
    /// steps on whole utterances.
    pub batch_frames: usize,
    pub epochs: usize,
    pub adam: AdamParams,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            learning_rate: 1e-3,
            batch_frames: 256,
            epochs: 30,
            adam: AdamParams::default(),
            patience: 0,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_frames == 0 {
            return Err(Error::InvalidConfig("batch_frames must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig(
                "validation_fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Adam moment estimates shaped like the network they update.
pub struct AdamState {
    m: Network,
    v: Network,
    step: usize,
    params: AdamParams,
}

impl AdamState {
    pub fn new(net: &Network, params: AdamParams) -> Self {
        AdamState {
            m: net.zeros_like(),
            v: net.zeros_like(),
            step: 0,
            params,
        }
    }

    pub fn apply(&mut self, net: &mut Network, grads: &Network, lr: f64) {
        self.step += 1;
        let AdamParams {
            beta1,
            beta2,
            epsilon,
        } = self.params;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let g_slices = grads.param_slices();
        let mut p_slices = net.param_slices_mut();
        let mut m_slices = self.m.param_slices_mut();
        let mut v_slices = self.v.param_slices_mut();
        for b in 0..g_slices.len() {
            let g = g_slices[b];
            let p = &mut p_slices[b];
            let m = &mut m_slices[b];
            let v = &mut v_slices[b];
            for i in 0..g.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}

/// Extra per-batch output gradient, already scaled by its weight.
/// `None` leaves the plain-MSE step untouched.
pub(crate) type BatchHook<'a> =
    &'a mut dyn FnMut(usize, &Array2<f64>) -> Result<Option<Array2<f64>>>;

/// Train on (input, target) utterance pairs.
///
/// Inputs and targets are z-normalized with `stats` (computed by the
/// caller on the training split). Utterance order is reshuffled every
/// epoch from the seeded RNG; the history records one validation MSE per
/// epoch; the returned network is the best-validation checkpoint.
pub fn train(
    net: &Network,
    dataset: &[(Array2<f64>, Array2<f64>)],
    hyper: &TrainHyper,
    stats: &FeatureStats,
) -> Result<(Network, Vec<f64>)> {
    let mut noop = |_epoch: usize, _pred: &Array2<f64>| Ok(None);
    run_training(net, dataset, hyper, stats, &mut noop)
}

pub(crate) fn run_training(
    net: &Network,
    dataset: &[(Array2<f64>, Array2<f64>)],
    hyper: &TrainHyper,
    stats: &FeatureStats,
    batch_hook: BatchHook<'_>,
) -> Result<(Network, Vec<f64>)> {
    hyper.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("training dataset is empty".into()));
    }
    for (x, y) in dataset {
        if x.nrows() != y.nrows() {
            return Err(Error::FrameCountMismatch(format!(
                "pair frames {} vs {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.ncols() != net.config.input_dim || y.ncols() != net.config.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "pair dims {}x{} vs network {}x{}",
                x.ncols(),
                y.ncols(),
                net.config.input_dim,
                net.config.output_dim
            )));
        }
    }

    let normalized: Vec<(Array2<f64>, Array2<f64>)> = dataset
        .iter()
        .map(|(x, y)| (stats.normalize_input(x), stats.normalize_output(y)))
        .collect();

    // Trailing utterances form the validation split; a single-utterance
    // dataset validates on itself.
    let n = normalized.len();
    let n_val = if n >= 2 {
        ((n as f64 * hyper.validation_fraction).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let n_train = n - n_val;
    let train_idx: Vec<usize> = (0..n_train).collect();
    let val_idx: Vec<usize> = if n_val == 0 {
        (0..n).collect()
    } else {
        (n_train..n).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut model = net.clone();
    let mut adam = AdamState::new(&model, hyper.adam);
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut best: Option<(f64, Network, usize)> = None;

    for epoch in 0..hyper.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut rng);
        for &utt in &order {
            let (x, y) = &normalized[utt];
            let t = x.nrows();
            if t == 0 {
                continue;
            }
            let batch = match model.config.kind {
                NetworkKind::FeedForward => hyper.batch_frames.min(t),
                NetworkKind::BiRecurrent => t,
            };
            let mut start = 0;
            while start < t {
                let end = (start + batch).min(t);
                let bx = x.slice(ndarray::s![start..end, ..]).to_owned();
                let by = y.slice(ndarray::s![start..end, ..]).to_owned();
                let cache = model.forward_cached(&bx)?;
                let loss = loss_mse(cache.output(), &by)?;
                if !loss.is_finite() {
                    return Err(Error::DivergenceDetected { epoch, history });
                }
                let scale = 2.0 / cache.output().len().max(1) as f64;
                let mut d_out = (cache.output() - &by) * scale;
                if let Some(extra) = batch_hook(epoch, cache.output())? {
                    d_out += &extra;
                }
                let grads = model.backprop(&cache, &d_out);
                adam.apply(&mut model, &grads, hyper.learning_rate);
                start = end;
            }
        }

        let val_loss = dataset_mse(&model, &normalized, &val_idx)?;
        if !val_loss.is_finite() {
            return Err(Error::DivergenceDetected { epoch, history });
        }
        history.push(val_loss);
        let improved = best.as_ref().map_or(true, |(b, _, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, model.clone(), epoch));
        } else if hyper.patience > 0 {
            let since = epoch - best.as_ref().unwrap().2;
            if since >= hyper.patience {
                break;
            }
        }
    }
    let (_, best_net, _) = best.expect("epochs >= 1 guarantees one entry");
    Ok((best_net, history))
}

/// Frame-weighted MSE over a subset of (already normalized) pairs.
fn dataset_mse(
    net: &Network,
    normalized: &[(Array2<f64>, Array2<f64>)],
    idx: &[usize],
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for &i in idx {
        let (x, y) = &normalized[i];
        if x.nrows() == 0 {
            continue;
        }
        let pred = net.forward(x)?;
        total += loss_mse(&pred, y)? * pred.len() as f64;
        count += pred.len();
    }
    Ok(total / count.max(1) as f64)
}
