//! Adversarial training of the parameter generator against a window
//! discriminator. The discriminator classifies fixed-length windows of
//! (normalized) speech-parameter frames as coming from the target corpus
//! or from the generator; the generator's loss gains a non-saturating
//! adversarial term weighted by lambda.
//!
//! Which corpus feeds the discriminator is entirely the caller's choice —
//! the original-language target corpus and a converted multilingual
//! corpus run through the identical code path.

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::neural::{
    init_network, run_training, AdamState, FeatureStats, Network, NetworkConfig, NetworkKind,
    TrainHyper,
};
use crate::{Error, Result};

/// Feed-forward classifier over flattened parameter windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub net: Network,
    pub window_frames: usize,
    pub param_dim: usize,
}

impl Discriminator {
    pub fn new(
        window_frames: usize,
        param_dim: usize,
        hidden: Vec<usize>,
        seed: u64,
    ) -> Result<Self> {
        let cfg = NetworkConfig {
            kind: NetworkKind::FeedForward,
            input_dim: window_frames * param_dim,
            output_dim: 1,
            hidden,
            seed,
        };
        let mut net = init_network(&cfg)?;
        // Zero final layer: an untrained discriminator answers exactly 0.5.
        net.output.w.fill(0.0);
        net.output.b.fill(0.0);
        Ok(Discriminator {
            net,
            window_frames,
            param_dim,
        })
    }

    /// Probability that a window comes from the target corpus.
    pub fn discriminate(&self, window: &Array2<f64>) -> Result<f64> {
        if window.nrows() != self.window_frames || window.ncols() != self.param_dim {
            return Err(Error::DimensionMismatch(format!(
                "window {}x{} vs discriminator {}x{}",
                window.nrows(),
                window.ncols(),
                self.window_frames,
                self.param_dim
            )));
        }
        let row = flatten_window(window);
        let logit = self.net.forward(&row)?[[0, 0]];
        Ok(sigmoid(logit))
    }
}

fn flatten_window(window: &Array2<f64>) -> Array2<f64> {
    let flat: Vec<f64> = window.iter().copied().collect();
    Array2::from_shape_vec((1, flat.len()), flat).expect("window is rectangular")
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        (1.0 + x.exp()).ln()
    }
}

/// Adversarial-training knobs on top of the base trainer settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanHyper {
    /// Weight of the adversarial term in the generator loss.
    pub adversarial_weight: f64,
    pub window_frames: usize,
    /// Discriminator updates per generator step; 0 leaves it untrained.
    pub disc_steps: usize,
    pub disc_hidden: Vec<usize>,
    pub disc_learning_rate: f64,
    pub base: TrainHyper,
}

impl Default for GanHyper {
    fn default() -> Self {
        GanHyper {
            adversarial_weight: 0.1,
            window_frames: 32,
            disc_steps: 1,
            disc_hidden: vec![64, 64],
            disc_learning_rate: 1e-3,
            base: TrainHyper::default(),
        }
    }
}

impl GanHyper {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.adversarial_weight < 0.0 {
            return Err(Error::InvalidConfig("adversarial_weight must be >= 0".into()));
        }
        if self.window_frames == 0 {
            return Err(Error::InvalidConfig("window_frames must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch adversarial training record.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GanEpoch {
    pub mse: f64,
    pub adversarial: f64,
    pub disc_accuracy: f64,
}

/// Uniform window sampling over all (utterance, offset) pairs. Utterances
/// shorter than the window are skipped.
pub fn sample_windows(
    corpus: &[Array2<f64>],
    window_frames: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Array2<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_windows_with_rng(corpus, window_frames, n, &mut rng)
}

fn sample_windows_with_rng(
    corpus: &[Array2<f64>],
    window_frames: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Array2<f64>>> {
    // Cumulative count of valid start offsets across utterances.
    let mut cum = Vec::with_capacity(corpus.len());
    let mut total = 0usize;
    for m in corpus {
        let positions = (m.nrows() + 1).saturating_sub(window_frames);
        total += positions;
        cum.push(total);
    }
    if total == 0 {
        return Err(Error::EmptyInput(format!(
            "no utterance offers a {window_frames}-frame window"
        )));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.gen_range(0..total);
        let utt = cum.partition_point(|&c| c <= r);
        let offset = r - if utt == 0 { 0 } else { cum[utt - 1] };
        out.push(
            corpus[utt]
                .slice(s![offset..offset + window_frames, ..])
                .to_owned(),
        );
    }
    Ok(out)
}

/// One optimization step (or evaluation) of the discriminator on a
/// balanced real/fake batch. Returns (bce loss, correct, total).
fn disc_batch(
    disc: &mut Discriminator,
    adam: Option<&mut AdamState>,
    lr: f64,
    real: &[Array2<f64>],
    fake: &[Array2<f64>],
) -> Result<(f64, usize, usize)> {
    let n = real.len() + fake.len();
    if n == 0 {
        return Ok((0.0, 0, 0));
    }
    let width = disc.window_frames * disc.param_dim;
    let mut rows = Array2::zeros((n, width));
    let mut labels = Array1::zeros(n);
    for (i, w) in real.iter().chain(fake.iter()).enumerate() {
        rows.row_mut(i).assign(&flatten_window(w).row(0));
        labels[i] = if i < real.len() { 1.0 } else { 0.0 };
    }
    let cache = disc.net.forward_cached(&rows)?;
    let logits = cache.output();
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut d_out = Array2::zeros((n, 1));
    for i in 0..n {
        let z = logits[[i, 0]];
        let y = labels[i];
        loss += y * softplus(-z) + (1.0 - y) * softplus(z);
        if (sigmoid(z) > 0.5) == (y > 0.5) {
            correct += 1;
        }
        d_out[[i, 0]] = (sigmoid(z) - y) / n as f64;
    }
    loss /= n as f64;
    if let Some(adam) = adam {
        let grads = disc.net.backprop(&cache, &d_out);
        adam.apply(&mut disc.net, &grads, lr);
    }
    Ok((loss, correct, n))
}

/// Train the generator with an MSE + adversarial objective.
///
/// `gen_corpus` pairs raw network inputs with raw parameter targets;
/// `target_corpus` holds raw parameter matrices for the discriminator's
/// "real" side. With `adversarial_weight` zero the generator path is
/// bit-for-bit plain MSE training under the same seeds.
pub fn gan_train(
    generator: &Network,
    gen_corpus: &[(Array2<f64>, Array2<f64>)],
    target_corpus: &[Array2<f64>],
    hyper: &GanHyper,
    stats: &FeatureStats,
) -> Result<(Network, Discriminator, Vec<GanEpoch>)> {
    hyper.validate()?;
    if target_corpus.is_empty() {
        return Err(Error::EmptyInput("target corpus is empty".into()));
    }
    let param_dim = generator.config.output_dim;
    for m in target_corpus {
        if m.ncols() != param_dim {
            return Err(Error::DimensionMismatch(format!(
                "target corpus width {} vs generator output {}",
                m.ncols(),
                param_dim
            )));
        }
    }
    // The discriminator lives in the generator's normalized output domain.
    let target_norm: Vec<Array2<f64>> = target_corpus
        .iter()
        .map(|m| stats.normalize_output(m))
        .collect();

    let w = hyper.window_frames;
    let mut disc = Discriminator::new(w, param_dim, hyper.disc_hidden.clone(), hyper.base.seed ^ 0x6469_7363)?;
    let mut disc_adam = AdamState::new(&disc.net, hyper.base.adam);
    let mut disc_rng = ChaCha8Rng::seed_from_u64(hyper.base.seed ^ 0x7769_6e64);

    // Per-epoch accumulators filled by the batch hook.
    let mut adv_sums: Vec<(f64, usize)> = vec![(0.0, 0); hyper.base.epochs];
    let mut acc_sums: Vec<(usize, usize)> = vec![(0, 0); hyper.base.epochs];
    let lambda = hyper.adversarial_weight;

    let mut divergence: Option<usize> = None;
    let result = {
        let mut hook = |epoch: usize, pred: &Array2<f64>| -> Result<Option<Array2<f64>>> {
            let t = pred.nrows();
            let n_windows = t / w;
            if n_windows == 0 {
                return Ok(None);
            }
            // Non-overlapping fake windows from this batch's predictions.
            let fake: Vec<Array2<f64>> = (0..n_windows)
                .map(|k| pred.slice(s![k * w..(k + 1) * w, ..]).to_owned())
                .collect();

            for _ in 0..hyper.disc_steps {
                let real = sample_windows_with_rng(&target_norm, w, fake.len(), &mut disc_rng)?;
                let (loss, correct, total) =
                    disc_batch(&mut disc, Some(&mut disc_adam), hyper.disc_learning_rate, &real, &fake)?;
                if !loss.is_finite() {
                    divergence = Some(epoch);
                    return Err(Error::DivergenceDetected {
                        epoch,
                        history: vec![],
                    });
                }
                let (c, n) = acc_sums[epoch];
                acc_sums[epoch] = (c + correct, n + total);
            }
            if hyper.disc_steps == 0 {
                // Untrained discriminator: still record its accuracy.
                let real = sample_windows_with_rng(&target_norm, w, fake.len(), &mut disc_rng)?;
                let (_, correct, total) = disc_batch(&mut disc, None, 0.0, &real, &fake)?;
                let (c, n) = acc_sums[epoch];
                acc_sums[epoch] = (c + correct, n + total);
            }
            if lambda == 0.0 {
                return Ok(None);
            }

            // Non-saturating generator term: -log D(fake), averaged over
            // windows, pushed back through the discriminator input.
            let mut d_pred = Array2::zeros(pred.raw_dim());
            let mut adv_loss = 0.0;
            for (k, window) in fake.iter().enumerate() {
                let row = flatten_window(window);
                let cache = disc.net.forward_cached(&row)?;
                let z = cache.output()[[0, 0]];
                adv_loss += softplus(-z);
                // d(-ln sigma(z))/dz = sigma(z) - 1
                let dz = Array2::from_elem((1, 1), (sigmoid(z) - 1.0) / n_windows as f64);
                let (_, d_in) = disc.net.backprop_with_input(&cache, &dz);
                let d_win = d_in
                    .into_shape_with_order((w, param_dim))
                    .expect("window shape");
                d_pred
                    .slice_mut(s![k * w..(k + 1) * w, ..])
                    .assign(&d_win);
            }
            adv_loss /= n_windows as f64;
            let (s_adv, n_adv) = adv_sums[epoch];
            adv_sums[epoch] = (s_adv + adv_loss, n_adv + 1);
            Ok(Some(d_pred * lambda))
        };
        run_training(generator, gen_corpus, &hyper.base, stats, &mut hook)
    };
    let (net, mse_history) = match result {
        Ok(v) => v,
        Err(Error::DivergenceDetected { epoch, history }) => {
            return Err(Error::DivergenceDetected {
                epoch: divergence.unwrap_or(epoch),
                history,
            })
        }
        Err(e) => return Err(e),
    };

    let history: Vec<GanEpoch> = mse_history
        .iter()
        .enumerate()
        .map(|(e, &mse)| GanEpoch {
            mse,
            adversarial: if adv_sums[e].1 > 0 {
                adv_sums[e].0 / adv_sums[e].1 as f64
            } else {
                0.0
            },
            disc_accuracy: if acc_sums[e].1 > 0 {
                acc_sums[e].0 as f64 / acc_sums[e].1 as f64
            } else {
                0.5
            },
        })
        .collect();
    Ok((net, disc, history))
}

#[cfg(test)]
mod tests;
