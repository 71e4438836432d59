//! Finite-difference gradient oracle. Deliberately computes nothing via
//! the backprop path: each parameter is perturbed and the loss
//! re-evaluated through the ordinary forward pass.

use ndarray::Array2;

use super::{loss_mse, Network};
use crate::Result;

/// Central differences of `loss_mse` w.r.t. every parameter.
pub fn finite_difference_gradients(
    net: &Network,
    inputs: &Array2<f64>,
    target: &Array2<f64>,
    h: f64,
) -> Result<Network> {
    let mut probe = net.clone();
    let mut grads = net.zeros_like();
    let n_blocks = net.param_slices().len();
    for block in 0..n_blocks {
        let len = net.param_slices()[block].len();
        for idx in 0..len {
            let orig = probe.param_slices()[block][idx];
            probe.param_slices_mut()[block][idx] = orig + h;
            let up = loss_mse(&probe.forward(inputs)?, target)?;
            probe.param_slices_mut()[block][idx] = orig - h;
            let down = loss_mse(&probe.forward(inputs)?, target)?;
            probe.param_slices_mut()[block][idx] = orig;
            grads.param_slices_mut()[block][idx] = (up - down) / (2.0 * h);
        }
    }
    Ok(grads)
}

/// Worst-case relative disagreement between two gradient sets. The
/// denominator is floored so that near-zero gradients compare absolutely.
pub fn max_relative_error(analytic: &Network, numeric: &Network) -> f64 {
    let a = analytic.param_slices();
    let b = numeric.param_slices();
    let mut worst = 0.0f64;
    for (sa, sb) in a.iter().zip(b.iter()) {
        for (&x, &y) in sa.iter().zip(sb.iter()) {
            let rel = (x - y).abs() / (x.abs() + y.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    worst
}
