//! Autocorrelation F0 tracking with a fixed voicing threshold and a short
//! median filter against octave jumps.

use super::{frame_count, AnalysisConfig, Waveform};
use crate::Result;

const VOICING_THRESHOLD: f64 = 0.3;
const ENERGY_FLOOR: f64 = 1e-9;
const MEDIAN_HALF: usize = 2; // 5-point median

/// Per-frame F0 in Hz plus the voicing decision. Unvoiced frames carry
/// f0 = 0; voiced frames stay inside [f0_floor, f0_ceil].
pub fn estimate_f0(wave: &Waveform, cfg: &AnalysisConfig) -> Result<(Vec<f64>, Vec<bool>)> {
    cfg.validate()?;
    if wave.is_empty() {
        return Err(crate::Error::EmptyInput("empty waveform".into()));
    }
    let sr = cfg.sample_rate as f64;
    let shift = cfg.shift_samples();
    let t_count = frame_count(wave.len(), cfg);

    // The correlation window needs to cover two periods of the lowest pitch.
    let win = 2 * (sr / cfg.f0_floor).ceil() as usize;
    let min_lag = (sr / cfg.f0_ceil).floor().max(2.0) as usize;
    let max_lag = (sr / cfg.f0_floor).ceil() as usize;

    let frame_center = cfg.frame_samples() / 2;

    let mut raw_f0 = vec![0.0; t_count];
    let mut vuv = vec![false; t_count];
    let mut seg = vec![0.0; win];
    for t in 0..t_count {
        let center = t * shift + frame_center;
        let start = center as isize - (win / 2) as isize;
        for (i, s) in seg.iter_mut().enumerate() {
            let idx = start + i as isize;
            *s = if idx >= 0 && (idx as usize) < wave.len() {
                wave.samples[idx as usize]
            } else {
                0.0
            };
        }
        let energy: f64 = seg.iter().map(|x| x * x).sum::<f64>() / win as f64;
        if energy < ENERGY_FLOOR {
            continue;
        }
        if let Some((lag, peak)) = nccf_peak(&seg, min_lag, max_lag) {
            if peak > VOICING_THRESHOLD {
                vuv[t] = true;
                raw_f0[t] = (sr / lag).clamp(cfg.f0_floor, cfg.f0_ceil);
            }
        }
    }

    // Median-smooth voiced stretches; voicing decisions stay untouched.
    let mut f0 = raw_f0.clone();
    for t in 0..t_count {
        if !vuv[t] {
            continue;
        }
        let lo = t.saturating_sub(MEDIAN_HALF);
        let hi = (t + MEDIAN_HALF + 1).min(t_count);
        let mut vals: Vec<f64> = (lo..hi).filter(|&k| vuv[k]).map(|k| raw_f0[k]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        f0[t] = vals[vals.len() / 2];
    }
    Ok((f0, vuv))
}

/// Best normalized cross-correlation peak in the lag range, with parabolic
/// refinement of the lag. A perfectly periodic signal peaks equally at
/// every multiple of its period, so among local maxima within a small
/// tolerance of the global one the shortest lag wins.
fn nccf_peak(seg: &[f64], min_lag: usize, max_lag: usize) -> Option<(f64, f64)> {
    let w = seg.len();
    if max_lag + 2 >= w || min_lag >= max_lag {
        return None;
    }
    // Prefix sums of squared samples for the per-lag normalization terms.
    let mut energy_prefix = vec![0.0; w + 1];
    for i in 0..w {
        energy_prefix[i + 1] = energy_prefix[i] + seg[i] * seg[i];
    }
    let energy = |a: usize, b: usize| energy_prefix[b] - energy_prefix[a];

    let nccf = |lag: usize| -> f64 {
        let overlap = w - lag;
        let mut cross = 0.0;
        for i in 0..overlap {
            cross += seg[i] * seg[i + lag];
        }
        let denom = (energy(0, overlap) * energy(lag, w)).sqrt();
        if denom < 1e-12 {
            0.0
        } else {
            cross / denom
        }
    };

    let r: Vec<f64> = ((min_lag - 1)..=(max_lag + 1)).map(nccf).collect();
    let at = |lag: usize| r[lag - (min_lag - 1)];

    let global_max = r
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !global_max.is_finite() || global_max <= 0.0 {
        return None;
    }
    const OCTAVE_TOLERANCE: f64 = 0.01;
    let mut best_lag = 0;
    for lag in min_lag..=max_lag {
        let r0 = at(lag);
        if r0 >= global_max - OCTAVE_TOLERANCE && r0 >= at(lag - 1) && r0 >= at(lag + 1) {
            best_lag = lag;
            break;
        }
    }
    if best_lag == 0 {
        return None;
    }
    // Parabolic interpolation around the integer peak.
    let (rm, r0, rp) = (at(best_lag - 1), at(best_lag), at(best_lag + 1));
    let denom = rm - 2.0 * r0 + rp;
    let frac = if denom.abs() > 1e-12 {
        (0.5 * (rm - rp) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some((best_lag as f64 + frac, r0))
}
