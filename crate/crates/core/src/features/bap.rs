//! Band aperiodicity: per-band aperiodic-to-total energy ratio in dB,
//! estimated from the normalized autocorrelation at the pitch lag.

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use super::{frame_count, AnalysisConfig, Waveform};
use crate::{Error, Result};

// Ratio floor keeps the dB value finite for near-perfectly periodic frames.
const RATIO_FLOOR: f64 = 1e-6;

/// T x bands matrix of aperiodicity values in dB (<= 0). Unvoiced frames
/// are fully aperiodic (0 dB) by definition.
pub fn extract_bap(
    wave: &Waveform,
    f0: &[f64],
    vuv: &[bool],
    cfg: &AnalysisConfig,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    if wave.is_empty() {
        return Err(Error::EmptyInput("empty waveform".into()));
    }
    let t_count = frame_count(wave.len(), cfg);
    if f0.len() != t_count || vuv.len() != t_count {
        return Err(Error::FrameCountMismatch(format!(
            "f0/vuv length {}/{} vs frame count {}",
            f0.len(),
            vuv.len(),
            t_count
        )));
    }
    let sr = cfg.sample_rate as f64;
    let shift = cfg.shift_samples();
    let frame_center = cfg.frame_samples() / 2;
    let win = 2 * (sr / cfg.f0_floor).ceil() as usize;
    let bands = cfg.bap_bands;

    let fft_len = win.next_power_of_two() * 2;
    let fft = FftPlanner::new().plan_fft_forward(fft_len);
    let ifft = FftPlanner::new().plan_fft_inverse(fft_len);

    let mut bap = Array2::zeros((t_count, bands));
    let mut seg = vec![0.0; win];
    for t in 0..t_count {
        if !vuv[t] {
            // 0 dB rows: already zero.
            continue;
        }
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
        let lag = (sr / f0[t]).round() as usize;
        for b in 0..bands {
            let band_seg = if bands == 1 {
                seg.clone()
            } else {
                band_limit(&seg, b, bands, fft_len, fft.as_ref(), ifft.as_ref())
            };
            let r = periodicity_at(&band_seg, lag);
            let ratio = (1.0 - r.max(0.0)).clamp(RATIO_FLOOR, 1.0);
            bap[[t, b]] = (10.0 * ratio.log10()).min(0.0);
        }
    }
    Ok(bap)
}

/// Zero all spectrum bins outside band `b` of `bands` equal divisions of
/// [0, Nyquist] and transform back.
fn band_limit(
    seg: &[f64],
    b: usize,
    bands: usize,
    fft_len: usize,
    fft: &dyn rustfft::Fft<f64>,
    ifft: &dyn rustfft::Fft<f64>,
) -> Vec<f64> {
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    for (i, &s) in seg.iter().enumerate() {
        buf[i] = Complex::new(s, 0.0);
    }
    fft.process(&mut buf);
    let half = fft_len / 2;
    let lo = b * half / bands;
    let hi = ((b + 1) * half / bands).max(lo + 1);
    for k in 0..=half {
        if k < lo || k >= hi {
            buf[k] = Complex::new(0.0, 0.0);
            if k > 0 && k < half {
                buf[fft_len - k] = Complex::new(0.0, 0.0);
            }
        }
    }
    ifft.process(&mut buf);
    buf[..seg.len()]
        .iter()
        .map(|c| c.re / fft_len as f64)
        .collect()
}

/// Normalized autocorrelation near the given lag (max over lag +/- 2).
fn periodicity_at(seg: &[f64], lag: usize) -> f64 {
    let w = seg.len();
    let mut best: f64 = 0.0;
    for l in lag.saturating_sub(2)..=(lag + 2) {
        if l == 0 || l + 8 >= w {
            continue;
        }
        let overlap = w - l;
        let mut cross = 0.0;
        let mut e0 = 0.0;
        let mut e1 = 0.0;
        for i in 0..overlap {
            cross += seg[i] * seg[i + l];
            e0 += seg[i] * seg[i];
            e1 += seg[i + l] * seg[i + l];
        }
        let denom = (e0 * e1).sqrt();
        if denom > 1e-12 {
            best = best.max(cross / denom);
        }
    }
    best
}
