//! Speech parameter analysis: framing, F0 with voicing, mel-cepstral
//! envelope, band aperiodicity, and the continuous log-F0 encoding.
//!
//! All streams are produced at a fixed frame shift (10 ms by default) and
//! share one frame count per waveform.

mod bap;
mod f0;
mod mcep;

pub use bap::extract_bap;
pub use f0::estimate_f0;
pub use mcep::{extract_mcep, FrameSpectrum, MelWarp};

use ndarray::{Array1, Array2};

use crate::{Error, Result};

/// Mono audio at a known sample rate, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Waveform {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Analysis-side parameters. The frame shift must stay at 10 ms when the
/// parameter streams are paired with 10 ms posteriorgram files.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub sample_rate: u32,
    pub frame_shift_ms: f64,
    pub frame_length_ms: f64,
    pub mcep_order: usize,
    pub warp_alpha: f64,
    pub f0_floor: f64,
    pub f0_ceil: f64,
    pub bap_bands: usize,
    pub fft_size: usize,
    /// Floor applied to the amplitude spectrum before the log.
    pub spectral_floor: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            sample_rate: 16000,
            frame_shift_ms: 10.0,
            frame_length_ms: 25.0,
            mcep_order: 39,
            warp_alpha: 0.42,
            f0_floor: 60.0,
            f0_ceil: 500.0,
            bap_bands: 1,
            fft_size: 1024,
            spectral_floor: 1e-10,
        }
    }
}

impl AnalysisConfig {
    pub fn shift_samples(&self) -> usize {
        (self.frame_shift_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn frame_samples(&self) -> usize {
        (self.frame_length_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be > 0".into()));
        }
        if self.frame_shift_ms <= 0.0 || self.frame_length_ms <= 0.0 {
            return Err(Error::InvalidConfig(
                "frame shift and length must be > 0".into(),
            ));
        }
        if !(self.warp_alpha > 0.0 && self.warp_alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "warp_alpha must lie in (0, 1), got {}",
                self.warp_alpha
            )));
        }
        if self.f0_floor <= 0.0 || self.f0_floor >= self.f0_ceil {
            return Err(Error::InvalidConfig(format!(
                "need 0 < f0_floor < f0_ceil, got {} / {}",
                self.f0_floor, self.f0_ceil
            )));
        }
        if self.bap_bands == 0 {
            return Err(Error::InvalidConfig("bap_bands must be >= 1".into()));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 * self.frame_samples() {
            return Err(Error::InvalidConfig(format!(
                "fft_size must be a power of two >= 2x frame length ({} samples)",
                self.frame_samples()
            )));
        }
        if self.spectral_floor <= 0.0 {
            return Err(Error::InvalidConfig("spectral_floor must be > 0".into()));
        }
        Ok(())
    }
}

/// The three parameter streams plus voicing, frame-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechParams {
    /// T x (mcep_order + 1), cepstra of the log amplitude envelope.
    pub mcep: Array2<f64>,
    /// Natural log F0, interpolated through unvoiced stretches.
    pub lf0: Array1<f64>,
    pub vuv: Vec<bool>,
    /// T x bands, aperiodic-to-total energy ratio in dB (<= 0).
    pub bap: Array2<f64>,
    pub frame_shift_ms: f64,
}

impl SpeechParams {
    pub fn frames(&self) -> usize {
        self.vuv.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.frames();
        if self.mcep.nrows() != t || self.lf0.len() != t || self.bap.nrows() != t {
            return Err(Error::FrameCountMismatch(format!(
                "streams disagree: mcep {} lf0 {} vuv {} bap {}",
                self.mcep.nrows(),
                self.lf0.len(),
                t,
                self.bap.nrows()
            )));
        }
        if self.mcep.iter().any(|v| !v.is_finite())
            || self.lf0.iter().any(|v| !v.is_finite())
            || self.bap.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidValue("non-finite parameter value".into()));
        }
        if self.bap.iter().any(|&v| v > 1e-9) {
            return Err(Error::InvalidValue("bap above 0 dB".into()));
        }
        Ok(())
    }

    /// Truncate all streams to the first `t` frames.
    pub fn truncated(&self, t: usize) -> SpeechParams {
        SpeechParams {
            mcep: self.mcep.slice(ndarray::s![..t, ..]).to_owned(),
            lf0: self.lf0.slice(ndarray::s![..t]).to_owned(),
            vuv: self.vuv[..t].to_vec(),
            bap: self.bap.slice(ndarray::s![..t, ..]).to_owned(),
            frame_shift_ms: self.frame_shift_ms,
        }
    }
}

/// How a SpeechParams frame maps onto one regression target vector:
/// `[mcep | lf0 | vuv logit | bap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub mcep_dim: usize,
    pub bap_dim: usize,
    pub f0_floor: f64,
    pub f0_ceil: f64,
    pub frame_shift_ms: f64,
}

impl ParamLayout {
    pub fn from_config(cfg: &AnalysisConfig) -> Self {
        ParamLayout {
            mcep_dim: cfg.mcep_order + 1,
            bap_dim: cfg.bap_bands,
            f0_floor: cfg.f0_floor,
            f0_ceil: cfg.f0_ceil,
            frame_shift_ms: cfg.frame_shift_ms,
        }
    }

    pub fn total_dim(&self) -> usize {
        self.mcep_dim + 2 + self.bap_dim
    }
}

impl SpeechParams {
    /// Flatten into the joint target matrix. Voicing becomes a +/-1 logit
    /// target in the slot between lf0 and bap.
    pub fn to_matrix(&self, layout: &ParamLayout) -> Result<Array2<f64>> {
        if self.mcep.ncols() != layout.mcep_dim || self.bap.ncols() != layout.bap_dim {
            return Err(Error::DimensionMismatch(format!(
                "params {}x{} vs layout {}+{}",
                self.mcep.ncols(),
                self.bap.ncols(),
                layout.mcep_dim,
                layout.bap_dim
            )));
        }
        let t = self.frames();
        let mut m = Array2::zeros((t, layout.total_dim()));
        for i in 0..t {
            for d in 0..layout.mcep_dim {
                m[[i, d]] = self.mcep[[i, d]];
            }
            m[[i, layout.mcep_dim]] = self.lf0[i];
            m[[i, layout.mcep_dim + 1]] = if self.vuv[i] { 1.0 } else { -1.0 };
            for d in 0..layout.bap_dim {
                m[[i, layout.mcep_dim + 2 + d]] = self.bap[[i, d]];
            }
        }
        Ok(m)
    }

    /// Rebuild parameter streams from a predicted joint matrix.
    ///
    /// The voicing slot is a logit: strictly positive means voiced. BAP is
    /// clamped to <= 0 dB and voiced lf0 into [ln f0_floor, ln f0_ceil].
    pub fn from_matrix(m: &Array2<f64>, layout: &ParamLayout) -> Result<SpeechParams> {
        if m.ncols() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix width {} vs layout {}",
                m.ncols(),
                layout.total_dim()
            )));
        }
        let t = m.nrows();
        let mut mcep = Array2::zeros((t, layout.mcep_dim));
        let mut lf0 = Array1::zeros(t);
        let mut vuv = vec![false; t];
        let mut bap = Array2::zeros((t, layout.bap_dim));
        for i in 0..t {
            for d in 0..layout.mcep_dim {
                mcep[[i, d]] = m[[i, d]];
            }
            vuv[i] = m[[i, layout.mcep_dim + 1]] > 0.0;
            let raw_lf0 = m[[i, layout.mcep_dim]];
            lf0[i] = if vuv[i] {
                raw_lf0.clamp(layout.f0_floor.ln(), layout.f0_ceil.ln())
            } else {
                raw_lf0
            };
            for d in 0..layout.bap_dim {
                bap[[i, d]] = m[[i, layout.mcep_dim + 2 + d]].min(0.0);
            }
        }
        Ok(SpeechParams {
            mcep,
            lf0,
            vuv,
            bap,
            frame_shift_ms: layout.frame_shift_ms,
        })
    }
}

/// Frame count for a signal: floor(len / shift), except that anything
/// shorter than one shift still yields a single zero-padded frame.
pub fn frame_count(len: usize, cfg: &AnalysisConfig) -> usize {
    let shift = cfg.shift_samples();
    (len / shift).max(1)
}

/// Cut the signal into Hann-windowed frames of `frame_length_ms`, one per
/// shift, zero-padding past the end of the signal.
pub fn frame_signal(wave: &Waveform, cfg: &AnalysisConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if wave.is_empty() {
        return Err(Error::EmptyInput("cannot frame an empty waveform".into()));
    }
    let shift = cfg.shift_samples();
    let flen = cfg.frame_samples();
    let t_count = frame_count(wave.len(), cfg);
    let window = hann_window(flen);
    let mut frames = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let start = t * shift;
        let mut frame = vec![0.0; flen];
        for (i, f) in frame.iter_mut().enumerate() {
            if let Some(&s) = wave.samples.get(start + i) {
                *f = s * window[i];
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Symmetric Hann window.
pub(crate) fn hann_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| {
            let x = i as f64 / (len - 1) as f64;
            0.5 - 0.5 * (2.0 * std::f64::consts::PI * x).cos()
        })
        .collect()
}

/// Continuous log-F0: ln f0 on voiced frames, linear interpolation across
/// unvoiced gaps, edges held at the nearest voiced value. A fully unvoiced
/// track encodes ln(f0_floor) everywhere.
pub fn encode_lf0(f0: &[f64], vuv: &[bool], f0_floor: f64) -> Result<Array1<f64>> {
    if f0.len() != vuv.len() {
        return Err(Error::FrameCountMismatch(format!(
            "f0 {} vs vuv {}",
            f0.len(),
            vuv.len()
        )));
    }
    let t = f0.len();
    for i in 0..t {
        if vuv[i] && f0[i] <= 0.0 {
            return Err(Error::InvalidF0(format!(
                "voiced frame {} has f0 {}",
                i, f0[i]
            )));
        }
    }
    let voiced: Vec<usize> = (0..t).filter(|&i| vuv[i]).collect();
    let mut lf0 = Array1::zeros(t);
    if voiced.is_empty() {
        lf0.fill(f0_floor.ln());
        return Ok(lf0);
    }
    for &i in &voiced {
        lf0[i] = f0[i].ln();
    }
    // Leading and trailing gaps hold the nearest voiced value.
    let first = voiced[0];
    let last = *voiced.last().unwrap();
    for i in 0..first {
        lf0[i] = lf0[first];
    }
    for i in (last + 1)..t {
        lf0[i] = lf0[last];
    }
    // Interior gaps interpolate linearly between the flanking voiced frames.
    for w in voiced.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a + 1 {
            let va = lf0[a];
            let vb = lf0[b];
            let span = (b - a) as f64;
            for i in (a + 1)..b {
                let frac = (i - a) as f64 / span;
                lf0[i] = va + frac * (vb - va);
            }
        }
    }
    Ok(lf0)
}

/// Full analysis: all parameter streams, frame-aligned to `frame_signal`.
pub fn analyze(wave: &Waveform, cfg: &AnalysisConfig) -> Result<SpeechParams> {
    cfg.validate()?;
    if wave.is_empty() {
        return Err(Error::EmptyInput("cannot analyze an empty waveform".into()));
    }
    let (f0, vuv) = estimate_f0(wave, cfg)?;
    let mcep = extract_mcep(wave, cfg)?;
    let bap = extract_bap(wave, &f0, &vuv, cfg)?;
    let lf0 = encode_lf0(&f0, &vuv, cfg.f0_floor)?;
    Ok(SpeechParams {
        mcep,
        lf0,
        vuv,
        bap,
        frame_shift_ms: cfg.frame_shift_ms,
    })
}

#[cfg(test)]
mod tests;
