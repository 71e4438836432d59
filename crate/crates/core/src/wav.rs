//! RIFF/WAVE I/O, restricted to mono 16-bit PCM. Resampling is out of
//! scope: a rate that disagrees with the expected one is an error.

use std::path::Path;

use crate::features::Waveform;
use crate::{Error, Result};

/// Read a mono PCM16 file and normalize samples into [-1, 1].
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let reader = hound::WavReader::open(path)
        .map_err(|e| Error::IoError(format!("{}: {}", path.display(), e)))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::InvalidValue(format!(
            "{}: expected mono, got {} channels",
            path.display(),
            spec.channels
        )));
    }
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::InvalidValue(format!(
            "{}: expected 16-bit PCM",
            path.display()
        )));
    }
    let samples: std::result::Result<Vec<i16>, _> = reader.into_samples::<i16>().collect();
    let samples = samples.map_err(|e| Error::ParseError(format!("{}: {}", path.display(), e)))?;
    Ok(Waveform::new(
        samples.iter().map(|&s| s as f64 / 32768.0).collect(),
        spec.sample_rate,
    ))
}

/// Like `read_wav`, but also enforces the expected sample rate.
pub fn read_wav_expecting(path: &Path, sample_rate: u32) -> Result<Waveform> {
    let wave = read_wav(path)?;
    if wave.sample_rate != sample_rate {
        return Err(Error::InvalidValue(format!(
            "{}: sample rate {} does not match configured {}",
            path.display(),
            wave.sample_rate,
            sample_rate
        )));
    }
    Ok(wave)
}

/// Write mono PCM16. Samples are clamped to [-1, 1] at quantization.
pub fn write_wav(path: &Path, wave: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::IoError(format!("{}: {}", path.display(), e)))?;
    for &s in &wave.samples {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer
            .write_sample(q)
            .map_err(|e| Error::IoError(e.to_string()))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::IoError(e.to_string()))?;
    Ok(())
}
