//! Phonetic posteriorgrams: per-language frame-wise activation matrices,
//! their file formats, the multilingual merge, and a deterministic
//! synthetic posterior source standing in for external recognizers.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::features::SpeechParams;
use crate::{Error, Result};

const PPG_MAGIC: &[u8; 4] = b"PPGF";
const PPG_VERSION: u32 = 1;

pub const DEFAULT_ALIGNMENT_SLACK: usize = 2;

/// Source language of a posteriorgram. The canonical column order of the
/// multilingual merge follows the declaration order here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Ja,
    Zh,
    En,
    Synthetic,
}

impl Language {
    pub fn as_str(&self) -> &'static str {
        match self {
            Language::Ja => "ja",
            Language::Zh => "zh",
            Language::En => "en",
            Language::Synthetic => "synthetic",
        }
    }

    pub fn parse(tag: &str) -> Result<Language> {
        match tag {
            "ja" => Ok(Language::Ja),
            "zh" => Ok(Language::Zh),
            "en" => Ok(Language::En),
            "synthetic" => Ok(Language::Synthetic),
            other => Err(Error::ParseError(format!("unknown language tag {other:?}"))),
        }
    }
}

impl std::fmt::Display for Language {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One model's posterior-like activations: T frames by D classes.
/// Loaded values are only required to be finite; simplex rows are
/// guaranteed only for the synthetic oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct PpgMatrix {
    pub values: Array2<f32>,
    pub language: Language,
    pub frame_shift_ms: f64,
    pub source_model_id: String,
}

impl PpgMatrix {
    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// Frame-wise concatenation of per-language posteriorgrams in canonical
/// language order.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPpg {
    pub values: Array2<f32>,
    pub segments: Vec<(Language, usize)>,
}

impl MultiPpg {
    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn languages(&self) -> Vec<Language> {
        self.segments.iter().map(|(l, _)| *l).collect()
    }

    /// Recover the per-language block for one segment.
    pub fn segment(&self, language: Language) -> Option<Array2<f32>> {
        let mut offset = 0;
        for &(lang, dim) in &self.segments {
            if lang == language {
                return Some(
                    self.values
                        .slice(ndarray::s![.., offset..offset + dim])
                        .to_owned(),
                );
            }
            offset += dim;
        }
        None
    }
}

/// Merge per-language matrices into one multilingual posteriorgram.
///
/// Argument order does not matter: columns always land in canonical
/// (ja, zh, en, synthetic) order. Frame counts may differ by up to
/// `alignment_slack`; longer inputs are truncated at the tail.
pub fn merge_multilingual(ppgs: &[PpgMatrix], alignment_slack: usize) -> Result<MultiPpg> {
    if ppgs.is_empty() {
        return Err(Error::EmptyInput("no posteriorgrams to merge".into()));
    }
    for (i, a) in ppgs.iter().enumerate() {
        for b in &ppgs[i + 1..] {
            if a.language == b.language {
                return Err(Error::DuplicateLanguage(a.language.to_string()));
            }
            let diff = a.frames().abs_diff(b.frames());
            if diff > alignment_slack {
                return Err(Error::FrameCountMismatch(format!(
                    "{} has {} frames, {} has {} (slack {})",
                    a.language,
                    a.frames(),
                    b.language,
                    b.frames(),
                    alignment_slack
                )));
            }
        }
    }
    let t = ppgs.iter().map(|p| p.frames()).min().unwrap();
    let mut ordered: Vec<&PpgMatrix> = ppgs.iter().collect();
    ordered.sort_by_key(|p| p.language);

    let total_dim: usize = ordered.iter().map(|p| p.dim()).sum();
    let mut values = Array2::zeros((t, total_dim));
    let mut segments = Vec::with_capacity(ordered.len());
    let mut offset = 0;
    for p in &ordered {
        let d = p.dim();
        values
            .slice_mut(ndarray::s![.., offset..offset + d])
            .assign(&p.values.slice(ndarray::s![..t, ..]));
        segments.push((p.language, d));
        offset += d;
    }
    Ok(MultiPpg { values, segments })
}

/// Deterministic synthetic posteriors: row t is a softmax over a keyed
/// pseudo-random embedding with its mass concentrated on state_sequence[t].
/// Rows are valid probability distributions and the argmax equals the
/// requested state for any sharpness >= 5.
pub fn oracle_ppg(
    state_sequence: &[usize],
    dim: usize,
    sharpness: f64,
    language: Language,
    seed: u64,
) -> Result<PpgMatrix> {
    if sharpness <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "sharpness must be > 0, got {sharpness}"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidConfig("ppg dim must be > 0".into()));
    }
    for (t, &s) in state_sequence.iter().enumerate() {
        if s >= dim {
            return Err(Error::IndexOutOfRange(format!(
                "state {} at frame {} exceeds dim {}",
                s, t, dim
            )));
        }
    }
    let mut values = Array2::zeros((state_sequence.len(), dim));
    let mut logits = vec![0.0f64; dim];
    for (t, &s) in state_sequence.iter().enumerate() {
        for (j, l) in logits.iter_mut().enumerate() {
            let base = if j == s { 1.0 } else { 0.0 };
            *l = sharpness * (base + 0.3 * embed_noise(seed, s as u64, j as u64));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            denom += *l;
        }
        for (j, &l) in logits.iter().enumerate() {
            values[[t, j]] = (l / denom) as f32;
        }
    }
    Ok(PpgMatrix {
        values,
        language,
        frame_shift_ms: 10.0,
        source_model_id: format!("oracle-{seed}"),
    })
}

/// Keyed uniform value in [0, 1): the fixed "embedding" behind the oracle.
/// Hashing instead of a stored table keeps paper-scale dims cheap.
fn embed_noise(seed: u64, state: u64, j: u64) -> f64 {
    let x = splitmix64(splitmix64(seed ^ 0x9E37_79B9_7F4A_7C15) ^ state);
    let y = splitmix64(x ^ j.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    (y >> 11) as f64 / (1u64 << 53) as f64
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stack +/- `width` context frames onto every row, clamping at the edges.
/// Output is the network-input precision (f64).
pub fn context_stack(m: &MultiPpg, width: usize) -> ndarray::Array2<f64> {
    let t = m.frames();
    let d = m.dim();
    let span = 2 * width + 1;
    let mut out = ndarray::Array2::zeros((t, d * span));
    for row in 0..t {
        for (slot, rel) in (-(width as isize)..=(width as isize)).enumerate() {
            let src = (row as isize + rel).clamp(0, t.max(1) as isize - 1) as usize;
            for col in 0..d {
                out[[row, slot * d + col]] = m.values[[src, col]] as f64;
            }
        }
    }
    out
}

/// Truncate a posteriorgram and a parameter set to their common frame
/// count, provided the difference stays within `slack`.
pub fn align_to_params(
    m: &MultiPpg,
    p: &SpeechParams,
    slack: usize,
) -> Result<(MultiPpg, SpeechParams)> {
    let (tp, tm) = (p.frames(), m.frames());
    if tp.abs_diff(tm) > slack {
        return Err(Error::FrameCountMismatch(format!(
            "ppg {} frames vs params {} (slack {})",
            tm, tp, slack
        )));
    }
    let t = tp.min(tm);
    let truncated = MultiPpg {
        values: m.values.slice(ndarray::s![..t, ..]).to_owned(),
        segments: m.segments.clone(),
    };
    Ok((truncated, p.truncated(t)))
}

/// Read a posteriorgram file, binary or text, and check the language tag.
pub fn load_ppg(path: &Path, expected_language: Language) -> Result<PpgMatrix> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::IoError(format!("{}: {}", path.display(), e)))?;
    let mut reader = BufReader::new(file);
    let mut magic = [0u8; 4];
    let peeked = reader.fill_buf()?;
    let is_binary = peeked.len() >= 4 && &peeked[..4] == PPG_MAGIC;
    let ppg = if is_binary {
        reader.read_exact(&mut magic)?;
        load_binary(&mut reader, path)?
    } else {
        load_text(&mut reader, path)?
    };
    if ppg.language != expected_language {
        return Err(Error::LanguageMismatch(format!(
            "{}: tagged {}, expected {}",
            path.display(),
            ppg.language,
            expected_language
        )));
    }
    if ppg.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue(format!(
            "{}: non-finite posterior value",
            path.display()
        )));
    }
    Ok(ppg)
}

fn load_binary(reader: &mut impl Read, path: &Path) -> Result<PpgMatrix> {
    let ctx = |what: &str| Error::ParseError(format!("{}: {}", path.display(), what));
    let version = reader
        .read_u32::<LittleEndian>()
        .map_err(|_| ctx("truncated header"))?;
    if version != PPG_VERSION {
        return Err(ctx(&format!("unsupported version {version}")));
    }
    let tag_len = reader.read_u8().map_err(|_| ctx("truncated header"))? as usize;
    let mut tag = vec![0u8; tag_len];
    reader
        .read_exact(&mut tag)
        .map_err(|_| ctx("truncated language tag"))?;
    let tag = String::from_utf8(tag).map_err(|_| ctx("language tag is not utf-8"))?;
    let language = Language::parse(&tag)?;
    let t = reader
        .read_u32::<LittleEndian>()
        .map_err(|_| ctx("truncated header"))? as usize;
    let d = reader
        .read_u32::<LittleEndian>()
        .map_err(|_| ctx("truncated header"))? as usize;
    if d == 0 {
        return Err(ctx("zero-dimensional posteriorgram"));
    }
    let mut raw = vec![0f32; t * d];
    for v in raw.iter_mut() {
        *v = reader
            .read_f32::<LittleEndian>()
            .map_err(|_| ctx("truncated matrix body"))?;
    }
    let values = Array2::from_shape_vec((t, d), raw)
        .map_err(|_| ctx("matrix shape"))?;
    Ok(PpgMatrix {
        values,
        language,
        frame_shift_ms: 10.0,
        source_model_id: String::new(),
    })
}

fn load_text(reader: &mut impl BufRead, path: &Path) -> Result<PpgMatrix> {
    let ctx = |what: String| Error::ParseError(format!("{}: {}", path.display(), what));
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| ctx(e.to_string()))?;
    let mut fields = header.split_whitespace();
    let t: usize = fields
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| ctx("header must be 'T D language'".into()))?;
    let d: usize = fields
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| ctx("header must be 'T D language'".into()))?;
    let tag = fields
        .next()
        .ok_or_else(|| ctx("header must be 'T D language'".into()))?;
    if d == 0 {
        return Err(ctx("zero-dimensional posteriorgram".into()));
    }
    let language = Language::parse(tag)?;
    let mut raw = Vec::with_capacity(t * d);
    for (row, line) in reader.lines().enumerate().take(t) {
        let line = line.map_err(|e| ctx(e.to_string()))?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            let v: f32 = tok
                .parse()
                .map_err(|_| ctx(format!("row {}: bad float {:?}", row, tok)))?;
            if !v.is_finite() {
                return Err(Error::InvalidValue(format!(
                    "{}: non-finite value {:?} in row {}",
                    path.display(),
                    tok,
                    row
                )));
            }
            raw.push(v);
            count += 1;
        }
        if count != d {
            return Err(ctx(format!("row {} has {} values, expected {}", row, count, d)));
        }
    }
    if raw.len() != t * d {
        return Err(ctx(format!(
            "expected {} rows, found {}",
            t,
            raw.len() / d
        )));
    }
    let values = Array2::from_shape_vec((t, d), raw).map_err(|e| ctx(e.to_string()))?;
    Ok(PpgMatrix {
        values,
        language,
        frame_shift_ms: 10.0,
        source_model_id: String::new(),
    })
}

/// Write the binary format (preferred on disk; the text form is accepted
/// on load for interchange).
pub fn write_ppg(path: &Path, ppg: &PpgMatrix) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::IoError(format!("{}: {}", path.display(), e)))?;
    let mut w = BufWriter::new(file);
    w.write_all(PPG_MAGIC)?;
    w.write_u32::<LittleEndian>(PPG_VERSION)?;
    let tag = ppg.language.as_str().as_bytes();
    w.write_u8(tag.len() as u8)?;
    w.write_all(tag)?;
    w.write_u32::<LittleEndian>(ppg.frames() as u32)?;
    w.write_u32::<LittleEndian>(ppg.dim() as u32)?;
    for &v in ppg.values.iter() {
        w.write_f32::<LittleEndian>(v)?;
    }
    w.flush()?;
    Ok(())
}
