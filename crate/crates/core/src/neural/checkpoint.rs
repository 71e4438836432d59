//! Checkpoint container and its binary format.
//!
//! Layout: magic "PPGVCNET", u32 version, a kind byte, the network
//! config, normalization statistics, the output layout, conversion
//! metadata (context width, posteriorgram segments, speaker, analysis
//! settings), then the weight blobs as little-endian f32 in parameter
//! declaration order. Discriminators reuse the container with the "disc"
//! kind tag.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array1;

use super::{zero_network, FeatureStats, Network, NetworkConfig, NetworkKind};
use crate::features::{AnalysisConfig, ParamLayout};
use crate::ppg::Language;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"PPGVCNET";
const VERSION: u32 = 1;

const KIND_FEEDFORWARD: u8 = 0;
const KIND_BIRECURRENT: u8 = 1;
const KIND_DISC: u8 = 2;

/// Everything needed to run conversion: the trained network plus the
/// normalization, layout, and posteriorgram expectations it was trained
/// under.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub is_discriminator: bool,
    pub stats: FeatureStats,
    pub layout: ParamLayout,
    pub context_width: usize,
    pub segments: Vec<(Language, usize)>,
    pub speaker_id: String,
    pub analysis: AnalysisConfig,
}

impl Checkpoint {
    pub fn languages(&self) -> Vec<Language> {
        self.segments.iter().map(|(l, _)| *l).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::IoError(format!("{}: {}", path.display(), e)))?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        let kind = if self.is_discriminator {
            KIND_DISC
        } else {
            match self.network.config.kind {
                NetworkKind::FeedForward => KIND_FEEDFORWARD,
                NetworkKind::BiRecurrent => KIND_BIRECURRENT,
            }
        };
        w.write_u8(kind)?;
        let cfg = &self.network.config;
        w.write_u64::<LittleEndian>(cfg.seed)?;
        w.write_u32::<LittleEndian>(cfg.input_dim as u32)?;
        w.write_u32::<LittleEndian>(cfg.output_dim as u32)?;
        w.write_u32::<LittleEndian>(cfg.hidden.len() as u32)?;
        for &h in &cfg.hidden {
            w.write_u32::<LittleEndian>(h as u32)?;
        }
        write_vec(&mut w, &self.stats.input_mean)?;
        write_vec(&mut w, &self.stats.input_std)?;
        write_vec(&mut w, &self.stats.output_mean)?;
        write_vec(&mut w, &self.stats.output_std)?;
        w.write_u32::<LittleEndian>(self.layout.mcep_dim as u32)?;
        w.write_u32::<LittleEndian>(self.layout.bap_dim as u32)?;
        w.write_f64::<LittleEndian>(self.layout.f0_floor)?;
        w.write_f64::<LittleEndian>(self.layout.f0_ceil)?;
        w.write_f64::<LittleEndian>(self.layout.frame_shift_ms)?;
        w.write_u32::<LittleEndian>(self.context_width as u32)?;
        w.write_u8(self.segments.len() as u8)?;
        for (lang, dim) in &self.segments {
            let tag = lang.as_str().as_bytes();
            w.write_u8(tag.len() as u8)?;
            w.write_all(tag)?;
            w.write_u32::<LittleEndian>(*dim as u32)?;
        }
        let spk = self.speaker_id.as_bytes();
        w.write_u16::<LittleEndian>(spk.len() as u16)?;
        w.write_all(spk)?;
        let a = &self.analysis;
        w.write_u32::<LittleEndian>(a.sample_rate)?;
        w.write_f64::<LittleEndian>(a.frame_shift_ms)?;
        w.write_f64::<LittleEndian>(a.frame_length_ms)?;
        w.write_u32::<LittleEndian>(a.mcep_order as u32)?;
        w.write_f64::<LittleEndian>(a.warp_alpha)?;
        w.write_f64::<LittleEndian>(a.f0_floor)?;
        w.write_f64::<LittleEndian>(a.f0_ceil)?;
        w.write_u32::<LittleEndian>(a.bap_bands as u32)?;
        w.write_u32::<LittleEndian>(a.fft_size as u32)?;
        w.write_f64::<LittleEndian>(a.spectral_floor)?;
        for slice in self.network.param_slices() {
            for &v in slice {
                w.write_f32::<LittleEndian>(v as f32)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::IoError(format!("{}: {}", path.display(), e)))?;
        let mut r = BufReader::new(file);
        let ctx = |what: &str| Error::ParseError(format!("{}: {}", path.display(), what));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| ctx("truncated"))?;
        if &magic != MAGIC {
            return Err(ctx("bad magic"));
        }
        let version = r.read_u32::<LittleEndian>().map_err(|_| ctx("truncated"))?;
        if version != VERSION {
            return Err(ctx(&format!("unsupported version {version}")));
        }
        let kind_byte = r.read_u8().map_err(|_| ctx("truncated"))?;
        let (kind, is_discriminator) = match kind_byte {
            KIND_FEEDFORWARD => (NetworkKind::FeedForward, false),
            KIND_BIRECURRENT => (NetworkKind::BiRecurrent, false),
            KIND_DISC => (NetworkKind::FeedForward, true),
            other => return Err(ctx(&format!("unknown kind {other}"))),
        };
        let seed = r.read_u64::<LittleEndian>().map_err(|_| ctx("truncated"))?;
        let input_dim = r.read_u32::<LittleEndian>().map_err(|_| ctx("truncated"))? as usize;
        let output_dim = r.read_u32::<LittleEndian>().map_err(|_| ctx("truncated"))? as usize;
        let n_hidden = r.read_u32::<LittleEndian>().map_err(|_| ctx("truncated"))? as usize;
        let mut hidden = Vec::with_capacity(n_hidden);
        for _ in 0..n_hidden {
            hidden.push(r.read_u32::<LittleEndian>().map_err(|_| ctx("truncated"))? as usize);
        }
        let config = NetworkConfig {
            kind,
            input_dim,
            output_dim,
            hidden,
            seed,
        };
        let stats = FeatureStats {
            input_mean: read_vec(&mut r).map_err(|_| ctx("stats"))?,
            input_std: read_vec(&mut r).map_err(|_| ctx("stats"))?,
            output_mean: read_vec(&mut r).map_err(|_| ctx("stats"))?,
            output_std: read_vec(&mut r).map_err(|_| ctx("stats"))?,
        };
        let layout = ParamLayout {
            mcep_dim: r.read_u32::<LittleEndian>().map_err(|_| ctx("layout"))? as usize,
            bap_dim: r.read_u32::<LittleEndian>().map_err(|_| ctx("layout"))? as usize,
            f0_floor: r.read_f64::<LittleEndian>().map_err(|_| ctx("layout"))?,
            f0_ceil: r.read_f64::<LittleEndian>().map_err(|_| ctx("layout"))?,
            frame_shift_ms: r.read_f64::<LittleEndian>().map_err(|_| ctx("layout"))?,
        };
        let context_width = r.read_u32::<LittleEndian>().map_err(|_| ctx("context"))? as usize;
        let n_segments = r.read_u8().map_err(|_| ctx("segments"))? as usize;
        let mut segments = Vec::with_capacity(n_segments);
        for _ in 0..n_segments {
            let tag_len = r.read_u8().map_err(|_| ctx("segments"))? as usize;
            let mut tag = vec![0u8; tag_len];
            r.read_exact(&mut tag).map_err(|_| ctx("segments"))?;
            let tag = String::from_utf8(tag).map_err(|_| ctx("segments"))?;
            let lang = Language::parse(&tag)?;
            let dim = r.read_u32::<LittleEndian>().map_err(|_| ctx("segments"))? as usize;
            segments.push((lang, dim));
        }
        let spk_len = r.read_u16::<LittleEndian>().map_err(|_| ctx("speaker"))? as usize;
        let mut spk = vec![0u8; spk_len];
        r.read_exact(&mut spk).map_err(|_| ctx("speaker"))?;
        let speaker_id = String::from_utf8(spk).map_err(|_| ctx("speaker"))?;
        let analysis = AnalysisConfig {
            sample_rate: r.read_u32::<LittleEndian>().map_err(|_| ctx("analysis"))?,
            frame_shift_ms: r.read_f64::<LittleEndian>().map_err(|_| ctx("analysis"))?,
            frame_length_ms: r.read_f64::<LittleEndian>().map_err(|_| ctx("analysis"))?,
            mcep_order: r.read_u32::<LittleEndian>().map_err(|_| ctx("analysis"))? as usize,
            warp_alpha: r.read_f64::<LittleEndian>().map_err(|_| ctx("analysis"))?,
            f0_floor: r.read_f64::<LittleEndian>().map_err(|_| ctx("analysis"))?,
            f0_ceil: r.read_f64::<LittleEndian>().map_err(|_| ctx("analysis"))?,
            bap_bands: r.read_u32::<LittleEndian>().map_err(|_| ctx("analysis"))? as usize,
            fft_size: r.read_u32::<LittleEndian>().map_err(|_| ctx("analysis"))? as usize,
            spectral_floor: r.read_f64::<LittleEndian>().map_err(|_| ctx("analysis"))?,
        };
        let mut network = zero_network(&config)?;
        for slice in network.param_slices_mut() {
            for v in slice {
                *v = r
                    .read_f32::<LittleEndian>()
                    .map_err(|_| ctx("truncated weights"))? as f64;
            }
        }
        Ok(Checkpoint {
            network,
            is_discriminator,
            stats,
            layout,
            context_width,
            segments,
            speaker_id,
            analysis,
        })
    }
}

fn write_vec(w: &mut impl Write, v: &Array1<f64>) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(v.len() as u32)?;
    for &x in v.iter() {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

fn read_vec(r: &mut impl Read) -> std::io::Result<Array1<f64>> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut v = Array1::zeros(len);
    for i in 0..len {
        v[i] = r.read_f64::<LittleEndian>()?;
    }
    Ok(v)
}
