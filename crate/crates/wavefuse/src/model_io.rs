//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "WVFS"  u32 version
//! u32 kernel  u32 feature_channels
//! u32 encoder block count, then (input, mid, output) u32 triples
//! u32 decoder block count, then triples
//! u32 final_in  u32 final_out
//! u64 parameter count
//! f64 parameters: kernels then bias of each layer, in forward order
//! u64 FNV-1a hash of the parameter bytes
//! ```

use std::fs;
use std::path::Path;

use wavefuse_core::network::{ArchitectureSpec, ConvBlockSpec, ModelWeights, FORMAT_VERSION};
use wavefuse_core::numerics::ConvLayerParams;
use wavefuse_core::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"WVFS";

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_model(w: &ModelWeights) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&w.format_version.to_le_bytes());
    let s = &w.spec;
    put_u32(&mut out, s.kernel);
    put_u32(&mut out, s.feature_channels);
    for blocks in [&s.encoder_blocks, &s.decoder_blocks] {
        put_u32(&mut out, blocks.len());
        for b in blocks.iter() {
            put_u32(&mut out, b.input);
            put_u32(&mut out, b.mid);
            put_u32(&mut out, b.output);
        }
    }
    put_u32(&mut out, s.final_conv.0);
    put_u32(&mut out, s.final_conv.1);
    out.extend_from_slice(&(w.param_count() as u64).to_le_bytes());
    let start = out.len();
    for l in &w.layers {
        for v in l.kernels.data().iter().chain(l.bias.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let hash = fnv1a64(&out[start..]);
    out.extend_from_slice(&hash.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::format(
                    self.path,
                    "model",
                    format!("file truncated while reading {what}"),
                )
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        self.u32(what).map(|v| v as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn blocks(&mut self, what: &str) -> Result<Vec<ConvBlockSpec>> {
        let n = self.usize(what)?;
        if n > 64 {
            return Err(Error::format(
                self.path,
                "model",
                format!("implausible {what} count {n}"),
            ));
        }
        (0..n)
            .map(|_| {
                Ok(ConvBlockSpec::new(
                    self.usize(what)?,
                    self.usize(what)?,
                    self.usize(what)?,
                ))
            })
            .collect()
    }
}

/// Parses a model file image; `path` only labels errors.
pub fn decode_model(bytes: &[u8], path: &Path) -> Result<ModelWeights> {
    let mut r = Reader {
        bytes,
        pos: 0,
        path,
    };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(
            path,
            "model",
            "bad magic, not a wavefuse model file",
        ));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.into(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let kernel = r.usize("kernel size")?;
    let feature_channels = r.usize("feature width")?;
    let encoder_blocks = r.blocks("encoder blocks")?;
    let decoder_blocks = r.blocks("decoder blocks")?;
    let final_conv = (r.usize("final layer")?, r.usize("final layer")?);
    let spec = ArchitectureSpec {
        encoder_blocks,
        decoder_blocks,
        final_conv,
        kernel,
        feature_channels,
    };
    spec.validate()
        .map_err(|e| Error::format(path, "model", format!("invalid architecture: {e}")))?;
    let count = r.u64("parameter count")?;
    if count != spec.param_count() as u64 {
        return Err(Error::format(
            path,
            "model",
            format!(
                "header declares {count} parameters but the architecture has {}",
                spec.param_count()
            ),
        ));
    }
    let payload = r.take(count as usize * 8, "parameters")?;
    let stored = r.u64("checksum")?;
    if r.pos != bytes.len() {
        return Err(Error::format(
            path,
            "model",
            format!("{} trailing bytes", bytes.len() - r.pos),
        ));
    }
    if fnv1a64(payload) != stored {
        return Err(Error::format(path, "model", "parameter checksum mismatch"));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut layers = Vec::new();
    for s in spec.layer_shapes() {
        let nk = s.out_channels * s.in_channels * s.kernel * s.kernel;
        let kernels = Tensor::from_vec(
            &[s.out_channels, s.in_channels, s.kernel, s.kernel],
            values.by_ref().take(nk).collect(),
        )?;
        let bias = Tensor::from_vec(
            &[s.out_channels],
            values.by_ref().take(s.out_channels).collect(),
        )?;
        layers.push(ConvLayerParams::new(kernels, bias)?);
    }
    let w = ModelWeights {
        spec,
        layers,
        format_version: version,
    };
    w.validate()?;
    Ok(w)
}

pub fn save_model(w: &ModelWeights, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    w.validate()?;
    fs::write(path, encode_model(w)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelWeights> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}
