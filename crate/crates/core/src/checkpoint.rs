//! MDL1 checkpoint files.
//!
//! ```text
//! "MDL1"
//! u8  variant (0 NC, 1 LS, 2 FC)      u8  embedding source (0 skip, 1 words)
//! u32 input dim
//! u32 hidden layer count, then one u32 width per layer
//! u32 encoder dim (0 = none)           u32 word dim (0 = none)
//! u32 run index                        u64 update count
//! u32 tensor count, then every tensor as f32 LE in declaration order
//!     (classifier, GRU, forward LSTM, backward LSTM)
//! u32 CRC32 of everything above
//! ```
//! All integers little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{EmbeddingSource, ModelSpec, ModelVariant, StoryClozeModel};
use crate::nn::Parameterized;

pub const MDL1_MAGIC: [u8; 4] = *b"MDL1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub run_index: u32,
    pub update_count: u64,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_checkpoint(model: &StoryClozeModel<f32>, meta: CheckpointMeta) -> Result<Vec<u8>> {
    let spec = model.spec();
    let mut out = Vec::with_capacity(64 + 4 * model.param_count());
    out.extend_from_slice(&MDL1_MAGIC);
    out.push(spec.variant.code());
    out.push(spec.embedding_source.code());
    put_u32(&mut out, spec.input_dim)?;
    put_u32(&mut out, spec.hidden_widths.len())?;
    for &w in &spec.hidden_widths {
        put_u32(&mut out, w)?;
    }
    put_u32(&mut out, spec.encoder_dim.unwrap_or(0))?;
    put_u32(&mut out, spec.word_dim.unwrap_or(0))?;
    out.extend_from_slice(&meta.run_index.to_le_bytes());
    out.extend_from_slice(&meta.update_count.to_le_bytes());
    let tensors = model.tensors();
    put_u32(&mut out, tensors.len())?;
    for t in tensors {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(what.to_string())),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(StoryClozeModel<f32>, CheckpointMeta)> {
    if bytes.len() < 4 || bytes[..4] != MDL1_MAGIC {
        return Err(Error::BadMagic {
            expected: MDL1_MAGIC,
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    if bytes.len() < 8 {
        return Err(Error::Truncated("checkpoint".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut c = Cursor { buf: body, pos: 4 };
    let variant = ModelVariant::from_code(c.u8("variant")?)
        .ok_or_else(|| Error::Format("unknown model variant".into()))?;
    let source = EmbeddingSource::from_code(c.u8("embedding source")?)
        .ok_or_else(|| Error::Format("unknown embedding source".into()))?;
    let input_dim = c.u32("input dim")?;
    let n_hidden = c.u32("hidden count")?;
    let mut hidden_widths = Vec::with_capacity(n_hidden.min(64));
    for _ in 0..n_hidden {
        hidden_widths.push(c.u32("hidden width")?);
    }
    let encoder_dim = Some(c.u32("encoder dim")?).filter(|&d| d > 0);
    let word_dim = Some(c.u32("word dim")?).filter(|&d| d > 0);
    let meta = CheckpointMeta {
        run_index: c.u32("run index")? as u32,
        update_count: c.u64("update count")?,
    };
    let spec = ModelSpec {
        variant,
        embedding_source: source,
        input_dim,
        hidden_widths,
        encoder_dim,
        word_dim,
    };
    let mut model = StoryClozeModel::<f32>::zeros(spec)?;
    let n_tensors = c.u32("tensor count")?;
    if n_tensors != model.tensors().len() {
        return Err(Error::Format(format!(
            "spec implies {} tensors, file has {n_tensors}",
            model.tensors().len()
        )));
    }
    for t in model.tensors_mut() {
        let raw = c.take(4 * t.len(), "parameters")?;
        for (v, b) in t.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
    }
    if c.pos != body.len() {
        return Err(Error::Format("trailing bytes before checksum".into()));
    }
    Ok((model, meta))
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &StoryClozeModel<f32>, meta: CheckpointMeta) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(model, meta)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(StoryClozeModel<f32>, CheckpointMeta)> {
    let path = path.as_ref();
    decode_checkpoint(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn specs() -> Vec<ModelSpec> {
        vec![
            ModelSpec::with_dims(ModelVariant::Nc, EmbeddingSource::Precomputed, 6, vec![5, 3], 0),
            ModelSpec::with_dims(ModelVariant::Ls, EmbeddingSource::Words, 6, vec![4], 3),
            ModelSpec::with_dims(ModelVariant::Fc, EmbeddingSource::Precomputed, 4, vec![], 0),
            ModelSpec::with_dims(ModelVariant::Fc, EmbeddingSource::Words, 4, vec![2], 2),
        ]
    }

    #[test]
    fn round_trip_every_variant() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for spec in specs() {
            let m = StoryClozeModel::<f32>::new(spec, &mut rng).unwrap();
            let meta = CheckpointMeta {
                run_index: 3,
                update_count: 9000,
            };
            let bytes = encode_checkpoint(&m, meta).unwrap();
            let (back, meta2) = decode_checkpoint(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(meta2, meta);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = StoryClozeModel::<f32>::new(specs().remove(0), &mut rng).unwrap();
        let meta = CheckpointMeta {
            run_index: 0,
            update_count: 1,
        };
        let mut bytes = encode_checkpoint(&m, meta).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Checksum { .. })));
        assert!(matches!(decode_checkpoint(b"MDL0xxxxxxxx"), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn header_layout() {
        let m = StoryClozeModel::<f32>::zeros(ModelSpec::with_dims(ModelVariant::Ls, EmbeddingSource::Precomputed, 2, vec![3], 0)).unwrap();
        let bytes = encode_checkpoint(&m, CheckpointMeta { run_index: 7, update_count: 42 }).unwrap();
        assert_eq!(&bytes[..4], b"MDL1");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 0);
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &1u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &3u32.to_le_bytes());
        assert_eq!(&bytes[26..30], &7u32.to_le_bytes());
        assert_eq!(&bytes[30..38], &42u64.to_le_bytes());
        // 4 tensors: 3x2 + 3 + 2x3 + 2 floats
        assert_eq!(bytes.len(), 38 + 4 + 4 * (6 + 3 + 6 + 2) + 4);
    }
}
