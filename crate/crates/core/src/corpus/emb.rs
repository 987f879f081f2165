//! EMB1: `b"EMB1"`, u32 LE record count, u32 LE dim, then per record a u16 LE
//! key length, the UTF-8 key and `dim` f32 LE components.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{check_dim, Error, Result};

pub const EMB1_MAGIC: [u8; 4] = *b"EMB1";

/// Keyed fixed-dimension `f32` vectors. Insertion order is kept so that
/// writing a loaded table reproduces the file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            dim,
            keys: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    pub fn with_capacity(dim: usize, records: usize) -> Result<Self> {
        let mut t = Self::new(dim)?;
        t.keys.reserve(records);
        t.index.reserve(records);
        t.data.reserve(records * dim);
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: &[f32]) -> Result<()> {
        let key = key.into();
        check_dim("embedding vector", self.dim, vector.len())?;
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(key));
        }
        if self.index.contains_key(&key) {
            return Err(Error::DuplicateKey(key));
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.index
            .get(key)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.keys
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(k, v)| (k.as_str(), v))
    }

    /// Appends every record of `other`; keys must not collide.
    pub fn merge(&mut self, other: &EmbeddingTable) -> Result<()> {
        check_dim("merged table", self.dim, other.dim)?;
        for (k, v) in other.iter() {
            self.insert(k, v)?;
        }
        Ok(())
    }
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: impl FnOnce() -> String) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Truncated(what()),
        _ => Error::Format(e.to_string()),
    })
}

pub fn read_embedding_table<R: Read>(mut r: R) -> Result<EmbeddingTable> {
    let mut magic = [0u8; 4];
    let got = r.read(&mut magic).map_err(|e| Error::Format(e.to_string()))?;
    if got < 4 {
        read_exact_or(&mut r, &mut magic[got..], || "magic".into()).map_err(|_| Error::BadMagic {
            expected: EMB1_MAGIC,
            found: magic[..got].to_vec(),
        })?;
    }
    if magic != EMB1_MAGIC {
        return Err(Error::BadMagic {
            expected: EMB1_MAGIC,
            found: magic.to_vec(),
        });
    }
    let mut word = [0u8; 4];
    read_exact_or(&mut r, &mut word, || "record count".into())?;
    let count = u32::from_le_bytes(word) as usize;
    read_exact_or(&mut r, &mut word, || "dimension".into())?;
    let dim = u32::from_le_bytes(word) as usize;
    if dim == 0 {
        return Err(Error::Format("dimension is zero".into()));
    }
    // cap the up-front reservation; a lying header must not allocate gigabytes
    let mut table = EmbeddingTable::with_capacity(dim, count.min(1 << 16))?;
    let mut vec_bytes = vec![0u8; dim * 4];
    let mut vector = vec![0f32; dim];
    for rec in 0..count {
        let mut len = [0u8; 2];
        read_exact_or(&mut r, &mut len, || format!("key length of record {rec}"))?;
        let mut key = vec![0u8; u16::from_le_bytes(len) as usize];
        read_exact_or(&mut r, &mut key, || format!("key of record {rec}"))?;
        let key = String::from_utf8(key)
            .map_err(|_| Error::Format(format!("record {rec}: key is not UTF-8")))?;
        read_exact_or(&mut r, &mut vec_bytes, || format!("vector of record {rec} (`{key}`)"))?;
        for (v, b) in vector.iter_mut().zip(vec_bytes.chunks_exact(4)) {
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
        table.insert(key, &vector)?;
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(table),
        Ok(_) => Err(Error::Format(format!("trailing bytes after {count} records"))),
        Err(e) => Err(Error::Format(e.to_string())),
    }
}

pub fn load_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_embedding_table(BufReader::with_capacity(1 << 20, file))
}

pub fn write_embedding_table_to<W: Write>(table: &EmbeddingTable, mut w: W) -> std::io::Result<()> {
    let invalid = |m: String| std::io::Error::new(ErrorKind::InvalidInput, m);
    let count = u32::try_from(table.len()).map_err(|_| invalid("too many records".into()))?;
    let dim = u32::try_from(table.dim()).map_err(|_| invalid("dimension too large".into()))?;
    w.write_all(&EMB1_MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    for (key, v) in table.iter() {
        let len = u16::try_from(key.len()).map_err(|_| invalid(format!("key `{key}` longer than 65535 bytes")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(key.as_bytes())?;
        for x in v {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn write_embedding_table(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_embedding_table_to(table, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
