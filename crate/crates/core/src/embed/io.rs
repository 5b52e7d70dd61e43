//! Embedding files.
//!
//! Text: one line per node, `id v_1 ... v_dim`, values printed with full
//! round-trip precision.
//!
//! Binary, little endian: magic `DOTEMB01`, `u64 n`, `u64 dim`, `u8 dtype`
//! (1 = f64), `u64 seed`, then `n` ids as `u32 length + utf8 bytes`, then the
//! `n × dim` values in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::skipgram::{EmbeddingMatrix, TrainingMeta};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DOTEMB01";
const DTYPE_F64: u8 = 1;

fn blank_meta(seed: u64) -> TrainingMeta {
    TrainingMeta {
        epochs: 0,
        lr: 0.0,
        window: 0,
        negatives: 0,
        seed,
    }
}

pub fn write_embedding_text(e: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|err| Error::io(path, err))?;
    let mut w = BufWriter::new(file);
    for (id, row) in e.node_ids.iter().zip(e.vectors.rows()) {
        write!(w, "{id}").map_err(|err| Error::io(path, err))?;
        for v in row {
            write!(w, " {v:?}").map_err(|err| Error::io(path, err))?;
        }
        writeln!(w).map_err(|err| Error::io(path, err))?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

/// Reads the text format. Training metadata is not stored in this format.
pub fn read_embedding_text(path: &Path) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|err| Error::io(path, err))?;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|err| Error::io(path, err))?;
        let mut tokens = line.split_whitespace();
        let Some(id) = tokens.next() else { continue };
        let values: Vec<f64> = tokens
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|err| Error::format(format!("{}:{}", path.display(), lineno + 1), err.to_string()))?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::format(
                    format!("{}:{}", path.display(), lineno + 1),
                    format!("expected {d} values, found {}", values.len()),
                ))
            }
            _ => {}
        }
        ids.push(id.to_string());
        data.extend(values);
    }
    let dim = dim.unwrap_or(0);
    let vectors = Array2::from_shape_vec((ids.len(), dim), data).expect("rows checked");
    Ok(EmbeddingMatrix {
        node_ids: ids,
        vectors,
        meta: blank_meta(0),
    })
}

pub fn write_embedding_binary(e: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|err| Error::io(path, err))?;
    let mut w = BufWriter::new(file);
    let mut buf = Vec::with_capacity(33 + e.vectors.len() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(e.n_nodes() as u64).to_le_bytes());
    buf.extend_from_slice(&(e.dim() as u64).to_le_bytes());
    buf.push(DTYPE_F64);
    buf.extend_from_slice(&e.meta.seed.to_le_bytes());
    for id in &e.node_ids {
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
    }
    for v in e.vectors.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(|err| Error::io(path, err))?;
    w.flush().map_err(|err| Error::io(path, err))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.path.display().to_string(), "truncated embedding file"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_embedding_binary(path: &Path) -> Result<EmbeddingMatrix> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|err| Error::io(path, err))?;
    let mut c = Cursor { bytes: &bytes, pos: 0, path };
    if c.take(8)? != MAGIC {
        return Err(Error::format(path.display().to_string(), "not an embedding file"));
    }
    let n = c.u64()? as usize;
    let dim = c.u64()? as usize;
    let dtype = c.take(1)?[0];
    if dtype != DTYPE_F64 {
        return Err(Error::format(path.display().to_string(), format!("unsupported dtype {dtype}")));
    }
    let seed = c.u64()?;
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let len = u32::from_le_bytes(c.take(4)?.try_into().expect("4 bytes")) as usize;
        let id = std::str::from_utf8(c.take(len)?)
            .map_err(|err| Error::format(path.display().to_string(), err.to_string()))?;
        ids.push(id.to_string());
    }
    let raw = c.take(n * dim * 8)?;
    let data = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    Ok(EmbeddingMatrix {
        node_ids: ids,
        vectors: Array2::from_shape_vec((n, dim), data).expect("n × dim values"),
        meta: blank_meta(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> EmbeddingMatrix {
        EmbeddingMatrix {
            node_ids: vec!["a".into(), "node b".replace(' ', "_")],
            vectors: array![[0.1, -2.5e-17, 3.0], [1.0 / 3.0, 0.0, -7.25]],
            meta: blank_meta(42),
        }
    }

    #[test]
    fn text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        let e = sample();
        write_embedding_text(&e, &p).unwrap();
        let back = read_embedding_text(&p).unwrap();
        assert_eq!(back.node_ids, e.node_ids);
        assert_eq!(back.vectors, e.vectors);
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        let e = sample();
        write_embedding_binary(&e, &p).unwrap();
        let back = read_embedding_binary(&p).unwrap();
        assert_eq!(back.node_ids, e.node_ids);
        assert_eq!(back.vectors, e.vectors);
        assert_eq!(back.meta.seed, 42);
    }

    #[test]
    fn binary_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk");
        std::fs::write(&p, b"not an embedding").unwrap();
        assert!(read_embedding_binary(&p).is_err());
    }
}
