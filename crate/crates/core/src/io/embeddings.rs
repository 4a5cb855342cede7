use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Magic of the training-embedding file: `RGEMB001`, then u32 LE row count,
/// u32 LE dimension, then row-major f32 LE values.
pub const EMBEDDING_MAGIC: &[u8; 8] = b"RGEMB001";

pub fn write_embeddings(path: impl AsRef<Path>, rows: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::domain("embedding rows differ in length"));
    }
    let n = u32::try_from(rows.len()).map_err(|_| Error::domain("too many embedding rows"))?;
    let d = u32::try_from(dim).map_err(|_| Error::domain("embedding dimension too large"))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    out.write_all(EMBEDDING_MAGIC).map_err(io)?;
    out.write_all(&n.to_le_bytes()).map_err(io)?;
    out.write_all(&d.to_le_bytes()).map_err(io)?;
    for v in rows.iter().flatten() {
        out.write_all(&(*v as f32).to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut r = BufReader::new(file);
    let bad = |m: &str| Error::PredictionFormat(format!("{}: {m}", path.display()));
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|_| bad("truncated embedding header"))?;
    if &head[..8] != EMBEDDING_MAGIC {
        return Err(bad("magic mismatch, not an embedding file"));
    }
    let n = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    if len != 16 + 4 * (n as u64) * (d as u64) {
        return Err(bad(&format!("{n} rows of dimension {d} do not match the file length {len}")));
    }
    let mut buf = vec![0u8; 4 * d];
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        let row: Vec<f64> = buf
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        if row.iter().any(|v| !v.is_finite()) {
            return Err(bad(&format!("row {i} has a non-finite value")));
        }
        rows.push(row);
    }
    Ok(rows)
}
