use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::PredictionBundle;

pub const PREDICTION_MAGIC: &[u8; 8] = b"RGPRED01";
const HEADER_LEN: u64 = 8 + 5 * 4;
const FLAG_EMBEDDINGS: u32 = 1;

/// Sizes declared in a prediction file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictionHeader {
    pub count: u32,
    pub dim: u32,
    pub n_samples: u32,
    /// Embedding length when embeddings are present.
    pub embedding_dim: Option<u32>,
}

impl PredictionHeader {
    fn payload_len(&self) -> u64 {
        4 * (u64::from(self.n_samples) * u64::from(self.dim) + u64::from(self.embedding_dim.unwrap_or(0)))
    }
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::PredictionFormat(msg.into())
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            format_err(format!("truncated file while reading {what}"))
        } else {
            format_err(format!("{what}: {e}"))
        }
    })
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_header(r: &mut impl Read) -> Result<PredictionHeader> {
    let mut magic = [0u8; 8];
    read_exact_or(r, &mut magic, "magic")?;
    if &magic != PREDICTION_MAGIC {
        return Err(format_err("magic mismatch, not a prediction file"));
    }
    let count = read_u32(r, "header")?;
    let dim = read_u32(r, "header")?;
    let n_samples = read_u32(r, "header")?;
    let flags = read_u32(r, "header")?;
    let dh = read_u32(r, "header")?;
    if flags & !FLAG_EMBEDDINGS != 0 {
        return Err(format_err(format!("unknown flag bits {flags:#x}")));
    }
    if n_samples == 0 || dim == 0 {
        return Err(format_err("header declares zero samples or zero dimension"));
    }
    Ok(PredictionHeader {
        count,
        dim,
        n_samples,
        embedding_dim: (flags & FLAG_EMBEDDINGS != 0).then_some(dh),
    })
}

/// Reads one record body (after the id) into a bundle, validating values.
fn read_body(
    r: &mut impl Read,
    header: &PredictionHeader,
    record: usize,
    id: String,
    scratch: &mut Vec<u8>,
) -> Result<PredictionBundle> {
    scratch.resize(header.payload_len() as usize, 0);
    read_exact_or(r, scratch, &format!("record {record}"))?;
    let values: Vec<f64> = scratch
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let sd = header.n_samples as usize * header.dim as usize;
    let record_err = |message: String| Error::PredictionRecord {
        record,
        id: id.clone(),
        message,
    };
    let (probs, emb) = values.split_at(sd);
    if let Some(pos) = probs.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(record_err(format!(
            "probability {} at sample {}, bit {} is outside [0, 1]",
            probs[pos],
            pos / header.dim as usize,
            pos % header.dim as usize
        )));
    }
    if emb.iter().any(|v| !v.is_finite()) {
        return Err(record_err("non-finite embedding value".into()));
    }
    let embedding = header.embedding_dim.map(|_| emb.to_vec());
    PredictionBundle::new(id.clone(), header.n_samples as usize, header.dim as usize, probs.to_vec(), embedding)
        .map_err(|e| record_err(e.to_string()))
}

fn read_id(r: &mut impl Read, record: usize) -> Result<String> {
    let mut len = [0u8; 2];
    read_exact_or(r, &mut len, &format!("record {record} id length"))?;
    let mut id = vec![0u8; u16::from_le_bytes(len) as usize];
    read_exact_or(r, &mut id, &format!("record {record} id"))?;
    String::from_utf8(id).map_err(|_| format_err(format!("record {record}: id is not UTF-8")))
}

/// Sequential reader over the records of a prediction file.
pub struct PredictionReader {
    path: PathBuf,
    header: PredictionHeader,
    reader: BufReader<File>,
    next_record: usize,
    scratch: Vec<u8>,
}

impl PredictionReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let mut reader = BufReader::with_capacity(1 << 20, file);
        let header = read_header(&mut reader)?;
        let minimum = HEADER_LEN + u64::from(header.count) * (2 + header.payload_len());
        if file_len < minimum {
            return Err(format_err(format!(
                "truncated file: {} records need at least {minimum} bytes, file has {file_len}",
                header.count
            )));
        }
        Ok(Self {
            path,
            header,
            reader,
            next_record: 0,
            scratch: Vec::new(),
        })
    }

    pub fn header(&self) -> PredictionHeader {
        self.header
    }

    fn check_trailing(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.reader.read(&mut b) {
            Ok(0) => Ok(()),
            Ok(_) => Err(format_err("trailing bytes after the last record")),
            Err(e) => Err(Error::io(&self.path, e)),
        }
    }
}

impl Iterator for PredictionReader {
    type Item = Result<PredictionBundle>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_record >= self.header.count as usize {
            if self.next_record == self.header.count as usize {
                self.next_record += 1;
                if let Err(e) = self.check_trailing() {
                    return Some(Err(e));
                }
            }
            return None;
        }
        let record = self.next_record;
        self.next_record += 1;
        let res = read_id(&mut self.reader, record)
            .and_then(|id| read_body(&mut self.reader, &self.header, record, id, &mut self.scratch));
        if res.is_err() {
            self.next_record = usize::MAX;
        }
        Some(res)
    }
}

/// Loads all bundles, rejecting duplicate ids.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionBundle>> {
    let reader = PredictionReader::open(path)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(reader.header().count as usize);
    for (record, b) in reader.enumerate() {
        let b = b?;
        if !seen.insert(b.instance_id.clone()) {
            return Err(Error::PredictionRecord {
                record,
                id: b.instance_id,
                message: "duplicate id".into(),
            });
        }
        out.push(b);
    }
    Ok(out)
}

/// Random access to bundles by instance id without loading the payloads.
pub struct PredictionIndex {
    path: PathBuf,
    header: PredictionHeader,
    reader: BufReader<File>,
    offsets: HashMap<String, (usize, u64)>,
    scratch: Vec<u8>,
}

impl PredictionIndex {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let mut reader = BufReader::with_capacity(1 << 16, file);
        let header = read_header(&mut reader)?;
        let payload = header.payload_len();
        let mut offsets = HashMap::with_capacity(header.count as usize);
        let mut pos = HEADER_LEN;
        for record in 0..header.count as usize {
            let id = read_id(&mut reader, record)?;
            pos += 2 + id.len() as u64;
            if pos + payload > file_len {
                return Err(format_err(format!("truncated file in record {record}")));
            }
            if offsets.insert(id.clone(), (record, pos)).is_some() {
                return Err(Error::PredictionRecord {
                    record,
                    id,
                    message: "duplicate id".into(),
                });
            }
            pos += payload;
            reader
                .seek(SeekFrom::Start(pos))
                .map_err(|e| Error::io(&path, e))?;
        }
        if pos != file_len {
            return Err(format_err("trailing bytes after the last record"));
        }
        Ok(Self {
            path,
            header,
            reader,
            offsets,
            scratch: Vec::new(),
        })
    }

    pub fn header(&self) -> PredictionHeader {
        self.header
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.offsets.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.offsets.keys().map(String::as_str)
    }

    /// Reads and validates the bundle for `id`, if present.
    pub fn get(&mut self, id: &str) -> Result<Option<PredictionBundle>> {
        let Some(&(record, offset)) = self.offsets.get(id) else {
            return Ok(None);
        };
        self.reader
            .seek(SeekFrom::Start(offset))
            .map_err(|e| Error::io(&self.path, e))?;
        read_body(&mut self.reader, &self.header, record, id.to_string(), &mut self.scratch).map(Some)
    }
}

/// Streaming writer; the record count is patched into the header on finish.
pub struct PredictionWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: PredictionHeader,
    buf: Vec<u8>,
}

impl PredictionWriter {
    pub fn create(path: impl AsRef<Path>, dim: usize, n_samples: usize, embedding_dim: Option<usize>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let to_u32 = |v: usize, what: &str| u32::try_from(v).map_err(|_| Error::domain(format!("{what} too large")));
        let header = PredictionHeader {
            count: 0,
            dim: to_u32(dim, "D")?,
            n_samples: to_u32(n_samples, "S")?,
            embedding_dim: embedding_dim.map(|d| to_u32(d, "embedding dimension")).transpose()?,
        };
        if dim == 0 || n_samples == 0 {
            return Err(Error::domain("prediction file needs D >= 1 and S >= 1"));
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = Self {
            out: BufWriter::with_capacity(1 << 20, file),
            path,
            header,
            buf: Vec::new(),
        };
        w.write_header()?;
        Ok(w)
    }

    fn write_header(&mut self) -> Result<()> {
        let h = self.header;
        let mut bytes = Vec::with_capacity(HEADER_LEN as usize);
        bytes.extend_from_slice(PREDICTION_MAGIC);
        for v in [
            h.count,
            h.dim,
            h.n_samples,
            if h.embedding_dim.is_some() { FLAG_EMBEDDINGS } else { 0 },
            h.embedding_dim.unwrap_or(0),
        ] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&bytes).map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, bundle: &PredictionBundle) -> Result<()> {
        let h = self.header;
        if bundle.dim() != h.dim as usize || bundle.n_samples() != h.n_samples as usize {
            return Err(Error::domain(format!(
                "bundle {} is {}x{}, file declares {}x{}",
                bundle.instance_id,
                bundle.n_samples(),
                bundle.dim(),
                h.n_samples,
                h.dim
            )));
        }
        match (h.embedding_dim, &bundle.embedding) {
            (Some(d), Some(e)) if e.len() == d as usize => {}
            (None, _) => {}
            _ => {
                return Err(Error::domain(format!(
                    "bundle {} lacks an embedding of the declared length",
                    bundle.instance_id
                )))
            }
        }
        let id = bundle.instance_id.as_bytes();
        let id_len = u16::try_from(id.len()).map_err(|_| Error::domain("instance id longer than 65535 bytes"))?;
        self.buf.clear();
        self.buf.extend_from_slice(&id_len.to_le_bytes());
        self.buf.extend_from_slice(id);
        for &v in bundle.raw() {
            self.buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if h.embedding_dim.is_some() {
            for &v in bundle.embedding.as_deref().unwrap_or(&[]) {
                self.buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        self.out.write_all(&self.buf).map_err(|e| Error::io(&self.path, e))?;
        self.header.count = self
            .header
            .count
            .checked_add(1)
            .ok_or_else(|| Error::domain("too many records"))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        let io = |e| Error::io(&self.path, e);
        self.out.flush().map_err(io)?;
        let file = self.out.get_mut();
        file.seek(SeekFrom::Start(8)).map_err(io)?;
        file.write_all(&self.header.count.to_le_bytes()).map_err(io)?;
        file.flush().map_err(io)
    }
}

pub fn write_predictions(path: impl AsRef<Path>, bundles: &[PredictionBundle]) -> Result<()> {
    let first = bundles
        .first()
        .ok_or_else(|| Error::domain("cannot infer dimensions of an empty bundle list"))?;
    let mut w = PredictionWriter::create(
        path,
        first.dim(),
        first.n_samples(),
        first.embedding.as_ref().map(Vec::len),
    )?;
    for b in bundles {
        w.write(b)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(id: &str, rows: &[Vec<f64>]) -> PredictionBundle {
        PredictionBundle::from_rows(id, rows).unwrap()
    }

    #[test]
    fn empty_file_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.bin");
        PredictionWriter::create(&p, 4, 1, None).unwrap().finish().unwrap();
        assert!(load_predictions(&p).unwrap().is_empty());
        assert_eq!(std::fs::metadata(&p).unwrap().len(), HEADER_LEN);
    }

    #[test]
    fn single_record_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.bin");
        let b = bundle("a", &[vec![0.1f32 as f64, 0.0, 1.0, 0.75]]);
        write_predictions(&p, std::slice::from_ref(&b)).unwrap();
        assert_eq!(load_predictions(&p).unwrap(), vec![b.clone()]);
        let mut idx = PredictionIndex::open(&p).unwrap();
        assert_eq!(idx.get("a").unwrap(), Some(b));
        assert_eq!(idx.get("zz").unwrap(), None);
    }

    #[test]
    fn embeddings_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.bin");
        let bs = vec![
            bundle("a", &[vec![0.5, 0.25], vec![0.0, 1.0]]).with_embedding(vec![1.5, -2.0, 0.0]),
            bundle("b", &[vec![0.125, 0.5], vec![1.0, 1.0]]).with_embedding(vec![0.0, 0.0, 3.0]),
        ];
        write_predictions(&p, &bs).unwrap();
        assert_eq!(load_predictions(&p).unwrap(), bs);
        let mut idx = PredictionIndex::open(&p).unwrap();
        assert_eq!(idx.get("b").unwrap().as_ref(), Some(&bs[1]));
        assert_eq!(idx.get("a").unwrap().as_ref(), Some(&bs[0]));
    }

    fn raw_file(dir: &Path, value: f32) -> PathBuf {
        let p = dir.join("raw.bin");
        let mut bytes = PREDICTION_MAGIC.to_vec();
        for v in [1u32, 2, 1, 0, 0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&3u16.to_le_bytes());
        bytes.extend_from_slice(b"bad");
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        bytes.extend_from_slice(&value.to_le_bytes());
        std::fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn out_of_range_probability_names_record() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_predictions(raw_file(dir.path(), 1.5)).unwrap_err();
        match err {
            Error::PredictionRecord { record, id, .. } => {
                assert_eq!(record, 0);
                assert_eq!(id, "bad");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            load_predictions(raw_file(dir.path(), f32::NAN)).unwrap_err(),
            Error::PredictionRecord { .. }
        ));
    }

    #[test]
    fn truncation_and_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = raw_file(dir.path(), 0.5);
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 2);
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_predictions(&p).unwrap_err(), Error::PredictionFormat(_)));
        assert!(PredictionIndex::open(&p).is_err());
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_predictions(&p).unwrap_err(), Error::PredictionFormat(_)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.bin");
        let b = bundle("a", &[vec![0.5]]);
        write_predictions(&p, &[b.clone(), b]).unwrap();
        assert!(load_predictions(&p).is_err());
        assert!(PredictionIndex::open(&p).is_err());
    }
}
