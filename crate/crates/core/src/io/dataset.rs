use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Fingerprint, Instance};

pub const DATASET_FORMAT: &str = "rg-dataset";
pub const DATASET_VERSION: u32 = 1;

/// First line of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    #[serde(rename = "D")]
    pub dim: usize,
    pub cap: usize,
}

#[derive(Serialize, Deserialize)]
struct RawHeader {
    format: String,
    version: u32,
    #[serde(rename = "D")]
    dim: usize,
    cap: usize,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    true_index: usize,
    candidates: Vec<String>,
    meta: &'a BTreeMap<String, serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    id: String,
    true_index: i64,
    candidates: Vec<String>,
    #[serde(default)]
    meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Accept instances with more candidates than the header's cap.
    pub allow_uncapped: bool,
}

/// Streaming reader yielding one validated [`Instance`] per line.
pub struct DatasetReader<R: BufRead> {
    header: DatasetHeader,
    lines: Lines<R>,
    line_no: usize,
    options: LoadOptions,
}

impl DatasetReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, options: LoadOptions) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::new(BufReader::with_capacity(1 << 20, file), options)
    }
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(reader: R, options: LoadOptions) -> Result<Self> {
        let mut lines = reader.lines();
        let first = match lines.next() {
            Some(Ok(l)) => l,
            Some(Err(e)) => {
                return Err(Error::InvalidHeader {
                    line: 1,
                    message: e.to_string(),
                })
            }
            None => {
                return Err(Error::InvalidHeader {
                    line: 1,
                    message: "empty file".into(),
                })
            }
        };
        let raw: RawHeader = serde_json::from_str(&first).map_err(|e| Error::InvalidHeader {
            line: 1,
            message: e.to_string(),
        })?;
        if raw.format != DATASET_FORMAT || raw.version != DATASET_VERSION {
            return Err(Error::InvalidHeader {
                line: 1,
                message: format!(
                    "expected format {DATASET_FORMAT:?} version {DATASET_VERSION}, found {:?} version {}",
                    raw.format, raw.version
                ),
            });
        }
        if raw.dim == 0 || raw.cap == 0 {
            return Err(Error::InvalidHeader {
                line: 1,
                message: "D and cap must be positive".into(),
            });
        }
        Ok(Self {
            header: DatasetHeader {
                dim: raw.dim,
                cap: raw.cap,
            },
            lines,
            line_no: 1,
            options,
        })
    }

    pub fn header(&self) -> DatasetHeader {
        self.header
    }

    fn parse(&self, text: &str) -> Result<Instance> {
        let line = self.line_no;
        let rec: RecordIn = serde_json::from_str(text).map_err(|e| Error::MalformedRecord {
            line,
            message: e.to_string(),
        })?;
        let m = rec.candidates.len();
        if m == 0 {
            return Err(Error::MalformedRecord {
                line,
                message: "empty candidate list".into(),
            });
        }
        if m > self.header.cap && !self.options.allow_uncapped {
            return Err(Error::CapExceeded {
                line,
                candidates: m,
                cap: self.header.cap,
            });
        }
        if rec.true_index < 0 || rec.true_index as u64 >= m as u64 {
            return Err(Error::TrueIndexOutOfRange {
                line,
                true_index: rec.true_index,
                candidates: m,
            });
        }
        let dim = self.header.dim;
        let mut candidates = Vec::with_capacity(m);
        for (j, enc) in rec.candidates.iter().enumerate() {
            let bytes = BASE64.decode(enc).map_err(|e| Error::MalformedRecord {
                line,
                message: format!("candidate {j}: invalid base64: {e}"),
            })?;
            let fp = decode_bitset(&bytes, dim).map_err(|found| Error::BitsetLength {
                line,
                candidate: j,
                expected: dim,
                found,
            })?;
            if fp.is_zero() {
                return Err(Error::ZeroFingerprint { line, candidate: j });
            }
            candidates.push(fp);
        }
        let instance = Instance::new(rec.id, candidates, rec.true_index as usize).map_err(|e| {
            Error::MalformedRecord {
                line,
                message: e.to_string(),
            }
        })?;
        Ok(instance.with_meta(rec.meta))
    }
}

/// Decodes a packed bitset; on failure returns the number of bits the bytes
/// would represent (the full byte length, or the position past the highest
/// set padding bit).
fn decode_bitset(bytes: &[u8], dim: usize) -> std::result::Result<Fingerprint, usize> {
    if bytes.len() != dim.div_ceil(8) {
        return Err(bytes.len() * 8);
    }
    Fingerprint::from_packed_bytes(bytes, dim).ok_or_else(|| {
        let last = *bytes.last().unwrap_or(&0);
        (bytes.len() - 1) * 8 + (8 - last.leading_zeros() as usize)
    })
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<Instance>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let text = match line {
                Ok(t) => t,
                Err(e) => {
                    return Some(Err(Error::MalformedRecord {
                        line: self.line_no,
                        message: e.to_string(),
                    }))
                }
            };
            if text.trim().is_empty() {
                continue;
            }
            return Some(self.parse(&text));
        }
    }
}

/// A fully loaded dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub instances: Vec<Instance>,
}

pub fn load_dataset(path: impl AsRef<Path>, options: LoadOptions) -> Result<Dataset> {
    let reader = DatasetReader::open(path, options)?;
    let header = reader.header();
    let instances = reader.collect::<Result<Vec<_>>>()?;
    Ok(Dataset { header, instances })
}

/// Streaming dataset writer.
pub struct DatasetWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: DatasetHeader,
    buf: Vec<u8>,
}

impl DatasetWriter {
    pub fn create(path: impl AsRef<Path>, header: DatasetHeader) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = Self {
            out: BufWriter::with_capacity(1 << 20, file),
            path,
            header,
            buf: Vec::new(),
        };
        let raw = RawHeader {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            dim: header.dim,
            cap: header.cap,
        };
        let line = serde_json::to_vec(&raw).expect("header serializes");
        w.write_line(&line)?;
        Ok(w)
    }

    fn write_line(&mut self, bytes: &[u8]) -> Result<()> {
        self.out
            .write_all(bytes)
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, instance: &Instance) -> Result<()> {
        if instance.dim() != self.header.dim {
            return Err(Error::domain(format!(
                "instance {} has D={}, file declares D={}",
                instance.id,
                instance.dim(),
                self.header.dim
            )));
        }
        let rec = RecordOut {
            id: &instance.id,
            true_index: instance.true_index,
            candidates: instance
                .candidates
                .iter()
                .map(|c| BASE64.encode(c.to_packed_bytes()))
                .collect(),
            meta: &instance.meta,
        };
        let mut buf = std::mem::take(&mut self.buf);
        buf.clear();
        serde_json::to_writer(&mut buf, &rec).expect("record serializes");
        let r = self.write_line(&buf);
        self.buf = buf;
        r
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_dataset(path: impl AsRef<Path>, header: DatasetHeader, instances: &[Instance]) -> Result<()> {
    let mut w = DatasetWriter::create(path, header)?;
    for inst in instances {
        w.write(inst)?;
    }
    w.finish()
}
