use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scoring::{ScoreKind, ScoreRow, ScoreTable};
use crate::seleval::RiskCoverageCurve;

/// Shortest decimal that parses back to the same value; `nan`, `inf`, `-inf`
/// for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// CSV writer with LF line endings and path-annotated errors.
pub struct CsvOut {
    path: PathBuf,
    w: csv::Writer<File>,
}

impl CsvOut {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| Error::io(&path, e.into()))?;
        let mut out = Self { path, w };
        out.row(header)?;
        Ok(out)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(|e| Error::io(&self.path, e.into()))
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Columns `id, num_candidates` followed by one column per score.
pub fn write_score_table(path: impl AsRef<Path>, table: &ScoreTable) -> Result<()> {
    let names: Vec<String> = table.columns().iter().map(ToString::to_string).collect();
    let mut header = vec!["id", "num_candidates"];
    header.extend(names.iter().map(String::as_str));
    let mut out = CsvOut::create(path, &header)?;
    for r in table.rows() {
        let mut fields = vec![r.id.clone(), r.num_candidates.to_string()];
        fields.extend(r.values.iter().map(|&v| fmt_f64(v)));
        out.row(&fields)?;
    }
    out.finish()
}

pub fn read_score_table(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let bad = |line: usize, m: String| Error::MalformedRecord { line, message: m };
    let headers = rdr.headers().map_err(|e| Error::io(path, e.into()))?.clone();
    if headers.len() < 2 || &headers[0] != "id" || &headers[1] != "num_candidates" {
        return Err(bad(1, "score table must start with id,num_candidates".into()));
    }
    let columns = headers
        .iter()
        .skip(2)
        .map(str::parse::<ScoreKind>)
        .collect::<Result<Vec<_>>>()?;
    let mut table = ScoreTable::new(columns);
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let num_candidates = rec[1]
            .parse()
            .map_err(|_| bad(line, format!("invalid num_candidates {:?}", &rec[1])))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|f| parse_f64(f).ok_or_else(|| bad(line, format!("invalid number {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        table.push(ScoreRow {
            id: rec[0].to_string(),
            num_candidates,
            values,
        });
    }
    Ok(table)
}

/// Columns `coverage, risk`, one row per curve point.
pub fn write_curve(path: impl AsRef<Path>, curve: &RiskCoverageCurve) -> Result<()> {
    let mut out = CsvOut::create(path, &["coverage", "risk"])?;
    for p in &curve.points {
        out.row([fmt_f64(p.coverage), fmt_f64(p.risk)])?;
    }
    out.finish()
}

/// Writes `text` to `path` with path-annotated errors.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
