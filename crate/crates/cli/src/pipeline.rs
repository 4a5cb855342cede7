//! Streaming evaluation: instances are read in chunks, matched to their
//! predictions by id, and scored in parallel. Rows keep dataset order, so the
//! output does not depend on the thread count.

use std::path::Path;

use rayon::prelude::*;
use rgsel_core::io::{load_embeddings, DatasetReader, LoadOptions, PredictionIndex};
use rgsel_core::model::{Instance, PredictionBundle};
use rgsel_core::scoring::{
    effective_config, evaluate_instance, ScoreConfig, ScoreKind, ScoreRow, ScoreTable, TrainEmbeddingIndex,
};
use rgsel_core::seleval::{instance_loss, LossSpec};
use rgsel_core::{Error, Result};

const CHUNK: usize = 256;

/// Inclusive bounds on the candidate-set size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SizeFilter {
    pub min: Option<usize>,
    pub max: Option<usize>,
}

impl SizeFilter {
    pub fn keeps(&self, m: usize) -> bool {
        self.min.map_or(true, |lo| m >= lo) && self.max.map_or(true, |hi| m <= hi)
    }
}

#[derive(Debug, Clone)]
pub struct EvalRequest {
    pub score: ScoreConfig,
    pub losses: Vec<LossSpec>,
    pub filter: SizeFilter,
    pub allow_uncapped: bool,
}

/// Score table plus one loss column per requested loss, row-aligned.
#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pub table: ScoreTable,
    pub losses: Vec<LossSpec>,
    /// `loss_values[l][row]`.
    pub loss_values: Vec<Vec<f64>>,
    pub excluded: Vec<(String, String)>,
    pub warnings: Vec<String>,
    /// Instances dropped by the size filter.
    pub filtered: usize,
}

impl Evaluation {
    pub fn loss_column(&self, spec: LossSpec) -> Option<&[f64]> {
        self.losses
            .iter()
            .position(|&l| l == spec)
            .map(|i| self.loss_values[i].as_slice())
    }
}

fn evaluate_one(
    instance: &Instance,
    bundle: &PredictionBundle,
    config: &ScoreConfig,
    columns: &[ScoreKind],
    losses: &[LossSpec],
    index: Option<&TrainEmbeddingIndex>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ev = evaluate_instance(instance, bundle, config, columns, index)?;
    let l = losses
        .iter()
        .map(|&spec| instance_loss(spec, instance, &ev.ranking, &ev.mean_theta))
        .collect::<Result<Vec<_>>>()?;
    Ok((ev.values, l))
}

/// Incrementally built [`Evaluation`].
struct Accumulator<'a> {
    eval: Evaluation,
    config: ScoreConfig,
    columns: Vec<ScoreKind>,
    index: Option<&'a TrainEmbeddingIndex>,
}

impl<'a> Accumulator<'a> {
    fn new(request: &EvalRequest, index: Option<&'a TrainEmbeddingIndex>) -> Result<Self> {
        let mut warnings = Vec::new();
        let config = effective_config(&request.score, index, &mut warnings)?;
        let columns = config.columns();
        Ok(Self {
            eval: Evaluation {
                table: ScoreTable::new(columns.clone()),
                losses: request.losses.clone(),
                loss_values: vec![Vec::new(); request.losses.len()],
                warnings,
                ..Evaluation::default()
            },
            config,
            columns,
            index,
        })
    }

    fn process(&mut self, chunk: &[(Instance, Option<PredictionBundle>)]) {
        let (config, columns, losses, index) = (&self.config, &self.columns, &self.eval.losses, self.index);
        let results: Vec<Option<Result<(Vec<f64>, Vec<f64>)>>> = chunk
            .par_iter()
            .map(|(inst, bundle)| {
                bundle
                    .as_ref()
                    .map(|b| evaluate_one(inst, b, config, columns, losses, index))
            })
            .collect();
        for ((inst, _), res) in chunk.iter().zip(results) {
            match res {
                None => self
                    .eval
                    .excluded
                    .push((inst.id.clone(), "no matching prediction bundle".into())),
                Some(Err(e)) => self.eval.excluded.push((inst.id.clone(), e.to_string())),
                Some(Ok((values, l))) => {
                    self.eval.table.push(ScoreRow {
                        id: inst.id.clone(),
                        num_candidates: inst.num_candidates(),
                        values,
                    });
                    for (col, v) in self.eval.loss_values.iter_mut().zip(l) {
                        col.push(v);
                    }
                }
            }
        }
    }
}

/// Evaluates in-memory pairs; bundles are matched to instances by position.
pub fn evaluate_pairs(
    pairs: impl IntoIterator<Item = (Instance, Option<PredictionBundle>)>,
    request: &EvalRequest,
    index: Option<&TrainEmbeddingIndex>,
) -> Result<Evaluation> {
    let mut acc = Accumulator::new(request, index)?;
    let mut chunk = Vec::with_capacity(CHUNK);
    for (inst, bundle) in pairs {
        if !request.filter.keeps(inst.num_candidates()) {
            acc.eval.filtered += 1;
            continue;
        }
        chunk.push((inst, bundle));
        if chunk.len() == CHUNK {
            acc.process(&chunk);
            chunk.clear();
        }
    }
    acc.process(&chunk);
    Ok(acc.eval)
}

pub fn load_train_index(path: &Path) -> Result<TrainEmbeddingIndex> {
    let rows = load_embeddings(path)?;
    if rows.is_empty() {
        return Err(Error::Domain(format!("{}: no training embeddings", path.display())));
    }
    TrainEmbeddingIndex::new(&rows)
}

/// Streams a dataset file against a prediction file.
pub fn evaluate_files(
    dataset: &Path,
    predictions: &Path,
    index: Option<&TrainEmbeddingIndex>,
    request: &EvalRequest,
) -> Result<Evaluation> {
    let reader = DatasetReader::open(
        dataset,
        LoadOptions {
            allow_uncapped: request.allow_uncapped,
        },
    )?;
    let mut preds = PredictionIndex::open(predictions)?;
    let header = preds.header();
    if header.dim as usize != reader.header().dim {
        return Err(Error::Domain(format!(
            "dataset declares D={}, predictions declare D={}",
            reader.header().dim,
            header.dim
        )));
    }
    if request.score.needs_embeddings() {
        if let Some(dh) = header.embedding_dim {
            if let Some(idx) = index {
                if idx.dim() != dh as usize {
                    return Err(Error::Domain(format!(
                        "prediction embeddings have length {dh}, training embeddings {}",
                        idx.dim()
                    )));
                }
            }
        } else {
            let mut ids: Vec<String> = preds.ids().map(str::to_string).collect();
            ids.sort();
            if ids.len() > 10 {
                let more = ids.len() - 10;
                ids.truncate(10);
                ids.push(format!("... ({more} more)"));
            }
            return Err(Error::MissingEmbeddings { ids });
        }
    }

    let mut acc = Accumulator::new(request, index)?;
    let mut chunk = Vec::with_capacity(CHUNK);
    for inst in reader {
        let inst = inst?;
        if !request.filter.keeps(inst.num_candidates()) {
            acc.eval.filtered += 1;
            continue;
        }
        let bundle = preds.get(&inst.id)?;
        chunk.push((inst, bundle));
        if chunk.len() == CHUNK {
            acc.process(&chunk);
            chunk.clear();
        }
    }
    acc.process(&chunk);
    Ok(acc.eval)
}
