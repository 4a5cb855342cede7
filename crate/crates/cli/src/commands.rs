use std::fs;
use std::path::{Path, PathBuf};

use rgsel_core::io::{
    digest_input, fmt_f64, write_curve, write_embeddings, write_manifest, write_score_table, write_text, CsvOut,
    DatasetHeader, DatasetWriter, InputDigest, Manifest, PredictionWriter,
};
use rgsel_core::model::AggregationStrategy;
use rgsel_core::riskctl::{sgr_select, split_indices, SgrResult};
use rgsel_core::scoring::{ScoreConfig, ScoreKind, ScoreLevel};
use rgsel_core::seleval::{risk_coverage_curve, spearman_matrix, LossSpec, RiskCoverageCurve};
use rgsel_core::synth::{generate_iter, mc_validate_sgr, training_embeddings, DifficultyModel, McReport, SynthConfig};
use rgsel_core::Error;

use crate::args::{CorrelateArgs, CurveArgs, InputArgs, ScoreArgs, SgrArgs, SimulateArgs};
use crate::pipeline::{evaluate_files, load_train_index, EvalRequest, Evaluation, SizeFilter};
use crate::svg::{heatmap, padded_range, LinePlot, Series};
use crate::CliError;

type CliResult<T> = std::result::Result<T, CliError>;

/// Writes the manifest before any output (incomplete) and again once every
/// output exists.
struct Run {
    out: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn start(
        out: &Path,
        subcommand: &str,
        config: serde_json::Value,
        seed: Option<u64>,
        inputs: Vec<InputDigest>,
    ) -> CliResult<Self> {
        fs::create_dir_all(out).map_err(|e| CliError::validation(format!("{}: {e}", out.display())))?;
        let run = Run {
            out: out.to_path_buf(),
            manifest: Manifest {
                tool: "rgsel".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                subcommand: subcommand.into(),
                complete: false,
                config,
                seed,
                inputs,
                outputs: Vec::new(),
            },
        };
        run.save()?;
        Ok(run)
    }

    fn save(&self) -> CliResult<()> {
        Ok(write_manifest(self.out.join("manifest.json"), &self.manifest)?)
    }

    /// Path of a new output file, recorded in the manifest.
    fn file(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn finish(mut self) -> CliResult<()> {
        self.manifest.complete = true;
        self.save()
    }
}

fn config_json<T: serde::Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

/// File-name-safe form of a score or loss name.
pub fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T>
where
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::validation("--threads must be >= 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::validation(e.to_string()))?;
    pool.install(f)
}

fn parse_losses(names: &Option<Vec<String>>, ks: &[usize]) -> CliResult<Vec<LossSpec>> {
    let mut out: Vec<LossSpec> = Vec::new();
    match names {
        Some(names) => {
            for n in names {
                out.push(n.parse()?);
            }
        }
        None => {
            for &k in ks {
                out.push(LossSpec::hit(k)?);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::validation("no losses requested"));
    }
    out.dedup();
    Ok(out)
}

/// Requested scores in request order, `num_candidates` included when asked for.
fn parse_scores(input: &InputArgs) -> CliResult<Vec<ScoreKind>> {
    let mut out: Vec<ScoreKind> = Vec::new();
    match &input.scores {
        Some(names) => {
            for n in names {
                let k: ScoreKind = n.parse()?;
                if !out.contains(&k) {
                    out.push(k);
                }
            }
        }
        None => {
            out = ScoreKind::prediction_scores(&input.k);
            if input.train_embeddings.is_some() {
                out.extend([ScoreKind::Knn, ScoreKind::Mah]);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::validation("no scores requested"));
    }
    Ok(out)
}

fn request(input: &InputArgs, losses: Vec<LossSpec>) -> CliResult<EvalRequest> {
    if input.k.is_empty() || input.k.contains(&0) {
        return Err(CliError::validation("--k values must be >= 1"));
    }
    if !(input.temperature > 0.0) || !input.temperature.is_finite() {
        return Err(CliError::validation("--temperature must be a positive finite number"));
    }
    let aggregation: AggregationStrategy = input.aggregation.parse()?;
    let filter = SizeFilter {
        min: input.min_candidates,
        max: input.max_candidates,
    };
    if let (Some(lo), Some(hi)) = (filter.min, filter.max) {
        if lo > hi {
            return Err(CliError::validation(format!("empty candidate-size filter [{lo}, {hi}]")));
        }
    }
    Ok(EvalRequest {
        score: ScoreConfig {
            scores: parse_scores(input)?,
            temperature: input.temperature,
            aggregation,
            knn_k: input.knn_k,
        },
        losses,
        filter,
        allow_uncapped: input.allow_uncapped,
    })
}

fn check_exists(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::validation(format!("{what} file {} does not exist", path.display())))
    }
}

fn input_digests(input: &InputArgs) -> CliResult<Vec<InputDigest>> {
    check_exists(&input.dataset, "dataset")?;
    check_exists(&input.predictions, "predictions")?;
    let mut d = vec![digest_input(&input.dataset)?, digest_input(&input.predictions)?];
    if let Some(p) = &input.train_embeddings {
        check_exists(p, "training-embedding")?;
        d.push(digest_input(p)?);
    }
    Ok(d)
}

fn evaluate(input: &InputArgs, request: &EvalRequest) -> CliResult<Evaluation> {
    let index = match &input.train_embeddings {
        Some(p) => Some(load_train_index(p)?),
        None => None,
    };
    let eval = with_threads(input.threads, || {
        Ok(evaluate_files(&input.dataset, &input.predictions, index.as_ref(), request)?)
    })?;
    for w in &eval.warnings {
        eprintln!("warning: {w}");
    }
    if !eval.excluded.is_empty() {
        eprintln!("warning: {} instance(s) excluded, see excluded.csv", eval.excluded.len());
    }
    Ok(eval)
}

fn require_rows(eval: &Evaluation) -> CliResult<()> {
    if eval.table.is_empty() {
        Err(CliError::validation("no instances left to evaluate"))
    } else {
        Ok(())
    }
}

/// κ columns analysed by curve, sgr and correlate, including `num_candidates`
/// when it was requested.
pub fn kappa_columns(eval: &Evaluation, requested: &[ScoreKind]) -> Vec<(ScoreKind, Vec<f64>)> {
    requested
        .iter()
        .filter_map(|&k| eval.table.kappa(k).map(|v| (k, v)))
        .collect()
}

fn write_excluded(run: &mut Run, eval: &Evaluation) -> CliResult<()> {
    let mut out = CsvOut::create(run.file("excluded.csv"), &["id", "reason"])?;
    for (id, reason) in &eval.excluded {
        out.row([id.as_str(), reason.as_str()])?;
    }
    Ok(out.finish()?)
}

fn summary_row(name: &str, values: &[f64]) -> [String; 6] {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let (mean, lo, hi) = if finite.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            finite.iter().sum::<f64>() / finite.len() as f64,
            finite.iter().copied().fold(f64::INFINITY, f64::min),
            finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    [
        name.to_string(),
        values.len().to_string(),
        (values.len() - finite.len()).to_string(),
        fmt_f64(mean),
        fmt_f64(lo),
        fmt_f64(hi),
    ]
}

pub fn cmd_score(args: &ScoreArgs) -> CliResult<()> {
    let req = request(&args.input, parse_losses(&args.losses, &args.input.k)?)?;
    let inputs = input_digests(&args.input)?;
    let mut run = Run::start(&args.input.out, "score", config_json(args), None, inputs)?;
    let eval = evaluate(&args.input, &req)?;

    write_score_table(run.file("scores.csv"), &eval.table)?;

    let loss_names: Vec<String> = eval.losses.iter().map(ToString::to_string).collect();
    let mut header = vec!["id"];
    header.extend(loss_names.iter().map(String::as_str));
    let mut out = CsvOut::create(run.file("losses.csv"), &header)?;
    for (i, row) in eval.table.rows().iter().enumerate() {
        let mut fields = vec![row.id.clone()];
        fields.extend(eval.loss_values.iter().map(|c| fmt_f64(c[i])));
        out.row(&fields)?;
    }
    out.finish()?;

    let mut out = CsvOut::create(run.file("summary.csv"), &["name", "count", "non_finite", "mean", "min", "max"])?;
    let m: Vec<f64> = eval.table.rows().iter().map(|r| r.num_candidates as f64).collect();
    out.row(summary_row("num_candidates", &m))?;
    for (j, k) in eval.table.columns().iter().enumerate() {
        let v: Vec<f64> = eval.table.rows().iter().map(|r| r.values[j]).collect();
        out.row(summary_row(&k.to_string(), &v))?;
    }
    for (name, v) in loss_names.iter().zip(&eval.loss_values) {
        out.row(summary_row(name, v))?;
    }
    out.finish()?;

    write_excluded(&mut run, &eval)?;
    println!(
        "scored {} instance(s), {} excluded, {} filtered by size",
        eval.table.len(),
        eval.excluded.len(),
        eval.filtered
    );
    run.finish()
}

/// One risk-coverage curve per (score, loss) pair.
pub struct CurveEntry {
    pub score: ScoreKind,
    pub loss: LossSpec,
    pub curve: RiskCoverageCurve,
}

pub fn curves(eval: &Evaluation, requested: &[ScoreKind]) -> CliResult<Vec<CurveEntry>> {
    let cols = kappa_columns(eval, requested);
    let mut out = Vec::new();
    for (l, losses) in eval.losses.iter().zip(&eval.loss_values) {
        for (k, kappa) in &cols {
            out.push(CurveEntry {
                score: *k,
                loss: *l,
                curve: risk_coverage_curve(losses, kappa)?,
            });
        }
    }
    Ok(out)
}

fn downsample(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max {
        return points.to_vec();
    }
    let step = points.len() as f64 / max as f64;
    let mut out: Vec<(f64, f64)> = (0..max).map(|i| points[(i as f64 * step) as usize]).collect();
    out.push(*points.last().unwrap());
    out
}

fn curve_series(label: String, c: &RiskCoverageCurve) -> Series {
    let pts: Vec<(f64, f64)> = c.points.iter().map(|p| (p.coverage, p.risk)).collect();
    Series {
        label,
        points: downsample(&pts, 1000),
    }
}

pub fn cmd_curve(args: &CurveArgs) -> CliResult<()> {
    let req = request(&args.input, parse_losses(&args.losses, &args.input.k)?)?;
    let inputs = input_digests(&args.input)?;
    let mut run = Run::start(&args.input.out, "curve", config_json(args), None, inputs)?;
    let eval = evaluate(&args.input, &req)?;
    require_rows(&eval)?;
    let entries = curves(&eval, &req.score.scores)?;

    let mut summary = CsvOut::create(
        run.file("aurc_summary.csv"),
        &["score", "loss", "n", "aurc", "aurc_oracle", "aurc_random", "rel_aurc", "degenerate"],
    )?;
    for e in &entries {
        let (s, l) = (e.score.to_string(), e.loss.to_string());
        let stem = format!("curve_{}_{}", sanitize(&s), sanitize(&l));
        write_curve(run.file(&format!("{stem}.csv")), &e.curve)?;
        let oracle = risk_coverage_curve(
            eval.loss_column(e.loss).unwrap(),
            &eval.loss_column(e.loss).unwrap().iter().map(|v| -v).collect::<Vec<_>>(),
        )?;
        let plot = LinePlot {
            title: format!("{s} / {l}"),
            x_label: "coverage".into(),
            y_label: "selective risk".into(),
            x_range: (0.0, 1.0),
            y_range: padded_range(
                e.curve.points.iter().map(|p| p.risk).chain([0.0, e.curve.aurc_random]),
            ),
            series: vec![
                curve_series(s.clone(), &e.curve),
                curve_series("oracle".into(), &oracle),
                Series {
                    label: "random".into(),
                    points: vec![(0.0, e.curve.aurc_random), (1.0, e.curve.aurc_random)],
                },
            ],
            diagonal: false,
        };
        write_text(run.file(&format!("{stem}.svg")), &plot.render())?;
        summary.row([
            s,
            l,
            e.curve.points.len().to_string(),
            fmt_f64(e.curve.aurc),
            fmt_f64(e.curve.aurc_oracle),
            fmt_f64(e.curve.aurc_random),
            fmt_f64(e.curve.rel_aurc),
            e.curve.degenerate.to_string(),
        ])?;
    }
    summary.finish()?;

    // Scores as rows, losses as columns.
    let loss_names: Vec<String> = eval.losses.iter().map(ToString::to_string).collect();
    let mut header = vec!["score"];
    header.extend(loss_names.iter().map(String::as_str));
    let mut wide = CsvOut::create(run.file("rel_aurc.csv"), &header)?;
    let n_scores = entries.len() / eval.losses.len().max(1);
    for si in 0..n_scores {
        let mut fields = vec![entries[si].score.to_string()];
        for li in 0..eval.losses.len() {
            fields.push(fmt_f64(entries[li * n_scores + si].curve.rel_aurc));
        }
        wide.row(&fields)?;
    }
    wide.finish()?;

    for (li, l) in eval.losses.iter().enumerate() {
        let group = &entries[li * n_scores..(li + 1) * n_scores];
        let plot = LinePlot {
            title: format!("risk-coverage, {l}"),
            x_label: "coverage".into(),
            y_label: "selective risk".into(),
            x_range: (0.0, 1.0),
            y_range: padded_range(group.iter().flat_map(|e| e.curve.points.iter().map(|p| p.risk)).chain([0.0])),
            series: group.iter().map(|e| curve_series(e.score.to_string(), &e.curve)).collect(),
            diagonal: false,
        };
        write_text(run.file(&format!("curves_{}.svg", sanitize(&l.to_string()))), &plot.render())?;
    }

    write_excluded(&mut run, &eval)?;
    println!("{} curve(s) over {} instance(s)", entries.len(), eval.table.len());
    run.finish()
}

/// One (score, loss, r*) cell of the selection sweep.
#[derive(Debug, Clone)]
pub struct SgrRow {
    pub score: ScoreKind,
    pub loss: LossSpec,
    pub result: SgrResult,
    pub n_cal: usize,
    pub n_eval: usize,
    pub coverage_eval: f64,
    /// NaN when nothing in the evaluation half is accepted.
    pub risk_eval: f64,
}

pub fn validate_delta(delta: f64) -> CliResult<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(CliError::validation(format!("delta {delta} must lie in (0, 1)")))
    }
}

pub fn validate_targets(targets: &[f64]) -> CliResult<()> {
    if targets.is_empty() {
        return Err(CliError::validation("no target risks given"));
    }
    match targets.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        Some(r) => Err(CliError::validation(format!("target risk {r} must lie in (0, 1]"))),
        None => Ok(()),
    }
}

/// Calibrates on one half of the rows (split by `seed`) and reports coverage
/// and risk on the other half.
pub fn sgr_rows(
    eval: &Evaluation,
    requested: &[ScoreKind],
    targets: &[f64],
    delta: f64,
    seed: u64,
) -> CliResult<Vec<SgrRow>> {
    validate_delta(delta)?;
    validate_targets(targets)?;
    if let Some(l) = eval.losses.iter().find(|l| !l.is_binary()) {
        return Err(CliError::validation(format!(
            "loss {l} is not binary; selection with guaranteed risk needs hit@K losses"
        )));
    }
    let n = eval.table.len();
    if n < 2 {
        return Err(CliError::validation("need at least 2 instances to split"));
    }
    let (cal, ev) = split_indices(n, seed)?;
    let pick = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let cols = kappa_columns(eval, requested);
    let mut rows = Vec::new();
    for (l, losses) in eval.losses.iter().zip(&eval.loss_values) {
        let (loss_cal, loss_ev) = (pick(losses, &cal), pick(losses, &ev));
        for (k, kappa) in &cols {
            let (kappa_cal, kappa_ev) = (pick(kappa, &cal), pick(kappa, &ev));
            for &r in targets {
                let result = sgr_select(&kappa_cal, &loss_cal, r, delta)?;
                let mut accepted = 0usize;
                let mut errors = 0.0;
                for (kv, lv) in kappa_ev.iter().zip(&loss_ev) {
                    if result.accepts(*kv) {
                        accepted += 1;
                        errors += lv;
                    }
                }
                rows.push(SgrRow {
                    score: *k,
                    loss: *l,
                    result,
                    n_cal: cal.len(),
                    n_eval: ev.len(),
                    coverage_eval: accepted as f64 / ev.len() as f64,
                    risk_eval: if accepted == 0 { f64::NAN } else { errors / accepted as f64 },
                });
            }
        }
    }
    Ok(rows)
}

fn sgr_plot(rows: &[&SgrRow], loss: &str, risk: bool) -> String {
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        let label = r.score.to_string();
        let y = if risk { r.risk_eval } else { r.coverage_eval };
        let point = (r.result.target_risk, y);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point),
            None => series.push(Series {
                label,
                points: vec![point],
            }),
        }
    }
    let x_range = padded_range(rows.iter().map(|r| r.result.target_risk).chain([0.0]));
    let plot = LinePlot {
        title: if risk {
            format!("evaluation risk vs target, {loss}")
        } else {
            format!("evaluation coverage vs target, {loss}")
        },
        x_label: "target risk".into(),
        y_label: if risk { "empirical risk" } else { "coverage" }.into(),
        x_range,
        y_range: if risk { x_range } else { (0.0, 1.0) },
        series,
        diagonal: risk,
    };
    plot.render()
}

pub fn cmd_sgr(args: &SgrArgs) -> CliResult<()> {
    let losses = parse_losses(&args.losses, &args.input.k)?;
    if let Some(l) = losses.iter().find(|l| !l.is_binary()) {
        return Err(CliError::validation(format!(
            "loss {l} is not binary; selection with guaranteed risk needs hit@K losses"
        )));
    }
    validate_delta(args.delta)?;
    validate_targets(&args.target_risks)?;
    let req = request(&args.input, losses)?;
    let inputs = input_digests(&args.input)?;
    let mut run = Run::start(&args.input.out, "sgr", config_json(args), Some(args.seed), inputs)?;
    let eval = evaluate(&args.input, &req)?;
    require_rows(&eval)?;
    let rows = sgr_rows(&eval, &req.score.scores, &args.target_risks, args.delta, args.seed)?;

    let mut out = CsvOut::create(
        run.file("sgr.csv"),
        &[
            "score",
            "loss",
            "target_risk",
            "delta",
            "feasible",
            "tau_star",
            "bound",
            "n_cal",
            "coverage_cal",
            "risk_cal",
            "n_eval",
            "coverage_eval",
            "risk_eval",
            "probe_budget",
        ],
    )?;
    for r in &rows {
        out.row([
            r.score.to_string(),
            r.loss.to_string(),
            fmt_f64(r.result.target_risk),
            fmt_f64(r.result.delta),
            r.result.feasible.to_string(),
            fmt_f64(r.result.tau_star),
            fmt_f64(r.result.bound_b_star),
            r.n_cal.to_string(),
            fmt_f64(r.result.coverage_cal),
            fmt_f64(r.result.empirical_risk_cal),
            r.n_eval.to_string(),
            fmt_f64(r.coverage_eval),
            fmt_f64(r.risk_eval),
            r.result.iterations.to_string(),
        ])?;
    }
    out.finish()?;

    for l in &eval.losses {
        let name = l.to_string();
        let sel: Vec<&SgrRow> = rows.iter().filter(|r| r.loss == *l).collect();
        write_text(run.file(&format!("sgr_coverage_{}.svg", sanitize(&name))), &sgr_plot(&sel, &name, false))?;
        write_text(run.file(&format!("sgr_risk_{}.svg", sanitize(&name))), &sgr_plot(&sel, &name, true))?;
    }

    write_excluded(&mut run, &eval)?;
    let crossings = rows
        .iter()
        .filter(|r| r.result.feasible && r.risk_eval > r.result.target_risk)
        .count();
    println!(
        "{} selection cell(s), {} infeasible, {} with evaluation risk above target",
        rows.len(),
        rows.iter().filter(|r| !r.result.feasible).count(),
        crossings
    );
    run.finish()
}

/// Spearman matrix with columns reordered by level group.
pub struct Correlation {
    pub labels: Vec<ScoreKind>,
    pub matrix: Vec<Vec<f64>>,
}

pub fn correlation(eval: &Evaluation, requested: &[ScoreKind]) -> CliResult<Correlation> {
    let mut cols = kappa_columns(eval, requested);
    if cols.len() < 2 {
        return Err(CliError::validation("correlate needs at least 2 scores"));
    }
    cols.sort_by_key(|(k, _)| k.level());
    let values: Vec<Vec<f64>> = cols.iter().map(|(_, v)| v.clone()).collect();
    Ok(Correlation {
        labels: cols.iter().map(|(k, _)| *k).collect(),
        matrix: spearman_matrix(&values)?,
    })
}

pub fn cmd_correlate(args: &CorrelateArgs) -> CliResult<()> {
    let req = request(&args.input, parse_losses(&None, &args.input.k)?)?;
    if req.score.scores.len() < 2 {
        return Err(CliError::validation("correlate needs at least 2 scores"));
    }
    let inputs = input_digests(&args.input)?;
    let mut run = Run::start(&args.input.out, "correlate", config_json(args), None, inputs)?;
    let eval = evaluate(&args.input, &req)?;
    if eval.table.len() < 2 {
        return Err(CliError::validation("correlate needs at least 2 instances"));
    }
    let corr = correlation(&eval, &req.score.scores)?;
    let names: Vec<String> = corr.labels.iter().map(ToString::to_string).collect();
    let mut header = vec!["score"];
    header.extend(names.iter().map(String::as_str));
    let mut out = CsvOut::create(run.file("spearman.csv"), &header)?;
    for (name, row) in names.iter().zip(&corr.matrix) {
        let mut fields = vec![name.clone()];
        fields.extend(row.iter().map(|&v| fmt_f64(v)));
        out.row(&fields)?;
    }
    out.finish()?;
    let groups: Vec<usize> = corr
        .labels
        .iter()
        .map(|k| match k.level() {
            ScoreLevel::Retrieval => 0,
            ScoreLevel::Fingerprint => 1,
            ScoreLevel::Other => 2,
        })
        .collect();
    write_text(
        run.file("spearman.svg"),
        &heatmap("Spearman rank correlation", &names, &corr.matrix, &groups),
    )?;
    write_excluded(&mut run, &eval)?;
    println!("{0}x{0} correlation matrix over {1} instance(s)", names.len(), eval.table.len());
    run.finish()
}

pub fn parse_trials(spec: &str) -> CliResult<usize> {
    spec.strip_prefix("trials=")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::validation(format!("--validate-sgr expects trials=N with N >= 1, got {spec:?}")))
}

pub fn synth_config(args: &SimulateArgs) -> CliResult<SynthConfig> {
    let difficulty: DifficultyModel = args.difficulty.parse()?;
    let config = SynthConfig {
        n_instances: args.n,
        dim: args.dim,
        m_min: args.min_candidates,
        m_max: args.max_candidates,
        n_samples: args.samples,
        noise_level: args.noise,
        seed: args.seed,
        difficulty,
        embedding_dim: args.embedding_dim,
        cap: args.cap,
    };
    config.validate()?;
    Ok(config)
}

/// Monte-Carlo reports with the calibration size of a 50/50 split of `n`.
pub fn validation_reports(
    config: &SynthConfig,
    targets: &[f64],
    delta: f64,
    trials: usize,
    threads: usize,
) -> CliResult<Vec<(f64, McReport)>> {
    let mc = SynthConfig {
        n_instances: config.n_instances - config.n_instances / 2,
        ..config.clone()
    };
    targets
        .iter()
        .map(|&r| Ok((r, mc_validate_sgr(&mc, r, delta, trials, threads)?)))
        .collect()
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let config = synth_config(args)?;
    let trials = args.validate_sgr.as_deref().map(parse_trials).transpose()?;
    if trials.is_some() {
        validate_delta(args.delta)?;
        validate_targets(&args.target_risks)?;
    }
    let mut run = Run::start(&args.out, "simulate", config_json(args), Some(args.seed), Vec::new())?;

    let mut dataset = DatasetWriter::create(
        run.file("dataset.jsonl"),
        DatasetHeader {
            dim: config.dim,
            cap: config.cap,
        },
    )?;
    let mut preds = PredictionWriter::create(
        run.file("predictions.bin"),
        config.dim,
        config.n_samples,
        config.embedding_dim,
    )?;
    let mut planted = CsvOut::create(
        run.file("planted.csv"),
        &["id", "num_candidates", "latent", "error_prob", "ideal_kappa", "intended_error", "realized_error"],
    )?;
    for s in generate_iter(&config)? {
        dataset.write(&s.instance)?;
        preds.write(&s.bundle)?;
        planted.row([
            s.truth.id.clone(),
            s.instance.num_candidates().to_string(),
            fmt_f64(s.truth.latent),
            fmt_f64(s.truth.error_prob),
            fmt_f64(s.truth.ideal_kappa()),
            u8::from(s.truth.intended_error).to_string(),
            u8::from(s.truth.realized_error).to_string(),
        ])?;
    }
    dataset.finish()?;
    preds.finish()?;
    planted.finish()?;

    if config.embedding_dim.is_some() {
        let rows = training_embeddings(&config, args.train_size);
        write_embeddings(run.file("train_embeddings.bin"), &rows)?;
    }

    if let Some(trials) = trials {
        let threads = match args.threads {
            Some(0) => return Err(CliError::validation("--threads must be >= 1")),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        let reports = validation_reports(&config, &args.target_risks, args.delta, trials, threads)?;
        let n_cal = config.n_instances - config.n_instances / 2;
        let mut out = CsvOut::create(
            run.file("sgr_validation.csv"),
            &[
                "target_risk",
                "delta",
                "n_cal",
                "trials",
                "violations",
                "violation_rate",
                "infeasible",
                "mean_coverage",
                "max_true_risk",
            ],
        )?;
        for (r, rep) in &reports {
            out.row([
                fmt_f64(*r),
                fmt_f64(args.delta),
                n_cal.to_string(),
                rep.trials.to_string(),
                rep.violations.to_string(),
                fmt_f64(rep.violation_rate),
                rep.infeasible.to_string(),
                fmt_f64(rep.mean_coverage),
                fmt_f64(rep.max_true_risk),
            ])?;
            println!(
                "target risk {r}: violation rate {} over {} trials (delta {})",
                rep.violation_rate, rep.trials, args.delta
            );
        }
        out.finish()?;
    }
    println!("wrote {} instance(s) to {}", config.n_instances, args.out.display());
    run.finish()
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_numeric() { 3 } else { 2 };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}
