use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rgsel_cli::commands::{correlation, curves, sgr_rows};
use rgsel_cli::pipeline::{evaluate_pairs, EvalRequest, Evaluation, SizeFilter};
use rgsel_core::io::{
    load_dataset, load_predictions, read_manifest, read_score_table, write_dataset, write_predictions,
    DatasetHeader, LoadOptions,
};
use rgsel_core::model::{Fingerprint, Instance, PredictionBundle};
use rgsel_core::rng::CounterRng;
use rgsel_core::scoring::{ScoreConfig, ScoreKind, ScoreRow, ScoreTable};
use rgsel_core::seleval::{aurc_for_order, risk_coverage_curve, LossSpec};
use rgsel_core::synth::{generate, SynthConfig};

fn rgsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgsel"))
        .args(args)
        .env_remove("RGSEL_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rgsel(args);
    assert!(
        out.status.success(),
        "rgsel {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("sim");
    let mut args = vec!["simulate", "--out", p(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

fn inputs(sim: &Path) -> [String; 4] {
    [
        "--dataset".into(),
        sim.join("dataset.jsonl").display().to_string(),
        "--predictions".into(),
        sim.join("predictions.bin").display().to_string(),
    ]
}

fn run_on(sim: &Path, cmd: &str, out: &Path, extra: &[&str]) -> Output {
    let i = inputs(sim);
    let mut args: Vec<&str> = vec![cmd];
    args.extend(i.iter().map(String::as_str));
    args.extend(["--out", p(out)]);
    args.extend_from_slice(extra);
    rgsel(&args)
}

#[test]
fn score_ten_instances() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &["--n", "10", "--dim", "128", "--max-candidates", "20"]);
    let out = dir.path().join("score");
    assert!(run_on(&sim, "score", &out, &[]).status.success());
    let table = read_score_table(out.join("scores.csv")).unwrap();
    assert_eq!(table.len(), 10);
    assert_eq!(table.columns(), ScoreKind::prediction_scores(&[1, 5, 20])[..11].to_vec());
    assert_eq!(csv_rows(&out.join("losses.csv"))[0], ["id", "hit@1", "hit@5", "hit@20"]);
    assert_eq!(csv_rows(&out.join("excluded.csv")).len(), 1);
    let m = read_manifest(out.join("manifest.json")).unwrap();
    assert!(m.complete);
    assert_eq!(m.inputs.len(), 2);
    assert_eq!(m.inputs[0].sha256.len(), 64);
}

#[test]
fn score_requested_columns_only() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &["--n", "10", "--dim", "64", "--max-candidates", "8"]);
    let out = dir.path().join("score");
    assert!(run_on(&sim, "score", &out, &["--scores", "conf,gap"]).status.success());
    assert_eq!(csv_rows(&out.join("scores.csv"))[0], ["id", "num_candidates", "conf", "gap"]);
}

#[test]
fn missing_predictions_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &["--n", "5", "--dim", "64", "--max-candidates", "8"]);
    let missing = dir.path().join("nope.bin");
    let out = rgsel(&[
        "score",
        "--dataset",
        p(&sim.join("dataset.jsonl")),
        "--predictions",
        p(&missing),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.bin"));
}

#[test]
fn distance_scores_need_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(
        dir.path(),
        &["--n", "20", "--dim", "64", "--max-candidates", "8", "--embedding-dim", "4", "--train-size", "50"],
    );
    let out = dir.path().join("o");
    let emb = sim.join("train_embeddings.bin");
    let r = run_on(&sim, "score", &out, &["--train-embeddings", p(&emb), "--scores", "knn,mah", "--knn-k", "5"]);
    assert!(r.status.success());
    assert_eq!(csv_rows(&out.join("scores.csv"))[0], ["id", "num_candidates", "knn", "mah"]);

    let sim2 = dir.path().join("plain");
    ok(&["simulate", "--n", "5", "--dim", "64", "--max-candidates", "8", "--out", p(&sim2)]);
    let r = run_on(&sim2, "score", &dir.path().join("o2"), &["--train-embeddings", p(&emb), "--scores", "knn"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("embeddings missing"));
}

#[test]
fn curve_outputs_and_cap_filter() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(
        dir.path(),
        &["--n", "300", "--dim", "64", "--max-candidates", "8", "--cap", "8", "--seed", "4"],
    );
    let capped = csv_rows(&sim.join("planted.csv"))[1..].iter().filter(|r| r[1] == "8").count();
    assert!(capped > 0 && capped < 300);

    let out = dir.path().join("curve");
    let r = run_on(&sim, "curve", &out, &["--min-candidates", "8", "--scores", "conf,ret_ep", "--losses", "hit@1,tanimoto-disc"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = csv_rows(&out.join("aurc_summary.csv"));
    assert_eq!(summary.len(), 1 + 4);
    for row in &summary[1..] {
        assert_eq!(row[2], capped.to_string());
    }
    let curve = csv_rows(&out.join("curve_conf_hit_1.csv"));
    assert_eq!(curve.len(), 1 + capped);
    assert!(out.join("curve_ret_ep_tanimoto_disc.svg").is_file());
    assert!(out.join("curves_hit_1.svg").is_file());
    let wide = csv_rows(&out.join("rel_aurc.csv"));
    assert_eq!(wide[0], ["score", "hit@1", "tanimoto-disc"]);
    assert_eq!(wide.len(), 3);
}

fn synth_eval(n: usize, noise: f64, seed: u64) -> Evaluation {
    let config = SynthConfig {
        n_instances: n,
        dim: 64,
        m_min: 1,
        m_max: 16,
        noise_level: noise,
        seed,
        cap: 16,
        ..SynthConfig::default()
    };
    let (instances, bundles, _) = generate(&config).unwrap();
    let request = EvalRequest {
        score: ScoreConfig {
            scores: ScoreKind::prediction_scores(&[1, 5, 20]),
            ..ScoreConfig::default()
        },
        losses: vec![LossSpec::hit(1).unwrap(), LossSpec::hit(5).unwrap()],
        filter: SizeFilter::default(),
        allow_uncapped: false,
    };
    evaluate_pairs(instances.into_iter().zip(bundles.into_iter().map(Some)), &request, None).unwrap()
}

#[test]
fn oracle_and_shuffled_scorers() {
    let eval = synth_eval(2000, 1.0, 9);
    let losses = eval.loss_column(LossSpec::hit(1).unwrap()).unwrap();
    let oracle: Vec<f64> = losses.iter().map(|l| -l).collect();
    assert!(risk_coverage_curve(losses, &oracle).unwrap().rel_aurc.abs() < 1e-9);

    let base = risk_coverage_curve(losses, &oracle).unwrap();
    let mut rng = CounterRng::new(77);
    let mut order: Vec<usize> = (0..losses.len()).collect();
    let mut total = 0.0;
    for _ in 0..30 {
        rng.shuffle(&mut order);
        let a = aurc_for_order(losses, &order);
        total += (a - base.aurc_oracle) / (base.aurc_random - base.aurc_oracle);
    }
    assert!((total / 30.0 - 1.0).abs() < 0.05, "{}", total / 30.0);

    let entries = curves(&eval, &[ScoreKind::Conf, ScoreKind::NumCandidates]).unwrap();
    assert_eq!(entries.len(), 4);
    assert!(entries.iter().all(|e| e.curve.points.len() == 2000));
}

#[test]
fn sgr_zero_noise_full_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &["--n", "400", "--dim", "64", "--max-candidates", "16", "--cap", "16", "--noise", "0"]);
    let out = dir.path().join("sgr");
    let r = run_on(&sim, "sgr", &out, &["--target-risks", "0.1", "--scores", "conf,gap", "--k", "1"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = csv_rows(&out.join("sgr.csv"));
    assert_eq!(rows.len(), 3);
    for row in &rows[1..] {
        assert_eq!(row[4], "true");
        assert_eq!(row[11], "1.0");
        assert_eq!(row[12], "0.0");
    }
    assert!(out.join("sgr_risk_hit_1.svg").is_file());
}

#[test]
fn sgr_all_wrong_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let d = 64;
    let mut instances = Vec::new();
    let mut bundles = Vec::new();
    for i in 0..100 {
        let a = Fingerprint::from_indices(d, 0..8).unwrap();
        let b = Fingerprint::from_indices(d, 32..40).unwrap();
        let id = format!("w{i}");
        instances.push(Instance::new(&id, vec![a, b], 1).unwrap());
        let theta: Vec<f64> = (0..d).map(|j| if j < 8 { 0.9 } else { 0.05 }).collect();
        bundles.push(PredictionBundle::from_rows(&id, &[theta]).unwrap());
    }
    let ds = dir.path().join("d.jsonl");
    let pr = dir.path().join("p.bin");
    write_dataset(&ds, DatasetHeader { dim: d, cap: 256 }, &instances).unwrap();
    write_predictions(&pr, &bundles).unwrap();
    let out = dir.path().join("o");
    ok(&[
        "sgr",
        "--dataset",
        p(&ds),
        "--predictions",
        p(&pr),
        "--out",
        p(&out),
        "--target-risks",
        "0.2",
        "--k",
        "1",
        "--scores",
        "conf",
    ]);
    let rows = csv_rows(&out.join("sgr.csv"));
    assert_eq!(rows[1][4], "false");
    assert_eq!(rows[1][8], "0.0");
    assert_eq!(rows[1][11], "0.0");
}

#[test]
fn sgr_rejects_similarity_loss() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &["--n", "10", "--dim", "64", "--max-candidates", "8"]);
    let r = run_on(&sim, "sgr", &dir.path().join("o"), &["--losses", "cosine-cont"]);
    assert_eq!(r.status.code(), Some(2));
    let eval = synth_eval(50, 1.0, 0);
    let mut bad = eval.clone();
    bad.losses[0] = "tanimoto-cont".parse().unwrap();
    assert!(sgr_rows(&bad, &[ScoreKind::Conf], &[0.2], 0.001, 0).is_err());
    assert!(sgr_rows(&eval, &[ScoreKind::Conf], &[0.2], 1.0, 0).is_err());
    assert!(sgr_rows(&eval, &[ScoreKind::Conf], &[0.0], 0.001, 0).is_err());
}

#[test]
fn correlate_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &["--n", "60", "--dim", "64", "--max-candidates", "8"]);
    let out = dir.path().join("corr");
    let r = run_on(&sim, "correlate", &out, &["--scores", "num_candidates,bit_tot,conf"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = csv_rows(&out.join("spearman.csv"));
    assert_eq!(rows[0], ["score", "conf", "bit_tot", "num_candidates"]);
    assert_eq!(rows.len(), 4);
    for i in 0..3 {
        assert_eq!(rows[i + 1][i + 1], "1.0");
        for j in 0..3 {
            assert_eq!(rows[i + 1][j + 1], rows[j + 1][i + 1]);
        }
    }
    let svg = std::fs::read_to_string(out.join("spearman.svg")).unwrap();
    assert_eq!(svg.matches("stroke-width=\"2.5\"").count(), 4);

    let r = run_on(&sim, "correlate", &dir.path().join("c2"), &["--scores", "conf"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn correlation_of_identical_and_negated_columns() {
    let mut table = ScoreTable::new(vec![ScoreKind::Conf, ScoreKind::Gap]);
    for (i, v) in [0.3, 0.9, 0.1, 0.5, 0.7].into_iter().enumerate() {
        table.push(ScoreRow {
            id: format!("r{i}"),
            num_candidates: (v * 10.0) as usize,
            values: vec![v, v],
        });
    }
    let eval = Evaluation {
        table,
        ..Evaluation::default()
    };
    let c = correlation(&eval, &[ScoreKind::Conf, ScoreKind::Gap, ScoreKind::NumCandidates]).unwrap();
    assert_eq!(c.matrix[0][1], 1.0);
    assert_eq!(c.matrix[0][2], -1.0);
    assert_eq!(c.matrix[2][0], -1.0);
}

#[test]
fn simulate_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["simulate", "--n", "100", "--dim", "256", "--seed", "5", "--embedding-dim", "6", "--out", p(out)]);
    }
    for f in ["dataset.jsonl", "predictions.bin", "planted.csv", "train_embeddings.bin"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ds = load_dataset(a.join("dataset.jsonl"), LoadOptions::default()).unwrap();
    let preds = load_predictions(a.join("predictions.bin")).unwrap();
    assert_eq!(ds.instances.len(), 100);
    assert_eq!(preds.len(), 100);
    let planted = csv_rows(&a.join("planted.csv"));
    for (inst, row) in ds.instances.iter().zip(&planted[1..]) {
        assert!((1..=256).contains(&inst.num_candidates()));
        assert_eq!(row[0], inst.id);
        assert_eq!(row[1], inst.num_candidates().to_string());
    }
    assert!(ds.instances.iter().any(|i| i.num_candidates() > 128));
}

#[test]
fn simulate_validation_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    ok(&[
        "simulate", "--n", "400", "--dim", "64", "--max-candidates", "8", "--cap", "8", "--validate-sgr", "trials=200",
        "--delta", "0.1", "--out", p(&out),
    ]);
    let rows = csv_rows(&out.join("sgr_validation.csv"));
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        assert_eq!(r[2], "200");
        assert_eq!(r[3], "200");
        assert!(r[5].parse::<f64>().unwrap() <= 0.1);
    }
    let bad = rgsel(&["simulate", "--validate-sgr", "trials", "--out", p(&dir.path().join("x"))]);
    assert_eq!(bad.status.code(), Some(2));
    let small = rgsel(&["simulate", "--dim", "16", "--out", p(&dir.path().join("y"))]);
    assert_eq!(small.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &["--n", "600", "--dim", "64", "--max-candidates", "16", "--cap", "16"]);
    let one = dir.path().join("t1");
    let four = dir.path().join("t4");
    assert!(run_on(&sim, "score", &one, &["--threads", "1"]).status.success());
    assert!(run_on(&sim, "score", &four, &["--threads", "4"]).status.success());
    for f in ["scores.csv", "losses.csv", "summary.csv"] {
        assert_eq!(std::fs::read(one.join(f)).unwrap(), std::fs::read(four.join(f)).unwrap(), "{f}");
    }
}
