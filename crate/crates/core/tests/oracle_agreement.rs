use proptest::prelude::*;
use rgsel_core::model::{Fingerprint, Instance, PredictionBundle};
use rgsel_core::rng::CounterRng;
use rgsel_core::scoring::{bitwise_decomposition, rank_variance, retrieval_decomposition};
use rgsel_core::synth::oracle::{oracle_bitwise_decomposition, oracle_rank_variance};
use rgsel_core::synth::oracle_decomposition;

/// Random desk-scale instance and bundle; some samples are duplicated so
/// that zero-epistemic cases occur.
fn random_case(seed: u64) -> (Instance, PredictionBundle) {
    let mut rng = CounterRng::new(seed);
    let dim = rng.range_inclusive(4, 48);
    let m = rng.range_inclusive(1, 64);
    let s = rng.range_inclusive(1, 16);
    let candidates: Vec<Fingerprint> = (0..m)
        .map(|_| {
            let k = rng.range_inclusive(1, dim);
            Fingerprint::from_indices(dim, rng.sample_distinct(dim, k)).unwrap()
        })
        .collect();
    let true_index = rng.below(m as u64) as usize;
    let base: Vec<f64> = (0..dim).map(|_| rng.next_f64()).collect();
    let rows: Vec<Vec<f64>> = (0..s)
        .map(|_| {
            if rng.bernoulli(0.2) {
                base.clone()
            } else {
                (0..dim).map(|_| if rng.bernoulli(0.1) { 0.0 } else { rng.next_f64() }).collect()
            }
        })
        .collect();
    let mut rows = rows;
    if rows.iter().flatten().all(|&v| v == 0.0) {
        rows[0][0] = 0.5;
    }
    for r in rows.iter_mut() {
        if r.iter().all(|&v| v == 0.0) {
            r[0] = 0.25;
        }
    }
    (
        Instance::new("x", candidates, true_index).unwrap(),
        PredictionBundle::from_rows("x", &rows).unwrap(),
    )
}

#[test]
fn retrieval_decomposition_matches_oracle() {
    for seed in 0..300 {
        let (inst, b) = random_case(seed);
        for &t in &[0.003, 0.1, 1.0] {
            let got = retrieval_decomposition(&b, &inst, t).unwrap();
            let want = oracle_decomposition(&b, &inst, t).unwrap();
            assert!((got.aleatoric - want.aleatoric).abs() < 1e-9, "seed {seed}");
            assert!((got.epistemic_raw - want.epistemic).abs() < 1e-9, "seed {seed}");
            assert!((got.total - want.total).abs() < 1e-9, "seed {seed}");
        }
    }
}

#[test]
fn bitwise_decomposition_matches_oracle() {
    for seed in 0..300 {
        let (_, b) = random_case(seed);
        let got = bitwise_decomposition(&b).unwrap();
        let want = oracle_bitwise_decomposition(&b);
        assert!((got.aleatoric - want.aleatoric).abs() < 1e-9);
        assert!((got.epistemic_raw - want.epistemic).abs() < 1e-9);
    }
}

#[test]
fn rank_variance_matches_oracle() {
    for seed in 0..300 {
        let (inst, b) = random_case(seed);
        for k in [1, 5, 20] {
            let got = rank_variance(&b, &inst, k).unwrap();
            let want = oracle_rank_variance(&b, &inst, k).unwrap();
            assert!((got - want).abs() < 1e-9, "seed {seed} k {k}: {got} vs {want}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn decomposition_identities(seed in any::<u64>()) {
        let (inst, b) = random_case(seed);
        for d in [retrieval_decomposition(&b, &inst, 0.003).unwrap(), bitwise_decomposition(&b).unwrap()] {
            prop_assert_eq!(d.total, d.aleatoric + d.epistemic);
            prop_assert!(d.epistemic <= 0.0);
            prop_assert!(d.epistemic_raw <= 1e-9);
        }
        let r = retrieval_decomposition(&b, &inst, 0.003).unwrap();
        prop_assert!(-r.epistemic <= (b.n_samples() as f64).ln() + 1e-9);
    }
}
