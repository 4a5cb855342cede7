use proptest::prelude::*;
use rgsel_core::seleval::{aurc_for_order, risk_coverage_curve, spearman, spearman_matrix};

fn losses_and_kappa() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::sample::select(vec![0.0, 1.0]), n),
            prop::collection::vec(prop::sample::select(vec![0.0, 0.25, 0.5, 0.75, 1.0]), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn curve_bounds((losses, kappa) in losses_and_kappa()) {
        let c = risk_coverage_curve(&losses, &kappa).unwrap();
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        prop_assert_eq!(c.points.len(), losses.len());
        prop_assert!((c.points.last().unwrap().risk - mean).abs() < 1e-12);
        prop_assert!(c.aurc >= c.aurc_oracle - 1e-12);
        prop_assert!(c.aurc_oracle <= c.aurc_random + 1e-12);
        for p in &c.points {
            prop_assert!((0.0..=1.0).contains(&p.risk));
        }
    }

    #[test]
    fn oracle_scorer_has_zero_relative_area((losses, _) in losses_and_kappa()) {
        let kappa: Vec<f64> = losses.iter().map(|l| -l).collect();
        let c = risk_coverage_curve(&losses, &kappa).unwrap();
        prop_assert!(c.rel_aurc.abs() < 1e-9);
    }

    #[test]
    fn similarity_losses_in_unit_interval(losses in prop::collection::vec(0.0f64..=1.0, 2..50)) {
        let kappa: Vec<f64> = (0..losses.len()).map(|i| i as f64).collect();
        let c = risk_coverage_curve(&losses, &kappa).unwrap();
        prop_assert!(c.aurc >= c.aurc_oracle - 1e-12);
        prop_assert!((0.0..=1.0).contains(&c.aurc));
    }

    #[test]
    fn spearman_invariant_under_monotone_maps(x in prop::collection::vec(-10.0f64..10.0, 3..40), y in prop::collection::vec(-10.0f64..10.0, 3..40)) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        let r = spearman(x, y).unwrap();
        let xt: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let r2 = spearman(&xt, y).unwrap();
        if r.is_nan() {
            prop_assert!(r2.is_nan());
        } else {
            prop_assert!((r - r2).abs() < 1e-12);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((spearman(&neg, y).unwrap() + r).abs() < 1e-12);
        }
    }

    #[test]
    fn spearman_matrix_symmetric(cols in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 12), 1..6)) {
        let m = spearman_matrix(&cols).unwrap();
        for a in 0..cols.len() {
            for b in 0..cols.len() {
                prop_assert!(m[a][b].to_bits() == m[b][a].to_bits());
            }
        }
    }
}

#[test]
fn oracle_area_closed_form_at_half_error() {
    // perfect scorer, n/2 errors: area → 1/2 - ln(2)/2
    let n = 10_000;
    let losses: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
    let kappa: Vec<f64> = losses.iter().map(|l| -l).collect();
    let c = risk_coverage_curve(&losses, &kappa).unwrap();
    let want = 0.5 - 0.5 * std::f64::consts::LN_2;
    assert!((c.aurc - want).abs() < 2e-3);
    assert!(c.rel_aurc.abs() < 1e-9);
}

#[test]
fn random_orderings_average_to_one() {
    let n = 2_000;
    let losses: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
    let base = risk_coverage_curve(&losses, &vec![0.0; n]).unwrap();
    let mut rng = rgsel_core::rng::CounterRng::new(1);
    let mut total = 0.0;
    for _ in 0..100 {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let aurc = aurc_for_order(&losses, &order);
        total += (aurc - base.aurc_oracle) / (base.aurc_random - base.aurc_oracle);
    }
    assert!((total / 100.0 - 1.0).abs() < 0.05);
}
