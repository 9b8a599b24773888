mod common;

use proptest::prelude::*;
use qexcite::ansatz::{analytic_amplitudes_2q, RyAnsatz};
use qexcite::opt::gradient_check;
use qexcite::pauli::{expectation, QubitOperator};
use qexcite::sim::{
    estimate_expectation, outcome_probabilities, run_density, sample_counts, MeasurementBasis, NoiseModel,
};
use std::f64::consts::PI;

fn arb_theta() -> impl Strategy<Value = [f64; 4]> {
    [-PI..PI, -PI..PI, -PI..PI, -PI..PI]
}

fn arb_operator() -> impl Strategy<Value = QubitOperator> {
    let labels = ["ZI", "IZ", "ZZ", "XX", "YY", "XI", "IX", "XZ", "ZX"];
    proptest::collection::vec(-1.0..1.0f64, labels.len()).prop_map(move |c| {
        let terms: Vec<(f64, &str)> = c.iter().copied().zip(labels).collect();
        QubitOperator::from_real_terms(2, &terms).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn circuit_matches_matrix_products(theta in arb_theta()) {
        let state = RyAnsatz::new(2, 1).state(&theta).unwrap();
        let want = common::ansatz_by_matrices(&theta);
        for (a, w) in state.amplitudes().iter().zip(want) {
            prop_assert!((a.re - w).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_amplitudes_match_matrix_products(theta in arb_theta()) {
        let got = analytic_amplitudes_2q(&theta);
        for (g, w) in got.iter().zip(common::ansatz_by_matrices(&theta)) {
            prop_assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_shift_matches_finite_differences(theta in arb_theta(), h in arb_operator()) {
        let a = RyAnsatz::new(2, 1);
        let grad = a.gradient(&theta, &h).unwrap();
        let dev = gradient_check(&mut |t| a.expectation(t, &h), &grad, &theta).unwrap();
        prop_assert!(dev < 1e-6, "{}", dev);
    }

    #[test]
    fn counts_sum_to_shots(theta in arb_theta(), shots in 1u32..4000, seed in any::<u64>()) {
        let c = RyAnsatz::new(2, 1).build_circuit(&theta).unwrap();
        let counts = sample_counts(&c, &MeasurementBasis::computational(2), shots, &NoiseModel::ideal(2), seed).unwrap();
        prop_assert_eq!(counts.shots(), shots as u64);
        prop_assert_eq!(counts.by_index().iter().sum::<u64>(), shots as u64);
    }

    #[test]
    fn noisy_probabilities_stay_normalized(theta in arb_theta(), flip in 0.0..0.3f64, p in 0.0..1.0f64) {
        let c = RyAnsatz::new(2, 1).build_circuit(&theta).unwrap();
        let probs = outcome_probabilities(&c, &MeasurementBasis::computational(2), &NoiseModel::symmetric(2, flip, p)).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(probs.iter().all(|&q| q >= -1e-15));
    }

    #[test]
    fn depolarizing_shrinks_traceless_expectations(theta in arb_theta(), p in 0.0..1.0f64, h in arb_operator()) {
        let c = RyAnsatz::new(2, 1).build_circuit(&theta).unwrap();
        let exact = expectation(&RyAnsatz::new(2, 1).state(&theta).unwrap(), &h).unwrap();
        let rho = run_density(&c, &NoiseModel::symmetric(2, 0.0, p)).unwrap();
        prop_assert!((rho.expectation(&h).unwrap().re - (1.0 - p) * exact).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_counts(theta in arb_theta(), seed in any::<u64>()) {
        let c = RyAnsatz::new(2, 1).build_circuit(&theta).unwrap();
        let basis = MeasurementBasis::computational(2);
        let noise = NoiseModel::symmetric(2, 0.02, 0.05);
        let a = sample_counts(&c, &basis, 1000, &noise, seed).unwrap();
        let b = sample_counts(&c, &basis, 1000, &noise, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn sampled_expectation_is_unbiased_within_error_bars() {
    let a = RyAnsatz::new(2, 1);
    let h = QubitOperator::from_real_terms(2, &[(0.4, "ZI"), (-0.3, "IZ"), (0.2, "ZZ"), (0.15, "XX")]).unwrap();
    let theta = [0.3, -1.1, 0.7, 2.0];
    let exact = a.expectation(&theta, &h).unwrap();
    let mut within = 0;
    for seed in 0..100 {
        let est = estimate_expectation(&a.build_circuit(&theta).unwrap(), &h, 8192, &NoiseModel::ideal(2), seed).unwrap();
        if (est.value - exact).abs() <= 2.0 * est.stderr {
            within += 1;
        }
    }
    assert!(within >= 88, "{within}/100 within 2 sigma");
}

#[test]
fn over_budget_shots_are_refused() {
    let c = RyAnsatz::new(2, 1).build_circuit(&[0.0; 4]).unwrap();
    assert!(sample_counts(&c, &MeasurementBasis::computational(2), 8193, &NoiseModel::ideal(2), 0).is_err());
}
