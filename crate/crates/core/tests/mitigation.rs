use proptest::prelude::*;
use qexcite::ansatz::RyAnsatz;
use qexcite::mitigate::{apply_readout_correction, calibrate_readout, purify, state_tomography, CalibrationMatrix};
use qexcite::sim::{NoiseModel, ShotBackend};
use std::f64::consts::PI;

fn exact_confusion(flip0: f64, flip1: f64) -> CalibrationMatrix {
    let single = |f: f64| [[1.0 - f, f], [f, 1.0 - f]];
    let (a, b) = (single(flip0), single(flip1));
    let columns = (0..4)
        .map(|j: usize| (0..4).map(|i: usize| a[i & 1][j & 1] * b[i >> 1][j >> 1]).collect())
        .collect();
    CalibrationMatrix::from_columns(columns, 0, 0).unwrap()
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01..1.0f64, 4).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correction_inverts_exact_confusion(p in distribution(), f0 in 0.0..0.2f64, f1 in 0.0..0.2f64) {
        let cal = exact_confusion(f0, f1);
        let m = cal.to_dmatrix();
        let raw = (&m * nalgebra::DVector::from_column_slice(&p)).iter().copied().collect::<Vec<_>>();
        let fixed = apply_readout_correction(&raw, &cal).unwrap();
        for (a, b) in fixed.iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn corrected_output_is_a_distribution(raw in distribution(), f in 0.0..0.3f64) {
        let fixed = apply_readout_correction(&raw, &exact_confusion(f, f)).unwrap();
        prop_assert!((fixed.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(fixed.iter().all(|&x| x >= -1e-12));
    }
}

#[test]
fn measured_calibration_approaches_confusion() {
    let backend = ShotBackend::new(8192, NoiseModel::symmetric(2, 0.03, 0.2));
    let cal = calibrate_readout(&backend, 2, 8192, 4).unwrap();
    let exact = exact_confusion(0.03, 0.03).to_dmatrix();
    let worst = (cal.to_dmatrix() - exact).abs().max();
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn purification_undoes_depolarizing_noise() {
    let a = RyAnsatz::new(2, 1);
    for (k, theta) in [[0.3, -0.8, 1.2, 0.1], [PI / 2.0, 0.4, -2.0, 1.0], [2.5, 2.5, -0.6, 0.9]].iter().enumerate() {
        let backend = ShotBackend::new(8192, NoiseModel::symmetric(2, 0.0, 0.1));
        let t = state_tomography(&a.build_circuit(theta).unwrap(), &backend, 8192, k as u64).unwrap();
        let p = purify(&t).unwrap();
        let f = p.state.fidelity(&a.state(theta).unwrap());
        assert!(f >= 0.995, "{f}");
        assert!((p.weight - (0.9 + 0.1 / 4.0)).abs() < 0.02, "{}", p.weight);
    }
}

#[test]
fn ill_conditioned_calibration_is_refused() {
    let cal = exact_confusion(0.5 - 1e-9, 0.0);
    assert!(apply_readout_correction(&[0.25; 4], &cal).is_err());
}
