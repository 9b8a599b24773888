//! Ground-state VQE over the Ry ansatz.

use serde::{Deserialize, Serialize};

use crate::ansatz::{halton_point, RyAnsatz};
use crate::error::{contract, Error, Result};
use crate::mitigate::CalibrationMatrix;
use crate::opt::{gradient_minimize, spsa_minimize, OptimizerConfig, TraceEntry};
use crate::pauli::QubitOperator;
use crate::sim::{estimate_expectation_with, Backend, SeedStream, ShotBackend};

/// BFGS starts used on exact backends.
pub const STATEVECTOR_RESTARTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateResult {
    pub energy: f64,
    /// Standard error of `energy`; zero on the statevector backend.
    pub stderr: f64,
    pub theta: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    pub backend: String,
    pub readout_corrected: bool,
    pub seed: u64,
    pub shots: Option<u32>,
}

pub(crate) fn describe(backend: &Backend) -> String {
    match backend {
        Backend::Statevector => "statevector".into(),
        Backend::Shots(b) if b.noise.is_ideal() => "shots".into(),
        Backend::Shots(_) => "shots+noise".into(),
    }
}

/// Sampled `⟨H⟩` at `theta`, a fresh seed per call.
pub(crate) fn sampled_energy(
    h: &QubitOperator,
    a: &RyAnsatz,
    theta: &[f64],
    device: &ShotBackend,
    seed: u64,
    correction: Option<&CalibrationMatrix>,
) -> Result<(f64, f64)> {
    let est = estimate_expectation_with(&a.build_circuit(theta)?, h, device, seed, correction)?;
    Ok((est.value, est.stderr))
}

/// Mean of `repetitions` independent executions and its standard error.
pub(crate) fn repeated_energy(
    h: &QubitOperator,
    a: &RyAnsatz,
    theta: &[f64],
    device: &ShotBackend,
    seeds: &mut SeedStream,
    correction: Option<&CalibrationMatrix>,
    repetitions: u32,
) -> Result<(f64, f64)> {
    let r = repetitions.max(1);
    let (mut sum, mut var) = (0.0, 0.0);
    for _ in 0..r {
        let (v, e) = sampled_energy(h, a, theta, device, seeds.next_seed(), correction)?;
        sum += v;
        var += e * e;
    }
    Ok((sum / r as f64, var.sqrt() / r as f64))
}

/// Options beyond the optimizer settings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VqeOptions {
    /// Starting point; zeros when absent.
    pub initial: Option<Vec<f64>>,
    /// Independent executions averaged into the reported energy on shot
    /// backends (at least one).
    pub final_repetitions: u32,
}

/// Minimizes `⟨ψ(θ)|H|ψ(θ)⟩`. Exact backends use multi-start BFGS with
/// parameter-shift gradients; shot backends use SPSA, each evaluation drawing
/// a new seed from `optimizer.seed`. With `correction`, every sampled
/// distribution is readout-corrected first.
pub fn run_vqe(
    h: &QubitOperator,
    a: &RyAnsatz,
    backend: &Backend,
    optimizer: &OptimizerConfig,
    correction: Option<&CalibrationMatrix>,
    initial: Option<&[f64]>,
) -> Result<GroundStateResult> {
    let options = VqeOptions { initial: initial.map(<[f64]>::to_vec), final_repetitions: 1 };
    run_vqe_with(h, a, backend, optimizer, correction, &options)
}

pub fn run_vqe_with(
    h: &QubitOperator,
    a: &RyAnsatz,
    backend: &Backend,
    optimizer: &OptimizerConfig,
    correction: Option<&CalibrationMatrix>,
    options: &VqeOptions,
) -> Result<GroundStateResult> {
    let initial = options.initial.as_deref();
    if h.n_qubits() != a.n_qubits {
        return Err(Error::Dimension { expected: a.n_qubits, found: h.n_qubits() });
    }
    if !h.is_hermitian(1e-12) {
        return Err(contract("Hamiltonian must be Hermitian"));
    }
    let start = match initial {
        Some(t) if t.len() != a.n_params() => {
            return Err(Error::Dimension { expected: a.n_params(), found: t.len() })
        }
        Some(t) => t.to_vec(),
        None => vec![0.0; a.n_params()],
    };
    match backend {
        Backend::Statevector => {
            let mut best: Option<GroundStateResult> = None;
            for k in 0..STATEVECTOR_RESTARTS {
                let theta0 = if k == 0 { start.clone() } else { halton_point(k - 1, a.n_params()) };
                let run = gradient_minimize(|t| a.expectation(t, h), |t| a.gradient(t, h), &theta0, optimizer)?;
                if best.as_ref().is_none_or(|b| run.value < b.energy) {
                    best = Some(GroundStateResult {
                        energy: run.value,
                        stderr: 0.0,
                        theta: run.theta,
                        trace: run.trace,
                        backend: describe(backend),
                        readout_corrected: false,
                        seed: optimizer.seed,
                        shots: None,
                    });
                }
            }
            Ok(best.expect("at least one start"))
        }
        Backend::Shots(device) => {
            let mut seeds = SeedStream::new(optimizer.seed ^ 0x5eed_0001);
            let run = spsa_minimize(
                |t| Ok(sampled_energy(h, a, t, device, seeds.next_seed(), correction)?.0),
                &start,
                optimizer,
            )?;
            let (energy, stderr) =
                repeated_energy(h, a, &run.theta, device, &mut seeds, correction, options.final_repetitions)?;
            Ok(GroundStateResult {
                energy,
                stderr,
                theta: run.theta,
                trace: run.trace,
                backend: describe(backend),
                readout_corrected: correction.is_some(),
                seed: optimizer.seed,
                shots: Some(device.shots),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::NoiseModel;

    #[test]
    fn zz_ground_state_is_reached() {
        let h = QubitOperator::from_real_terms(2, &[(1.0, "ZZ")]).unwrap();
        let r = run_vqe(&h, &RyAnsatz::new(2, 1), &Backend::Statevector, &OptimizerConfig::default(), None, None)
            .unwrap();
        assert!((r.energy + 1.0).abs() < 1e-9);
        assert_eq!(r.theta.len(), 4);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let h = QubitOperator::from_real_terms(3, &[(1.0, "ZZI")]).unwrap();
        let r = run_vqe(&h, &RyAnsatz::new(2, 1), &Backend::Statevector, &OptimizerConfig::default(), None, None);
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }

    #[test]
    fn shot_run_is_reproducible() {
        let h = QubitOperator::from_real_terms(2, &[(0.5, "ZI"), (0.3, "XX")]).unwrap();
        let backend = Backend::Shots(ShotBackend::new(512, NoiseModel::ideal(2)));
        let cfg = OptimizerConfig { max_iterations: 30, seed: 4, ..OptimizerConfig::default() };
        let a = RyAnsatz::new(2, 1);
        let r1 = run_vqe(&h, &a, &backend, &cfg, None, None).unwrap();
        let r2 = run_vqe(&h, &a, &backend, &cfg, None, None).unwrap();
        assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r2).unwrap());
    }
}
