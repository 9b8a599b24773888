//! Exact diagonalization and spin labelling, the reference for every solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{expectation, QubitOperator};
use crate::sim::Statevector;

/// How far `⟨S²⟩` may sit from `s(s+1)` before labelling fails.
pub const SPIN_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Statevector>,
    pub s_squared: Vec<Option<f64>>,
    pub labels: Vec<Option<String>>,
    pub warnings: Vec<String>,
}

/// Serializable view of a labelled spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub eigenvalues: Vec<f64>,
    pub s_squared: Vec<Option<f64>>,
    pub labels: Vec<Option<String>>,
}

impl Spectrum {
    pub fn summary(&self) -> SpectrumSummary {
        SpectrumSummary {
            eigenvalues: self.eigenvalues.clone(),
            s_squared: self.s_squared.clone(),
            labels: self.labels.clone(),
        }
    }

    pub fn energy_of(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l.as_deref() == Some(label))
            .map(|i| self.eigenvalues[i])
    }

    pub fn state_of(&self, label: &str) -> Option<&Statevector> {
        self.labels
            .iter()
            .position(|l| l.as_deref() == Some(label))
            .map(|i| &self.eigenvectors[i])
    }

    /// `E(S₁) − E(T₁)` of a labelled spectrum.
    pub fn delta_est(&self) -> Option<f64> {
        Some(self.energy_of("S1")? - self.energy_of("T1")?)
    }
}

/// Dense Hermitian diagonalization, eigenpairs ascending.
pub fn full_ci(h: &QubitOperator) -> Result<Spectrum> {
    let m = h.to_matrix()?;
    let herm = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-10 {
        return Err(crate::error::contract(format!("operator is not Hermitian ({herm:.2e})")));
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&i| {
            crate::mitigate::canonical_phase(&Statevector::from_amplitudes_unchecked(
                eig.eigenvectors.column(i).iter().copied().collect(),
            ))
        })
        .collect();
    let n = eigenvalues.len();
    Ok(Spectrum { eigenvalues, eigenvectors, s_squared: vec![None; n], labels: vec![None; n], warnings: Vec::new() })
}

/// Ascending eigenvalues of `h` restricted to the span of the given basis
/// states.
pub fn subspace_eigenvalues(h: &QubitOperator, indices: &[usize]) -> Result<Vec<f64>> {
    let m = h.to_matrix()?;
    if let Some(&i) = indices.iter().find(|&&i| i >= m.nrows()) {
        return Err(Error::Dimension { expected: m.nrows(), found: i + 1 });
    }
    let k = indices.len();
    let sub = nalgebra::DMatrix::from_fn(k, k, |a, b| m[(indices[a], indices[b])]);
    let mut vals: Vec<f64> = sub.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Attaches `⟨S²⟩` to every eigenvector and names S₀ (lowest singlet), T₁
/// (lowest triplet), S₁ (second singlet) and further states by spin and rank.
pub fn classify_spin(spec: &Spectrum, s2: &QubitOperator) -> Result<Spectrum> {
    let mut out = spec.clone();
    let mut singlets = 0;
    let mut triplets = 0;
    let mut others = 0;
    for (i, v) in spec.eigenvectors.iter().enumerate() {
        let value = expectation(v, s2)?;
        let s = ((1.0 + 4.0 * value.max(0.0)).sqrt() - 1.0) / 2.0;
        let s_round = (2.0 * s).round() / 2.0;
        let nearest = s_round * (s_round + 1.0);
        if (value - nearest).abs() > SPIN_TOLERANCE {
            return Err(Error::Classification { index: i, s_squared: value });
        }
        out.s_squared[i] = Some(value);
        out.labels[i] = Some(if nearest == 0.0 {
            singlets += 1;
            format!("S{}", singlets - 1)
        } else if nearest == 2.0 {
            triplets += 1;
            format!("T{triplets}")
        } else {
            others += 1;
            format!("X{others}")
        });
    }
    if let Ok(m) = commutator_norm(spec, s2) {
        if m > 1e-6 {
            out.warnings.push(format!("Hamiltonian and S² do not commute (residual {m:.2e})"));
        }
    }
    Ok(out)
}

/// Largest `|⟨i|S²|j⟩|(λ_i − λ_j)|` over eigenpairs, a proxy for `‖[H, S²]‖`.
fn commutator_norm(spec: &Spectrum, s2: &QubitOperator) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (i, vi) in spec.eigenvectors.iter().enumerate() {
        let s2v = s2.apply(vi.amplitudes())?;
        for (j, vj) in spec.eigenvectors.iter().enumerate() {
            let elem: num_complex::Complex64 =
                vj.amplitudes().iter().zip(&s2v).map(|(a, b)| a.conj() * b).sum();
            worst = worst.max(elem.norm() * (spec.eigenvalues[i] - spec.eigenvalues[j]).abs());
        }
    }
    Ok(worst)
}
