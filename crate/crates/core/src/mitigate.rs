//! Readout calibration with simplex-constrained least-squares correction, and
//! two-qubit state tomography with largest-eigenvector purification.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::pauli::{expectation, Pauli, PauliString, QubitOperator};
use crate::sim::{Circuit, DensityMatrix, Gate, MeasurementBasis, SeedStream, ShotBackend, Statevector};

/// Largest condition number at which correction is still attempted.
pub const MAX_CONDITION: f64 = 1e6;
pub const DEGENERACY_GAP: f64 = 1e-6;

/// Column `j` is the outcome distribution observed after preparing `|j⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMatrix {
    pub n_qubits: usize,
    /// Row-major `2ⁿ×2ⁿ`, `matrix[i][j] = P(measure i | prepared j)`.
    pub matrix: Vec<Vec<f64>>,
    pub shots_per_column: u32,
    pub seed: u64,
}

impl CalibrationMatrix {
    pub fn from_columns(columns: Vec<Vec<f64>>, shots_per_column: u32, seed: u64) -> Result<Self> {
        let dim = columns.len();
        if !dim.is_power_of_two() || dim < 2 || columns.iter().any(|c| c.len() != dim) {
            return Err(contract("calibration matrix must be 2^n square"));
        }
        for c in &columns {
            let sum: f64 = c.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(contract("calibration columns must be probability vectors"));
            }
        }
        let matrix = (0..dim).map(|i| (0..dim).map(|j| columns[j][i]).collect()).collect();
        Ok(Self { n_qubits: dim.trailing_zeros() as usize, matrix, shots_per_column, seed })
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let matrix = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self { n_qubits, matrix, shots_per_column: 0, seed: 0 }
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.matrix[i][j])
    }

    /// Ratio of extreme singular values; infinite when singular.
    pub fn condition_number(&self) -> f64 {
        let sv = self.to_dmatrix().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

fn preparation_circuit(n_qubits: usize, index: usize) -> Circuit {
    let mut c = Circuit::new(n_qubits);
    for q in 0..n_qubits {
        if index >> q & 1 == 1 {
            c.push(Gate::X(q)).expect("qubit in range");
        }
    }
    c
}

/// Prepares each basis state and records its measured distribution. The
/// preparations contain only X gates, so only readout noise acts on them.
pub fn calibrate_readout(backend: &ShotBackend, n_qubits: usize, shots: u32, seed: u64) -> Result<CalibrationMatrix> {
    let device = ShotBackend { shots, max_shots: backend.max_shots, noise: backend.noise.readout_only() };
    let mut seeds = SeedStream::new(seed);
    let basis = MeasurementBasis::computational(n_qubits);
    let columns = (0..1usize << n_qubits)
        .map(|j| Ok(device.sample(&preparation_circuit(n_qubits, j), &basis, seeds.next_seed())?.frequencies()))
        .collect::<Result<Vec<_>>>()?;
    let mut cal = CalibrationMatrix::from_columns(columns.clone(), shots, seed);
    if cal.is_err() {
        // Frequencies can miss unit sum by rounding; renormalise exactly.
        let fixed = columns
            .into_iter()
            .map(|c| {
                let s: f64 = c.iter().sum();
                c.into_iter().map(|v| v / s).collect()
            })
            .collect();
        cal = CalibrationMatrix::from_columns(fixed, shots, seed);
    }
    cal
}

/// `argmin ‖A·p − raw‖₂` over the probability simplex.
pub fn apply_readout_correction(raw: &[f64], cal: &CalibrationMatrix) -> Result<Vec<f64>> {
    let d = cal.dim();
    if raw.len() != d {
        return Err(Error::Dimension { expected: d, found: raw.len() });
    }
    let total: f64 = raw.iter().sum();
    if (total - 1.0).abs() > 1e-9 || raw.iter().any(|v| *v < 0.0) {
        return Err(contract("raw frequencies must form a distribution"));
    }
    let condition = cal.condition_number();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::CorrectionUnreliable { condition });
    }
    let a = cal.to_dmatrix();
    let q = a.transpose() * &a;
    let c = a.transpose() * DVector::from_column_slice(raw);
    Ok(simplex_least_squares(&q, &c))
}

/// Primal active-set solve of `min ½pᵀQp − cᵀp` s.t. `Σp = 1`, `p ≥ 0`, for
/// positive-definite `Q`.
fn simplex_least_squares(q: &DMatrix<f64>, c: &DVector<f64>) -> Vec<f64> {
    let d = c.len();
    let tol = 1e-13;
    let mut p = DVector::from_element(d, 1.0 / d as f64);
    let mut active = vec![false; d];
    for _ in 0..(10 * d + 50) {
        let free: Vec<usize> = (0..d).filter(|&i| !active[i]).collect();
        let k = free.len();
        let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
        let mut rhs = DVector::<f64>::zeros(k + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                kkt[(r, s)] = q[(i, j)];
            }
            kkt[(r, k)] = 1.0;
            kkt[(k, r)] = 1.0;
            rhs[r] = c[i];
        }
        rhs[k] = 1.0;
        let sol = kkt.lu().solve(&rhs).expect("KKT system of a positive-definite QP is regular");
        let mut target = DVector::<f64>::zeros(d);
        for (r, &i) in free.iter().enumerate() {
            target[i] = sol[r];
        }
        if free.iter().all(|&i| target[i] >= -tol) {
            p = target.map(|v| v.max(0.0));
            let nu = -sol[k];
            let grad = q * &p - c;
            // Multiplier of p_i ≥ 0 is grad_i − ν for bound indices.
            let release = (0..d)
                .filter(|&i| active[i])
                .map(|i| (i, grad[i] - nu))
                .filter(|(_, m)| *m < -1e-12)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match release {
                Some((i, _)) => active[i] = false,
                None => break,
            }
        } else {
            let mut step = 1.0;
            let mut block = None;
            for &i in &free {
                if target[i] < -tol {
                    let s = p[i] / (p[i] - target[i]);
                    if s < step {
                        step = s;
                        block = Some(i);
                    }
                }
            }
            p = &p + (&target - &p) * step;
            if let Some(i) = block {
                active[i] = true;
                p[i] = 0.0;
            }
        }
    }
    let sum: f64 = p.iter().sum();
    p.iter().map(|v| v.max(0.0) / sum).collect()
}

/// The nine product bases and fifteen Pauli expectations of a two-qubit state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    #[serde(skip)]
    pub rho: Option<DensityMatrix>,
    /// Row-major real and imaginary parts of ρ.
    pub rho_re: Vec<f64>,
    pub rho_im: Vec<f64>,
    pub pauli_expectations: Vec<(PauliString, f64)>,
    pub shots_per_setting: u32,
    /// Smallest eigenvalue of the linear-inversion estimate.
    pub min_eigenvalue: f64,
}

impl TomographyResult {
    pub fn density(&self) -> Result<DensityMatrix> {
        if let Some(r) = &self.rho {
            return Ok(r.clone());
        }
        let d = (self.rho_re.len() as f64).sqrt() as usize;
        let m = DMatrix::from_fn(d, d, |i, j| Complex64::new(self.rho_re[i * d + j], self.rho_im[i * d + j]));
        DensityMatrix::new(m)
    }
}

/// Linear-inversion tomography of the two-qubit output of `c`, from raw
/// (uncorrected) counts in all nine bases of {X, Y, Z}².
pub fn state_tomography(c: &Circuit, backend: &ShotBackend, shots_per_setting: u32, seed: u64) -> Result<TomographyResult> {
    if c.n_qubits() != 2 {
        return Err(contract("state tomography is implemented for two qubits"));
    }
    let device = ShotBackend { shots: shots_per_setting, ..backend.clone() };
    let axes = [Pauli::X, Pauli::Y, Pauli::Z];
    let mut seeds = SeedStream::new(seed);
    let mut settings = Vec::with_capacity(9);
    for &a in &axes {
        for &b in &axes {
            let basis = MeasurementBasis(vec![a, b]);
            let freqs = device.sample(c, &basis, seeds.next_seed())?.frequencies();
            settings.push((basis, freqs));
        }
    }
    let mut expectations = Vec::with_capacity(15);
    for x in 0..4u64 {
        for z in 0..4u64 {
            let s = PauliString::from_masks(2, x, z)?;
            if s.is_identity() {
                continue;
            }
            let (mut sum, mut count) = (0.0, 0);
            for (basis, freqs) in &settings {
                let compatible = (0..2).all(|q| s.letter(q) == Pauli::I || s.letter(q) == basis.0[q]);
                if compatible {
                    sum += freqs.iter().enumerate().map(|(b, p)| p * s.parity_sign(b)).sum::<f64>();
                    count += 1;
                }
            }
            expectations.push((s, sum / count as f64));
        }
    }
    expectations.sort_by_key(|a| a.0);
    let mut op = QubitOperator::identity(2, 0.25);
    for (s, v) in &expectations {
        op.add_term(*s, Complex64::new(0.25 * v, 0.0))?;
    }
    let rho = DensityMatrix::new(op.to_matrix()?)?;
    let (vals, _) = rho.eigen_descending();
    let min_eigenvalue = *vals.last().expect("non-empty spectrum");
    let m = rho.matrix();
    Ok(TomographyResult {
        rho_re: m.transpose().iter().map(|z| z.re).collect(),
        rho_im: m.transpose().iter().map(|z| z.im).collect(),
        rho: Some(rho),
        pauli_expectations: expectations,
        shots_per_setting,
        min_eigenvalue,
    })
}

/// Largest-eigenvalue eigenvector of a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PurifiedState {
    pub state: Statevector,
    pub weight: f64,
    pub warning: Option<String>,
}

/// Fixes the global phase: the largest-magnitude amplitude (lowest index on
/// ties) becomes positive real.
pub fn canonical_phase(state: &Statevector) -> Statevector {
    let amps = state.amplitudes();
    let mut pivot = 0;
    for (i, a) in amps.iter().enumerate() {
        if a.norm() > amps[pivot].norm() + 1e-12 {
            pivot = i;
        }
    }
    let p = amps[pivot];
    let phase = if p.norm() > 0.0 { p.conj() / p.norm() } else { Complex64::new(1.0, 0.0) };
    Statevector::from_amplitudes_unchecked(amps.iter().map(|a| a * phase).collect())
}

pub fn purify_density(rho: &DensityMatrix) -> PurifiedState {
    let (vals, vecs) = rho.eigen_descending();
    let gap = vals[0] - vals[1];
    let warning = (gap < DEGENERACY_GAP)
        .then(|| format!("degenerate purification: top eigenvalue gap {gap:.3e}"));
    let top = &vecs[0];
    let n = top.norm();
    let normed = Statevector::from_amplitudes_unchecked(top.amplitudes().iter().map(|a| a / n).collect());
    PurifiedState { state: canonical_phase(&normed), weight: vals[0], warning }
}

pub fn purify(t: &TomographyResult) -> Result<PurifiedState> {
    Ok(purify_density(&t.density()?))
}

/// Exact `⟨state|H|state⟩`.
pub fn purified_energy(state: &Statevector, h: &QubitOperator) -> Result<f64> {
    expectation(state, h)
}
