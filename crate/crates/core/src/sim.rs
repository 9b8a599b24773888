//! Backends: exact statevector evaluation, density-matrix ground truth and
//! shot sampling under readout and global depolarizing noise.
//!
//! Bit ordering: bitstring character 0 is qubit 0, and amplitude indices are
//! little-endian in qubit 0 (qubit `k` is bit `k` of the index).

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::mitigate::{apply_readout_correction, CalibrationMatrix};
use crate::pauli::{Pauli, PauliString, QubitOperator};

/// Shot cap of the emulated devices.
pub const DEFAULT_MAX_SHOTS: u32 = 8192;

const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Ry { qubit: usize, theta: f64 },
    X(usize),
    H(usize),
    S(usize),
    Sdg(usize),
    Cx { control: usize, target: usize },
    Cz { a: usize, b: usize },
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Ry { qubit, .. } | Gate::X(qubit) | Gate::H(qubit) | Gate::S(qubit) | Gate::Sdg(qubit) => {
                vec![qubit]
            }
            Gate::Cx { control, target } => vec![control, target],
            Gate::Cz { a, b } => vec![a, b],
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Ry { qubit, theta } => Gate::Ry { qubit, theta: -theta },
            Gate::S(q) => Gate::Sdg(q),
            Gate::Sdg(q) => Gate::S(q),
            g => g,
        }
    }
}

/// An ordered gate list acting on `|0…0>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qs = gate.qubits();
        if let Some(q) = qs.iter().find(|&&q| q >= self.n_qubits) {
            return Err(contract(format!("gate qubit {q} out of range for {} qubits", self.n_qubits)));
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(contract("two-qubit gate on a single qubit"));
        }
        if let Gate::Ry { theta, .. } = gate {
            if !theta.is_finite() {
                return Err(contract("non-finite rotation angle"));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    /// The adjoint circuit `U†`.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// `other` applied after `self`.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        let mut gates = self.gates.clone();
        gates.extend_from_slice(&other.gates);
        Ok(Circuit {
            n_qubits: self.n_qubits,
            gates,
        })
    }
}

/// A normalised pure state on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn zero_state(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::default(); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::default(); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let s = Self::from_amplitudes_unchecked(amps);
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(contract(format!("state norm {norm} is not 1")));
        }
        Ok(s)
    }

    /// Normalises `amps`; fails on a zero vector.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(contract("cannot normalise a zero vector"));
        }
        Self::from_amplitudes(amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Skips the normalisation check; only for constructing invalid inputs deliberately.
    pub fn from_amplitudes_unchecked(amps: Vec<Complex64>) -> Self {
        assert!(amps.len().is_power_of_two() && amps.len() >= 2, "length must be 2^n");
        let n_qubits = amps.len().trailing_zeros() as usize;
        Self { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|<self|other>|²`.
    pub fn fidelity(&self, other: &Statevector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&mut self, gate: &Gate) {
        match *gate {
            Gate::Ry { qubit, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                self.apply_real_1q(qubit, [[c, -s], [s, c]]);
            }
            Gate::X(q) => self.apply_real_1q(q, [[0.0, 1.0], [1.0, 0.0]]),
            Gate::H(q) => self.apply_real_1q(q, [[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]]),
            Gate::S(q) => self.apply_phase(q, Complex64::new(0.0, 1.0)),
            Gate::Sdg(q) => self.apply_phase(q, Complex64::new(0.0, -1.0)),
            Gate::Cx { control, target } => {
                let (cb, tb) = (1usize << control, 1usize << target);
                for i in 0..self.amps.len() {
                    if i & cb != 0 && i & tb == 0 {
                        self.amps.swap(i, i | tb);
                    }
                }
            }
            Gate::Cz { a, b } => {
                let mask = (1usize << a) | (1usize << b);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
        }
    }

    fn apply_real_1q(&mut self, q: usize, m: [[f64; 2]; 2]) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = a * m[0][0] + b * m[0][1];
                self.amps[i | bit] = a * m[1][0] + b * m[1][1];
            }
        }
    }

    fn apply_phase(&mut self, q: usize, phase: Complex64) {
        let bit = 1usize << q;
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & bit != 0 {
                *amp *= phase;
            }
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amps);
        DensityMatrix {
            n_qubits: self.n_qubits,
            rho: &v * v.adjoint(),
        }
    }
}

/// A mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps `rho` after checking Hermiticity and unit trace within `1e-10`.
    pub fn new(rho: DMatrix<Complex64>) -> Result<Self> {
        let dim = rho.nrows();
        if rho.ncols() != dim || !dim.is_power_of_two() || dim < 2 {
            return Err(contract("density matrix must be square with dimension 2^n"));
        }
        let herm = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(contract(format!("density matrix not Hermitian ({herm:.2e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(contract(format!("density matrix trace {tr} is not 1")));
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            rho,
        })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self {
            n_qubits,
            rho: DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues in descending order with matching eigenvectors.
    pub fn eigen_descending(&self) -> (Vec<f64>, Vec<Statevector>) {
        let eig = self.rho.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order
            .iter()
            .map(|&i| Statevector::from_amplitudes_unchecked(eig.eigenvectors.column(i).iter().copied().collect()))
            .collect();
        (values, vectors)
    }

    /// `tr(ρ·op)` for an arbitrary operator.
    pub fn expectation(&self, op: &QubitOperator) -> Result<Complex64> {
        let m = op.to_matrix()?;
        Ok((&self.rho * m).trace())
    }
}

/// Per-qubit readout confusion (column-stochastic, `m[measured][prepared]`)
/// plus a global depolarizing probability applied once per circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub readout: Vec<[[f64; 2]; 2]>,
    pub depolarizing_p: f64,
}

impl NoiseModel {
    pub fn ideal(n_qubits: usize) -> Self {
        Self::symmetric(n_qubits, 0.0, 0.0)
    }

    /// Same bit-flip probability on every qubit for both outcomes.
    pub fn symmetric(n_qubits: usize, flip: f64, depolarizing_p: f64) -> Self {
        let m = [[1.0 - flip, flip], [flip, 1.0 - flip]];
        Self {
            readout: vec![m; n_qubits],
            depolarizing_p,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.readout.len() != n_qubits {
            return Err(Error::Dimension {
                expected: n_qubits,
                found: self.readout.len(),
            });
        }
        if !(0.0..=1.0).contains(&self.depolarizing_p) {
            return Err(contract(format!("depolarizing probability {} outside [0,1]", self.depolarizing_p)));
        }
        for m in &self.readout {
            for col in 0..2 {
                let (a, b) = (m[0][col], m[1][col]);
                if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || (a + b - 1.0).abs() > 1e-12 {
                    return Err(contract("readout confusion columns must be probability vectors"));
                }
            }
        }
        Ok(())
    }

    /// Same readout noise, no depolarizing.
    pub fn readout_only(&self) -> Self {
        Self {
            readout: self.readout.clone(),
            depolarizing_p: 0.0,
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.depolarizing_p == 0.0 && self.readout.iter().all(|m| m[0][1] == 0.0 && m[1][0] == 0.0)
    }

    /// Pushes a probability vector through the per-qubit confusion matrices.
    pub fn apply_readout(&self, probs: &mut [f64]) {
        for (q, m) in self.readout.iter().enumerate() {
            let bit = 1usize << q;
            for i in 0..probs.len() {
                if i & bit == 0 {
                    let (p0, p1) = (probs[i], probs[i | bit]);
                    probs[i] = m[0][0] * p0 + m[0][1] * p1;
                    probs[i | bit] = m[1][0] * p0 + m[1][1] * p1;
                }
            }
        }
    }
}

/// Per-qubit measurement basis; `I` letters are measured in Z.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeasurementBasis(pub Vec<Pauli>);

impl MeasurementBasis {
    pub fn computational(n_qubits: usize) -> Self {
        Self(vec![Pauli::Z; n_qubits])
    }

    pub fn from_string(s: &PauliString) -> Self {
        Self(s.letters().into_iter().map(|p| if p == Pauli::I { Pauli::Z } else { p }).collect())
    }

    /// Gates rotating each measured axis onto Z.
    pub fn rotation(&self) -> Circuit {
        let mut c = Circuit::new(self.0.len());
        for (q, p) in self.0.iter().enumerate() {
            match p {
                Pauli::X => c.gates.push(Gate::H(q)),
                Pauli::Y => {
                    c.gates.push(Gate::Sdg(q));
                    c.gates.push(Gate::H(q));
                }
                _ => {}
            }
        }
        c
    }
}

impl std::fmt::Display for MeasurementBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

/// Outcome histogram indexed by basis-state index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    n_qubits: usize,
    counts: Vec<u64>,
}

impl Counts {
    pub fn shots(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn by_index(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, bitstring: &str) -> u64 {
        index_of_bitstring(bitstring).map(|i| self.counts[i]).unwrap_or(0)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.shots() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Non-zero entries keyed by bitstring (character 0 = qubit 0).
    pub fn to_map(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (bitstring(i, self.n_qubits), c))
            .collect()
    }
}

pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits).map(|q| if index >> q & 1 == 1 { '1' } else { '0' }).collect()
}

fn index_of_bitstring(s: &str) -> Option<usize> {
    s.chars().enumerate().try_fold(0usize, |acc, (q, c)| match c {
        '0' => Some(acc),
        '1' => Some(acc | 1 << q),
        _ => None,
    })
}

/// Deterministic RNG for one stochastic call.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A reproducible stream of child seeds derived from one master seed.
#[derive(Debug, Clone)]
pub struct SeedStream(ChaCha8Rng);

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_seed(&mut self) -> u64 {
        self.0.next_u64()
    }
}

pub fn run_statevector(c: &Circuit) -> Statevector {
    let mut psi = Statevector::zero_state(c.n_qubits);
    for g in &c.gates {
        psi.apply(g);
    }
    psi
}

/// Applies a circuit to an arbitrary input state.
pub fn evolve(state: &Statevector, c: &Circuit) -> Result<Statevector> {
    if state.n_qubits != c.n_qubits {
        return Err(Error::Dimension {
            expected: c.n_qubits,
            found: state.n_qubits,
        });
    }
    let mut psi = state.clone();
    for g in &c.gates {
        psi.apply(g);
    }
    Ok(psi)
}

/// `ρ = (1−p)·U|0><0|U† + p·I/2ⁿ`; readout noise is not folded in.
pub fn run_density(c: &Circuit, noise: &NoiseModel) -> Result<DensityMatrix> {
    noise.validate(c.n_qubits)?;
    let p = noise.depolarizing_p;
    let pure = run_statevector(c).to_density();
    let dim = 1usize << c.n_qubits;
    let rho = pure.rho * Complex64::new(1.0 - p, 0.0)
        + DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(p / dim as f64, 0.0);
    Ok(DensityMatrix {
        n_qubits: c.n_qubits,
        rho,
    })
}

/// Outcome distribution seen by the classical register: Born probabilities
/// of the depolarized state in the rotated basis, then readout confusion.
pub fn outcome_probabilities(c: &Circuit, basis: &MeasurementBasis, noise: &NoiseModel) -> Result<Vec<f64>> {
    if basis.0.len() != c.n_qubits {
        return Err(Error::Dimension {
            expected: c.n_qubits,
            found: basis.0.len(),
        });
    }
    noise.validate(c.n_qubits)?;
    let psi = evolve(&run_statevector(c), &basis.rotation())?;
    let p = noise.depolarizing_p;
    let uniform = 1.0 / psi.amps.len() as f64;
    // The maximally mixed part is invariant under the basis rotation.
    let mut probs: Vec<f64> = psi.amps.iter().map(|a| (1.0 - p) * a.norm_sqr() + p * uniform).collect();
    noise.apply_readout(&mut probs);
    Ok(probs)
}

/// Multinomial sample of `shots` outcomes from `probs`.
pub fn sample_from_probabilities(probs: &[f64], shots: u32, seed: u64) -> Vec<u64> {
    let mut rng = rng_for(seed);
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots as u64;
    let mut mass = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(&mut rng);
        counts[i] = k;
        remaining -= k;
        mass -= p;
    }
    counts
}

/// Samples `shots` measurement outcomes of `c` in `basis`.
pub fn sample_counts(
    c: &Circuit,
    basis: &MeasurementBasis,
    shots: u32,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Counts> {
    sample_counts_capped(c, basis, shots, DEFAULT_MAX_SHOTS, noise, seed)
}

pub fn sample_counts_capped(
    c: &Circuit,
    basis: &MeasurementBasis,
    shots: u32,
    max_shots: u32,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Counts> {
    if shots == 0 || shots > max_shots {
        return Err(contract(format!("shots {shots} outside 1..={max_shots}")));
    }
    let probs = outcome_probabilities(c, basis, noise)?;
    Ok(Counts {
        n_qubits: c.n_qubits,
        counts: sample_from_probabilities(&probs, shots, seed),
    })
}

/// A sampled-hardware configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotBackend {
    pub shots: u32,
    pub max_shots: u32,
    pub noise: NoiseModel,
}

impl ShotBackend {
    pub fn new(shots: u32, noise: NoiseModel) -> Self {
        Self {
            shots,
            max_shots: DEFAULT_MAX_SHOTS,
            noise,
        }
    }

    pub fn sample(&self, c: &Circuit, basis: &MeasurementBasis, seed: u64) -> Result<Counts> {
        sample_counts_capped(c, basis, self.shots, self.max_shots, &self.noise, seed)
    }
}

/// Where expectation values come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Backend {
    Statevector,
    Shots(ShotBackend),
}

impl Backend {
    pub fn is_statevector(&self) -> bool {
        matches!(self, Backend::Statevector)
    }
}

/// Greedy qubit-wise-commuting partition of non-identity strings, in
/// canonical order.
pub fn group_qubitwise(strings: &[PauliString]) -> Vec<(MeasurementBasis, Vec<PauliString>)> {
    let mut groups: Vec<(PauliString, Vec<PauliString>)> = Vec::new();
    let mut sorted: Vec<PauliString> = strings.iter().filter(|s| !s.is_identity()).copied().collect();
    sorted.sort();
    sorted.dedup();
    for s in sorted {
        match groups.iter_mut().find(|(cover, _)| cover.qubitwise_commutes(&s)) {
            Some((cover, members)) => {
                let support = s.support();
                let x = (cover.x_mask() & !support) | s.x_mask();
                let z = (cover.z_mask() & !support) | s.z_mask();
                *cover = PauliString::from_masks(s.n_qubits(), x, z).expect("same width");
                members.push(s);
            }
            None => groups.push((s, vec![s])),
        }
    }
    groups
        .into_iter()
        .map(|(cover, members)| (MeasurementBasis::from_string(&cover), members))
        .collect()
}

/// Estimated expectation values of individual Pauli strings, with the outcome
/// distributions they were computed from.
#[derive(Debug, Clone)]
pub struct PauliEstimates {
    pub values: BTreeMap<PauliString, f64>,
    groups: Vec<MeasuredGroup>,
}

#[derive(Debug, Clone)]
struct MeasuredGroup {
    members: Vec<PauliString>,
    distribution: Vec<f64>,
    shots: u64,
}

impl PauliEstimates {
    pub fn value(&self, s: &PauliString) -> Option<f64> {
        if s.is_identity() {
            return Some(1.0);
        }
        self.values.get(s).copied()
    }

    /// `Σ c_P <P>` for any operator whose strings were measured.
    pub fn combine(&self, op: &QubitOperator) -> Result<Complex64> {
        let mut total = Complex64::default();
        for (s, c) in op.terms() {
            let v = self
                .value(s)
                .ok_or_else(|| contract(format!("string {s} was not measured")))?;
            total += c * v;
        }
        Ok(total)
    }

    /// Standard error of `Σ c_P <P>` for a Hermitian operator, from the
    /// per-setting outcome variance (correlations within a setting included).
    pub fn standard_error(&self, op: &QubitOperator) -> f64 {
        let mut var = 0.0;
        for g in &self.groups {
            let coeffs: Vec<(PauliString, f64)> = g
                .members
                .iter()
                .map(|s| (*s, op.coefficient(s).re))
                .filter(|(_, c)| *c != 0.0)
                .collect();
            if coeffs.is_empty() {
                continue;
            }
            let (mut m1, mut m2) = (0.0, 0.0);
            for (b, &p) in g.distribution.iter().enumerate() {
                let f: f64 = coeffs.iter().map(|(s, c)| c * s.parity_sign(b)).sum();
                m1 += p * f;
                m2 += p * f * f;
            }
            var += (m2 - m1 * m1).max(0.0) / g.shots as f64;
        }
        var.sqrt()
    }
}

/// Measures every string in `strings` on the shot backend, one setting per
/// qubit-wise-commuting group, optionally through readout correction.
pub fn measure_paulis(
    c: &Circuit,
    strings: &[PauliString],
    backend: &ShotBackend,
    seed: u64,
    correction: Option<&CalibrationMatrix>,
) -> Result<PauliEstimates> {
    let mut seeds = SeedStream::new(seed);
    let mut values = BTreeMap::new();
    let mut groups = Vec::new();
    for (basis, members) in group_qubitwise(strings) {
        let counts = backend.sample(c, &basis, seeds.next_seed())?;
        let raw = counts.frequencies();
        let distribution = match correction {
            Some(cal) => apply_readout_correction(&raw, cal)?,
            None => raw,
        };
        for s in &members {
            let v: f64 = distribution.iter().enumerate().map(|(b, p)| p * s.parity_sign(b)).sum();
            values.insert(*s, v);
        }
        groups.push(MeasuredGroup {
            members,
            distribution,
            shots: counts.shots(),
        });
    }
    Ok(PauliEstimates { values, groups })
}

/// An estimated expectation value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Sampled `<op>` with its standard error.
pub fn estimate_expectation(
    c: &Circuit,
    op: &QubitOperator,
    shots: u32,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Estimate> {
    estimate_expectation_with(c, op, &ShotBackend::new(shots, noise.clone()), seed, None)
}

pub fn estimate_expectation_with(
    c: &Circuit,
    op: &QubitOperator,
    backend: &ShotBackend,
    seed: u64,
    correction: Option<&CalibrationMatrix>,
) -> Result<Estimate> {
    if !op.is_hermitian(1e-12) {
        return Err(contract("estimate_expectation requires a Hermitian operator"));
    }
    if op.n_qubits() != c.n_qubits {
        return Err(Error::Dimension {
            expected: c.n_qubits,
            found: op.n_qubits(),
        });
    }
    let strings: Vec<PauliString> = op.terms().map(|(s, _)| *s).collect();
    if strings.iter().all(|s| s.is_identity()) {
        return Ok(Estimate {
            value: op.constant().re,
            stderr: 0.0,
        });
    }
    let est = measure_paulis(c, &strings, backend, seed, correction)?;
    Ok(Estimate {
        value: est.combine(op)?.re,
        stderr: est.standard_error(op),
    })
}
