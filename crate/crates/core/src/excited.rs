//! Excited states: qEOM over an excitation pool and VQD by overlap deflation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::{halton_point, multistart_points, parameter_shift, RyAnsatz};
use crate::chem::{map_operator, paired_double_excitation, single_excitation, ActiveSpaceIntegrals, MappingConfig};
use crate::error::{contract, Error, Result};
use crate::mitigate::{apply_readout_correction, CalibrationMatrix};
use crate::opt::{gradient_minimize, spsa_minimize, OptimizerConfig};
use crate::pauli::{expectation, PauliString, QubitOperator};
use crate::sim::{measure_paulis, Backend, Circuit, MeasurementBasis, SeedStream, ShotBackend, Statevector};
use crate::vqe::{repeated_energy, sampled_energy};
use crate::HARTREE_TO_EV;

/// Metric eigenvalues at or below this magnitude are discarded.
pub const METRIC_FLOOR: f64 = 1e-8;
pub const OVERLAP_CEILING: f64 = 0.1;
pub const VQD_RESTARTS: usize = 8;
/// Every this many objective evaluations an overlap snapshot is kept.
const OVERLAP_TRACE_STRIDE: usize = 10;

/// Qubit images of the excitation operators `E_μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationPool {
    pub labels: Vec<String>,
    pub operators: Vec<QubitOperator>,
}

impl ExcitationPool {
    /// Spin-conserving singles from occupied to virtual orbitals in each spin
    /// channel and the paired doubles, mapped with `mapping`. Operators whose
    /// image vanishes are dropped.
    pub fn fermionic(ints: &ActiveSpaceIntegrals, mapping: &MappingConfig) -> Result<Self> {
        let n = ints.n_spatial();
        let (na, nb) = (ints.n_alpha(), ints.n_beta());
        let mut labels = Vec::new();
        let mut operators = Vec::new();
        let mut push = |label: String, op: QubitOperator| {
            if !op.is_empty() {
                labels.push(label);
                operators.push(op);
            }
        };
        for (beta, occ) in [(false, na), (true, nb)] {
            let spin = if beta { 'b' } else { 'a' };
            for i in 0..occ {
                for a in occ..n {
                    push(format!("{i}{spin}->{a}{spin}"), map_operator(&single_excitation(n, i, a, beta), mapping)?);
                }
            }
        }
        for i in 0..na.min(nb) {
            for a in na.max(nb)..n {
                push(format!("{i}{i}->{a}{a}"), map_operator(&paired_double_excitation(n, i, a), mapping)?);
            }
        }
        Self::from_operators(labels, operators)
    }

    pub fn from_operators(labels: Vec<String>, operators: Vec<QubitOperator>) -> Result<Self> {
        if operators.is_empty() || labels.len() != operators.len() {
            return Err(contract("excitation pool must be non-empty with one label per operator"));
        }
        let n = operators[0].n_qubits();
        if let Some(op) = operators.iter().find(|o| o.n_qubits() != n) {
            return Err(Error::Dimension { expected: n, found: op.n_qubits() });
        }
        Ok(Self { labels, operators })
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.operators[0].n_qubits()
    }
}

/// A state used as qEOM reference or VQD deflation target.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceHandle {
    /// Re-preparable on a device as `U(θ)|0⟩`.
    Ansatz { ansatz: RyAnsatz, theta: Vec<f64> },
    /// Known only classically, such as a purified tomography result.
    Vector(Statevector),
}

impl ReferenceHandle {
    pub fn n_qubits(&self) -> usize {
        match self {
            ReferenceHandle::Ansatz { ansatz, .. } => ansatz.n_qubits,
            ReferenceHandle::Vector(v) => v.n_qubits(),
        }
    }

    /// The noiseless state the handle stands for.
    pub fn ideal_state(&self) -> Result<Statevector> {
        match self {
            ReferenceHandle::Ansatz { ansatz, theta } => ansatz.state(theta),
            ReferenceHandle::Vector(v) => Ok(v.clone()),
        }
    }

    fn circuit(&self) -> Result<Circuit> {
        match self {
            ReferenceHandle::Ansatz { ansatz, theta } => ansatz.build_circuit(theta),
            ReferenceHandle::Vector(_) => Err(contract("a classical vector cannot be prepared on a device")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitedStateResult {
    pub label: String,
    pub method: String,
    pub excitation_energy: f64,
    pub absolute_energy: f64,
    pub reference_energy: f64,
    pub theta: Option<Vec<f64>>,
    /// Overlaps with each deflated reference, sampled along the optimization.
    pub overlap_trace: Vec<Vec<f64>>,
    pub final_overlaps: Vec<f64>,
    pub s_squared: Option<f64>,
    pub warnings: Vec<String>,
}

impl ExcitedStateResult {
    /// The same excitation paired with another ground-state energy.
    pub fn rebase(&self, reference_energy: f64) -> Self {
        Self {
            reference_energy,
            absolute_energy: reference_energy + self.excitation_energy,
            ..self.clone()
        }
    }

    pub fn excitation_ev(&self) -> f64 {
        self.excitation_energy * HARTREE_TO_EV
    }
}

/// `E(S₁) − E(T₁)`; both results must share their reference energy.
pub fn delta_est(s1: &ExcitedStateResult, t1: &ExcitedStateResult) -> Result<f64> {
    if (s1.reference_energy - t1.reference_energy).abs() > 1e-12 {
        return Err(contract(format!(
            "results refer to different ground energies ({} and {})",
            s1.reference_energy, t1.reference_energy
        )));
    }
    Ok(s1.absolute_energy - t1.absolute_energy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QeomResult {
    pub t1: ExcitedStateResult,
    pub s1: ExcitedStateResult,
    /// All positive excitation energies, ascending.
    pub roots: Vec<f64>,
    /// `⟨S²⟩` of each root's state, when the backend exposes the reference.
    pub root_s_squared: Vec<Option<f64>>,
    pub reference_energy: f64,
    pub metric_eigenvalues: Vec<f64>,
    pub labelled_by_spin: bool,
    pub warnings: Vec<String>,
}

/// Operator list `L = [E…, E†…]`.
fn operator_list(pool: &ExcitationPool) -> Vec<QubitOperator> {
    pool.operators.iter().cloned().chain(pool.operators.iter().map(QubitOperator::adjoint)).collect()
}

fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()).scale(0.5)
}

/// Solutions `(ω, c)` of `M c = ω S c` with `ω > 0`, ascending, plus the
/// metric spectrum.
fn pseudo_eigen(m: &DMatrix<Complex64>, s: &DMatrix<Complex64>) -> Result<(Vec<(f64, DVector<Complex64>)>, Vec<f64>)> {
    let m = hermitize(m);
    let eig = hermitize(s).symmetric_eigen();
    let sigma: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let kept: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i].abs() > METRIC_FLOOR).collect();
    let ill = || {
        let abs: Vec<f64> = sigma.iter().map(|v| v.abs()).collect();
        let max = abs.iter().copied().fold(0.0, f64::max);
        let min = sigma.iter().copied().fold(f64::INFINITY, f64::min);
        let small = abs.iter().copied().fold(f64::INFINITY, f64::min);
        Error::IllConditionedReference { min_eigenvalue: min, condition: max / small }
    };
    if !kept.iter().any(|&i| sigma[i] > 0.0) {
        return Err(ill());
    }
    let r = kept.len();
    let n = sigma.len();
    // Columns U_k·|σ|^{-1/2}.
    let basis = DMatrix::from_fn(n, r, |i, k| eig.eigenvectors[(i, kept[k])] / sigma[kept[k]].abs().sqrt());
    let reduced = basis.adjoint() * &m * &basis;
    let a = DMatrix::from_fn(r, r, |i, j| reduced[(i, j)] * sigma[kept[i]].signum());
    // Real embedding [[Re, −Im], [Im, Re]] carries each eigenvalue twice.
    let embed = DMatrix::from_fn(2 * r, 2 * r, |i, j| {
        let z = a[(i % r, j % r)];
        match (i < r, j < r) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut real: Vec<f64> = embed
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-8 * scale)
        .map(|z| z.re)
        .collect();
    real.sort_by(f64::total_cmp);
    let mut roots = Vec::new();
    for pair in real.chunks(2) {
        let w = pair.iter().sum::<f64>() / pair.len() as f64;
        if w > METRIC_FLOOR {
            let shifted = &a - DMatrix::<Complex64>::identity(r, r) * Complex64::new(w, 0.0);
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.expect("requested");
            let k = svd.singular_values.imin();
            let y: DVector<Complex64> = v_t.row(k).adjoint();
            roots.push((w, &basis * y));
        }
    }
    if roots.len() < 2 {
        return Err(ill());
    }
    Ok((roots, sigma))
}

/// qEOM excitation energies from `M_ij = ⟨[L_i†, H, L_j]⟩` and
/// `S_ij = ⟨[L_i†, L_j]⟩` over the reference, with `L = [E…, E†…]`.
///
/// With `s_squared` on the statevector backend, T₁ and S₁ are the lowest
/// triplet and singlet roots; otherwise they are the two lowest roots.
pub fn qeom(
    h: &QubitOperator,
    reference: &ReferenceHandle,
    pool: &ExcitationPool,
    backend: &Backend,
    correction: Option<&CalibrationMatrix>,
    s_squared: Option<&QubitOperator>,
    seed: u64,
) -> Result<QeomResult> {
    if pool.is_empty() {
        return Err(contract("excitation pool is empty"));
    }
    for n in [pool.n_qubits(), reference.n_qubits()] {
        if n != h.n_qubits() {
            return Err(Error::Dimension { expected: h.n_qubits(), found: n });
        }
    }
    let list = operator_list(pool);
    let k = list.len();
    let mut m_ops = Vec::with_capacity(k * k);
    let mut s_ops = Vec::with_capacity(k * k);
    for li in &list {
        let li_dag = li.adjoint();
        for lj in &list {
            m_ops.push(QubitOperator::double_commutator(&li_dag, h, lj)?);
            s_ops.push(li_dag.commutator(lj)?);
        }
    }
    let (m_vals, s_vals, reference_energy, ref_state) = match backend {
        Backend::Statevector => {
            let psi = reference.ideal_state()?;
            let ev = |op: &QubitOperator| op.expectation_complex(&psi);
            let m = m_ops.iter().map(ev).collect::<Result<Vec<_>>>()?;
            let s = s_ops.iter().map(ev).collect::<Result<Vec<_>>>()?;
            (m, s, expectation(&psi, h)?, Some(psi))
        }
        Backend::Shots(device) => {
            let mut strings: Vec<PauliString> = Vec::new();
            for op in m_ops.iter().chain(&s_ops).chain(std::iter::once(h)) {
                strings.extend(op.terms().map(|(s, _)| *s));
            }
            let est = measure_paulis(&reference.circuit()?, &strings, device, seed, correction)?;
            let m = m_ops.iter().map(|o| est.combine(o)).collect::<Result<Vec<_>>>()?;
            let s = s_ops.iter().map(|o| est.combine(o)).collect::<Result<Vec<_>>>()?;
            (m, s, est.combine(h)?.re, None)
        }
    };
    let m = DMatrix::from_row_slice(k, k, &m_vals);
    let s = DMatrix::from_row_slice(k, k, &s_vals);
    let (roots, metric_eigenvalues) = pseudo_eigen(&m, &s)?;

    let mut warnings = Vec::new();
    let mut root_s2 = vec![None; roots.len()];
    if let (Some(psi), Some(s2)) = (&ref_state, s_squared) {
        for (slot, (_, c)) in root_s2.iter_mut().zip(&roots) {
            let mut amps = vec![Complex64::default(); psi.amplitudes().len()];
            for (cj, lj) in c.iter().zip(&list) {
                for (acc, v) in amps.iter_mut().zip(lj.apply(psi.amplitudes())?) {
                    *acc += cj * v;
                }
            }
            if let Ok(state) = Statevector::normalized(amps) {
                *slot = Some(expectation(&state, s2)?);
            }
        }
    }
    let near = |v: Option<f64>, target: f64| v.is_some_and(|x| (x - target).abs() <= crate::oracle::SPIN_TOLERANCE);
    let by_spin = (
        (0..roots.len()).find(|&i| near(root_s2[i], 2.0)),
        (0..roots.len()).find(|&i| near(root_s2[i], 0.0)),
    );
    let (ti, si, labelled_by_spin) = match by_spin {
        (Some(t), Some(s)) => (t, s, true),
        _ => {
            if ref_state.is_some() && s_squared.is_some() {
                warnings.push("spin labels unavailable; T1 and S1 assigned by energy order".into());
            }
            (0, 1, false)
        }
    };
    let make = |label: &str, i: usize| ExcitedStateResult {
        label: label.into(),
        method: "qeom".into(),
        excitation_energy: roots[i].0,
        absolute_energy: reference_energy + roots[i].0,
        reference_energy,
        theta: None,
        overlap_trace: Vec::new(),
        final_overlaps: Vec::new(),
        s_squared: root_s2[i],
        warnings: Vec::new(),
    };
    Ok(QeomResult {
        t1: make("T1", ti),
        s1: make("S1", si),
        roots: roots.iter().map(|r| r.0).collect(),
        root_s_squared: root_s2,
        reference_energy,
        metric_eigenvalues,
        labelled_by_spin,
        warnings,
    })
}

/// `μ·(⟨S²⟩ − target)²` added to the VQD cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinPenalty {
    pub operator: QubitOperator,
    pub target: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqdConfig {
    pub label: String,
    /// One weight per reference; `None` uses [`default_beta`] for all.
    pub betas: Option<Vec<f64>>,
    pub spin_penalty: Option<SpinPenalty>,
    /// Measured at the optimum for the record when given.
    pub s_squared: Option<QubitOperator>,
    pub overlap_ceiling: f64,
    pub restarts: usize,
    pub initial: Option<Vec<f64>>,
    /// Independent executions averaged into the final energy on shot backends.
    pub final_repetitions: u32,
}

impl VqdConfig {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            betas: None,
            spin_penalty: None,
            s_squared: None,
            overlap_ceiling: OVERLAP_CEILING,
            restarts: VQD_RESTARTS,
            initial: None,
            final_repetitions: 1,
        }
    }
}

/// Twice an upper bound on the spectral range of `h`.
pub fn default_beta(h: &QubitOperator) -> f64 {
    2.0 * 2.0 * h.one_norm(false)
}

fn exact_overlaps(psi: &Statevector, refs: &[Statevector]) -> Vec<f64> {
    refs.iter().map(|r| r.fidelity(psi)).collect()
}

/// All-zeros probability of `U†_ref U(θ)|0⟩`.
fn sampled_overlap(
    circuit: &Circuit,
    reference: &Circuit,
    device: &ShotBackend,
    seed: u64,
    correction: Option<&CalibrationMatrix>,
) -> Result<f64> {
    let c = circuit.then(&reference.inverse())?;
    let raw = device.sample(&c, &MeasurementBasis::computational(c.n_qubits()), seed)?.frequencies();
    Ok(match correction {
        Some(cal) => apply_readout_correction(&raw, cal)?[0],
        None => raw[0],
    })
}

/// Minimizes `⟨H⟩ + Σ_k β_k |⟨ψ(θ)|ψ_k⟩|²` (plus the spin penalty on the
/// statevector backend). On shot backends, device references are overlapped
/// by compute-uncompute and classical vectors against the ideal `ψ(θ)`.
#[allow(clippy::too_many_arguments)]
pub fn vqd(
    h: &QubitOperator,
    references: &[ReferenceHandle],
    cfg: &VqdConfig,
    a: &RyAnsatz,
    optimizer: &OptimizerConfig,
    backend: &Backend,
    correction: Option<&CalibrationMatrix>,
    reference_energy: f64,
) -> Result<ExcitedStateResult> {
    if h.n_qubits() != a.n_qubits {
        return Err(Error::Dimension { expected: a.n_qubits, found: h.n_qubits() });
    }
    if let Some(r) = references.iter().find(|r| r.n_qubits() != a.n_qubits) {
        return Err(Error::Dimension { expected: a.n_qubits, found: r.n_qubits() });
    }
    let betas = match &cfg.betas {
        Some(b) if b.len() != references.len() => {
            return Err(contract("one deflation weight per reference is required"))
        }
        Some(b) => b.clone(),
        None => vec![default_beta(h); references.len()],
    };
    if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(contract("deflation weights must be positive"));
    }
    if cfg.spin_penalty.is_some() && !backend.is_statevector() {
        return Err(contract("the spin penalty is only available on the statevector backend"));
    }
    if let Some(t) = &cfg.initial {
        if t.len() != a.n_params() {
            return Err(Error::Dimension { expected: a.n_params(), found: t.len() });
        }
    }
    let ideal_refs = references.iter().map(ReferenceHandle::ideal_state).collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();

    let (theta, energy, final_overlaps, overlap_trace, s_squared) = match backend {
        Backend::Statevector => {
            let linear = |t: &[f64]| -> Result<f64> {
                let psi = a.state(t)?;
                let ov = exact_overlaps(&psi, &ideal_refs);
                Ok(expectation(&psi, h)? + betas.iter().zip(&ov).map(|(b, o)| b * o).sum::<f64>())
            };
            let cost = |t: &[f64]| -> Result<f64> {
                let mut v = linear(t)?;
                if let Some(p) = &cfg.spin_penalty {
                    v += p.weight * (a.expectation(t, &p.operator)? - p.target).powi(2);
                }
                Ok(v)
            };
            let grad = |t: &[f64]| -> Result<Vec<f64>> {
                let mut g = parameter_shift(t, linear)?;
                if let Some(p) = &cfg.spin_penalty {
                    let dev = a.expectation(t, &p.operator)? - p.target;
                    for (gi, si) in g.iter_mut().zip(a.gradient(t, &p.operator)?) {
                        *gi += 2.0 * p.weight * dev * si;
                    }
                }
                Ok(g)
            };
            let mut starts = Vec::new();
            if let Some(t) = &cfg.initial {
                starts.push(t.clone());
            }
            starts.extend(multistart_points(a.n_params(), cfg.restarts.max(1)).into_iter().skip(1));
            let mut best: Option<(Vec<f64>, f64)> = None;
            for s in &starts {
                let run = gradient_minimize(cost, grad, s, optimizer)?;
                if best.as_ref().is_none_or(|b| run.value < b.1) {
                    best = Some((run.theta, run.value));
                }
            }
            let (theta, _) = best.expect("at least one start");
            let psi = a.state(&theta)?;
            let ov = exact_overlaps(&psi, &ideal_refs);
            let s2 = cfg.s_squared.as_ref().map(|op| expectation(&psi, op)).transpose()?;
            (theta.clone(), expectation(&psi, h)?, ov, Vec::new(), s2)
        }
        Backend::Shots(device) => {
            let ref_circuits: Vec<Option<Circuit>> = references
                .iter()
                .map(|r| match r {
                    ReferenceHandle::Ansatz { .. } => r.circuit().map(Some),
                    ReferenceHandle::Vector(_) => Ok(None),
                })
                .collect::<Result<_>>()?;
            let overlaps = |t: &[f64], seeds: &mut SeedStream| -> Result<Vec<f64>> {
                let c = a.build_circuit(t)?;
                let ideal = a.state(t)?;
                ref_circuits
                    .iter()
                    .zip(&ideal_refs)
                    .map(|(rc, iv)| match rc {
                        Some(rc) => sampled_overlap(&c, rc, device, seeds.next_seed(), correction),
                        None => Ok(iv.fidelity(&ideal)),
                    })
                    .collect()
            };
            let mut seeds = SeedStream::new(optimizer.seed ^ 0x5eed_0002);
            let mut trace = Vec::new();
            let mut evaluations = 0usize;
            let start = cfg.initial.clone().unwrap_or_else(|| halton_point(0, a.n_params()));
            let run = spsa_minimize(
                |t| {
                    let (e, _) = sampled_energy(h, a, t, device, seeds.next_seed(), correction)?;
                    let ov = overlaps(t, &mut seeds)?;
                    if evaluations.is_multiple_of(OVERLAP_TRACE_STRIDE) {
                        trace.push(ov.clone());
                    }
                    evaluations += 1;
                    Ok(e + betas.iter().zip(&ov).map(|(b, o)| b * o).sum::<f64>())
                },
                &start,
                optimizer,
            )?;
            let reps = cfg.final_repetitions;
            let (energy, _) = repeated_energy(h, a, &run.theta, device, &mut seeds, correction, reps)?;
            let ov = overlaps(&run.theta, &mut seeds)?;
            let s2 = match &cfg.s_squared {
                Some(op) => Some(repeated_energy(op, a, &run.theta, device, &mut seeds, correction, reps)?.0),
                None => None,
            };
            (run.theta, energy, ov, trace, s2)
        }
    };
    for (k, o) in final_overlaps.iter().enumerate() {
        if *o > cfg.overlap_ceiling {
            warnings.push(format!(
                "overlap {o:.4} with reference {k} exceeds ceiling {}",
                cfg.overlap_ceiling
            ));
        }
    }
    Ok(ExcitedStateResult {
        label: cfg.label.clone(),
        method: "vqd".into(),
        excitation_energy: energy - reference_energy,
        absolute_energy: energy,
        reference_energy,
        theta: Some(theta),
        overlap_trace,
        final_overlaps,
        s_squared,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{parse_fcidump, MappedSystem};
    use crate::oracle::{classify_spin, full_ci};

    const TWO_ORBITAL: &str = "&FCI NORB=2,NELEC=2,MS2=0,\n ORBSYM=1,1,\n ISYM=1,\n&END\n\
        0.6  1 1 1 1\n0.05 2 1 1 1\n 0.45 2 2 1 1\n0.015 2 1 2 1\n0.55 2 2 2 2\n\
        -1.2 1 1 0 0\n0.02 2 1 0 0\n-0.6 2 2 0 0\n0.7 0 0 0 0\n";

    fn system() -> MappedSystem {
        MappedSystem::new(parse_fcidump(TWO_ORBITAL).unwrap(), true).unwrap()
    }

    #[test]
    fn pool_has_singles_and_double() {
        let sys = system();
        let pool = ExcitationPool::fermionic(&sys.integrals, &sys.mapping).unwrap();
        assert_eq!(pool.labels, vec!["0a->1a", "0b->1b", "00->11"]);
        assert_eq!(pool.n_qubits(), 2);
    }

    #[test]
    fn qeom_on_exact_ground_state_matches_oracle() {
        let sys = system();
        let spec = classify_spin(&full_ci(&sys.hamiltonian).unwrap(), &sys.s_squared).unwrap();
        let pool = ExcitationPool::fermionic(&sys.integrals, &sys.mapping).unwrap();
        let reference = ReferenceHandle::Vector(spec.state_of("S0").unwrap().clone());
        let r = qeom(&sys.hamiltonian, &reference, &pool, &Backend::Statevector, None, Some(&sys.s_squared), 0)
            .unwrap();
        let e0 = spec.energy_of("S0").unwrap();
        assert!(r.labelled_by_spin);
        assert!((r.t1.excitation_energy - (spec.energy_of("T1").unwrap() - e0)).abs() < 1e-8);
        assert!((r.s1.excitation_energy - (spec.energy_of("S1").unwrap() - e0)).abs() < 1e-8);
    }

    #[test]
    fn vqd_finds_first_excited_state() {
        let sys = system();
        let spec = full_ci(&sys.hamiltonian).unwrap();
        let a = RyAnsatz::new(2, 1);
        let refs = [ReferenceHandle::Vector(spec.eigenvectors[0].clone())];
        let r = vqd(
            &sys.hamiltonian,
            &refs,
            &VqdConfig::new("T1"),
            &a,
            &OptimizerConfig::default(),
            &Backend::Statevector,
            None,
            spec.eigenvalues[0],
        )
        .unwrap();
        assert!((r.absolute_energy - spec.eigenvalues[1]).abs() < 1e-8);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn delta_est_requires_matching_references() {
        let base = ExcitedStateResult {
            label: "T1".into(),
            method: "qeom".into(),
            excitation_energy: 0.1,
            absolute_energy: -0.9,
            reference_energy: -1.0,
            theta: None,
            overlap_trace: vec![],
            final_overlaps: vec![],
            s_squared: None,
            warnings: vec![],
        };
        assert_eq!(delta_est(&base, &base).unwrap(), 0.0);
        assert!(delta_est(&base.rebase(-1.1), &base).is_err());
    }
}
