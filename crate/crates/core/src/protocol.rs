//! End-to-end pipelines: exact statevector runs and the device protocol with
//! its mitigation tiers.
//!
//! Device tiers, as (ground state, qEOM matrix elements):
//! `none` = (raw, raw), `readout` = (readout-corrected, raw),
//! `readout+qeom` = (readout-corrected, readout-corrected),
//! `tomography` = (purified, readout-corrected).
//! For VQD, `none` and `readout` deflate against re-prepared ansatz states,
//! while `tomography` deflates against purified tomography vectors and
//! reports both the measured and the purified excited-state energies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ansatz::{fit_parameters_to_state, FitResult, RyAnsatz, DEFAULT_FIT_RESTARTS};
use crate::chem::MappedSystem;
use crate::error::{contract, Error, Result};
use crate::excited::{default_beta, qeom, vqd, ExcitationPool, ExcitedStateResult, QeomResult, ReferenceHandle, SpinPenalty, VqdConfig};
use crate::mitigate::{calibrate_readout, purified_energy, purify, state_tomography, CalibrationMatrix, TomographyResult};
use crate::opt::OptimizerConfig;
use crate::sim::{Backend, SeedStream, ShotBackend, Statevector, DEFAULT_MAX_SHOTS};
use crate::vqe::{run_vqe, run_vqe_with, GroundStateResult, VqeOptions};

/// Weight of the statevector spin penalty.
pub const SPIN_PENALTY_WEIGHT: f64 = 1.0;
pub const DEFAULT_VQD_ITERATIONS: usize = 3000;
pub const DEFAULT_ENERGY_REPETITIONS: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mitigation {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "readout")]
    Readout,
    #[serde(rename = "readout+qeom")]
    ReadoutQeom,
    #[serde(rename = "tomography")]
    Tomography,
}

impl Mitigation {
    pub const ALL: [Mitigation; 4] = [Mitigation::None, Mitigation::Readout, Mitigation::ReadoutQeom, Mitigation::Tomography];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mitigation::None => "none",
            Mitigation::Readout => "readout",
            Mitigation::ReadoutQeom => "readout+qeom",
            Mitigation::Tomography => "tomography",
        }
    }

    fn corrects_ground(&self) -> bool {
        *self != Mitigation::None
    }

    fn corrects_qeom(&self) -> bool {
        matches!(self, Mitigation::ReadoutQeom | Mitigation::Tomography)
    }
}

impl fmt::Display for Mitigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mitigation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Mitigation::None),
            "readout" => Ok(Mitigation::Readout),
            "readout+qeom" => Ok(Mitigation::ReadoutQeom),
            "tomography" | "tomo" => Ok(Mitigation::Tomography),
            other => Err(Error::Config(format!("unknown mitigation '{other}'"))),
        }
    }
}

/// Everything a device run needs besides the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSettings {
    pub backend: ShotBackend,
    pub optimizer: OptimizerConfig,
    pub calibration_shots: u32,
    pub tomography_shots: u32,
    pub fit_restarts: usize,
    /// SPSA iterations for VQD, whose cost has a soft direction between the
    /// nearly degenerate excited states.
    pub vqd_iterations: usize,
    /// Executions averaged into each reported sampled energy.
    pub energy_repetitions: u32,
}

impl DeviceSettings {
    pub fn new(backend: ShotBackend) -> Self {
        Self {
            backend,
            optimizer: OptimizerConfig::default(),
            calibration_shots: DEFAULT_MAX_SHOTS,
            tomography_shots: DEFAULT_MAX_SHOTS,
            fit_restarts: DEFAULT_FIT_RESTARTS,
            vqd_iterations: DEFAULT_VQD_ITERATIONS,
            energy_repetitions: DEFAULT_ENERGY_REPETITIONS,
        }
    }
}

/// Seed for a named stage, independent of which stages run before it.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let tag = stage.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    SeedStream::new(seed ^ tag).next_seed()
}

fn optimizer_for(settings: &DeviceSettings, seed: u64, stage: &str) -> OptimizerConfig {
    OptimizerConfig { seed: stage_seed(seed, stage), ..settings.optimizer.clone() }
}

/// A state known through tomography.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurifiedRecord {
    pub tomography: TomographyResult,
    pub weight: f64,
    pub amplitudes_re: Vec<f64>,
    pub amplitudes_im: Vec<f64>,
    /// Fidelity with the noiseless output of the tomographed circuit.
    pub circuit_fidelity: f64,
    pub energy: f64,
    pub warning: Option<String>,
}

impl PurifiedRecord {
    pub fn state(&self) -> Result<Statevector> {
        Statevector::normalized(
            self.amplitudes_re
                .iter()
                .zip(&self.amplitudes_im)
                .map(|(r, i)| num_complex::Complex64::new(*r, *i))
                .collect(),
        )
    }
}

fn tomograph(
    sys: &MappedSystem,
    a: &RyAnsatz,
    theta: &[f64],
    settings: &DeviceSettings,
    seed: u64,
) -> Result<PurifiedRecord> {
    let circuit = a.build_circuit(theta)?;
    let tomography = state_tomography(&circuit, &settings.backend, settings.tomography_shots, seed)?;
    let p = purify(&tomography)?;
    let energy = purified_energy(&p.state, &sys.hamiltonian)?;
    Ok(PurifiedRecord {
        circuit_fidelity: p.state.fidelity(&a.state(theta)?),
        weight: p.weight,
        amplitudes_re: p.state.amplitudes().iter().map(|z| z.re).collect(),
        amplitudes_im: p.state.amplitudes().iter().map(|z| z.im).collect(),
        energy,
        warning: p.warning,
        tomography,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStage {
    pub mitigation: Mitigation,
    /// The tier's ground state; for tomography its energy is the purified one.
    pub result: GroundStateResult,
    /// The cold-start run every mitigated tier warm-starts from.
    pub unmitigated: GroundStateResult,
    pub calibration: Option<CalibrationMatrix>,
    pub purified: Option<PurifiedRecord>,
    pub fit: Option<FitResult>,
}

impl GroundStage {
    /// A device-preparable handle to the ground state.
    pub fn circuit_reference(&self, a: &RyAnsatz) -> ReferenceHandle {
        let theta = match &self.fit {
            Some(f) => f.theta.clone(),
            None => self.result.theta.clone(),
        };
        ReferenceHandle::Ansatz { ansatz: a.clone(), theta }
    }
}

/// Ground-state VQE on the device at the given tier.
pub fn device_ground_state(
    sys: &MappedSystem,
    a: &RyAnsatz,
    settings: &DeviceSettings,
    mitigation: Mitigation,
    seed: u64,
) -> Result<GroundStage> {
    let backend = Backend::Shots(settings.backend.clone());
    let h = &sys.hamiltonian;
    let reps = settings.energy_repetitions;
    let unmitigated = run_vqe_with(
        h,
        a,
        &backend,
        &optimizer_for(settings, seed, "vqe"),
        None,
        &VqeOptions { initial: None, final_repetitions: reps },
    )?;
    if !mitigation.corrects_ground() {
        return Ok(GroundStage {
            mitigation,
            result: unmitigated.clone(),
            unmitigated,
            calibration: None,
            purified: None,
            fit: None,
        });
    }
    let cal = calibrate_readout(&settings.backend, a.n_qubits, settings.calibration_shots, stage_seed(seed, "calibration"))?;
    let corrected = run_vqe_with(
        h,
        a,
        &backend,
        &optimizer_for(settings, seed, "vqe-readout"),
        Some(&cal),
        &VqeOptions { initial: Some(unmitigated.theta.clone()), final_repetitions: reps },
    )?;
    if mitigation != Mitigation::Tomography {
        return Ok(GroundStage {
            mitigation,
            result: corrected,
            unmitigated,
            calibration: Some(cal),
            purified: None,
            fit: None,
        });
    }
    let purified = tomograph(sys, a, &corrected.theta, settings, stage_seed(seed, "tomography-s0"))?;
    let fit = fit_parameters_to_state(&purified.state()?, a, settings.fit_restarts)?;
    let result = GroundStateResult { energy: purified.energy, stderr: 0.0, ..corrected };
    Ok(GroundStage {
        mitigation,
        result,
        unmitigated,
        calibration: Some(cal),
        purified: Some(purified),
        fit: Some(fit),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QeomStage {
    pub ground: GroundStage,
    pub qeom: QeomResult,
    /// T₁ and S₁ paired with the tier's ground energy.
    pub t1: ExcitedStateResult,
    pub s1: ExcitedStateResult,
}

pub fn device_qeom(
    sys: &MappedSystem,
    a: &RyAnsatz,
    settings: &DeviceSettings,
    mitigation: Mitigation,
    seed: u64,
) -> Result<QeomStage> {
    let ground = device_ground_state(sys, a, settings, mitigation, seed)?;
    let pool = ExcitationPool::fermionic(&sys.integrals, &sys.mapping)?;
    let correction = if mitigation.corrects_qeom() { ground.calibration.as_ref() } else { None };
    let result = qeom(
        &sys.hamiltonian,
        &ground.circuit_reference(a),
        &pool,
        &Backend::Shots(settings.backend.clone()),
        correction,
        None,
        stage_seed(seed, "qeom"),
    )?;
    let e0 = ground.result.energy;
    Ok(QeomStage { t1: result.t1.rebase(e0), s1: result.s1.rebase(e0), qeom: result, ground })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqdStage {
    pub ground: GroundStage,
    /// The tier's reported states; under tomography, purified energies.
    pub t1: ExcitedStateResult,
    pub s1: ExcitedStateResult,
    /// Under tomography: the same runs with sampled energies.
    pub measured: Option<(ExcitedStateResult, ExcitedStateResult)>,
    pub purified_t1: Option<PurifiedRecord>,
    pub purified_s1: Option<PurifiedRecord>,
}

pub fn device_vqd(
    sys: &MappedSystem,
    a: &RyAnsatz,
    settings: &DeviceSettings,
    mitigation: Mitigation,
    seed: u64,
) -> Result<VqdStage> {
    if mitigation == Mitigation::ReadoutQeom {
        return Err(contract("readout+qeom mitigation applies to qEOM only"));
    }
    let ground = device_ground_state(sys, a, settings, mitigation, seed)?;
    let backend = Backend::Shots(settings.backend.clone());
    let h = &sys.hamiltonian;
    let e0 = ground.result.energy;
    let correction = ground.calibration.as_ref();
    let purify_refs = mitigation == Mitigation::Tomography;
    let s0 = match &ground.purified {
        Some(p) => ReferenceHandle::Vector(p.state()?),
        None => ground.circuit_reference(a),
    };
    let run = |label: &str, refs: &[ReferenceHandle]| {
        let cfg = VqdConfig {
            s_squared: Some(sys.s_squared.clone()),
            final_repetitions: settings.energy_repetitions,
            ..VqdConfig::new(label)
        };
        let optimizer = OptimizerConfig {
            max_iterations: settings.vqd_iterations,
            ..optimizer_for(settings, seed, &format!("vqd-{label}"))
        };
        vqd(h, refs, &cfg, a, &optimizer, &backend, correction, e0)
    };
    let t1 = run("T1", std::slice::from_ref(&s0))?;
    let t1_theta = t1.theta.clone().expect("vqd records theta");
    let purified_t1 = if purify_refs {
        Some(tomograph(sys, a, &t1_theta, settings, stage_seed(seed, "tomography-t1"))?)
    } else {
        None
    };
    let t1_ref = match &purified_t1 {
        Some(p) => ReferenceHandle::Vector(p.state()?),
        None => ReferenceHandle::Ansatz { ansatz: a.clone(), theta: t1_theta },
    };
    let s1 = run("S1", &[s0, t1_ref])?;
    if !purify_refs {
        return Ok(VqdStage { ground, t1, s1, measured: None, purified_t1: None, purified_s1: None });
    }
    let s1_theta = s1.theta.clone().expect("vqd records theta");
    let purified_s1 = tomograph(sys, a, &s1_theta, settings, stage_seed(seed, "tomography-s1"))?;
    let reprice = |r: &ExcitedStateResult, energy: f64| ExcitedStateResult {
        absolute_energy: energy,
        excitation_energy: energy - e0,
        ..r.clone()
    };
    let pt1 = purified_t1.expect("tomography tier");
    Ok(VqdStage {
        t1: reprice(&t1, pt1.energy),
        s1: reprice(&s1, purified_s1.energy),
        measured: Some((t1, s1)),
        purified_t1: Some(pt1),
        purified_s1: Some(purified_s1),
        ground,
    })
}

/// qEOM on an exact ground state, labelled by spin and paired with its energy.
pub fn statevector_qeom(sys: &MappedSystem, ground: &GroundStateResult, a: &RyAnsatz) -> Result<QeomResult> {
    let s0 = ReferenceHandle::Ansatz { ansatz: a.clone(), theta: ground.theta.clone() };
    let pool = ExcitationPool::fermionic(&sys.integrals, &sys.mapping)?;
    let q = qeom(&sys.hamiltonian, &s0, &pool, &Backend::Statevector, None, Some(&sys.s_squared), 0)?;
    Ok(QeomResult { t1: q.t1.rebase(ground.energy), s1: q.s1.rebase(ground.energy), ..q })
}

/// VQD for T₁ (deflating S₀) then S₁ (deflating both), optionally with the
/// spin penalty steering each toward its target `⟨S²⟩`.
pub fn statevector_vqd(
    sys: &MappedSystem,
    ground: &GroundStateResult,
    a: &RyAnsatz,
    optimizer: &OptimizerConfig,
    spin_penalty: bool,
) -> Result<(ExcitedStateResult, ExcitedStateResult)> {
    let h = &sys.hamiltonian;
    let backend = Backend::Statevector;
    let s0 = ReferenceHandle::Ansatz { ansatz: a.clone(), theta: ground.theta.clone() };
    let cfg = |label: &str, target: f64, refs: usize| VqdConfig {
        spin_penalty: spin_penalty
            .then(|| SpinPenalty { operator: sys.s_squared.clone(), target, weight: SPIN_PENALTY_WEIGHT }),
        s_squared: Some(sys.s_squared.clone()),
        betas: Some(vec![default_beta(h); refs]),
        ..VqdConfig::new(label)
    };
    let t1 = vqd(h, std::slice::from_ref(&s0), &cfg("T1", 2.0, 1), a, optimizer, &backend, None, ground.energy)?;
    let t1_ref = ReferenceHandle::Ansatz { ansatz: a.clone(), theta: t1.theta.clone().expect("vqd records theta") };
    let s1 = vqd(h, &[s0, t1_ref], &cfg("S1", 0.0, 2), a, optimizer, &backend, None, ground.energy)?;
    Ok((t1, s1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatevectorRun {
    pub ground: GroundStateResult,
    pub qeom: QeomResult,
    pub vqd_t1: ExcitedStateResult,
    pub vqd_s1: ExcitedStateResult,
}

/// Exact pipeline: VQE, then qEOM and VQD on its state.
pub fn statevector_run(sys: &MappedSystem, a: &RyAnsatz, optimizer: &OptimizerConfig) -> Result<StatevectorRun> {
    let ground = run_vqe(&sys.hamiltonian, a, &Backend::Statevector, optimizer, None, None)?;
    let qeom = statevector_qeom(sys, &ground, a)?;
    let (vqd_t1, vqd_s1) = statevector_vqd(sys, &ground, a, optimizer, true)?;
    Ok(StatevectorRun { ground, qeom, vqd_t1, vqd_s1 })
}
