//! Configured experiment runs, self-validating JSON records and CSV reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::{RyAnsatz, DEFAULT_FIT_RESTARTS};
use crate::chem::{parse_fcidump, ActiveSpaceIntegrals, MappedSystem};
use crate::error::{Error, Result};
use crate::excited::{ExcitedStateResult, QeomResult};
use crate::mitigate::CalibrationMatrix;
use crate::opt::OptimizerConfig;
use crate::oracle::{classify_spin, full_ci, Spectrum, SpectrumSummary};
use crate::protocol::{
    device_ground_state, device_qeom, device_vqd, statevector_qeom, statevector_vqd, DeviceSettings, Mitigation,
    PurifiedRecord, DEFAULT_ENERGY_REPETITIONS, DEFAULT_VQD_ITERATIONS,
};
use crate::sim::{Backend, NoiseModel, ShotBackend, DEFAULT_MAX_SHOTS};
use crate::vqe::{run_vqe, GroundStateResult};
use crate::{systems, CHEMICAL_ACCURACY, HARTREE_TO_EV};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Largest statevector deviation from the oracle a run may record.
pub const STATEVECTOR_TOLERANCE: f64 = 1e-6;
const BOOKKEEPING_TOLERANCE: f64 = 1e-12;
/// Relative slack when reloaded deviations are compared with stored ones.
const RELOAD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Vqe,
    Qeom,
    Vqd,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Vqe => "vqe",
            Algorithm::Qeom => "qeom",
            Algorithm::Vqd => "vqd",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vqe" => Ok(Algorithm::Vqe),
            "qeom" => Ok(Algorithm::Qeom),
            "vqd" => Ok(Algorithm::Vqd),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Statevector,
    Shots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// A bundled synthetic system.
    pub name: Option<String>,
    /// An FCIDUMP file; relative paths resolve against the config file.
    pub fcidump: Option<PathBuf>,
    pub reduce: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { name: None, fcidump: None, reduce: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub shots: u32,
    /// Symmetric per-qubit readout flip probability.
    pub readout_flip: f64,
    pub depolarizing: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self { kind: BackendKind::Statevector, shots: DEFAULT_MAX_SHOTS, readout_flip: 0.0, depolarizing: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub mitigation: Mitigation,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub ansatz_depth: usize,
    /// Spin penalty in VQD; statevector only, on by default there.
    pub spin_penalty: Option<bool>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Qeom,
            mitigation: Mitigation::None,
            seeds: vec![0],
            output: PathBuf::from("records"),
            ansatz_depth: 1,
            spin_penalty: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub calibration_shots: u32,
    pub tomography_shots: u32,
    pub fit_restarts: usize,
    pub vqd_iterations: usize,
    pub energy_repetitions: u32,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            calibration_shots: DEFAULT_MAX_SHOTS,
            tomography_shots: DEFAULT_MAX_SHOTS,
            fit_restarts: DEFAULT_FIT_RESTARTS,
            vqd_iterations: DEFAULT_VQD_ITERATIONS,
            energy_repetitions: DEFAULT_ENERGY_REPETITIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub backend: BackendConfig,
    pub run: RunConfig,
    pub optimizer: OptimizerConfig,
    pub device: DeviceConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, resolving a relative FCIDUMP path against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let Some(f) = cfg.system.fcidump.as_mut() {
            if f.is_relative() {
                *f = path.parent().unwrap_or(Path::new(".")).join(&*f);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        match (&self.system.name, &self.system.fcidump) {
            (Some(_), Some(_)) => return bad("give either system.name or system.fcidump, not both"),
            (None, None) => return bad("system.name or system.fcidump is required"),
            _ => {}
        }
        if !self.system.reduce {
            return bad("runs need the reduced mapping; use `map --no-reduce` to inspect the full one");
        }
        if self.run.seeds.is_empty() {
            return bad("run.seeds must not be empty");
        }
        if self.run.ansatz_depth == 0 {
            return bad("run.ansatz_depth must be at least 1");
        }
        let statevector = self.backend.kind == BackendKind::Statevector;
        if statevector && self.run.mitigation != Mitigation::None {
            return bad("mitigation applies to the shots backend only");
        }
        if self.run.mitigation == Mitigation::ReadoutQeom && self.run.algorithm != Algorithm::Qeom {
            return bad("readout+qeom mitigation applies to qeom only");
        }
        if self.run.spin_penalty == Some(true) && !(statevector && self.run.algorithm == Algorithm::Vqd) {
            return bad("the spin penalty is available for statevector vqd only");
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.backend.readout_flip) || !prob(self.backend.depolarizing) {
            return bad("noise probabilities must lie in [0, 1]");
        }
        if self.backend.shots == 0 || self.backend.shots > DEFAULT_MAX_SHOTS {
            return bad("backend.shots must lie in 1..=8192");
        }
        self.optimizer.validate()
    }

    pub fn system_label(&self) -> String {
        match (&self.system.name, &self.system.fcidump) {
            (Some(n), _) => n.clone(),
            (None, Some(p)) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            (None, None) => String::new(),
        }
    }

    pub fn integrals(&self) -> Result<ActiveSpaceIntegrals> {
        match (&self.system.name, &self.system.fcidump) {
            (Some(n), _) => systems::named(n),
            (None, Some(p)) => parse_fcidump(&std::fs::read_to_string(p)?),
            (None, None) => Err(Error::Config("no system given".into())),
        }
    }

    fn device_settings(&self, n_qubits: usize) -> DeviceSettings {
        let noise = NoiseModel::symmetric(n_qubits, self.backend.readout_flip, self.backend.depolarizing);
        DeviceSettings {
            optimizer: self.optimizer.clone(),
            calibration_shots: self.device.calibration_shots,
            tomography_shots: self.device.tomography_shots,
            fit_restarts: self.device.fit_restarts,
            vqd_iterations: self.device.vqd_iterations,
            energy_repetitions: self.device.energy_repetitions,
            ..DeviceSettings::new(ShotBackend::new(self.backend.shots, noise))
        }
    }
}

/// Energies of the three tracked states, Hartree.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateEnergies {
    pub s0: Option<f64>,
    pub t1: Option<f64>,
    pub s1: Option<f64>,
}

impl StateEnergies {
    pub fn get(&self, state: &str) -> Option<f64> {
        match state {
            "S0" => self.s0,
            "T1" => self.t1,
            "S1" => self.s1,
            _ => None,
        }
    }

    pub fn delta_est(&self) -> Option<f64> {
        Some(self.s1? - self.t1?)
    }

    fn from_spectrum(spec: &Spectrum) -> Self {
        Self { s0: spec.energy_of("S0"), t1: spec.energy_of("T1"), s1: spec.energy_of("S1") }
    }
}

/// Solver minus oracle, mHa.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deviations {
    pub s0: Option<f64>,
    pub t1: Option<f64>,
    pub s1: Option<f64>,
    /// Excitation energies `E − E(S₀)` against the oracle's.
    pub t1_excitation: Option<f64>,
    pub s1_excitation: Option<f64>,
    pub delta_est: Option<f64>,
}

impl Deviations {
    pub fn compute(solver: &StateEnergies, exact: &StateEnergies, excitations: &StateEnergies) -> Self {
        let d = |a: Option<f64>, b: Option<f64>| Some((a? - b?) * 1e3);
        let exact_exc = |e: Option<f64>| Some(e? - exact.s0?);
        Self {
            s0: d(solver.s0, exact.s0),
            t1: d(solver.t1, exact.t1),
            s1: d(solver.s1, exact.s1),
            t1_excitation: d(excitations.t1, exact_exc(exact.t1)),
            s1_excitation: d(excitations.s1, exact_exc(exact.s1)),
            delta_est: d(solver.delta_est(), exact.delta_est()),
        }
    }

    pub fn get(&self, state: &str) -> Option<f64> {
        match state {
            "S0" => self.s0,
            "T1" => self.t1,
            "S1" => self.s1,
            _ => None,
        }
    }

    fn fields(&self) -> [Option<f64>; 6] {
        [self.s0, self.t1, self.s1, self.t1_excitation, self.s1_excitation, self.delta_est]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitedPair {
    pub t1: ExcitedStateResult,
    pub s1: ExcitedStateResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl InvariantCheck {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// Excluded from the content hash.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub timestamp_unix: u64,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub system: String,
    pub algorithm: Algorithm,
    pub mitigation: Mitigation,
    pub n_qubits: usize,
    pub oracle: SpectrumSummary,
    pub oracle_energies: StateEnergies,
    pub energies: StateEnergies,
    /// Excitation energies `E − E(S₀)` as the solver reports them.
    pub excitation_energies: StateEnergies,
    pub deviations_mha: Deviations,
    pub ground: Option<GroundStateResult>,
    pub excited: Option<ExcitedPair>,
    /// Tomography-tier VQD: the same states with sampled energies.
    pub measured_excited: Option<ExcitedPair>,
    pub qeom: Option<QeomResult>,
    pub calibration: Option<CalibrationMatrix>,
    /// Tomography results keyed by state label.
    pub purified: BTreeMap<String, PurifiedRecord>,
    pub invariants: Vec<InvariantCheck>,
    pub error: Option<String>,
    pub timing: Timing,
    pub hash: String,
}

impl ExperimentRecord {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.invariants.iter().all(|c| c.passed)
    }

    /// SHA-256 of the canonical JSON without `timing` and `hash`.
    pub fn content_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("record serializes");
        let obj = v.as_object_mut().expect("record is an object");
        obj.remove("timing");
        obj.remove("hash");
        hex::encode(Sha256::digest(serde_json::to_vec(&v).expect("value serializes")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes") + "\n"
    }

    /// Parses a record, refusing other schema versions, and checks its hash
    /// and that its deviations follow from its energies.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        match v.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(s) if s == SCHEMA_VERSION as u64 => {}
            Some(s) => {
                return Err(Error::Schema(format!("record has schema version {s}, this build reads {SCHEMA_VERSION}")))
            }
            None => return Err(Error::Schema("record has no schema_version".into())),
        }
        let rec: Self = serde_json::from_value(v)?;
        if rec.content_hash() != rec.hash {
            return Err(Error::Schema("content hash does not match".into()));
        }
        let again = Deviations::compute(&rec.energies, &rec.oracle_energies, &rec.excitation_energies);
        for (stored, fresh) in rec.deviations_mha.fields().iter().zip(again.fields()) {
            let same = match (stored, fresh) {
                (Some(a), Some(b)) => (a - b).abs() <= RELOAD_TOLERANCE * (1.0 + b.abs()),
                (None, None) => true,
                _ => false,
            };
            if !same {
                return Err(Error::Schema(format!("stored deviation {stored:?} disagrees with recomputed {fresh:?}")));
            }
        }
        Ok(rec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn file_name(&self) -> String {
        format!(
            "{}-{}-{}-seed{}.json",
            self.system,
            self.algorithm.as_str(),
            self.mitigation.as_str().replace('+', "-"),
            self.seed
        )
    }
}

#[derive(Default)]
struct Outcome {
    ground: Option<GroundStateResult>,
    excited: Option<ExcitedPair>,
    measured: Option<ExcitedPair>,
    qeom: Option<QeomResult>,
    calibration: Option<CalibrationMatrix>,
    purified: BTreeMap<String, PurifiedRecord>,
}

fn execute(cfg: &ExperimentConfig, sys: &MappedSystem, seed: u64) -> Result<Outcome> {
    let a = RyAnsatz::new(sys.n_qubits(), cfg.run.ansatz_depth);
    let mut out = Outcome::default();
    match cfg.backend.kind {
        BackendKind::Statevector => {
            let optimizer = OptimizerConfig { seed, ..cfg.optimizer.clone() };
            let ground = run_vqe(&sys.hamiltonian, &a, &Backend::Statevector, &optimizer, None, None)?;
            match cfg.run.algorithm {
                Algorithm::Vqe => {}
                Algorithm::Qeom => {
                    let q = statevector_qeom(sys, &ground, &a)?;
                    out.excited = Some(ExcitedPair { t1: q.t1.clone(), s1: q.s1.clone() });
                    out.qeom = Some(q);
                }
                Algorithm::Vqd => {
                    let (t1, s1) = statevector_vqd(sys, &ground, &a, &optimizer, cfg.run.spin_penalty.unwrap_or(true))?;
                    out.excited = Some(ExcitedPair { t1, s1 });
                }
            }
            out.ground = Some(ground);
        }
        BackendKind::Shots => {
            let settings = cfg.device_settings(sys.n_qubits());
            let mitigation = cfg.run.mitigation;
            let stage = match cfg.run.algorithm {
                Algorithm::Vqe => device_ground_state(sys, &a, &settings, mitigation, seed)?,
                Algorithm::Qeom => {
                    let q = device_qeom(sys, &a, &settings, mitigation, seed)?;
                    out.excited = Some(ExcitedPair { t1: q.t1, s1: q.s1 });
                    out.qeom = Some(q.qeom);
                    q.ground
                }
                Algorithm::Vqd => {
                    let v = device_vqd(sys, &a, &settings, mitigation, seed)?;
                    out.excited = Some(ExcitedPair { t1: v.t1, s1: v.s1 });
                    out.measured = v.measured.map(|(t1, s1)| ExcitedPair { t1, s1 });
                    out.purified.extend(v.purified_t1.map(|p| ("T1".to_string(), p)));
                    out.purified.extend(v.purified_s1.map(|p| ("S1".to_string(), p)));
                    v.ground
                }
            };
            out.purified.extend(stage.purified.map(|p| ("S0".to_string(), p)));
            out.calibration = stage.calibration;
            out.ground = Some(stage.result);
        }
    }
    Ok(out)
}

fn energies_of(out: &Outcome) -> (StateEnergies, StateEnergies) {
    let ex = out.excited.as_ref();
    let energies = StateEnergies {
        s0: out.ground.as_ref().map(|g| g.energy),
        t1: ex.map(|e| e.t1.absolute_energy),
        s1: ex.map(|e| e.s1.absolute_energy),
    };
    let excitations = StateEnergies {
        s0: energies.s0.map(|_| 0.0),
        t1: ex.map(|e| e.t1.excitation_energy),
        s1: ex.map(|e| e.s1.excitation_energy),
    };
    (energies, excitations)
}

fn check_invariants(cfg: &ExperimentConfig, out: &Outcome, energies: &StateEnergies, exact: &StateEnergies, dev: &Deviations) -> Vec<InvariantCheck> {
    let mut checks = Vec::new();
    let values = [energies.s0, energies.t1, energies.s1];
    checks.push(InvariantCheck::new(
        "finite-energies",
        values.iter().flatten().all(|v| v.is_finite()),
        format!("{values:?}"),
    ));
    if let (Some(g), Some(e0)) = (&out.ground, exact.s0) {
        let slack = match cfg.backend.kind {
            BackendKind::Statevector => 1e-9,
            BackendKind::Shots if g.readout_corrected && g.stderr > 0.0 => 4.0 * g.stderr + CHEMICAL_ACCURACY,
            BackendKind::Shots => 4.0 * g.stderr + 1e-9,
        };
        checks.push(InvariantCheck::new(
            "variational-bound",
            g.energy >= e0 - slack,
            format!("E0 = {:.12} vs exact {e0:.12}, slack {slack:.3e}", g.energy),
        ));
    }
    if let Some(ex) = &out.excited {
        let worst = [&ex.t1, &ex.s1]
            .iter()
            .map(|r| (r.absolute_energy - r.reference_energy - r.excitation_energy).abs())
            .fold(0.0, f64::max);
        let ground_matches = out.ground.as_ref().is_none_or(|g| {
            [&ex.t1, &ex.s1].iter().all(|r| (r.reference_energy - g.energy).abs() <= BOOKKEEPING_TOLERANCE)
        });
        checks.push(InvariantCheck::new(
            "energy-bookkeeping",
            worst <= BOOKKEEPING_TOLERANCE && ground_matches,
            format!("max |E - E0 - dE| = {worst:.3e}"),
        ));
    }
    if cfg.backend.kind == BackendKind::Statevector {
        let worst = [dev.s0, dev.t1, dev.s1].iter().flatten().map(|d| d.abs() * 1e-3).fold(0.0, f64::max);
        checks.push(InvariantCheck::new(
            "statevector-accuracy",
            worst <= STATEVECTOR_TOLERANCE,
            format!("max |deviation| = {worst:.3e} Ha"),
        ));
        if let (Some(t1), Some(s1)) = (energies.t1, energies.s1) {
            checks.push(InvariantCheck::new("triplet-below-singlet", t1 < s1, format!("T1 {t1:.12}, S1 {s1:.12}")));
        }
    }
    checks
}

/// Runs one seed. Solver failures are captured in the record.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let sys = MappedSystem::new(cfg.integrals()?, cfg.system.reduce)?;
    let spectrum = classify_spin(&full_ci(&sys.hamiltonian)?, &sys.s_squared)?;
    let exact = StateEnergies::from_spectrum(&spectrum);
    let (out, error) = match execute(cfg, &sys, seed) {
        Ok(o) => (o, None),
        Err(e) => (Outcome::default(), Some(e.to_string())),
    };
    let (energies, excitations) = energies_of(&out);
    let deviations = Deviations::compute(&energies, &exact, &excitations);
    let mut invariants = check_invariants(cfg, &out, &energies, &exact, &deviations);
    invariants.insert(0, InvariantCheck::new("completed", error.is_none(), error.clone().unwrap_or_default()));
    let mut rec = ExperimentRecord {
        schema_version: SCHEMA_VERSION,
        toolkit_version: TOOLKIT_VERSION.into(),
        config: cfg.clone(),
        seed,
        system: cfg.system_label(),
        algorithm: cfg.run.algorithm,
        mitigation: cfg.run.mitigation,
        n_qubits: sys.n_qubits(),
        oracle: spectrum.summary(),
        oracle_energies: exact,
        energies,
        excitation_energies: excitations,
        deviations_mha: deviations,
        ground: out.ground,
        excited: out.excited,
        measured_excited: out.measured,
        qeom: out.qeom,
        calibration: out.calibration,
        purified: out.purified,
        invariants,
        error,
        timing: Timing::default(),
        hash: String::new(),
    };
    rec.hash = rec.content_hash();
    rec.timing = Timing {
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(rec)
}

/// Runs every configured seed in parallel and writes one record per seed
/// into `out_dir`.
pub fn run_all(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<(PathBuf, ExperimentRecord)>> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let seeds = &cfg.run.seeds;
    let chunk = seeds.len().div_ceil(workers);
    let results: Vec<Result<(PathBuf, ExperimentRecord)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&seed| {
                            let rec = run_experiment(cfg, seed)?;
                            let path = out_dir.join(rec.file_name());
                            std::fs::write(&path, rec.to_json())?;
                            Ok((path, rec))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    results.into_iter().collect()
}

pub const REPORT_STATES: [&str; 3] = ["S0", "T1", "S1"];

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    pub summary: String,
    /// Median |deviation| in mHa keyed by (algorithm, mitigation, state).
    pub medians: BTreeMap<(Algorithm, Mitigation, String), f64>,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12}")).unwrap_or_default()
}

/// One CSV row per state present in each record, plus per-tier medians.
pub fn report(records: &[ExperimentRecord]) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::Config("no records to report".into()));
    }
    let mut csv = String::from(
        "system,algorithm,mitigation,seed,state,E_S0,E_T1,E_S1,delta_est_Ha,delta_est_eV,deviation_mHa,excitation_deviation_mHa\n",
    );
    let mut groups: BTreeMap<(Algorithm, Mitigation, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        let e = &r.energies;
        let delta = e.delta_est();
        for state in REPORT_STATES {
            if e.get(state).is_none() {
                continue;
            }
            let dev = r.deviations_mha.get(state);
            let exc = match state {
                "T1" => r.deviations_mha.t1_excitation,
                "S1" => r.deviations_mha.s1_excitation,
                _ => None,
            };
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.system,
                r.algorithm.as_str(),
                r.mitigation,
                r.seed,
                state,
                opt_cell(e.s0),
                opt_cell(e.t1),
                opt_cell(e.s1),
                opt_cell(delta),
                opt_cell(delta.map(|d| d * HARTREE_TO_EV)),
                opt_cell(dev),
                opt_cell(exc),
            )
            .expect("write to string");
            if let Some(d) = dev {
                groups.entry((r.algorithm, r.mitigation, state.to_string())).or_default().push(d.abs());
            }
        }
    }
    let mut summary = String::from("median |deviation| (mHa) per mitigation tier\n");
    let mut medians = BTreeMap::new();
    for ((alg, mit, state), mut v) in groups {
        let n = v.len();
        let m = median(&mut v).expect("non-empty group");
        writeln!(summary, "{:<5} {:<13} {:<3} {:>12.4}  (n={n})", alg.as_str(), mit.as_str(), state, m)
            .expect("write to string");
        medians.insert((alg, mit, state), m);
    }
    Ok(Report { csv, summary, medians })
}

pub fn load_records(paths: &[PathBuf]) -> Result<Vec<ExperimentRecord>> {
    paths
        .iter()
        .map(|p| ExperimentRecord::load(p).map_err(|e| Error::Schema(format!("{}: {e}", p.display()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn statevector_config(algorithm: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "[system]\nname = \"toy-h2-like\"\n[run]\nalgorithm = \"{algorithm}\"\nseeds = [3]\n"
        ))
        .unwrap()
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = statevector_config("qeom");
        assert_eq!(cfg.backend.shots, 8192);
        assert_eq!(cfg.run.mitigation, Mitigation::None);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn invalid_combinations_are_rejected() {
        let base = "[system]\nname = \"toy-h2-like\"\n";
        for extra in [
            "[run]\nmitigation = \"readout\"\n",
            "[backend]\nkind = \"shots\"\n[run]\nalgorithm = \"vqd\"\nmitigation = \"readout+qeom\"\n",
            "[backend]\nkind = \"shots\"\n[run]\nalgorithm = \"vqd\"\nspin_penalty = true\n",
            "[backend]\nkind = \"shots\"\nshots = 9000\n",
            "[run]\nseeds = []\n",
            "[system]\nreduce = false\n",
        ] {
            let text = if extra.starts_with("[system]") { extra.replace("[system]\n", base) } else { format!("{base}{extra}") };
            assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))), "{extra}");
        }
        assert!(ExperimentConfig::from_toml("[run]\nalgorithm = \"qeom\"\n").is_err());
        assert!(ExperimentConfig::from_toml("[system]\nname = \"toy-h2-like\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn statevector_qeom_record_is_exact_and_reloads() {
        let rec = run_experiment(&statevector_config("qeom"), 3).unwrap();
        assert!(rec.passed(), "{:?}", rec.invariants);
        for d in rec.deviations_mha.fields().iter().flatten() {
            assert!(d.abs() < 1e-3, "{d}");
        }
        let back = ExperimentRecord::from_json(&rec.to_json()).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn tampered_records_are_refused() {
        let rec = run_experiment(&statevector_config("vqe"), 0).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&rec.to_json()).unwrap();
        v["schema_version"] = 99.into();
        assert!(matches!(ExperimentRecord::from_json(&v.to_string()), Err(Error::Schema(_))));

        let mut bad = rec.clone();
        bad.deviations_mha.s0 = Some(5.0);
        bad.hash = bad.content_hash();
        assert!(matches!(ExperimentRecord::from_json(&bad.to_json()), Err(Error::Schema(_))));

        let mut edited = rec;
        edited.energies.s0 = Some(0.0);
        assert!(matches!(ExperimentRecord::from_json(&edited.to_json()), Err(Error::Schema(_))));
    }

    #[test]
    fn hash_ignores_timing() {
        let rec = run_experiment(&statevector_config("vqe"), 1).unwrap();
        let mut other = rec.clone();
        other.timing.wall_clock_seconds += 10.0;
        assert_eq!(rec.content_hash(), other.content_hash());
    }

    #[test]
    fn report_has_one_row_per_state() {
        let rec = run_experiment(&statevector_config("qeom"), 3).unwrap();
        let rep = report(&[rec]).unwrap();
        assert_eq!(rep.csv.lines().count(), 4);
        assert_eq!(rep.medians.len(), 3);
        assert!(report(&[]).is_err());
    }

    #[test]
    fn median_handles_even_counts() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0, 10.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
