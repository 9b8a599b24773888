use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qexcite::ansatz::RyAnsatz;
use qexcite::chem::{parse_fcidump, ActiveSpaceIntegrals, MappedSystem, MappingConfig};
use qexcite::experiment::{load_records, report, run_all, Algorithm, BackendKind, ExperimentConfig};
use qexcite::mitigate::{calibrate_readout, purified_energy, purify, state_tomography};
use qexcite::oracle::{classify_spin, full_ci, subspace_eigenvalues};
use qexcite::protocol::Mitigation;
use qexcite::sim::{NoiseModel, ShotBackend, DEFAULT_MAX_SHOTS};
use qexcite::{systems, Error};

#[derive(Parser)]
#[command(name = "qexcite", version, about = "Singlet/triplet excited states with VQE, qEOM and VQD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map integrals to a qubit Hamiltonian and write its exact spectrum.
    Map {
        /// FCIDUMP file or bundled system name.
        input: String,
        /// Keep all 2n qubits instead of removing the two symmetry qubits.
        #[arg(long)]
        no_reduce: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run an experiment config, one record per seed.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        algorithm: Option<Algorithm>,
        /// Switch to the shots backend with this many shots per circuit.
        #[arg(long)]
        shots: Option<u32>,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        mitigation: Option<Mitigation>,
        /// Output directory; defaults to the config's.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate records as CSV and summarize median deviations.
    Report {
        /// Record files or glob patterns.
        #[arg(required = true)]
        records: Vec<String>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Measure a readout calibration matrix.
    Calibrate {
        #[arg(long, default_value_t = 2)]
        qubits: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_SHOTS)]
        shots: u32,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tomography and purification of the two-qubit ansatz state at θ.
    Tomo {
        /// JSON array or whitespace-separated angles.
        theta: PathBuf,
        /// Evaluate the purified state's energy on this system.
        #[arg(long)]
        system: Option<String>,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_SHOTS)]
        shots: u32,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct NoiseArgs {
    /// Per-qubit readout flip probability.
    #[arg(long)]
    noise_readout: Option<f64>,
    /// Depolarizing probability per circuit.
    #[arg(long)]
    noise_depol: Option<f64>,
}

impl NoiseArgs {
    fn model(&self, n_qubits: usize) -> Result<NoiseModel> {
        let m = NoiseModel::symmetric(n_qubits, self.noise_readout.unwrap_or(0.0), self.noise_depol.unwrap_or(0.0));
        m.validate(n_qubits)?;
        Ok(m)
    }
}

fn read_integrals(input: &str) -> Result<(String, ActiveSpaceIntegrals)> {
    if systems::NAMED_SYSTEMS.contains(&input) {
        return Ok((input.to_string(), systems::named(input)?));
    }
    let path = Path::new(input);
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {input}"))?;
    let ints = parse_fcidump(&text).map_err(|e| match e {
        Error::Parse { line, message } => anyhow!("{input}:{line}: {message}"),
        other => anyhow!("{input}: {other}"),
    })?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "system".into());
    Ok((stem, ints))
}

fn cmd_map(input: &str, no_reduce: bool, out: &Path) -> Result<bool> {
    let (stem, ints) = read_integrals(input)?;
    let mapping = MappingConfig::for_integrals(&ints, !no_reduce);
    let sector = mapping.determinant_indices(ints.n_alpha(), ints.n_beta());
    let sys = MappedSystem::with_mapping(ints, mapping)?;
    let spectrum = full_ci(&sys.hamiltonian)?;
    let labelled = classify_spin(&spectrum, &sys.s_squared).ok();
    let sector_eigenvalues = subspace_eigenvalues(&sys.hamiltonian, &sector)?;
    std::fs::create_dir_all(out)?;
    let op_path = out.join(format!("{stem}.qubitop"));
    let spec_path = out.join(format!("{stem}.spectrum.json"));
    std::fs::write(&op_path, sys.hamiltonian.to_text())?;
    let body = serde_json::json!({
        "n_qubits": sys.n_qubits(),
        "reduced": !no_reduce,
        "eigenvalues": spectrum.eigenvalues,
        "labels": labelled.as_ref().map(|s| s.labels.clone()),
        "s_squared": labelled.as_ref().map(|s| s.s_squared.clone()),
        "sector_eigenvalues": sector_eigenvalues,
    });
    std::fs::write(&spec_path, serde_json::to_string_pretty(&body)? + "\n")?;
    println!("qubits: {}", sys.n_qubits());
    println!("eigenvalues ({}):", spectrum.eigenvalues.len());
    for (i, e) in spectrum.eigenvalues.iter().enumerate() {
        let label = labelled.as_ref().and_then(|s| s.labels[i].clone()).unwrap_or_default();
        println!("  {e:>20.12}  {label}");
    }
    if no_reduce {
        println!("sector eigenvalues ({}):", sector_eigenvalues.len());
        for e in &sector_eigenvalues {
            println!("  {e:>20.12}");
        }
    }
    println!("wrote {} and {}", op_path.display(), spec_path.display());
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    algorithm: Option<Algorithm>,
    shots: Option<u32>,
    noise: NoiseArgs,
    mitigation: Option<Mitigation>,
    out: Option<PathBuf>,
) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.run.seeds = vec![s];
    }
    if let Some(a) = algorithm {
        cfg.run.algorithm = a;
    }
    if let Some(n) = shots {
        cfg.backend.kind = BackendKind::Shots;
        cfg.backend.shots = n;
    }
    if let Some(p) = noise.noise_readout {
        cfg.backend.readout_flip = p;
    }
    if let Some(p) = noise.noise_depol {
        cfg.backend.depolarizing = p;
    }
    if let Some(m) = mitigation {
        cfg.run.mitigation = m;
    }
    cfg.validate()?;
    let out_dir = out.unwrap_or_else(|| match config.parent() {
        Some(dir) if cfg.run.output.is_relative() => dir.join(&cfg.run.output),
        _ => cfg.run.output.clone(),
    });
    let records = run_all(&cfg, &out_dir)?;
    let mut ok = true;
    for (path, rec) in &records {
        let status = if rec.passed() { "ok" } else { "FAILED" };
        let dev = |v: Option<f64>| v.map(|x| format!("{x:+.4}")).unwrap_or_else(|| "-".into());
        let d = &rec.deviations_mha;
        println!(
            "seed {:>4}  {status:<6}  dev mHa S0 {} T1 {} S1 {}  {}",
            rec.seed,
            dev(d.s0),
            dev(d.t1),
            dev(d.s1),
            path.display()
        );
        if let Some(e) = &rec.error {
            eprintln!("seed {}: {e}", rec.seed);
        }
        for c in rec.invariants.iter().filter(|c| !c.passed) {
            eprintln!("seed {}: invariant {} failed: {}", rec.seed, c.name, c.detail);
        }
        ok &= rec.passed();
    }
    Ok(ok)
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for p in patterns {
        for entry in glob::glob(p).with_context(|| format!("bad pattern {p}"))? {
            paths.push(entry?);
        }
    }
    paths.sort();
    paths.dedup();
    if paths.is_empty() {
        bail!("no records match {}", patterns.join(" "));
    }
    Ok(paths)
}

fn cmd_report(patterns: &[String], csv: Option<PathBuf>) -> Result<bool> {
    let records = load_records(&expand(patterns)?)?;
    let rep = report(&records)?;
    match csv {
        Some(path) => {
            std::fs::write(&path, &rep.csv)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", rep.csv),
    }
    eprint!("{}", rep.summary);
    Ok(true)
}

fn write_or_print(out: Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_calibrate(qubits: usize, shots: u32, noise: NoiseArgs, seed: u64, out: Option<PathBuf>) -> Result<bool> {
    let backend = ShotBackend::new(shots, noise.model(qubits)?);
    let cal = calibrate_readout(&backend, qubits, shots, seed)?;
    eprintln!("condition number: {:.6}", cal.condition_number());
    write_or_print(out, &serde_json::to_value(&cal)?)?;
    Ok(true)
}

fn read_theta(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad angle '{t}' in {}", path.display())))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_tomo(
    theta_path: &Path,
    system: Option<&str>,
    depth: usize,
    shots: u32,
    noise: NoiseArgs,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<bool> {
    let theta = read_theta(theta_path)?;
    let a = RyAnsatz::new(2, depth);
    let circuit = a.build_circuit(&theta)?;
    let backend = ShotBackend::new(shots, noise.model(2)?);
    let tomography = state_tomography(&circuit, &backend, shots, seed)?;
    let p = purify(&tomography)?;
    let fidelity = p.state.fidelity(&a.state(&theta)?);
    let energy = match system {
        Some(s) => {
            let sys = MappedSystem::new(read_integrals(s)?.1, true)?;
            Some(purified_energy(&p.state, &sys.hamiltonian)?)
        }
        None => None,
    };
    eprintln!("purified weight {:.6}, fidelity with noiseless state {fidelity:.6}", p.weight);
    if let Some(w) = &p.warning {
        eprintln!("warning: {w}");
    }
    let body = serde_json::json!({
        "theta": theta,
        "tomography": tomography,
        "purified_re": p.state.amplitudes().iter().map(|z| z.re).collect::<Vec<_>>(),
        "purified_im": p.state.amplitudes().iter().map(|z| z.im).collect::<Vec<_>>(),
        "weight": p.weight,
        "fidelity": fidelity,
        "energy": energy,
        "warning": p.warning,
    });
    write_or_print(out, &body)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Map { input, no_reduce, out } => cmd_map(&input, no_reduce, &out),
        Command::Run { config, seed, algorithm, shots, noise, mitigation, out } => {
            cmd_run(&config, seed, algorithm, shots, noise, mitigation, out)
        }
        Command::Report { records, csv } => cmd_report(&records, csv),
        Command::Calibrate { qubits, shots, noise, seed, out } => cmd_calibrate(qubits, shots, noise, seed, out),
        Command::Tomo { theta, system, depth, shots, noise, seed, out } => {
            cmd_tomo(&theta, system.as_deref(), depth, shots, noise, seed, out)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
