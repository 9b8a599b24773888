//! Active-space integrals, second-quantized operators and the parity mapping
//! with two-qubit reduction.
//!
//! Spin orbitals use block ordering: spatial orbital `p` with spin α is mode
//! `p`, with spin β it is mode `n_spatial + p`. Under the parity encoding
//! qubit `n_spatial − 1` then carries the α-particle parity and qubit
//! `2·n_spatial − 1` the total particle parity; reduction deletes both.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::pauli::{Pauli, PauliString, QubitOperator};

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// One- and two-electron integrals over a real spatial-orbital active space.
/// `h2` is stored in chemists' notation, `h2[p][q][r][s] = (pq|rs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSpaceIntegrals {
    n_spatial: usize,
    n_electrons: usize,
    ms2: i32,
    core_energy: f64,
    h1: Vec<f64>,
    h2: Vec<f64>,
}

impl ActiveSpaceIntegrals {
    /// Validates permutation symmetry; `h1` is row-major `n×n`, `h2` row-major `n⁴`.
    pub fn new(
        n_spatial: usize,
        n_electrons: usize,
        ms2: i32,
        core_energy: f64,
        h1: Vec<f64>,
        h2: Vec<f64>,
    ) -> Result<Self> {
        let n = n_spatial;
        if n == 0 {
            return Err(contract("active space needs at least one orbital"));
        }
        if h1.len() != n * n {
            return Err(Error::Dimension { expected: n * n, found: h1.len() });
        }
        if h2.len() != n.pow(4) {
            return Err(Error::Dimension { expected: n.pow(4), found: h2.len() });
        }
        if n_electrons == 0 || n_electrons > 2 * n {
            return Err(contract(format!("{n_electrons} electrons do not fit {n} spatial orbitals")));
        }
        if (ms2.unsigned_abs() as usize) > n_electrons || (n_electrons as i32 - ms2) % 2 != 0 {
            return Err(contract(format!("MS2={ms2} inconsistent with {n_electrons} electrons")));
        }
        if !core_energy.is_finite() || h1.iter().chain(&h2).any(|v| !v.is_finite()) {
            return Err(contract("integrals must be finite"));
        }
        let ints = Self { n_spatial, n_electrons, ms2, core_energy, h1, h2 };
        for p in 0..n {
            for q in 0..n {
                if (ints.h1(p, q) - ints.h1(q, p)).abs() > SYMMETRY_TOLERANCE {
                    return Err(contract(format!("h1 not symmetric at ({p},{q})")));
                }
                for r in 0..n {
                    for s in 0..n {
                        let v = ints.h2(p, q, r, s);
                        for (a, b, c, d) in images(p, q, r, s) {
                            if (ints.h2(a, b, c, d) - v).abs() > SYMMETRY_TOLERANCE {
                                return Err(contract(format!("h2 breaks 8-fold symmetry at ({p}{q}|{r}{s})")));
                            }
                        }
                    }
                }
            }
        }
        Ok(ints)
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_spatial
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn ms2(&self) -> i32 {
        self.ms2
    }

    pub fn n_alpha(&self) -> usize {
        ((self.n_electrons as i32 + self.ms2) / 2) as usize
    }

    pub fn n_beta(&self) -> usize {
        self.n_electrons - self.n_alpha()
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    pub fn h1(&self, p: usize, q: usize) -> f64 {
        self.h1[p * self.n_spatial + q]
    }

    /// Chemists' `(pq|rs)`.
    pub fn h2(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let n = self.n_spatial;
        self.h2[((p * n + q) * n + r) * n + s]
    }

    /// Symmetry sector of the declared electron count and spin projection.
    pub fn sector(&self) -> Sector {
        Sector::from_counts(self.n_alpha(), self.n_electrons)
    }
}

/// The eight index images of a real-orbital `(pq|rs)`.
fn images(p: usize, q: usize, r: usize, s: usize) -> [(usize, usize, usize, usize); 8] {
    [
        (p, q, r, s),
        (q, p, r, s),
        (p, q, s, r),
        (q, p, s, r),
        (r, s, p, q),
        (s, r, p, q),
        (r, s, q, p),
        (s, r, q, p),
    ]
}

/// Parses Molpro-convention FCIDUMP text.
pub fn parse_fcidump(text: &str) -> Result<ActiveSpaceIntegrals> {
    let mut header = String::new();
    let mut body_start = None;
    let mut in_header = false;
    let mut header_line = 0;
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if !in_header {
            if trimmed.is_empty() {
                continue;
            }
            if !trimmed.to_ascii_uppercase().starts_with("&FCI") {
                return Err(Error::Parse { line: idx + 1, message: "expected &FCI namelist header".into() });
            }
            in_header = true;
            header_line = idx + 1;
            header.push_str(&trimmed[4..]);
        } else {
            header.push(' ');
            header.push_str(trimmed);
        }
        let upper = header.to_ascii_uppercase();
        if let Some(end) = upper.find("&END").or_else(|| upper.rfind('/')) {
            header.truncate(end);
            body_start = Some(idx + 1);
            break;
        }
    }
    let body_start = body_start.ok_or(Error::Parse {
        line: header_line.max(1),
        message: "unterminated &FCI header".into(),
    })?;

    let fields = header_fields(&header);
    let get = |key: &str| fields.iter().find(|(k, _)| k == key).map(|(_, v)| v);
    let scalar = |key: &str| -> Result<Option<i64>> {
        match get(key) {
            None => Ok(None),
            Some(v) => v
                .first()
                .and_then(|s| s.parse::<i64>().ok())
                .map(Some)
                .ok_or(Error::Parse { line: header_line, message: format!("bad value for {key}") }),
        }
    };
    let norb = scalar("NORB")?.ok_or(Error::Parse { line: header_line, message: "missing NORB".into() })?;
    let nelec = scalar("NELEC")?.ok_or(Error::Parse { line: header_line, message: "missing NELEC".into() })?;
    let ms2 = scalar("MS2")?.unwrap_or(0);
    if norb <= 0 || nelec <= 0 {
        return Err(Error::Parse { line: header_line, message: "NORB and NELEC must be positive".into() });
    }
    let n = norb as usize;
    let mut h1 = vec![0.0; n * n];
    let mut h2 = vec![0.0; n.pow(4)];
    let mut core = 0.0;

    for (idx, line) in text.lines().enumerate().skip(body_start) {
        let lineno = idx + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 5 {
            return Err(Error::Parse { line: lineno, message: format!("expected `value i j k l`, got {} fields", toks.len()) });
        }
        let value: f64 = toks[0]
            .replace(['D', 'd'], "e")
            .parse()
            .map_err(|_| Error::Parse { line: lineno, message: format!("bad integral value `{}`", toks[0]) })?;
        let mut idx4 = [0usize; 4];
        for (slot, tok) in idx4.iter_mut().zip(&toks[1..]) {
            let i: usize = tok
                .parse()
                .map_err(|_| Error::Parse { line: lineno, message: format!("bad index `{tok}`") })?;
            if i > n {
                return Err(Error::Parse { line: lineno, message: format!("index {i} exceeds NORB={n}") });
            }
            *slot = i;
        }
        match idx4 {
            [0, 0, 0, 0] => core = value,
            [i, j, 0, 0] if i > 0 && j > 0 => {
                h1[(i - 1) * n + (j - 1)] = value;
                h1[(j - 1) * n + (i - 1)] = value;
            }
            [i, 0, 0, 0] if i > 0 => {}
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                for (a, b, c, d) in images(i - 1, j - 1, k - 1, l - 1) {
                    h2[((a * n + b) * n + c) * n + d] = value;
                }
            }
            _ => {
                return Err(Error::Parse { line: lineno, message: "unrecognised index pattern".into() });
            }
        }
    }
    ActiveSpaceIntegrals::new(n, nelec as usize, ms2 as i32, core, h1, h2)
        .map_err(|e| Error::Parse { line: header_line, message: e.to_string() })
}

fn header_fields(header: &str) -> Vec<(String, Vec<String>)> {
    let mut fields: Vec<(String, Vec<String>)> = Vec::new();
    for tok in header.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
        match tok.split_once('=') {
            Some((k, v)) => {
                let mut vals = Vec::new();
                if !v.is_empty() {
                    vals.push(v.to_string());
                }
                fields.push((k.trim().to_ascii_uppercase(), vals));
            }
            None => {
                if let Some(last) = fields.last_mut() {
                    last.1.push(tok.to_string());
                }
            }
        }
    }
    fields
}

/// Writes FCIDUMP text listing each symmetry-unique non-zero integral once.
pub fn emit_fcidump(ints: &ActiveSpaceIntegrals) -> String {
    let n = ints.n_spatial;
    let mut out = String::new();
    let orbsym = vec!["1"; n].join(",");
    let _ = writeln!(out, "&FCI NORB={},NELEC={},MS2={},", n, ints.n_electrons, ints.ms2);
    let _ = writeln!(out, "  ORBSYM={orbsym},");
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, "&END");
    for i in 0..n {
        for j in 0..=i {
            for k in 0..n {
                for l in 0..=k {
                    if i * n + j < k * n + l {
                        continue;
                    }
                    let v = ints.h2(i, j, k, l);
                    if v != 0.0 {
                        let _ = writeln!(out, "{v:e} {} {} {} {}", i + 1, j + 1, k + 1, l + 1);
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let v = ints.h1(i, j);
            if v != 0.0 {
                let _ = writeln!(out, "{v:e} {} {} 0 0", i + 1, j + 1);
            }
        }
    }
    let _ = writeln!(out, "{:e} 0 0 0 0", ints.core_energy);
    out
}

/// A creation (`dagger`) or annihilation operator on one spin orbital.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

pub fn create(mode: usize) -> Ladder {
    Ladder { mode, dagger: true }
}

pub fn annihilate(mode: usize) -> Ladder {
    Ladder { mode, dagger: false }
}

/// Spin-orbital mode of spatial orbital `p`; `beta` selects the second block.
pub fn spin_orbital(n_spatial: usize, p: usize, beta: bool) -> usize {
    if beta {
        n_spatial + p
    } else {
        p
    }
}

/// Real linear combination of products of ladder operators, kept in normal
/// order: creators left of annihilators, each group by descending mode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FermionOperator {
    n_modes: usize,
    terms: BTreeMap<Vec<Ladder>, f64>,
}

impl FermionOperator {
    pub fn zero(n_modes: usize) -> Self {
        Self { n_modes, terms: BTreeMap::new() }
    }

    pub fn constant(n_modes: usize, c: f64) -> Self {
        let mut op = Self::zero(n_modes);
        op.add_product(&[], c).expect("empty product");
        op
    }

    /// `c · ops[0]·ops[1]·…`, normal-ordered.
    pub fn product(n_modes: usize, ops: &[Ladder], c: f64) -> Result<Self> {
        let mut op = Self::zero(n_modes);
        op.add_product(ops, c)?;
        Ok(op)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[Ladder], f64)> {
        self.terms.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_product(&mut self, ops: &[Ladder], c: f64) -> Result<()> {
        if let Some(l) = ops.iter().find(|l| l.mode >= self.n_modes) {
            return Err(contract(format!("mode {} outside {} spin orbitals", l.mode, self.n_modes)));
        }
        for (word, coeff) in normal_order(ops.to_vec(), c) {
            let v = self.terms.get(&word).copied().unwrap_or(0.0) + coeff;
            if v.abs() <= crate::pauli::PRUNE_TOLERANCE {
                self.terms.remove(&word);
            } else {
                self.terms.insert(word, v);
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &FermionOperator) -> Result<Self> {
        self.check_width(other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_product(k, *v)?;
        }
        Ok(out)
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = Self::zero(self.n_modes);
        for (k, v) in &self.terms {
            if (v * factor).abs() > crate::pauli::PRUNE_TOLERANCE {
                out.terms.insert(k.clone(), v * factor);
            }
        }
        out
    }

    pub fn mul(&self, other: &FermionOperator) -> Result<Self> {
        self.check_width(other)?;
        let mut out = Self::zero(self.n_modes);
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let word: Vec<Ladder> = ka.iter().chain(kb).copied().collect();
                out.add_product(&word, va * vb)?;
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.n_modes);
        for (k, v) in &self.terms {
            let word: Vec<Ladder> = k.iter().rev().map(|l| Ladder { mode: l.mode, dagger: !l.dagger }).collect();
            out.add_product(&word, *v).expect("same modes");
        }
        out
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let diff = self.add(&self.adjoint().scale(-1.0)).expect("same width");
        diff.terms.values().all(|v| v.abs() <= tol)
    }

    fn check_width(&self, other: &FermionOperator) -> Result<()> {
        if self.n_modes != other.n_modes {
            return Err(Error::Dimension { expected: self.n_modes, found: other.n_modes });
        }
        Ok(())
    }
}

fn normal_order(word: Vec<Ladder>, c: f64) -> Vec<(Vec<Ladder>, f64)> {
    let mut out = Vec::new();
    let mut stack = vec![(word, c)];
    'outer: while let Some((mut w, mut coeff)) = stack.pop() {
        // Insertion sort into (creators desc, annihilators desc), branching on
        // the contraction produced by each a_i a†_i swap.
        for i in 1..w.len() {
            let mut j = i;
            while j > 0 {
                let (l, r) = (w[j - 1], w[j]);
                let in_order = match (l.dagger, r.dagger) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => l.mode > r.mode,
                };
                if in_order {
                    break;
                }
                if l.dagger == r.dagger && l.mode == r.mode {
                    continue 'outer;
                }
                if !l.dagger && r.dagger && l.mode == r.mode {
                    let mut contracted = w.clone();
                    contracted.drain(j - 1..=j);
                    stack.push((contracted, coeff));
                }
                w.swap(j - 1, j);
                coeff = -coeff;
                j -= 1;
            }
        }
        out.push((w, coeff));
    }
    out
}

/// `H = E_core + Σ h_pq a†_pσ a_qσ + ½ Σ (pq|rs) a†_pσ a†_rτ a_sτ a_qσ`.
pub fn build_hamiltonian(ints: &ActiveSpaceIntegrals) -> FermionOperator {
    let n = ints.n_spatial;
    let modes = 2 * n;
    let mut h = FermionOperator::constant(modes, ints.core_energy);
    let spins = [false, true];
    for p in 0..n {
        for q in 0..n {
            let v = ints.h1(p, q);
            if v == 0.0 {
                continue;
            }
            for &s in &spins {
                h.add_product(&[create(spin_orbital(n, p, s)), annihilate(spin_orbital(n, q, s))], v)
                    .expect("modes in range");
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let v = ints.h2(p, q, r, s);
                    if v == 0.0 {
                        continue;
                    }
                    for &sig in &spins {
                        for &tau in &spins {
                            let word = [
                                create(spin_orbital(n, p, sig)),
                                create(spin_orbital(n, r, tau)),
                                annihilate(spin_orbital(n, s, tau)),
                                annihilate(spin_orbital(n, q, sig)),
                            ];
                            h.add_product(&word, 0.5 * v).expect("modes in range");
                        }
                    }
                }
            }
        }
    }
    h
}

/// Parities of the α-particle count and of the total particle count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    pub alpha_odd: bool,
    pub total_odd: bool,
}

impl Sector {
    pub fn from_counts(n_alpha: usize, n_electrons: usize) -> Self {
        Self { alpha_odd: n_alpha % 2 == 1, total_odd: n_electrons % 2 == 1 }
    }

    /// Eigenvalues of the two deleted parity qubits' Z operators.
    pub fn z_eigenvalues(&self) -> (f64, f64) {
        let sign = |odd: bool| if odd { -1.0 } else { 1.0 };
        (sign(self.alpha_odd), sign(self.total_odd))
    }

    /// Whether occupation bits of `n_spatial` α then β orbitals belong to this sector.
    pub fn contains(&self, n_spatial: usize, occupation: usize) -> bool {
        let alpha = (occupation & ((1 << n_spatial) - 1)).count_ones();
        let total = occupation.count_ones();
        (alpha % 2 == 1) == self.alpha_odd && (total % 2 == 1) == self.total_odd
    }
}

/// How fermionic operators become qubit operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingConfig {
    pub n_spatial: usize,
    pub reduce: bool,
    pub sector: Sector,
}

impl MappingConfig {
    pub fn for_integrals(ints: &ActiveSpaceIntegrals, reduce: bool) -> Self {
        Self { n_spatial: ints.n_spatial, reduce, sector: ints.sector() }
    }

    pub fn n_qubits(&self) -> usize {
        if self.reduce {
            2 * self.n_spatial - 2
        } else {
            2 * self.n_spatial
        }
    }

    /// Qubit basis index of an occupation pattern (bit `m` = mode `m` occupied).
    pub fn occupation_to_index(&self, occupation: usize) -> usize {
        let modes = 2 * self.n_spatial;
        let mut parity = 0usize;
        let mut acc = 0usize;
        for m in 0..modes {
            acc ^= occupation >> m & 1;
            parity |= acc << m;
        }
        if !self.reduce {
            return parity;
        }
        let (skip_a, skip_b) = (self.n_spatial - 1, modes - 1);
        let mut out = 0usize;
        let mut k = 0;
        for m in 0..modes {
            if m == skip_a || m == skip_b {
                continue;
            }
            out |= (parity >> m & 1) << k;
            k += 1;
        }
        out
    }

    /// Qubit basis indices of every determinant with `n_alpha` α and `n_beta`
    /// β electrons, ascending.
    pub fn determinant_indices(&self, n_alpha: usize, n_beta: usize) -> Vec<usize> {
        let n = self.n_spatial;
        let mut out: Vec<usize> = (0..1usize << (2 * n))
            .filter(|occ| {
                (occ & ((1 << n) - 1)).count_ones() as usize == n_alpha && (occ >> n).count_ones() as usize == n_beta
            })
            .map(|occ| self.occupation_to_index(occ))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Parity-encoded image of one ladder operator on `n` qubits:
/// `a†_j = ½ X_{j+1…n−1} (X_j Z_{j−1} − i Y_j)`, `a_j` with `+i`.
fn ladder_image(n: usize, l: Ladder) -> QubitOperator {
    let j = l.mode;
    let mut tail = Vec::new();
    for k in j + 1..n {
        tail.push((k, Pauli::X));
    }
    let mut xz = tail.clone();
    xz.push((j, Pauli::X));
    if j > 0 {
        xz.push((j - 1, Pauli::Z));
    }
    let mut y = tail;
    y.push((j, Pauli::Y));
    let sign = if l.dagger { -1.0 } else { 1.0 };
    let mut op = QubitOperator::zero(n);
    op.add_term(PauliString::sparse(n, &xz).expect("in range"), Complex64::new(0.5, 0.0))
        .expect("same width");
    op.add_term(PauliString::sparse(n, &y).expect("in range"), Complex64::new(0.0, 0.5 * sign))
        .expect("same width");
    op
}

/// Maps `f` by the parity encoding and, when `reduce` is set, deletes the
/// α-parity and total-parity qubits by substituting their sector eigenvalues.
pub fn parity_map(f: &FermionOperator, n_spin_orbitals: usize, reduce: bool, sector: Sector) -> Result<QubitOperator> {
    if f.n_modes != n_spin_orbitals {
        return Err(Error::Dimension { expected: n_spin_orbitals, found: f.n_modes });
    }
    if reduce && (!n_spin_orbitals.is_multiple_of(2) || n_spin_orbitals < 4) {
        return Err(contract(format!("reduction needs an even width of at least 4, got {n_spin_orbitals}")));
    }
    let n = n_spin_orbitals;
    let images: Vec<[QubitOperator; 2]> = (0..n)
        .map(|m| [ladder_image(n, annihilate(m)), ladder_image(n, create(m))])
        .collect();
    let mut full = QubitOperator::zero(n);
    for (word, c) in f.terms() {
        let mut term = QubitOperator::identity(n, c);
        for l in word {
            term = term.mul(&images[l.mode][l.dagger as usize])?;
        }
        full = full.add(&term)?;
    }
    if !reduce {
        return Ok(full);
    }
    reduce_parity_qubits(&full, n / 2, sector)
}

fn reduce_parity_qubits(op: &QubitOperator, n_spatial: usize, sector: Sector) -> Result<QubitOperator> {
    let n = 2 * n_spatial;
    let (qa, qb) = (n_spatial - 1, n - 1);
    let (za, zb) = sector.z_eigenvalues();
    let kept: Vec<usize> = (0..n).filter(|&q| q != qa && q != qb).collect();
    let mut out = QubitOperator::zero(n - 2);
    for (s, c) in op.terms() {
        let mut factor = 1.0;
        for (q, z) in [(qa, za), (qb, zb)] {
            match s.letter(q) {
                Pauli::I => {}
                Pauli::Z => factor *= z,
                _ => {
                    return Err(contract(format!("term {s} does not conserve the parity of qubit {q}")));
                }
            }
        }
        let letters: Vec<Pauli> = kept.iter().map(|&q| s.letter(q)).collect();
        out.add_term(PauliString::from_letters(&letters)?, c * factor)?;
    }
    Ok(out)
}

/// Maps `f` according to `cfg`.
pub fn map_operator(f: &FermionOperator, cfg: &MappingConfig) -> Result<QubitOperator> {
    if f.n_modes != 2 * cfg.n_spatial {
        return Err(contract(format!(
            "operator on {} modes does not match a {}-orbital mapping",
            f.n_modes, cfg.n_spatial
        )));
    }
    parity_map(f, 2 * cfg.n_spatial, cfg.reduce, cfg.sector)
}

/// Fermionic `S² = S_z² + ½(S₊S₋ + S₋S₊)` over `n_spatial` orbitals.
pub fn s_squared_fermion(n_spatial: usize) -> FermionOperator {
    let modes = 2 * n_spatial;
    let mut sz = FermionOperator::zero(modes);
    let mut s_plus = FermionOperator::zero(modes);
    for p in 0..n_spatial {
        let (a, b) = (spin_orbital(n_spatial, p, false), spin_orbital(n_spatial, p, true));
        sz.add_product(&[create(a), annihilate(a)], 0.5).expect("in range");
        sz.add_product(&[create(b), annihilate(b)], -0.5).expect("in range");
        s_plus.add_product(&[create(a), annihilate(b)], 1.0).expect("in range");
    }
    let s_minus = s_plus.adjoint();
    let sz2 = sz.mul(&sz).expect("same width");
    let pm = s_plus.mul(&s_minus).expect("same width");
    let mp = s_minus.mul(&s_plus).expect("same width");
    sz2.add(&pm.add(&mp).expect("same width").scale(0.5)).expect("same width")
}

/// Qubit image of `S²` under the same mapping as the Hamiltonian.
pub fn s_squared_operator(n_spatial: usize, cfg: &MappingConfig) -> Result<QubitOperator> {
    if cfg.n_spatial != n_spatial {
        return Err(contract(format!(
            "S² over {n_spatial} orbitals requested with a {}-orbital mapping",
            cfg.n_spatial
        )));
    }
    map_operator(&s_squared_fermion(n_spatial), cfg)
}

/// Particle-number operator `Σ a†_p a_p`.
pub fn number_operator(n_modes: usize) -> FermionOperator {
    let mut op = FermionOperator::zero(n_modes);
    for m in 0..n_modes {
        op.add_product(&[create(m), annihilate(m)], 1.0).expect("in range");
    }
    op
}

/// Spin-conserving single excitation `a†_{aσ} a_{iσ}`.
pub fn single_excitation(n_spatial: usize, from: usize, to: usize, beta: bool) -> FermionOperator {
    let modes = 2 * n_spatial;
    FermionOperator::product(
        modes,
        &[create(spin_orbital(n_spatial, to, beta)), annihilate(spin_orbital(n_spatial, from, beta))],
        1.0,
    )
    .expect("in range")
}

/// Paired double excitation `a†_{aα} a†_{aβ} a_{iβ} a_{iα}`.
pub fn paired_double_excitation(n_spatial: usize, from: usize, to: usize) -> FermionOperator {
    let modes = 2 * n_spatial;
    let s = |p, b| spin_orbital(n_spatial, p, b);
    FermionOperator::product(
        modes,
        &[create(s(to, false)), create(s(to, true)), annihilate(s(from, true)), annihilate(s(from, false))],
        1.0,
    )
    .expect("in range")
}

/// The mapped Hamiltonian together with the operators derived from it.
#[derive(Debug, Clone)]
pub struct MappedSystem {
    pub integrals: ActiveSpaceIntegrals,
    pub mapping: MappingConfig,
    pub hamiltonian: QubitOperator,
    pub s_squared: QubitOperator,
}

impl MappedSystem {
    pub fn new(integrals: ActiveSpaceIntegrals, reduce: bool) -> Result<Self> {
        let mapping = MappingConfig::for_integrals(&integrals, reduce);
        Self::with_mapping(integrals, mapping)
    }

    pub fn with_mapping(integrals: ActiveSpaceIntegrals, mapping: MappingConfig) -> Result<Self> {
        let hamiltonian = map_operator(&build_hamiltonian(&integrals), &mapping)?;
        let s_squared = s_squared_operator(integrals.n_spatial, &mapping)?;
        Ok(Self { integrals, mapping, hamiltonian, s_squared })
    }

    pub fn n_qubits(&self) -> usize {
        self.mapping.n_qubits()
    }

    /// Qubit index of the lowest-orbital closed-shell determinant.
    pub fn hartree_fock_index(&self) -> usize {
        let n = self.integrals.n_spatial;
        let mut occ = 0usize;
        for p in 0..self.integrals.n_alpha() {
            occ |= 1 << spin_orbital(n, p, false);
        }
        for p in 0..self.integrals.n_beta() {
            occ |= 1 << spin_orbital(n, p, true);
        }
        self.mapping.occupation_to_index(occ)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::expectation;
    use crate::sim::Statevector;

    const TWO_ORBITAL: &str = "&FCI NORB=2,NELEC=2,MS2=0,\n ORBSYM=1,1,\n ISYM=1,\n&END\n\
        0.5  1 1 1 1\n0.1 2 1 1 1\n 0.45 2 2 1 1\n0.2 2 1 2 1\n0.48 2 2 2 2\n\
        -1.2 1 1 0 0\n0.03 2 1 0 0\n-0.4 2 2 0 0\n0.7 0 0 0 0\n";

    #[test]
    fn header_fields_are_extracted() {
        let ints = parse_fcidump(TWO_ORBITAL).unwrap();
        assert_eq!(ints.n_spatial(), 2);
        assert_eq!(ints.n_electrons(), 2);
        assert_eq!(ints.ms2(), 0);
        assert_eq!(ints.core_energy(), 0.7);
    }

    #[test]
    fn two_body_record_fills_all_images() {
        let ints = parse_fcidump(TWO_ORBITAL).unwrap();
        assert_eq!(ints.h2(0, 0, 0, 0), 0.5);
        for (a, b, c, d) in images(1, 0, 0, 0) {
            assert_eq!(ints.h2(a, b, c, d), 0.1);
        }
        assert_eq!(ints.h1(0, 1), 0.03);
        assert_eq!(ints.h1(1, 0), 0.03);
    }

    #[test]
    fn round_trip_is_exact() {
        let ints = parse_fcidump(TWO_ORBITAL).unwrap();
        let again = parse_fcidump(&emit_fcidump(&ints)).unwrap();
        assert_eq!(ints, again);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let missing = "&FCI NELEC=2,\n&END\n";
        assert!(matches!(parse_fcidump(missing), Err(Error::Parse { line: 1, .. })));
        let out_of_range = "&FCI NORB=2,NELEC=2,\n&END\n0.5 3 1 1 1\n";
        assert!(matches!(parse_fcidump(out_of_range), Err(Error::Parse { line: 3, .. })));
        let garbage = "&FCI NORB=2,NELEC=2 &END\n1.0 1 1\n";
        assert!(matches!(parse_fcidump(garbage), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn fortran_exponents_parse() {
        let text = "&FCI NORB=1,NELEC=1,MS2=1 /\n-0.25D+01 1 1 0 0\n";
        let ints = parse_fcidump(text).unwrap();
        assert_eq!(ints.h1(0, 0), -2.5);
    }

    #[test]
    fn normal_ordering_applies_anticommutators() {
        // a_0 a†_0 = 1 − a†_0 a_0
        let op = FermionOperator::product(2, &[annihilate(0), create(0)], 1.0).unwrap();
        let terms: Vec<_> = op.terms().map(|(k, v)| (k.to_vec(), v)).collect();
        assert_eq!(terms.len(), 2);
        assert!(terms.contains(&(vec![], 1.0)));
        assert!(terms.contains(&(vec![create(0), annihilate(0)], -1.0)));
        assert!(FermionOperator::product(2, &[create(1), create(1)], 1.0).unwrap().is_empty());
        let swapped = FermionOperator::product(2, &[create(0), create(1)], 1.0).unwrap();
        assert_eq!(swapped.terms().next().unwrap(), (&[create(1), create(0)][..], -1.0));
    }

    #[test]
    fn reduced_hamiltonian_has_two_qubits() {
        let ints = parse_fcidump(TWO_ORBITAL).unwrap();
        let sys = MappedSystem::new(ints, true).unwrap();
        assert_eq!(sys.hamiltonian.n_qubits(), 2);
        assert!(sys.hamiltonian.is_hermitian(1e-12));
        assert!(parity_map(&number_operator(3), 3, true, Sector::from_counts(1, 2)).is_err());
    }

    #[test]
    fn closed_shell_determinant_is_a_singlet() {
        let ints = parse_fcidump(TWO_ORBITAL).unwrap();
        let sys = MappedSystem::new(ints, true).unwrap();
        let hf = Statevector::basis_state(2, sys.hartree_fock_index());
        assert!(expectation(&hf, &sys.s_squared).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mapping_mismatch_is_rejected() {
        let cfg = MappingConfig { n_spatial: 3, reduce: true, sector: Sector::from_counts(1, 2) };
        assert!(s_squared_operator(2, &cfg).is_err());
    }
}
