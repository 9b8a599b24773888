//! Pauli-string algebra and weighted sums of Pauli strings.
//!
//! Strings are stored in symplectic form: one bitmask of X components and
//! one of Z components, so `Y = i·X·Z` on a qubit where both bits are set.
//! Letter position 0 is qubit 0, which is also the least significant bit of
//! an amplitude index.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{contract, Error, Result};
use crate::sim::Statevector;

/// Widest string representable by the bitmask encoding.
pub const MAX_WIDTH: usize = 64;
/// Coefficients at or below this magnitude are dropped after every operation.
pub const PRUNE_TOLERANCE: f64 = 1e-14;
/// Default cap on the width accepted by [`QubitOperator::to_matrix`].
pub const DEFAULT_MATRIX_CAP: usize = 10;

const HERMITIAN_TOLERANCE: f64 = 1e-12;
const NORM_TOLERANCE: f64 = 1e-8;
const IMAG_RESIDUE_TOLERANCE: f64 = 1e-10;

/// A single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// `i^k` for integer `k`.
pub(crate) fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// A tensor product of single-qubit Paulis on `n_qubits` qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        assert!(
            (1..=MAX_WIDTH).contains(&n_qubits),
            "width must be in 1..={MAX_WIDTH}"
        );
        Self {
            n_qubits,
            x: 0,
            z: 0,
        }
    }

    pub fn from_letters(letters: &[Pauli]) -> Result<Self> {
        if letters.is_empty() || letters.len() > MAX_WIDTH {
            return Err(contract(format!(
                "Pauli string width {} outside 1..={MAX_WIDTH}",
                letters.len()
            )));
        }
        let mut s = Self::identity(letters.len());
        for (q, p) in letters.iter().enumerate() {
            s.set(q, *p);
        }
        Ok(s)
    }

    /// Builds a string from raw symplectic masks.
    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_WIDTH {
            return Err(contract(format!("width {n_qubits} outside 1..={MAX_WIDTH}")));
        }
        let mask = width_mask(n_qubits);
        if x & !mask != 0 || z & !mask != 0 {
            return Err(contract("mask bits beyond the string width"));
        }
        Ok(Self { n_qubits, x, z })
    }

    /// A string with the given letters at the given qubits and identity elsewhere.
    pub fn sparse(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut s = Self::identity(n_qubits);
        for &(q, p) in ops {
            if q >= n_qubits {
                return Err(contract(format!("qubit {q} out of range for width {n_qubits}")));
            }
            s.set(q, p);
        }
        Ok(s)
    }

    fn set(&mut self, q: usize, p: Pauli) {
        let (xb, zb) = p.bits();
        let bit = 1u64 << q;
        self.x = if xb { self.x | bit } else { self.x & !bit };
        self.z = if zb { self.z | bit } else { self.z & !bit };
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn letter(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x >> q & 1 == 1, self.z >> q & 1 == 1)
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n_qubits).map(|q| self.letter(q)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Bitmask of qubits carrying a non-identity letter.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    /// Number of Y letters; the matrix is real iff this is even.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Product `a·b = phase·c` with `phase ∈ {±1, ±i}`.
    pub fn multiply(&self, other: &PauliString) -> Result<(Complex64, PauliString)> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        // P = i^{x·z} X^x Z^z, and Z^z1 X^x2 = (-1)^{z1·x2} X^x2 Z^z1.
        let k = (self.x & self.z).count_ones() + (other.x & other.z).count_ones() + 4 * MAX_WIDTH as u32
            - (x & z).count_ones()
            + 2 * (self.z & other.x).count_ones();
        Ok((
            i_pow(k),
            PauliString {
                n_qubits: self.n_qubits,
                x,
                z,
            },
        ))
    }

    /// True when the two strings commute as operators.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// True when on every qubit the letters agree or one of them is I.
    pub fn qubitwise_commutes(&self, other: &PauliString) -> bool {
        let both = self.support() & other.support();
        (self.x ^ other.x) & both == 0 && (self.z ^ other.z) & both == 0
    }

    /// Action on a computational basis state: `P|j> = phase·|j'>`.
    #[inline]
    pub fn apply_to_basis(&self, j: usize) -> (Complex64, usize) {
        let sign = if (self.z & j as u64).count_ones() % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        (i_pow(self.y_count()) * sign, j ^ self.x as usize)
    }

    /// Eigenvalue (±1) of a diagonal string on basis state `j`, after the
    /// string has been rotated to Z on its support.
    #[inline]
    pub fn parity_sign(&self, j: usize) -> f64 {
        if (self.support() & j as u64).count_ones() % 2 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    /// Dense `2^n × 2^n` matrix.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let (phase, i) = self.apply_to_basis(j);
            m[(i, j)] = phase;
        }
        m
    }
}

fn width_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn letter_rank(p: Pauli) -> u8 {
    match p {
        Pauli::I => 0,
        Pauli::X => 1,
        Pauli::Y => 2,
        Pauli::Z => 3,
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n_qubits.cmp(&other.n_qubits).then_with(|| {
            for q in 0..self.n_qubits {
                let o = letter_rank(self.letter(q)).cmp(&letter_rank(other.letter(q)));
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| contract(format!("invalid Pauli letter '{c}'"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_letters(&letters)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A complex-weighted sum of Pauli strings of one width, kept in canonical
/// (lexicographic) order with negligible coefficients pruned.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitOperator {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl QubitOperator {
    pub fn zero(n_qubits: usize) -> Self {
        assert!((1..=MAX_WIDTH).contains(&n_qubits));
        Self {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(n_qubits: usize, coefficient: f64) -> Self {
        let mut op = Self::zero(n_qubits);
        op.add_term(PauliString::identity(n_qubits), Complex64::new(coefficient, 0.0))
            .expect("widths agree");
        op
    }

    pub fn from_term(string: PauliString, coefficient: Complex64) -> Self {
        let mut op = Self::zero(string.n_qubits());
        op.add_term(string, coefficient).expect("widths agree");
        op
    }

    /// Real-weighted operator from `(coefficient, letters)` pairs such as `(0.5, "ZI")`.
    pub fn from_real_terms(n_qubits: usize, terms: &[(f64, &str)]) -> Result<Self> {
        let mut op = Self::zero(n_qubits);
        for (c, letters) in terms {
            op.add_term(letters.parse()?, Complex64::new(*c, 0.0))?;
        }
        Ok(op)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, s: &PauliString) -> Complex64 {
        self.terms.get(s).copied().unwrap_or_default()
    }

    /// Coefficient of the all-identity string.
    pub fn constant(&self) -> Complex64 {
        self.coefficient(&PauliString::identity(self.n_qubits))
    }

    pub fn add_term(&mut self, s: PauliString, c: Complex64) -> Result<()> {
        if s.n_qubits() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                found: s.n_qubits(),
            });
        }
        let entry = self.terms.entry(s).or_default();
        *entry += c;
        if entry.norm() <= PRUNE_TOLERANCE {
            self.terms.remove(&s);
        }
        Ok(())
    }

    fn check_width(&self, other: &QubitOperator) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(())
    }

    fn pruned(mut self) -> Self {
        self.terms.retain(|_, c| c.norm() > PRUNE_TOLERANCE);
        self
    }

    pub fn add(&self, other: &QubitOperator) -> Result<Self> {
        self.check_width(other)?;
        let mut out = self.clone();
        for (s, c) in &other.terms {
            *out.terms.entry(*s).or_default() += c;
        }
        Ok(out.pruned())
    }

    pub fn sub(&self, other: &QubitOperator) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let terms = self.terms.iter().map(|(s, c)| (*s, c * factor)).collect();
        Self {
            n_qubits: self.n_qubits,
            terms,
        }
        .pruned()
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &QubitOperator) -> Result<Self> {
        self.check_width(other)?;
        let mut terms: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let (phase, s) = a.multiply(b)?;
                *terms.entry(s).or_default() += phase * ca * cb;
            }
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            terms,
        }
        .pruned())
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &QubitOperator) -> Result<Self> {
        self.check_width(other)?;
        let mut terms: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if a.commutes_with(b) {
                    continue;
                }
                // Anticommuting strings: AB − BA = 2AB.
                let (phase, s) = a.multiply(b)?;
                *terms.entry(s).or_default() += phase * ca * cb * 2.0;
            }
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            terms,
        }
        .pruned())
    }

    /// Symmetrised double commutator `[A, B, C] = ½([[A, B], C] + [A, [B, C]])`.
    pub fn double_commutator(a: &Self, b: &Self, c: &Self) -> Result<Self> {
        let left = a.commutator(b)?.commutator(c)?;
        let right = a.commutator(&b.commutator(c)?)?;
        Ok(left.add(&right)?.scale_real(0.5))
    }

    pub fn adjoint(&self) -> Self {
        let terms = self.terms.iter().map(|(s, c)| (*s, c.conj())).collect();
        Self {
            n_qubits: self.n_qubits,
            terms,
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// `Σ |c|`, optionally excluding the identity term.
    pub fn one_norm(&self, include_identity: bool) -> f64 {
        self.terms
            .iter()
            .filter(|(s, _)| include_identity || !s.is_identity())
            .map(|(_, c)| c.norm())
            .sum()
    }

    /// Keeps only the terms for which `keep` is true.
    pub fn filter(&self, keep: impl Fn(&PauliString) -> bool) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().filter(|(s, _)| keep(s)).map(|(s, c)| (*s, *c)).collect(),
        }
    }

    /// Dense matrix; refuses widths above `cap`.
    pub fn to_matrix_with_cap(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > cap {
            return Err(Error::Resource {
                n_qubits: self.n_qubits,
                cap,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (s, c) in &self.terms {
            for j in 0..dim {
                let (phase, i) = s.apply_to_basis(j);
                m[(i, j)] += phase * c;
            }
        }
        Ok(m)
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        self.to_matrix_with_cap(DEFAULT_MATRIX_CAP)
    }

    /// `op|ψ>` as a raw amplitude vector (not renormalised).
    pub fn apply(&self, amplitudes: &[Complex64]) -> Result<Vec<Complex64>> {
        let dim = 1usize << self.n_qubits;
        if amplitudes.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        let mut out = vec![Complex64::default(); dim];
        for (s, c) in &self.terms {
            for (j, a) in amplitudes.iter().enumerate() {
                let (phase, i) = s.apply_to_basis(j);
                out[i] += phase * c * a;
            }
        }
        Ok(out)
    }

    /// `<ψ|op|ψ>` for an arbitrary (possibly non-Hermitian) operator.
    pub fn expectation_complex(&self, state: &Statevector) -> Result<Complex64> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                found: state.n_qubits(),
            });
        }
        let amps = state.amplitudes();
        let mut total = Complex64::default();
        for (s, c) in &self.terms {
            total += c * pauli_expectation(s, amps);
        }
        Ok(total)
    }

    /// Serialises one term per line as `coefficient<TAB>letters`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, c) in &self.terms {
            if c.im == 0.0 {
                out.push_str(&format_sig12(c.re));
            } else {
                out.push_str(&format!("{},{}", format_sig12(c.re), format_sig12(c.im)));
            }
            out.push('\t');
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut op: Option<QubitOperator> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let (coef, letters) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected `coefficient<TAB>letters`".into()))?;
            let c = match coef.split_once(',') {
                Some((re, im)) => Complex64::new(
                    re.trim().parse().map_err(|e| parse_err(format!("{e}")))?,
                    im.trim().parse().map_err(|e| parse_err(format!("{e}")))?,
                ),
                None => Complex64::new(coef.trim().parse().map_err(|e| parse_err(format!("{e}")))?, 0.0),
            };
            let s: PauliString = letters.trim().parse().map_err(|e: Error| parse_err(e.to_string()))?;
            let op = op.get_or_insert_with(|| QubitOperator::zero(s.n_qubits()));
            op.add_term(s, c).map_err(|e| parse_err(e.to_string()))?;
        }
        op.ok_or_else(|| Error::Parse {
            line: 0,
            message: "no terms".into(),
        })
    }
}

/// `<ψ|P|ψ>` for one string.
pub(crate) fn pauli_expectation(s: &PauliString, amps: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::default();
    for (j, a) in amps.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let (phase, i) = s.apply_to_basis(j);
        acc += amps[i].conj() * phase * a;
    }
    acc
}

/// Expectation of a Hermitian operator in a normalised state.
pub fn expectation(state: &Statevector, op: &QubitOperator) -> Result<f64> {
    if !op.is_hermitian(HERMITIAN_TOLERANCE) {
        return Err(contract("expectation requires a Hermitian operator"));
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(contract(format!("state norm {norm} is not 1")));
    }
    let v = op.expectation_complex(state)?;
    if v.im.abs() > IMAG_RESIDUE_TOLERANCE {
        return Err(contract(format!("imaginary residue {} in Hermitian expectation", v.im)));
    }
    Ok(v.re)
}

/// Decimal rendering with 12 significant digits.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000000".to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-5..=11).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.11e}")
    }
}
