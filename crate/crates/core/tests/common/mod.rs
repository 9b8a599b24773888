#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qexcite::chem::ActiveSpaceIntegrals;

pub fn fixture(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub const FIXTURES: [&str; 3] = ["toy-h2-like.fcidump", "near-degenerate.fcidump", "three-orbital.fcidump"];

/// Spin orbital `2p + σ`; a determinant is a bitmask over them.
fn so(p: usize, beta: bool) -> usize {
    2 * p + beta as usize
}

/// Applies `a_j` then `a†_i` style strings right to left; `None` when the
/// state is annihilated.
fn apply(ops: &[(bool, usize)], det: u64) -> Option<(f64, u64)> {
    let mut d = det;
    let mut sign = 1.0;
    for &(dagger, m) in ops.iter().rev() {
        let occupied = d >> m & 1 == 1;
        if occupied == dagger {
            return None;
        }
        if (d & ((1u64 << m) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        d ^= 1 << m;
    }
    Some((sign, d))
}

/// Determinants with the given spin counts, in the test's own ordering.
pub fn determinants(n: usize, n_alpha: usize, n_beta: usize) -> Vec<u64> {
    (0u64..1 << (2 * n))
        .filter(|d| {
            let na = (0..n).filter(|&p| d >> so(p, false) & 1 == 1).count();
            let nb = (0..n).filter(|&p| d >> so(p, true) & 1 == 1).count();
            na == n_alpha && nb == n_beta
        })
        .collect()
}

/// Second-quantized Hamiltonian applied to determinants directly, in an
/// interleaved spin-orbital ordering unrelated to the library's mapping.
pub fn fermionic_ci_matrix(ints: &ActiveSpaceIntegrals) -> DMatrix<f64> {
    let n = ints.n_spatial();
    let dets = determinants(n, ints.n_alpha(), ints.n_beta());
    let index = |d: u64| dets.iter().position(|&x| x == d);
    let k = dets.len();
    let mut m = DMatrix::from_diagonal_element(k, k, ints.core_energy());
    for (col, &d) in dets.iter().enumerate() {
        for s1 in [false, true] {
            for p in 0..n {
                for q in 0..n {
                    if let Some((sg, e)) = apply(&[(true, so(p, s1)), (false, so(q, s1))], d) {
                        if let Some(row) = index(e) {
                            m[(row, col)] += sg * ints.h1(p, q);
                        }
                    }
                    for s2 in [false, true] {
                        for r in 0..n {
                            for s in 0..n {
                                let ops = [(true, so(p, s1)), (true, so(r, s2)), (false, so(s, s2)), (false, so(q, s1))];
                                if let Some((sg, e)) = apply(&ops, d) {
                                    if let Some(row) = index(e) {
                                        m[(row, col)] += 0.5 * sg * ints.h2(p, q, r, s);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    m
}

pub fn fermionic_ci(ints: &ActiveSpaceIntegrals) -> Vec<f64> {
    let mut v: Vec<f64> = fermionic_ci_matrix(ints).symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Characteristic polynomial coefficients of a Hermitian matrix
/// (Faddeev–LeVerrier), highest degree first.
pub fn char_poly(a: &DMatrix<Complex64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut mk = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=n {
        let am = a * &mk;
        let c: Complex64 = -am.trace() / k as f64;
        coeffs.push(c.re);
        mk = am + DMatrix::<Complex64>::identity(n, n) * c;
    }
    coeffs
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Real roots of a polynomial with all-real, distinct roots inside
/// `[-bound, bound]`, by sign-change scan and bisection.
pub fn real_roots(coeffs: &[f64], bound: f64) -> Vec<f64> {
    let steps = 200_000;
    let h = 2.0 * bound / steps as f64;
    let mut roots = Vec::new();
    let mut x0 = -bound;
    let mut f0 = horner(coeffs, x0);
    for i in 1..=steps {
        let x1 = -bound + i as f64 * h;
        let f1 = horner(coeffs, x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = horner(coeffs, mid);
                if fm * flo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// Ry(θ) on one qubit.
pub fn ry(theta: f64) -> DMatrix<f64> {
    let (s, c) = (theta / 2.0).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `kron(b, a)`: `a` acts on qubit 0, the low bit of the index.
pub fn on_two(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    b.kronecker(a)
}

/// The depth-1 two-qubit ansatz by explicit matrix products.
pub fn ansatz_by_matrices(theta: &[f64; 4]) -> [f64; 4] {
    let cz = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 1.0, -1.0]));
    let first = on_two(&ry(theta[0]), &ry(theta[1]));
    let second = on_two(&ry(theta[2]), &ry(theta[3]));
    let u = second * cz * first;
    [u[(0, 0)], u[(1, 0)], u[(2, 0)], u[(3, 0)]]
}
