//! Named synthetic active spaces and a seeded generator of random ones.
//!
//! All are two electrons in two orbitals. The closed-shell determinant of the
//! lower orbital dominates the ground state, and the exchange integral `K`
//! sets the singlet-triplet splitting (about `2K`).

use rand::Rng;

use crate::chem::ActiveSpaceIntegrals;
use crate::error::{contract, Result};
use crate::sim::rng_for;

pub const NAMED_SYSTEMS: [&str; 2] = ["toy-h2-like", "near-degenerate"];

/// Two-orbital integrals in terms of their independent values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoOrbital {
    pub core: f64,
    pub h00: f64,
    pub h11: f64,
    pub h01: f64,
    /// `(00|00)`, `(11|11)`, `(00|11)`.
    pub j00: f64,
    pub j11: f64,
    pub j01: f64,
    /// `(01|01)`.
    pub k01: f64,
    /// `(00|01)` and `(11|01)`.
    pub x0: f64,
    pub x1: f64,
}

impl TwoOrbital {
    pub fn integrals(&self) -> ActiveSpaceIntegrals {
        let h1 = vec![self.h00, self.h01, self.h01, self.h11];
        let mut h2 = vec![0.0; 16];
        let idx = |p: usize, q: usize, r: usize, s: usize| ((p * 2 + q) * 2 + r) * 2 + s;
        for p in 0..2 {
            for q in 0..2 {
                for r in 0..2 {
                    for s in 0..2 {
                        let ones = p + q + r + s;
                        h2[idx(p, q, r, s)] = match ones {
                            0 => self.j00,
                            4 => self.j11,
                            1 => self.x0,
                            3 => self.x1,
                            _ if p == q => self.j01,
                            _ => self.k01,
                        };
                    }
                }
            }
        }
        ActiveSpaceIntegrals::new(2, 2, 0, self.core, h1, h2).expect("two-orbital integrals are symmetric")
    }
}

/// Singlet-triplet gap near 31 mHa.
pub const TOY_H2_LIKE: TwoOrbital = TwoOrbital {
    core: 0.7,
    h00: -1.25,
    h11: -0.45,
    h01: 0.02,
    j00: 0.67,
    j11: 0.7,
    j01: 0.66,
    k01: 0.0155,
    x0: 0.01,
    x1: 0.005,
};

/// Singlet-triplet gap of 0.2 mHa; the open-shell states decouple from the
/// closed-shell ones by orbital symmetry.
pub const NEAR_DEGENERATE: TwoOrbital = TwoOrbital {
    core: 0.65,
    h00: -1.2,
    h11: -0.5,
    h01: 0.0,
    j00: 0.62,
    j11: 0.64,
    j01: 0.6,
    k01: 1e-4,
    x0: 0.0,
    x1: 0.0,
};

pub fn named(name: &str) -> Result<ActiveSpaceIntegrals> {
    match name {
        "toy-h2-like" => Ok(TOY_H2_LIKE.integrals()),
        "near-degenerate" => Ok(NEAR_DEGENERATE.integrals()),
        other => Err(contract(format!(
            "unknown system '{other}' (known: {})",
            NAMED_SYSTEMS.join(", ")
        ))),
    }
}

/// Random two-orbital parameters with an orbital gap of 0.5–1.0 Ha, positive
/// exchange and weak off-diagonal couplings.
pub fn random_two_orbital(seed: u64) -> TwoOrbital {
    let mut rng = rng_for(seed);
    let h00 = rng.random_range(-1.4..-1.0);
    TwoOrbital {
        core: rng.random_range(0.5..1.0),
        h00,
        h11: h00 + rng.random_range(0.5..1.0),
        h01: rng.random_range(-0.05..0.05),
        j00: rng.random_range(0.55..0.75),
        j11: rng.random_range(0.55..0.75),
        j01: rng.random_range(0.5..0.7),
        k01: rng.random_range(0.01..0.05),
        x0: rng.random_range(-0.02..0.02),
        x1: rng.random_range(-0.02..0.02),
    }
}

pub fn random_spin_free(seed: u64) -> ActiveSpaceIntegrals {
    random_two_orbital(seed).integrals()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::MappedSystem;
    use crate::oracle::{classify_spin, full_ci};

    fn gap(ints: ActiveSpaceIntegrals) -> f64 {
        let sys = MappedSystem::new(ints, true).unwrap();
        classify_spin(&full_ci(&sys.hamiltonian).unwrap(), &sys.s_squared).unwrap().delta_est().unwrap()
    }

    #[test]
    fn toy_gap_is_about_thirty_millihartree() {
        let g = gap(named("toy-h2-like").unwrap());
        assert!((0.025..0.037).contains(&g), "{g}");
    }

    #[test]
    fn near_degenerate_gap_is_two_tenths_millihartree() {
        let g = gap(named("near-degenerate").unwrap());
        assert!((g - 2e-4).abs() < 1e-9, "{g}");
    }

    #[test]
    fn random_systems_order_levels() {
        for seed in 0..20 {
            let sys = MappedSystem::new(random_spin_free(seed), true).unwrap();
            let spec = classify_spin(&full_ci(&sys.hamiltonian).unwrap(), &sys.s_squared).unwrap();
            assert_eq!(spec.labels[0].as_deref(), Some("S0"));
            assert!(spec.energy_of("T1").unwrap() < spec.energy_of("S1").unwrap());
        }
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(named("benzene").is_err());
    }
}
