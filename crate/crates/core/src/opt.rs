//! SPSA for sampled objectives and a BFGS quasi-Newton method for exact ones.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::sim::rng_for;

const GRADIENT_CHECK_STEP: f64 = 1e-5;
const GRADIENT_CHECK_TOLERANCE: f64 = 1e-5;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// SPSA step gain; `None` calibrates it from the objective.
    pub a: Option<f64>,
    pub c: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Stability constant `A`; `None` uses a tenth of `max_iterations`.
    pub stability: Option<f64>,
    pub calibration_samples: usize,
    /// Size of the first SPSA step per coordinate that calibration aims for.
    pub target_step: f64,
    /// Lower bound on the calibration gradient magnitude, so a nearly
    /// stationary starting point does not inflate the gain.
    pub calibration_floor: f64,
    pub seed: u64,
    /// Gradient infinity-norm at which `gradient_minimize` stops.
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            a: None,
            c: 0.1,
            alpha: 0.602,
            gamma: 0.101,
            stability: None,
            calibration_samples: 25,
            target_step: 0.2,
            calibration_floor: 0.5,
            seed: 0,
            tolerance: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.c)
            || !positive(self.target_step)
            || !positive(self.calibration_floor)
            || self.a.is_some_and(|a| !positive(a))
        {
            return Err(contract("SPSA gains must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(contract("SPSA exponents must lie in (0, 1]"));
        }
        if self.stability.is_some_and(|s| !(s >= 0.0)) || !(self.tolerance > 0.0) {
            return Err(contract("stability must be non-negative and tolerance positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub theta: Vec<f64>,
    /// Objective at `theta` for exact methods; the mean of the last
    /// iterations' two-sided samples for SPSA.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Simultaneous-perturbation stochastic approximation. The returned point is
/// the mean of the last tenth of the iterates.
pub fn spsa_minimize(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    theta0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult> {
    cfg.validate()?;
    if theta0.iter().any(|t| !t.is_finite()) {
        return Err(contract("initial point must be finite"));
    }
    let dim = theta0.len();
    let mut rng = rng_for(cfg.seed);
    let stability = cfg.stability.unwrap_or(cfg.max_iterations as f64 / 10.0);
    let mut trace: Vec<TraceEntry> = Vec::with_capacity(cfg.max_iterations);
    let mut theta = theta0.to_vec();

    let perturbed = |theta: &[f64], delta: &[f64], ck: f64, f: &mut dyn FnMut(&[f64]) -> Result<f64>| {
        let plus: Vec<f64> = theta.iter().zip(delta).map(|(t, d)| t + ck * d).collect();
        let minus: Vec<f64> = theta.iter().zip(delta).map(|(t, d)| t - ck * d).collect();
        Ok::<_, Error>((f(&plus)?, f(&minus)?))
    };
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..dim).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
    };

    let a = match cfg.a {
        Some(a) => a,
        None => {
            let mut total = 0.0;
            for i in 0..cfg.calibration_samples {
                let delta = draw(&mut rng);
                let (fp, fm) = perturbed(&theta, &delta, cfg.c, &mut f)?;
                if !fp.is_finite() || !fm.is_finite() {
                    return Err(Error::NonFinite { iteration: i, trace });
                }
                total += (fp - fm).abs() / (2.0 * cfg.c);
            }
            let mean = (total / cfg.calibration_samples.max(1) as f64).max(cfg.calibration_floor);
            cfg.target_step * (stability + 1.0).powf(cfg.alpha) / mean
        }
    };

    let keep = (cfg.max_iterations / 10).max(1);
    let mut anchor: Option<Vec<f64>> = None;
    let mut tail_sum = vec![0.0; dim];
    let mut tail_values = 0.0;
    for k in 0..cfg.max_iterations {
        let ak = a / (k as f64 + 1.0 + stability).powf(cfg.alpha);
        let ck = cfg.c / (k as f64 + 1.0).powf(cfg.gamma);
        let delta = draw(&mut rng);
        let (fp, fm) = perturbed(&theta, &delta, ck, &mut f)?;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite { iteration: k, trace });
        }
        let g = (fp - fm) / (2.0 * ck);
        let step: Vec<f64> = delta.iter().map(|d| ak * g * d).collect();
        for (t, s) in theta.iter_mut().zip(&step) {
            *t -= s;
        }
        let value = 0.5 * (fp + fm);
        trace.push(TraceEntry { iteration: k, value, step_norm: norm(&step) });
        if k + keep >= cfg.max_iterations {
            let base = anchor.get_or_insert_with(|| theta.clone());
            for ((s, t), b) in tail_sum.iter_mut().zip(&theta).zip(base.iter()) {
                *s += t - b;
            }
            tail_values += value;
        }
    }
    let (theta, value) = if cfg.max_iterations == 0 {
        (theta, f64::NAN)
    } else {
        let m = keep.min(cfg.max_iterations) as f64;
        let base = anchor.expect("tail is non-empty");
        (tail_sum.iter().zip(&base).map(|(s, b)| b + s / m).collect(), tail_values / m)
    };
    Ok(OptimizeResult { theta, value, iterations: cfg.max_iterations, converged: true, trace })
}

/// Largest deviation between `grad` and central finite differences at `theta`.
pub fn gradient_check(
    f: &mut impl FnMut(&[f64]) -> Result<f64>,
    grad: &[f64],
    theta: &[f64],
) -> Result<f64> {
    let mut shifted = theta.to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        shifted[k] = theta[k] + GRADIENT_CHECK_STEP;
        let plus = f(&shifted)?;
        shifted[k] = theta[k] - GRADIENT_CHECK_STEP;
        let minus = f(&shifted)?;
        shifted[k] = theta[k];
        let fd = (plus - minus) / (2.0 * GRADIENT_CHECK_STEP);
        worst = worst.max((fd - grad[k]).abs());
    }
    Ok(worst)
}

/// BFGS with Armijo backtracking. Accepted steps never increase `f`.
pub fn gradient_minimize(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    mut grad: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    theta0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult> {
    let dim = theta0.len();
    let mut theta = DVector::from_column_slice(theta0);
    let mut value = f(theta.as_slice())?;
    let mut g = DVector::from_vec(grad(theta.as_slice())?);
    if g.len() != dim {
        return Err(Error::Dimension { expected: dim, found: g.len() });
    }
    let deviation = gradient_check(&mut f, g.as_slice(), theta.as_slice())?;
    if deviation > GRADIENT_CHECK_TOLERANCE {
        return Err(Error::GradientCheck { deviation });
    }
    let mut trace = Vec::new();
    let mut inv_h = DMatrix::<f64>::identity(dim, dim);
    let mut iterations = 0;
    let finite = |v: f64, it: usize, trace: &Vec<TraceEntry>| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { iteration: it, trace: trace.clone() })
        }
    };
    finite(value, 0, &trace)?;

    while g.amax() > cfg.tolerance && iterations < cfg.max_iterations {
        let mut d = -(&inv_h * &g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            inv_h = DMatrix::identity(dim, dim);
            d = -g.clone();
            slope = g.dot(&d);
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let candidate = &theta + &d * t;
            let fc = f(candidate.as_slice())?;
            finite(fc, iterations, &trace)?;
            if fc <= value + ARMIJO * t * slope {
                accepted = Some((candidate, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((next, fnext)) = accepted else {
            if inv_h != DMatrix::identity(dim, dim) {
                inv_h = DMatrix::identity(dim, dim);
                continue;
            }
            break;
        };
        let gnext = DVector::from_vec(grad(next.as_slice())?);
        let s = &next - &theta;
        let y = &gnext - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() && sy > 0.0 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(dim, dim);
            let left = &i - &s * y.transpose() * rho;
            let right = &i - &y * s.transpose() * rho;
            inv_h = &left * &inv_h * &right + &s * s.transpose() * rho;
        }
        iterations += 1;
        trace.push(TraceEntry { iteration: iterations, value: fnext, step_norm: s.norm() });
        theta = next;
        value = fnext;
        g = gnext;
    }
    Ok(OptimizeResult {
        theta: theta.as_slice().to_vec(),
        value,
        iterations,
        converged: g.amax() <= cfg.tolerance,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(t: &[f64]) -> Result<f64> {
        Ok(t.iter().map(|x| x * x).sum())
    }

    fn bowl_grad(t: &[f64]) -> Result<Vec<f64>> {
        Ok(t.iter().map(|x| 2.0 * x).collect())
    }

    #[test]
    fn spsa_reaches_origin() {
        let cfg = OptimizerConfig { seed: 3, ..Default::default() };
        let r = spsa_minimize(bowl, &[1.0, 1.0], &cfg).unwrap();
        assert!(norm(&r.theta) <= 0.05, "{:?}", r.theta);
        assert_eq!(r.trace.len(), 300);
    }

    #[test]
    fn spsa_is_reproducible() {
        let cfg = OptimizerConfig { seed: 11, max_iterations: 50, ..Default::default() };
        let a = spsa_minimize(bowl, &[0.5, -0.2, 0.9], &cfg).unwrap();
        let b = spsa_minimize(bowl, &[0.5, -0.2, 0.9], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spsa_leaves_constant_objective_alone() {
        let r = spsa_minimize(|_| Ok(4.2), &[0.3, -0.7], &OptimizerConfig::default()).unwrap();
        assert_eq!(r.theta, vec![0.3, -0.7]);
    }

    #[test]
    fn spsa_aborts_on_nan() {
        let mut calls = 0;
        let cfg = OptimizerConfig { a: Some(0.1), ..Default::default() };
        let err = spsa_minimize(
            |t| {
                calls += 1;
                Ok(if calls > 20 { f64::NAN } else { t[0] * t[0] })
            },
            &[1.0],
            &cfg,
        )
        .unwrap_err();
        match err {
            Error::NonFinite { iteration, trace } => {
                assert_eq!(iteration, 10);
                assert_eq!(trace.len(), 10);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bfgs_solves_quadratic_quickly() {
        let f = |t: &[f64]| Ok(3.0 * (t[0] - 1.0).powi(2) + (t[1] + 2.0).powi(2) + t[0] * t[1]);
        let g = |t: &[f64]| Ok(vec![6.0 * (t[0] - 1.0) + t[1], 2.0 * (t[1] + 2.0) + t[0]]);
        let r = gradient_minimize(f, g, &[0.0, 0.0], &OptimizerConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2 + 4, "{} iterations", r.iterations);
    }

    #[test]
    fn bfgs_at_minimum_returns_immediately() {
        let r = gradient_minimize(bowl, bowl_grad, &[0.0, 0.0], &OptimizerConfig::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
    }

    #[test]
    fn inconsistent_gradient_is_rejected() {
        let wrong = |t: &[f64]| Ok(t.iter().map(|x| 3.0 * x).collect());
        let err = gradient_minimize(bowl, wrong, &[0.4, 0.1], &OptimizerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::GradientCheck { .. }));
    }

    #[test]
    fn bfgs_values_never_increase() {
        let rosen = |t: &[f64]| Ok((1.0 - t[0]).powi(2) + 100.0 * (t[1] - t[0] * t[0]).powi(2));
        let grad = |t: &[f64]| {
            Ok(vec![
                -2.0 * (1.0 - t[0]) - 400.0 * t[0] * (t[1] - t[0] * t[0]),
                200.0 * (t[1] - t[0] * t[0]),
            ])
        };
        let r = gradient_minimize(rosen, grad, &[-1.2, 1.0], &OptimizerConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.trace.windows(2).all(|w| w[1].value <= w[0].value));
        assert!((r.theta[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let rosen = |t: &[f64]| Ok((1.0 - t[0]).powi(2) + 100.0 * (t[1] - t[0] * t[0]).powi(2));
        let grad = |t: &[f64]| {
            Ok(vec![
                -2.0 * (1.0 - t[0]) - 400.0 * t[0] * (t[1] - t[0] * t[0]),
                200.0 * (t[1] - t[0] * t[0]),
            ])
        };
        let cfg = OptimizerConfig { max_iterations: 3, ..Default::default() };
        let r = gradient_minimize(rosen, grad, &[-1.2, 1.0], &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
