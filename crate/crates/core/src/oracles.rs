//! Independent reference computations used by tests, the acceptance suite and
//! `selftest`: central finite differences, classical RK4, Gauss-Jordan
//! inversion, convergence-order estimates, the explicit polynomial
//! Hamiltonians for the star and complete graphs, and residual checks on the
//! single-particle ODE reductions.
//!
//! Nothing here calls into the code it is meant to check.

use crate::error::{Error, Result};
use crate::lie::GroupKind;

#[derive(Clone, Copy, Debug)]
pub struct FdConfig {
    pub step: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { step: 1e-6 }
    }
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F>(f: F, x: &[f64], config: FdConfig) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(config.step > 0.0) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + config.step;
        let plus = f(&probe);
        probe[i] = x[i] - config.step;
        let minus = f(&probe);
        probe[i] = x[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                context: format!("in finite difference along coordinate {i}"),
            });
        }
        out.push((plus - minus) / (2.0 * config.step));
    }
    Ok(out)
}

/// Classical fourth-order Runge-Kutta from `x0` over time `t` in `steps` steps.
pub fn rk4_flow<F>(field: F, x0: &[f64], t: f64, steps: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if steps == 0 {
        return Err(Error::Config("rk4 needs at least one step".into()));
    }
    let h = t / steps as f64;
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut tmp = vec![0.0; d];
    for step in 0..steps {
        let k1 = field(&x);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        let k2 = field(&tmp);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        let k3 = field(&tmp);
        for i in 0..d {
            tmp[i] = x[i] + h * k3[i];
        }
        let k4 = field(&tmp);
        for i in 0..d {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("in rk4 state after step {step}"),
            });
        }
    }
    Ok(x)
}

/// Observed order `log₂(e_h / e_{h/2})`.
pub fn order_estimate(error_h: f64, error_half: f64) -> Result<f64> {
    if error_h == 0.0 || error_half == 0.0 {
        return Err(Error::ZeroError);
    }
    Ok((error_h.abs() / error_half.abs()).log2())
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .expect("nonempty range");
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::Singular);
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let factor = m[r][col];
                if factor != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= factor * m[col][c];
                    }
                }
            }
        }
    }
    Ok(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// The explicit polynomial Hamiltonians written out for the star
/// ("dictatorship") and complete ("democracy") graphs, evaluated term by term.
///
/// `mu` is the stacked particle-major state; SO(3) uses one control and drift
/// in component 2, SE(3) two controls and drift in component 4.
pub fn explicit_hamiltonian(group: GroupKind, dictatorship: bool, num_particles: usize, chi: f64, mu: &[f64]) -> f64 {
    let (n, drift, controls) = match group {
        GroupKind::So3 => (3, 1, 1),
        GroupKind::Se3 => (6, 3, 2),
    };
    let nf = num_particles as f64;
    let c = |k: usize, a: usize| mu[k * n + a];
    let d = 1.0 + 2.0 * nf * chi;
    let drift_sum: f64 = (0..num_particles).map(|k| c(k, drift)).sum();
    let mut quad = 0.0;
    for a in 0..controls {
        if dictatorship {
            let e = (1.0 + 2.0 * chi) * d;
            quad += (1.0 + 2.0 * chi) / d * c(0, a).powi(2);
            quad += (d + 4.0 * chi * chi) / e * (1..num_particles).map(|k| c(k, a).powi(2)).sum::<f64>();
            quad += 4.0 * chi / d * c(0, a) * (1..num_particles).map(|k| c(k, a)).sum::<f64>();
            let mut cross = 0.0;
            for i in 1..num_particles {
                for j in i + 1..num_particles {
                    cross += c(i, a) * c(j, a);
                }
            }
            quad += 8.0 * chi * chi / e * cross;
        } else {
            quad += (1.0 + 2.0 * chi) / d * (0..num_particles).map(|k| c(k, a).powi(2)).sum::<f64>();
            let mut cross = 0.0;
            for i in 0..num_particles {
                for j in i + 1..num_particles {
                    cross += c(i, a) * c(j, a);
                }
            }
            quad += 4.0 * chi / d * cross;
        }
    }
    drift_sum + 0.5 * quad
}

/// Largest `|μ̈₁ − ½μ₁(μ₂ − 1)|` over interior samples of a single-particle
/// SO(3) trajectory, with `μ̈₁` from the centered second difference.
///
/// Each sample is a 3-vector `(μ₁, μ₂, μ₃)`; samples are `dt` apart.
pub fn single_particle_reduction_residual(samples: &[Vec<f64>], dt: f64) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::Oracle("reduction residual needs at least 3 samples".into()));
    }
    if samples.iter().any(|s| s.len() != 3) {
        return Err(Error::Oracle("reduction residual expects single-particle SO(3) samples".into()));
    }
    let mut worst = 0.0f64;
    for w in samples.windows(3) {
        let second = (w[2][0] - 2.0 * w[1][0] + w[0][0]) / (dt * dt);
        let rhs = 0.5 * w[1][0] * (w[1][1] - 1.0);
        worst = worst.max((second - rhs).abs());
    }
    Ok(worst)
}
