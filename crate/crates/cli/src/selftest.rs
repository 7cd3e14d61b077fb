//! Fast invariant checks run by `colpnets selftest`.

use std::time::Instant;

use colpnets::control::{psi_closed_form, psi_solve, ControlModel, Topology};
use colpnets::dataset::{generate, DatasetConfig, PairSet};
use colpnets::eval::{evaluation_initials, reconstruct};
use colpnets::integrator::{diagnostics, integrate, midpoint_substep, IntegratorConfig};
use colpnets::lie::{casimir_scales, casimirs, structure_constants, GroupKind, GroupSpec, PhaseState, StructureConstants};
use colpnets::model::CoLpNet;
use colpnets::oracles::{explicit_hamiltonian, fd_gradient, order_estimate, FdConfig};
use colpnets::rng::{seeded, Stream};
use colpnets::train::{train, TrainConfig};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String), String>) -> Check {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let err: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    err / norm.max(f64::MIN_POSITIVE)
}

/// Jacobi-identity and antisymmetry residual of a set of structure constants.
pub fn structure_check(gamma: &StructureConstants) -> (bool, String) {
    let (a, j) = (gamma.antisymmetry_residual(), gamma.jacobi_residual());
    (a <= 1e-15 && j <= 1e-15, format!("antisymmetry {a:.1e}, jacobi {j:.1e}"))
}

fn states(group: GroupSpec, n: usize, count: usize, seed: u64) -> Vec<PhaseState> {
    evaluation_initials(group, n, 1.0, seed, count).expect("unit box")
}

pub fn run(quick: bool) -> Vec<Check> {
    let mut out = vec![
        check("structure constants", || {
            let (p1, d1) = structure_check(&structure_constants(GroupSpec::SO3));
            let (p2, d2) = structure_check(&structure_constants(GroupSpec::SE3));
            Ok((p1 && p2, format!("so3: {d1}; se3: {d2}")))
        }),
        check("coupling matrix closed form vs solve", || {
            let mut worst = 0.0f64;
            for topo in [Topology::Dictatorship, Topology::Democracy] {
                for n in 2..=8 {
                    for chi in [0.0, 0.1, 0.5, 2.0] {
                        let a = psi_closed_form(&topo, n, chi).map_err(|e| e.to_string())?;
                        let b = psi_solve(&topo, n, chi).map_err(|e| e.to_string())?;
                        worst = worst.max((&a - &b).amax());
                        for i in 0..n {
                            worst = worst.max((a.row(i).sum() - 1.0).abs());
                        }
                    }
                }
            }
            Ok((worst <= 1e-13, format!("max deviation {worst:.1e}")))
        }),
        check("hamiltonian vs explicit expansion", || {
            let mut worst = 0.0f64;
            for kind in [GroupKind::So3, GroupKind::Se3] {
                for (topo, dict) in [(Topology::Dictatorship, true), (Topology::Democracy, false)] {
                    let g = GroupSpec::of(kind);
                    let m = ControlModel::new(g, topo, 3, 0.5).map_err(|e| e.to_string())?;
                    for s in states(g, 3, 200, 1) {
                        let h = m.hamiltonian(&s).map_err(|e| e.to_string())?;
                        worst = worst.max((h - explicit_hamiltonian(kind, dict, 3, 0.5, &s.mu)).abs());
                    }
                }
            }
            Ok((worst <= 1e-13, format!("max deviation {worst:.1e}")))
        }),
        check("hamiltonian gradient vs finite differences", || {
            let mut worst = 0.0f64;
            for g in [GroupSpec::SO3, GroupSpec::SE3] {
                let m = ControlModel::new(g, Topology::Dictatorship, 3, 0.5).map_err(|e| e.to_string())?;
                for s in states(g, 3, 20, 2) {
                    let analytic = m.grad_hamiltonian(&s).map_err(|e| e.to_string())?;
                    let fd = fd_gradient(|x| m.energy(x), &s.mu, FdConfig::default()).map_err(|e| e.to_string())?;
                    worst = worst.max(rel_err(&analytic, &fd));
                }
            }
            Ok((worst <= 1e-6, format!("max relative error {worst:.1e}")))
        }),
        check("loss gradient vs finite differences", || {
            let cfg = DatasetConfig {
                num_particles: 2,
                num_trajectories: 5,
                points_per_trajectory: 2,
                seed: 3,
                ..DatasetConfig::defaults(GroupKind::So3)
            };
            let pairs = generate(&cfg).map_err(|e| e.to_string())?;
            let mut m = CoLpNet::with_defaults(GroupSpec::SO3, 2, 3, cfg.dt).map_err(|e| e.to_string())?;
            m.initialize(0.5, &mut seeded(3, Stream::Init));
            let g = m.grad_loss(&pairs).map_err(|e| e.to_string())?;
            let fd = fd_gradient(
                |p| {
                    let mut q = m.clone();
                    q.params.copy_from_slice(p);
                    q.loss(&pairs).unwrap_or(f64::NAN)
                },
                &m.params,
                FdConfig::default(),
            )
            .map_err(|e| e.to_string())?;
            let err = rel_err(&g, &fd);
            Ok((err <= 1e-6, format!("relative error {err:.1e} over {} weights", g.len())))
        }),
        check("learned map keeps casimirs (1000 steps)", || {
            let mut worst = 0.0f64;
            for g in [GroupSpec::SO3, GroupSpec::SE3] {
                let mut m = CoLpNet::with_defaults(g, 3, 3, 0.1).map_err(|e| e.to_string())?;
                m.initialize(1.0, &mut seeded(4, Stream::Init));
                let s = states(g, 3, 1, 4).remove(0);
                let t = reconstruct(&m, &s, 1000).map_err(|e| e.to_string())?;
                let (c0, c1) = (casimirs(&s).values, casimirs(t.states.last().expect("nonempty")).values);
                for ((a, b), sc) in c0.iter().zip(&c1).zip(casimir_scales(&s)) {
                    worst = worst.max((a - b).abs() / sc);
                }
            }
            Ok((worst <= 1e-10, format!("max relative drift {worst:.1e}")))
        }),
        check("ground truth invariants", || {
            let mut worst: f64 = 0.0;
            for kind in [GroupKind::So3, GroupKind::Se3] {
                let g = GroupSpec::of(kind);
                let m = ControlModel::new(g, Topology::Democracy, 3, 0.5).map_err(|e| e.to_string())?;
                for s in states(g, 3, 2, 5) {
                    let t = integrate(&m, &s, &IntegratorConfig::default(), 11).map_err(|e| e.to_string())?;
                    let d = diagnostics(&m, &t).map_err(|e| e.to_string())?;
                    worst = worst.max(d.worst_casimir_relative()).max(d.max_energy_relative);
                }
            }
            Ok((worst <= 1e-12, format!("max relative drift {worst:.1e}")))
        }),
        check("integrator convergence order", || {
            let order = integrator_order().map_err(|e| e.to_string())?;
            Ok(((1.8..=2.2).contains(&order), format!("observed order {order:.3}")))
        }),
    ];
    if !quick {
        out.push(check("short training reduces loss", || {
            let cfg = DatasetConfig {
                num_particles: 2,
                num_trajectories: 8,
                points_per_trajectory: 11,
                seed: 6,
                ..DatasetConfig::defaults(GroupKind::So3)
            };
            let pairs: PairSet = generate(&cfg).map_err(|e| e.to_string())?;
            let m = CoLpNet::with_defaults(GroupSpec::SO3, 2, 3, cfg.dt).map_err(|e| e.to_string())?;
            let tc = TrainConfig {
                epochs: 500,
                seed: 6,
                ..TrainConfig::default()
            };
            let r = train(m, &pairs, &tc).map_err(|e| e.to_string())?;
            let (first, last) = (r.history[0], *r.history.last().expect("nonempty"));
            Ok((last <= 1e-2 * first, format!("mean loss {first:.2e} -> {last:.2e}")))
        }));
    }
    out
}

/// Observed order of the midpoint rule on a single SO(3) particle, from
/// solutions at `h`, `h/2`, `h/4` over a fixed horizon.
pub fn integrator_order() -> colpnets::Result<f64> {
    let m = ControlModel::new(GroupSpec::SO3, Topology::Democracy, 1, 0.5)?;
    let s0 = PhaseState::new(GroupSpec::SO3, 1, vec![0.7, -0.3, 0.5])?;
    let cfg = IntegratorConfig::default();
    let solve = |steps: usize| -> colpnets::Result<Vec<f64>> {
        let h = 2.0 / steps as f64;
        let mut s = s0.clone();
        for _ in 0..steps {
            s = midpoint_substep(&m, &s, h, &cfg)?;
        }
        Ok(s.mu)
    };
    let (a, b, c) = (solve(20)?, solve(40)?, solve(80)?);
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    order_estimate(diff(&a, &b), diff(&b, &c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_structure_constants_fail() {
        let mut gamma = structure_constants(GroupSpec::SE3);
        assert!(structure_check(&gamma).0);
        // flip the sign of one entry
        let (s, i, j) = (0, 1, 2);
        let v = gamma.get(s, i, j);
        gamma.set(s, i, j, -v);
        assert!(!structure_check(&gamma).0);
    }
}
