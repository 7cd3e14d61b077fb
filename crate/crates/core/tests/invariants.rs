//! Cross-module checks against the independent oracles.

use colpnets::control::{ControlModel, Topology};
use colpnets::eval::evaluation_initials;
use colpnets::integrator::{diagnostics, integrate, midpoint_substep, IntegratorConfig};
use colpnets::lie::{GroupKind, GroupSpec, PhaseState};
use colpnets::oracles::{explicit_hamiltonian, fd_gradient, order_estimate, single_particle_reduction_residual, FdConfig};

#[test]
fn hamiltonian_matches_explicit_expansions() {
    for kind in [GroupKind::So3, GroupKind::Se3] {
        let g = GroupSpec::of(kind);
        for (topo, dict) in [(Topology::Dictatorship, true), (Topology::Democracy, false)] {
            for n in [1, 2, 3, 5] {
                let m = ControlModel::new(g, topo.clone(), n, 0.5).unwrap();
                for s in evaluation_initials(g, n, 1.0, 17, 200).unwrap() {
                    let h = m.hamiltonian(&s).unwrap();
                    assert!((h - explicit_hamiltonian(kind, dict, n, 0.5, &s.mu)).abs() <= 1e-13);
                }
            }
        }
    }
}

#[test]
fn hamiltonian_gradient_matches_finite_differences() {
    for g in [GroupSpec::SO3, GroupSpec::SE3] {
        let m = ControlModel::new(g, Topology::Democracy, 3, 2.0).unwrap();
        for s in evaluation_initials(g, 3, 1.0, 4, 50).unwrap() {
            let a = m.grad_hamiltonian(&s).unwrap();
            let fd = fd_gradient(|x| m.energy(x), &s.mu, FdConfig::default()).unwrap();
            for (x, y) in a.iter().zip(&fd) {
                assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
            }
        }
    }
}

#[test]
fn midpoint_rule_is_second_order() {
    let m = ControlModel::new(GroupSpec::SO3, Topology::Democracy, 1, 0.5).unwrap();
    let s0 = PhaseState::new(GroupSpec::SO3, 1, vec![0.4, 0.8, -0.6]).unwrap();
    let cfg = IntegratorConfig::default();
    let solve = |steps: usize| {
        let h = 1.0 / steps as f64;
        let mut s = s0.clone();
        for _ in 0..steps {
            s = midpoint_substep(&m, &s, h, &cfg).unwrap();
        }
        s.mu
    };
    let (a, b, c) = (solve(10), solve(20), solve(40));
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let order = order_estimate(d(&a, &b), d(&b, &c)).unwrap();
    assert!((1.8..=2.2).contains(&order), "{order}");
}

#[test]
fn single_particle_reduction_holds() {
    let m = ControlModel::new(GroupSpec::SO3, Topology::Democracy, 1, 0.5).unwrap();
    let s = PhaseState::new(GroupSpec::SO3, 1, vec![0.9, -0.2, 0.4]).unwrap();
    let t = integrate(&m, &s, &IntegratorConfig::with_dt(0.01), 1001).unwrap();
    let samples: Vec<Vec<f64>> = t.states.iter().map(|s| s.mu.clone()).collect();
    let r = single_particle_reduction_residual(&samples, 0.01).unwrap();
    assert!(r <= 1e-4, "{r}");
}

#[test]
fn se3_drift_in_last_component_keeps_third_component_zero() {
    let m = ControlModel::new(GroupSpec::SE3, Topology::Democracy, 1, 0.5)
        .unwrap()
        .with_drift(5)
        .unwrap();
    let s = PhaseState::new(GroupSpec::SE3, 1, vec![0.7, -0.4, 0.0, 0.3, 0.9, -0.5]).unwrap();
    let t = integrate(&m, &s, &IntegratorConfig::default(), 101).unwrap();
    assert!(t.states.iter().all(|s| s.mu[2].abs() <= 1e-13));
    // the dynamics are not trivial
    assert!((t.states[100].mu[0] - 0.7).abs() > 1e-3);
}

#[test]
fn default_trajectories_conserve_invariants() {
    for kind in [GroupKind::So3, GroupKind::Se3] {
        let g = GroupSpec::of(kind);
        for topo in [Topology::Dictatorship, Topology::Democracy] {
            let m = ControlModel::new(g, topo, 3, 0.5).unwrap();
            for s in evaluation_initials(g, 3, 1.0, 23, 3).unwrap() {
                let d = diagnostics(&m, &integrate(&m, &s, &IntegratorConfig::default(), 51).unwrap()).unwrap();
                assert!(d.worst_casimir_relative() <= 1e-12);
                assert!(d.max_energy_relative <= 1e-12);
            }
        }
    }
}
