//! Exact flows of the single-component test Hamiltonians `h = w·μ_{ki}`.
//!
//! Every flow acts on one particle only and is linear in the state:
//!
//! * rotations (all so(3) components, the angular components of se(3)) turn
//!   `μ_k` (resp. both `Π_k` and `p_k`) about the axis `e_i` by `θ = w·t*`;
//! * shears (the linear components `i = 4, 5, 6` of se(3)) add
//!   `θ·(p_k × e_{i−3})` to `Π_k` and leave `p_k` alone.
//!
//! With `(u, v) = (i+1, i+2) mod 3` the rotation is
//! `x_u ← cos θ·x_u + sin θ·x_v`, `x_v ← −sin θ·x_u + cos θ·x_v`, which is
//! the identity at `θ = 0` and whose `w`-derivative is the matrix
//! `t*·[[−sin, cos], [−cos, −sin]]` on the `(u, v)` plane. The shear is
//! `Π_u += θ·p_v`, `Π_v −= θ·p_u`. Both are the flows of
//! `μ̇_k = μ_k × e_i·w` (the Poisson tensor's `1/√2` is absorbed into `w`),
//! so they preserve every Casimir exactly.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{GroupKind, GroupSpec, PhaseState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Rotation,
    Shear,
}

/// One test-Hamiltonian map, acting on `particle` through `component`
/// (both 0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapDescriptor {
    pub particle: usize,
    pub component: usize,
}

impl MapDescriptor {
    pub fn new(particle: usize, component: usize) -> Self {
        Self { particle, component }
    }

    pub fn kind(&self, group: GroupSpec) -> MapKind {
        match group.kind {
            GroupKind::So3 => MapKind::Rotation,
            GroupKind::Se3 if self.component < 3 => MapKind::Rotation,
            GroupKind::Se3 => MapKind::Shear,
        }
    }

    pub fn validate(&self, group: GroupSpec, num_particles: usize) -> Result<()> {
        if self.component >= group.n || self.particle >= num_particles {
            return Err(Error::Descriptor {
                descriptor: self.to_string(),
                group: format!("{group} with {num_particles} particles"),
            });
        }
        Ok(())
    }
}

impl fmt::Display for MapDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(particle {}, component {})", self.particle + 1, self.component + 1)
    }
}

/// Ordered list of maps composed in one learned step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSchedule {
    pub maps: Vec<MapDescriptor>,
    /// Map time `t*`, equal to the data interval.
    pub delta_t: f64,
}

impl MapSchedule {
    /// Particle-major, component-ascending sweep over all `N·n` components,
    /// repeated `passes` times.
    pub fn default_for(group: GroupSpec, num_particles: usize, delta_t: f64, passes: usize) -> Self {
        let mut maps = Vec::with_capacity(passes * num_particles * group.n);
        for _ in 0..passes {
            for k in 0..num_particles {
                for i in 0..group.n {
                    maps.push(MapDescriptor::new(k, i));
                }
            }
        }
        Self { maps, delta_t }
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

#[inline]
fn plane(axis: usize) -> (usize, usize) {
    ((axis + 1) % 3, (axis + 2) % 3)
}

#[inline]
fn rotate(x: &mut [f64], u: usize, v: usize, c: f64, s: f64) {
    let (xu, xv) = (x[u], x[v]);
    x[u] = c * xu + s * xv;
    x[v] = -s * xu + c * xv;
}

/// Apply the map to one particle block in place, with `theta = w·t*`.
#[inline]
pub(crate) fn apply_block(kind: GroupKind, component: usize, theta: f64, block: &mut [f64]) {
    let (u, v) = plane(component % 3);
    if kind == GroupKind::Se3 && component >= 3 {
        let (pu, pv) = (block[3 + u], block[3 + v]);
        block[u] += theta * pv;
        block[v] -= theta * pu;
        return;
    }
    let (s, c) = theta.sin_cos();
    rotate(block, u, v, c, s);
    if kind == GroupKind::Se3 {
        rotate(&mut block[3..6], u, v, c, s);
    }
}

/// `block ← Aᵀ·block` for the same map.
#[inline]
pub(crate) fn apply_block_transpose(kind: GroupKind, component: usize, theta: f64, block: &mut [f64]) {
    let (u, v) = plane(component % 3);
    if kind == GroupKind::Se3 && component >= 3 {
        let (lu, lv) = (block[u], block[v]);
        block[3 + v] += theta * lu;
        block[3 + u] -= theta * lv;
        return;
    }
    let (s, c) = (-theta).sin_cos();
    rotate(block, u, v, c, s);
    if kind == GroupKind::Se3 {
        rotate(&mut block[3..6], u, v, c, s);
    }
}

/// `λ·(∂A/∂w · x)` on one particle block.
#[inline]
pub(crate) fn d_block_dot(kind: GroupKind, component: usize, theta: f64, t_star: f64, x: &[f64], lambda: &[f64]) -> f64 {
    let (u, v) = plane(component % 3);
    if kind == GroupKind::Se3 && component >= 3 {
        return t_star * (lambda[u] * x[3 + v] - lambda[v] * x[3 + u]);
    }
    let (s, c) = theta.sin_cos();
    let rot = |x: &[f64], l: &[f64]| l[u] * (-s * x[u] + c * x[v]) + l[v] * (-c * x[u] - s * x[v]);
    let mut acc = rot(x, lambda);
    if kind == GroupKind::Se3 {
        acc += rot(&x[3..6], &lambda[3..6]);
    }
    t_star * acc
}

/// The `n×n` block the map applies to its particle (identity elsewhere).
pub fn map_matrix(group: GroupSpec, descriptor: MapDescriptor, w: f64, t_star: f64) -> Result<DMatrix<f64>> {
    if descriptor.component >= group.n {
        return Err(Error::Descriptor {
            descriptor: descriptor.to_string(),
            group: group.to_string(),
        });
    }
    let n = group.n;
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut col = vec![0.0; n];
        col[j] = 1.0;
        apply_block(group.kind, descriptor.component, w * t_star, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    Ok(m)
}

pub fn apply_map(state: &PhaseState, descriptor: MapDescriptor, w: f64, t_star: f64) -> Result<PhaseState> {
    descriptor.validate(state.group, state.num_particles)?;
    let n = state.group.n;
    let mut out = state.clone();
    let k = descriptor.particle;
    apply_block(state.group.kind, descriptor.component, w * t_star, &mut out.mu[k * n..(k + 1) * n]);
    Ok(out)
}

/// `(∂A/∂w)·μ̆` as a full-length vector (zero outside the map's particle).
pub fn d_apply_d_w(state: &PhaseState, descriptor: MapDescriptor, w: f64, t_star: f64) -> Result<Vec<f64>> {
    descriptor.validate(state.group, state.num_particles)?;
    let n = state.group.n;
    let k = descriptor.particle;
    let x = state.particle(k);
    let mut out = vec![0.0; state.dim()];
    // probing with unit covectors recovers each entry of the derivative
    let mut unit = vec![0.0; n];
    for i in 0..n {
        unit[i] = 1.0;
        out[k * n + i] = d_block_dot(state.group.kind, descriptor.component, w * t_star, t_star, x, &unit);
        unit[i] = 0.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::casimirs;
    use crate::oracles::rk4_flow;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    }

    /// Test-Hamiltonian field for one particle block, written from the
    /// equations of motion rather than from the closed-form maps.
    fn test_field(kind: GroupKind, component: usize, w: f64, x: &[f64]) -> Vec<f64> {
        let mut e = [0.0; 3];
        e[component % 3] = w;
        match kind {
            GroupKind::So3 => cross(x, &e).to_vec(),
            GroupKind::Se3 if component < 3 => {
                let mut out = cross(&x[0..3], &e).to_vec();
                out.extend(cross(&x[3..6], &e));
                out
            }
            GroupKind::Se3 => {
                let mut out = cross(&x[3..6], &e).to_vec();
                out.extend([0.0; 3]);
                out
            }
        }
    }

    #[test]
    fn zero_parameter_is_identity() {
        for group in [GroupSpec::SO3, GroupSpec::SE3] {
            for i in 0..group.n {
                let m = map_matrix(group, MapDescriptor::new(0, i), 0.0, 0.1).unwrap();
                assert_eq!(m, DMatrix::identity(group.n, group.n));
            }
        }
    }

    #[test]
    fn shear_e4_entries() {
        let s = 0.37;
        let m = map_matrix(GroupSpec::SE3, MapDescriptor::new(0, 3), s / 0.1, 0.1).unwrap();
        let mut expected = DMatrix::identity(6, 6);
        expected[(1, 5)] = s;
        expected[(2, 4)] = -s;
        assert!((m - expected).amax() < 1e-15);
    }

    #[test]
    fn shear_e5_e6_entries() {
        let m5 = map_matrix(GroupSpec::SE3, MapDescriptor::new(0, 4), 2.0, 1.0).unwrap();
        assert_eq!((m5[(0, 5)], m5[(2, 3)]), (-2.0, 2.0));
        let m6 = map_matrix(GroupSpec::SE3, MapDescriptor::new(0, 5), 2.0, 1.0).unwrap();
        assert_eq!((m6[(0, 4)], m6[(1, 3)]), (2.0, -2.0));
    }

    #[test]
    fn quarter_turn_about_e3() {
        let m = map_matrix(GroupSpec::SO3, MapDescriptor::new(0, 2), FRAC_PI_2, 1.0).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., 1., 0., -1., 0., 0., 0., 0., 1.]);
        assert!((&m - &expected).amax() < 1e-15);
        // independent route: integrate μ̇ = μ × e₃·w with RK4 from each basis vector
        for j in 0..3 {
            let mut x0 = vec![0.0; 3];
            x0[j] = 1.0;
            let x = rk4_flow(|x| test_field(GroupKind::So3, 2, FRAC_PI_2, x), &x0, 1.0, 100_000).unwrap();
            for i in 0..3 {
                assert!((x[i] - expected[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_examples() {
        // at w = 0 the e₃ rotation derivative is t*·[[0,1,0],[-1,0,0],[0,0,0]]
        let t = 0.1;
        let s = PhaseState::new(GroupSpec::SO3, 1, vec![0.3, -0.5, 0.8]).unwrap();
        let d = d_apply_d_w(&s, MapDescriptor::new(0, 2), 0.0, t).unwrap();
        let expected = [t * -0.5, -t * 0.3, 0.0];
        for i in 0..3 {
            assert!((d[i] - expected[i]).abs() < 1e-16);
        }
        // shears are affine in w
        let s = PhaseState::new(GroupSpec::SE3, 2, (0..12).map(|i| i as f64 * 0.1 - 0.4).collect()).unwrap();
        for c in 3..6 {
            let a = d_apply_d_w(&s, MapDescriptor::new(1, c), 0.0, t).unwrap();
            let b = d_apply_d_w(&s, MapDescriptor::new(1, c), 7.5, t).unwrap();
            assert_eq!(a, b);
            assert!(a[..6].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn shear_example_values() {
        let mut mu = vec![0.0; 6];
        mu[5] = 1.0;
        let s = PhaseState::new(GroupSpec::SE3, 1, mu).unwrap();
        let out = apply_map(&s, MapDescriptor::new(0, 3), 1.0, 1.0).unwrap();
        assert_eq!(out.mu, vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn invalid_descriptors() {
        let s = PhaseState::zeros(GroupSpec::SO3, 2);
        assert!(apply_map(&s, MapDescriptor::new(2, 0), 1.0, 0.1).is_err());
        assert!(apply_map(&s, MapDescriptor::new(0, 3), 1.0, 0.1).is_err());
        assert!(map_matrix(GroupSpec::SO3, MapDescriptor::new(0, 4), 1.0, 0.1).is_err());
        assert_eq!(MapDescriptor::new(0, 4).kind(GroupSpec::SE3), MapKind::Shear);
        assert_eq!(MapDescriptor::new(0, 2).kind(GroupSpec::SE3), MapKind::Rotation);
    }

    #[test]
    fn default_schedule_order() {
        let sched = MapSchedule::default_for(GroupSpec::SO3, 3, 0.1, 1);
        assert_eq!(sched.len(), 9);
        assert_eq!(sched.maps[0], MapDescriptor::new(0, 0));
        assert_eq!(sched.maps[3], MapDescriptor::new(1, 0));
        assert_eq!(sched.maps[8], MapDescriptor::new(2, 2));
        assert_eq!(MapSchedule::default_for(GroupSpec::SE3, 3, 0.1, 2).len(), 36);
    }

    #[test]
    fn repeated_application_keeps_casimirs() {
        for group in [GroupSpec::SO3, GroupSpec::SE3] {
            let mut s = PhaseState::new(group, 2, (0..2 * group.n).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
            let c0 = casimirs(&s).values;
            for step in 0..10_000 {
                let d = MapDescriptor::new(step % 2, step % group.n);
                s = apply_map(&s, d, ((step * 13 % 17) as f64) - 8.0, 0.1).unwrap();
            }
            let c1 = casimirs(&s).values;
            for (a, b) in c0.iter().zip(&c1) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{group}: {a} vs {b}");
            }
        }
    }

    fn map_case() -> impl Strategy<Value = (PhaseState, MapDescriptor, f64)> {
        (prop_oneof![Just(GroupSpec::SO3), Just(GroupSpec::SE3)], 1usize..4).prop_flat_map(|(g, np)| {
            (
                prop::collection::vec(-1.0f64..1.0, g.n * np).prop_map(move |mu| PhaseState::new(g, np, mu).unwrap()),
                (0..np, 0..g.n).prop_map(|(k, i)| MapDescriptor::new(k, i)),
                -10.0f64..10.0,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn casimirs_preserved_per_application((s, d, w) in map_case()) {
            let out = apply_map(&s, d, w, 0.1).unwrap();
            for (a, b) in casimirs(&s).values.iter().zip(casimirs(&out).values.iter()) {
                prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0) * 4.0);
            }
            // untouched particles are bitwise unchanged
            let n = s.group.n;
            for k in (0..s.num_particles).filter(|k| *k != d.particle) {
                prop_assert_eq!(&s.mu[k * n..(k + 1) * n], &out.mu[k * n..(k + 1) * n]);
            }
        }

        #[test]
        fn linear_in_state(
            (s, d, w) in map_case(),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0
        ) {
            let y: Vec<f64> = s.mu.iter().map(|v| (v * 3.1).cos()).collect();
            let ys = PhaseState { mu: y.clone(), ..s.clone() };
            let combo = PhaseState { mu: s.mu.iter().zip(&y).map(|(x, y)| a * x + b * y).collect(), ..s.clone() };
            let lhs = apply_map(&combo, d, w, 0.1).unwrap();
            let ax = apply_map(&s, d, w, 0.1).unwrap();
            let ay = apply_map(&ys, d, w, 0.1).unwrap();
            for i in 0..s.dim() {
                prop_assert!((lhs.mu[i] - (a * ax.mu[i] + b * ay.mu[i])).abs() <= 1e-14);
            }
        }

        #[test]
        fn additive_in_parameter((s, d, w1) in map_case(), w2 in -10.0f64..10.0) {
            let twice = apply_map(&apply_map(&s, d, w2, 0.1).unwrap(), d, w1, 0.1).unwrap();
            let once = apply_map(&s, d, w1 + w2, 0.1).unwrap();
            for i in 0..s.dim() {
                prop_assert!((twice.mu[i] - once.mu[i]).abs() <= 1e-14);
            }
        }

        #[test]
        fn derivative_matches_finite_differences((s, d, w) in map_case()) {
            let t = 0.1;
            let h = 1e-6;
            let analytic = d_apply_d_w(&s, d, w, t).unwrap();
            let plus = apply_map(&s, d, w + h, t).unwrap();
            let minus = apply_map(&s, d, w - h, t).unwrap();
            let fd: Vec<f64> = plus.mu.iter().zip(&minus.mu).map(|(p, m)| (p - m) / (2.0 * h)).collect();
            let err: f64 = analytic.iter().zip(&fd).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-7 * norm.max(1e-3), "err {} norm {}", err, norm);
        }

        #[test]
        fn transpose_is_adjoint((s, d, w) in map_case(), seed in 0u64..1000) {
            let n = s.group.n;
            let x = s.particle(d.particle).to_vec();
            let l: Vec<f64> = (0..n).map(|i| ((seed as f64 + i as f64) * 1.7).sin()).collect();
            let mut ax = x.clone();
            apply_block(s.group.kind, d.component, w * 0.1, &mut ax);
            let mut atl = l.clone();
            apply_block_transpose(s.group.kind, d.component, w * 0.1, &mut atl);
            let lhs: f64 = l.iter().zip(&ax).map(|(a, b)| a * b).sum();
            let rhs: f64 = atl.iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-13);
        }

        #[test]
        fn agrees_with_rk4_for_small_angles((s, d, w) in map_case()) {
            let t = 1e-4; // |w·t*| ≤ 1e-3
            let n = s.group.n;
            let k = d.particle;
            let kind = s.group.kind;
            let exact = apply_map(&s, d, w, t).unwrap();
            let x = rk4_flow(|x| test_field(kind, d.component, w, x), s.particle(k), t, 10).unwrap();
            for i in 0..n {
                prop_assert!((exact.mu[k * n + i] - x[i]).abs() <= 1e-12);
            }
        }
    }
}
