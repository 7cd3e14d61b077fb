//! Interaction graphs, the coupling matrix `Ψ = (I + 2χB)⁻¹` and the reduced
//! control Hamiltonian
//!
//! ```text
//! h(μ̆) = Σ_k μ_{kq} + ½ μ̃ᵀ (Ψ ⊗ I_m) μ̃
//! ```
//!
//! where `μ̃` stacks the first `m` (controlled) components of every particle.
//! The Kronecker product is never materialized: `(Ψ ⊗ I_m)` couples component
//! `a` of particle `i` only with component `a` of particle `j`, weighted by
//! `Ψ_{ij}`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{apply_poisson, GroupSpec, PhaseState};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Particle 1 connected to every other particle (star graph).
    Dictatorship,
    /// Every particle connected to every other (complete graph).
    Democracy,
    /// Symmetric 0/1 adjacency with zero diagonal, row-major `N×N`.
    Custom(Vec<Vec<u8>>),
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::Dictatorship => "dictatorship",
            Topology::Democracy => "democracy",
            Topology::Custom(_) => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dictatorship" => Some(Topology::Dictatorship),
            "democracy" => Some(Topology::Democracy),
            _ => None,
        }
    }

    pub fn adjacency(&self, n: usize) -> Result<DMatrix<f64>> {
        if n == 0 {
            return Err(Error::Topology("at least one particle is required".into()));
        }
        let a = match self {
            Topology::Dictatorship => DMatrix::from_fn(n, n, |i, j| {
                if i != j && (i == 0 || j == 0) {
                    1.0
                } else {
                    0.0
                }
            }),
            Topology::Democracy => DMatrix::from_fn(n, n, |i, j| if i != j { 1.0 } else { 0.0 }),
            Topology::Custom(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Topology(format!("adjacency must be {n}x{n}")));
                }
                for i in 0..n {
                    if rows[i][i] != 0 {
                        return Err(Error::Topology(format!("nonzero diagonal at vertex {}", i + 1)));
                    }
                    for j in 0..n {
                        if rows[i][j] > 1 {
                            return Err(Error::Topology("entries must be 0 or 1".into()));
                        }
                        if rows[i][j] != rows[j][i] {
                            return Err(Error::Topology(format!(
                                "adjacency not symmetric at ({}, {})",
                                i + 1,
                                j + 1
                            )));
                        }
                    }
                }
                if !connected(rows) {
                    return Err(Error::Topology("graph is disconnected".into()));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j] as f64)
            }
        };
        Ok(a)
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn connected(rows: &[Vec<u8>]) -> bool {
    let n = rows.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for (u, &edge) in rows[v].iter().enumerate() {
            if edge == 1 && !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Graph Laplacian `B = D − A`.
pub fn laplacian(topology: &Topology, n: usize) -> Result<DMatrix<f64>> {
    let a = topology.adjacency(n)?;
    let mut b = -a.clone();
    for i in 0..n {
        b[(i, i)] = a.row(i).sum();
    }
    Ok(b)
}

fn check_chi(chi: f64) -> Result<()> {
    if !(chi.is_finite() && chi >= 0.0) {
        return Err(Error::Config(format!("coupling strength must be finite and >= 0, got {chi}")));
    }
    Ok(())
}

/// Printed closed forms of `(I + 2χB)⁻¹` for the star and complete graphs.
pub fn psi_closed_form(topology: &Topology, n: usize, chi: f64) -> Result<DMatrix<f64>> {
    check_chi(chi)?;
    if n == 0 {
        return Err(Error::Topology("at least one particle is required".into()));
    }
    let nf = n as f64;
    let d = 1.0 + 2.0 * nf * chi;
    match topology {
        Topology::Democracy => Ok(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                (1.0 + 2.0 * chi) / d
            } else {
                2.0 * chi / d
            }
        })),
        Topology::Dictatorship => {
            let e = (1.0 + 2.0 * chi) * d;
            Ok(DMatrix::from_fn(n, n, |i, j| match (i, j) {
                (0, 0) => (1.0 + 2.0 * chi) / d,
                (0, _) | (_, 0) => 2.0 * chi / d,
                _ if i == j => (d + 4.0 * chi * chi) / e,
                _ => 4.0 * chi * chi / e,
            }))
        }
        Topology::Custom(_) => Err(Error::NoClosedForm),
    }
}

/// `(I + 2χB)⁻¹` by LU factorization.
pub fn psi_solve(topology: &Topology, n: usize, chi: f64) -> Result<DMatrix<f64>> {
    check_chi(chi)?;
    let b = laplacian(topology, n)?;
    let m = DMatrix::identity(n, n) + b * (2.0 * chi);
    m.lu().try_inverse().ok_or(Error::Singular)
}

/// Reduced control Hamiltonian for `N` coupled particles.
#[derive(Clone, Debug)]
pub struct ControlModel {
    pub group: GroupSpec,
    pub topology: Topology,
    pub num_particles: usize,
    pub chi: f64,
    /// Drift component, 0-based. Defaults to the group's drift.
    pub drift: usize,
    psi: DMatrix<f64>,
}

impl ControlModel {
    pub fn new(group: GroupSpec, topology: Topology, num_particles: usize, chi: f64) -> Result<Self> {
        let psi = match topology {
            Topology::Custom(_) => psi_solve(&topology, num_particles, chi)?,
            _ => {
                // validates N and the graph even though the closed form does not need B
                laplacian(&topology, num_particles)?;
                psi_closed_form(&topology, num_particles, chi)?
            }
        };
        Ok(Self {
            group,
            topology,
            num_particles,
            chi,
            drift: group.drift,
            psi,
        })
    }

    /// Same model with the drift moved to another component (0-based).
    pub fn with_drift(mut self, drift: usize) -> Result<Self> {
        if drift >= self.group.n || drift < self.group.controls {
            return Err(Error::Config(format!(
                "drift component {} must lie in {}..={}",
                drift + 1,
                self.group.controls + 1,
                self.group.n
            )));
        }
        self.drift = drift;
        Ok(self)
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn dim(&self) -> usize {
        self.num_particles * self.group.n
    }

    pub fn check(&self, state: &PhaseState) -> Result<()> {
        if state.group.kind != self.group.kind {
            return Err(Error::GroupMismatch {
                expected: self.group.to_string(),
                got: state.group.to_string(),
            });
        }
        if state.num_particles != self.num_particles {
            return Err(Error::Dimension {
                what: "number of particles",
                expected: self.num_particles,
                got: state.num_particles,
            });
        }
        Ok(())
    }

    pub fn hamiltonian(&self, state: &PhaseState) -> Result<f64> {
        self.check(state)?;
        Ok(self.energy(&state.mu))
    }

    pub fn grad_hamiltonian(&self, state: &PhaseState) -> Result<Vec<f64>> {
        self.check(state)?;
        let mut g = vec![0.0; state.dim()];
        self.gradient_into(&state.mu, &mut g);
        Ok(g)
    }

    pub fn vector_field(&self, state: &PhaseState) -> Result<Vec<f64>> {
        self.check(state)?;
        let mut g = vec![0.0; state.dim()];
        let mut out = vec![0.0; state.dim()];
        self.field_into(&state.mu, &mut g, &mut out);
        Ok(out)
    }

    /// Unchecked energy on a raw stacked vector.
    pub fn energy(&self, mu: &[f64]) -> f64 {
        let n = self.group.n;
        let np = self.num_particles;
        let mut drift = 0.0;
        for k in 0..np {
            drift += mu[k * n + self.drift];
        }
        drift + 0.5 * self.quadratic_part(mu)
    }

    /// `μ̃ᵀ(Ψ⊗I_m)μ̃`, nonnegative since Ψ is positive definite.
    pub fn quadratic_part(&self, mu: &[f64]) -> f64 {
        let n = self.group.n;
        let np = self.num_particles;
        let mut quad = 0.0;
        for a in 0..self.group.controls {
            for i in 0..np {
                let mut row = 0.0;
                for j in 0..np {
                    row += self.psi[(i, j)] * mu[j * n + a];
                }
                quad += mu[i * n + a] * row;
            }
        }
        quad
    }

    /// Magnitude used to normalize energy drifts: `Σ_k |μ_{kq}| + ½ μ̃ᵀΨμ̃ ≥ |h|`.
    pub fn energy_scale(&self, mu: &[f64]) -> f64 {
        let n = self.group.n;
        let drift: f64 = (0..self.num_particles).map(|k| mu[k * n + self.drift].abs()).sum();
        drift + 0.5 * self.quadratic_part(mu)
    }

    pub(crate) fn gradient_into(&self, mu: &[f64], grad: &mut [f64]) {
        let n = self.group.n;
        let np = self.num_particles;
        grad.fill(0.0);
        for i in 0..np {
            for a in 0..self.group.controls {
                let mut acc = 0.0;
                for j in 0..np {
                    acc += self.psi[(i, j)] * mu[j * n + a];
                }
                grad[i * n + a] = acc;
            }
            grad[i * n + self.drift] = 1.0;
        }
    }

    /// `out = Λ(μ)∇h(μ)`, using `grad` as scratch.
    pub(crate) fn field_into(&self, mu: &[f64], grad: &mut [f64], out: &mut [f64]) {
        self.gradient_into(mu, grad);
        apply_poisson(self.group, mu, grad, out);
    }
}

/// Serializable description of a control model, stored with datasets and
/// trained models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub group: String,
    pub topology: String,
    pub num_particles: usize,
    pub chi: f64,
}

impl ModelDescription {
    pub fn of(model: &ControlModel) -> Self {
        Self {
            group: model.group.kind.name().to_string(),
            topology: model.topology.name().to_string(),
            num_particles: model.num_particles,
            chi: model.chi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{GroupKind, PhaseState};
    use proptest::prelude::*;

    fn approx_eq(a: &DMatrix<f64>, b: &[f64], tol: f64) -> bool {
        a.iter()
            .zip(DMatrix::from_row_slice(a.nrows(), a.ncols(), b).iter())
            .all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn laplacian_examples() {
        let b = laplacian(&Topology::Dictatorship, 3).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(3, 3, &[2., -1., -1., -1., 1., 0., -1., 0., 1.]));
        let b = laplacian(&Topology::Democracy, 3).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(3, 3, &[2., -1., -1., -1., 2., -1., -1., -1., 2.]));
        assert_eq!(laplacian(&Topology::Democracy, 1).unwrap(), DMatrix::zeros(1, 1));
        assert_eq!(laplacian(&Topology::Dictatorship, 1).unwrap(), DMatrix::zeros(1, 1));
    }

    #[test]
    fn custom_topology_validation() {
        let path = Topology::Custom(vec![vec![0, 1, 0], vec![1, 0, 1], vec![0, 1, 0]]);
        let b = laplacian(&path, 3).unwrap();
        assert_eq!(b.row_sum().amax(), 0.0);
        let disconnected = Topology::Custom(vec![vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 0]]);
        assert!(matches!(laplacian(&disconnected, 3), Err(Error::Topology(_))));
        let asym = Topology::Custom(vec![vec![0, 1], vec![0, 0]]);
        assert!(laplacian(&asym, 2).is_err());
        let diag = Topology::Custom(vec![vec![1, 1], vec![1, 0]]);
        assert!(laplacian(&diag, 2).is_err());
        assert!(matches!(psi_closed_form(&path, 3, 0.5), Err(Error::NoClosedForm)));
        assert!(psi_solve(&path, 3, 0.5).is_ok());
    }

    #[test]
    fn psi_hand_values() {
        // Oracle: 3x3 cofactor inverses of [[3,-1,-1],[-1,3,-1],[-1,-1,3]] and
        // [[3,-1,-1],[-1,2,0],[-1,0,2]] (determinants 16 and 8).
        let dem = psi_closed_form(&Topology::Democracy, 3, 0.5).unwrap();
        assert!(approx_eq(&dem, &[0.5, 0.25, 0.25, 0.25, 0.5, 0.25, 0.25, 0.25, 0.5], 1e-15));
        let dic = psi_closed_form(&Topology::Dictatorship, 3, 0.5).unwrap();
        assert!(approx_eq(
            &dic,
            &[0.5, 0.25, 0.25, 0.25, 0.625, 0.125, 0.25, 0.125, 0.625],
            1e-15
        ));
        for t in [Topology::Democracy, Topology::Dictatorship] {
            assert_eq!(psi_closed_form(&t, 4, 0.0).unwrap(), DMatrix::identity(4, 4));
            assert_eq!(psi_solve(&t, 4, 0.0).unwrap(), DMatrix::identity(4, 4));
            assert_eq!(psi_solve(&t, 1, 0.7).unwrap(), DMatrix::identity(1, 1));
        }
        assert!(psi_solve(&Topology::Democracy, 3, -0.1).is_err());
    }

    #[test]
    fn psi_routes_agree() {
        for n in 2..=8 {
            for chi in [0.0, 0.1, 0.5, 2.0] {
                for t in [Topology::Democracy, Topology::Dictatorship] {
                    let a = psi_closed_form(&t, n, chi).unwrap();
                    let b = psi_solve(&t, n, chi).unwrap();
                    assert!((&a - &b).amax() <= 1e-13, "{t} n={n} chi={chi}");
                    for i in 0..n {
                        assert!((a.row(i).sum() - 1.0).abs() <= 1e-13);
                    }
                    let m = DMatrix::identity(n, n) + laplacian(&t, n).unwrap() * (2.0 * chi);
                    assert!((&a * m - DMatrix::identity(n, n)).amax() <= 1e-13);
                    assert!((&a - a.transpose()).amax() == 0.0);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_examples() {
        let m = ControlModel::new(GroupSpec::SO3, Topology::Democracy, 3, 0.5).unwrap();
        let s = PhaseState::new(GroupSpec::SO3, 3, vec![1., 0., 0., 1., 0., 0., 1., 0., 0.]).unwrap();
        assert!((m.hamiltonian(&s).unwrap() - 1.5).abs() < 1e-15);
        let g = m.grad_hamiltonian(&s).unwrap();
        for k in 0..3 {
            assert!((g[3 * k] - 1.0).abs() < 1e-15);
            assert_eq!(g[3 * k + 1], 1.0);
            assert_eq!(g[3 * k + 2], 0.0);
        }

        let m1 = ControlModel::new(GroupSpec::SO3, Topology::Democracy, 1, 0.5).unwrap();
        let s = PhaseState::new(GroupSpec::SO3, 1, vec![1., 1., 0.]).unwrap();
        assert_eq!(m1.hamiltonian(&s).unwrap(), 1.5);
        let s = PhaseState::new(GroupSpec::SO3, 1, vec![0.37, -0.2, 0.9]).unwrap();
        assert_eq!(m1.grad_hamiltonian(&s).unwrap(), vec![0.37, 1.0, 0.0]);

        let m1 = ControlModel::new(GroupSpec::SE3, Topology::Dictatorship, 1, 0.5).unwrap();
        let s = PhaseState::new(GroupSpec::SE3, 1, vec![1., 1., 0., 1., 0., 0.]).unwrap();
        assert_eq!(m1.hamiltonian(&s).unwrap(), 2.0);
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let m = ControlModel::new(GroupSpec::SO3, Topology::Democracy, 3, 0.5).unwrap();
        assert!(m.hamiltonian(&PhaseState::zeros(GroupSpec::SO3, 2)).is_err());
        assert!(matches!(
            m.grad_hamiltonian(&PhaseState::zeros(GroupSpec::SE3, 3)),
            Err(Error::GroupMismatch { .. })
        ));
    }

    #[test]
    fn single_particle_field() {
        let m = ControlModel::new(GroupSpec::SO3, Topology::Democracy, 1, 0.5).unwrap();
        let (a, b, c) = (0.3, -0.8, 0.45);
        let s = PhaseState::new(GroupSpec::SO3, 1, vec![a, b, c]).unwrap();
        let f = m.vector_field(&s).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [-c * r, a * c * r, (-a * b + a) * r];
        for i in 0..3 {
            assert!((f[i] - expected[i]).abs() < 1e-16);
        }
        let z = m.vector_field(&PhaseState::zeros(GroupSpec::SO3, 1)).unwrap();
        assert_eq!(z, vec![0.0; 3]);
    }

    #[test]
    fn drift_override() {
        let m = ControlModel::new(GroupSpec::SE3, Topology::Democracy, 1, 0.5)
            .unwrap()
            .with_drift(5)
            .unwrap();
        let s = PhaseState::new(GroupSpec::SE3, 1, vec![0.5, 0.1, 0.0, 0.2, 0.3, 0.7]).unwrap();
        assert!((m.hamiltonian(&s).unwrap() - (0.7 + 0.125 + 0.005)).abs() < 1e-15);
        assert_eq!(m.grad_hamiltonian(&s).unwrap(), vec![0.5, 0.1, 0.0, 0.0, 0.0, 1.0]);
        let base = ControlModel::new(GroupSpec::SE3, Topology::Democracy, 1, 0.5).unwrap();
        assert!(base.clone().with_drift(1).is_err());
        assert!(base.with_drift(6).is_err());
    }

    fn model_and_state() -> impl Strategy<Value = (ControlModel, PhaseState)> {
        (
            prop_oneof![Just(GroupKind::So3), Just(GroupKind::Se3)],
            prop_oneof![Just(Topology::Democracy), Just(Topology::Dictatorship)],
            1usize..5,
            0.0f64..2.0,
        )
            .prop_flat_map(|(kind, topo, np, chi)| {
                let group = GroupSpec::of(kind);
                prop::collection::vec(-1.0f64..1.0, group.n * np).prop_map(move |mu| {
                    (
                        ControlModel::new(group, topo.clone(), np, chi).unwrap(),
                        PhaseState::new(group, np, mu).unwrap(),
                    )
                })
            })
    }

    proptest! {
        #[test]
        fn field_is_orthogonal_to_gradient((m, s) in model_and_state()) {
            let g = m.grad_hamiltonian(&s).unwrap();
            let f = m.vector_field(&s).unwrap();
            let dot: f64 = g.iter().zip(&f).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-14);
        }

        #[test]
        fn energy_scale_bounds_energy((m, s) in model_and_state()) {
            prop_assert!(m.hamiltonian(&s).unwrap().abs() <= m.energy_scale(&s.mu) + 1e-15);
            prop_assert!(m.quadratic_part(&s.mu) >= 0.0);
        }
    }
}
