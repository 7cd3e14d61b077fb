//! The Lie algebras so(3) and se(3): structure constants, hat-map blocks,
//! block-diagonal Poisson tensors and the per-particle Casimirs.
//!
//! Components are numbered 1..n in documentation and 0..n-1 in code. A
//! stacked state of `N` particles is laid out particle-major: particle 0
//! components `0..n`, then particle 1, and so on. For se(3) the first three
//! components of each particle are the angular momentum `Π` and the last
//! three the linear momentum `p`.
//!
//! The Poisson tensor is `Λ(μ) = (1/√2)·blockdiag(μ̂_1, …, μ̂_N)` with the
//! hat blocks written out explicitly below. The structure constants are
//! normalized so that `μ̂_k = −√2 Σ_s μ_{ks} Γ^s`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    So3,
    Se3,
}

impl GroupKind {
    pub fn name(self) -> &'static str {
        match self {
            GroupKind::So3 => "so3",
            GroupKind::Se3 => "se3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "so3" => Some(GroupKind::So3),
            "se3" => Some(GroupKind::Se3),
            _ => None,
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Algebra metadata for one particle.
///
/// SO(3): control along `X_1`, drift along `X_2`. SE(3): controls along
/// `G_1, G_2`, drift along `G_4` (first linear-momentum component).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    pub kind: GroupKind,
    /// Algebra dimension.
    pub n: usize,
    /// Drift component, 0-based.
    pub drift: usize,
    /// Number of controlled components (the first `controls` ones).
    pub controls: usize,
}

impl GroupSpec {
    pub const SO3: GroupSpec = GroupSpec {
        kind: GroupKind::So3,
        n: 3,
        drift: 1,
        controls: 1,
    };

    pub const SE3: GroupSpec = GroupSpec {
        kind: GroupKind::Se3,
        n: 6,
        drift: 3,
        controls: 2,
    };

    pub fn of(kind: GroupKind) -> Self {
        match kind {
            GroupKind::So3 => Self::SO3,
            GroupKind::Se3 => Self::SE3,
        }
    }

    /// Number of Casimirs carried by each particle.
    pub fn casimirs_per_particle(&self) -> usize {
        match self.kind {
            GroupKind::So3 => 1,
            GroupKind::Se3 => 2,
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)
    }
}

/// Dense `Γ^s_{ij}`, indexed `[s][i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureConstants {
    n: usize,
    gamma: Vec<f64>,
}

impl StructureConstants {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: usize, i: usize, j: usize) -> f64 {
        self.gamma[(s * self.n + i) * self.n + j]
    }

    pub fn set(&mut self, s: usize, i: usize, j: usize, value: f64) {
        let n = self.n;
        self.gamma[(s * n + i) * n + j] = value;
    }

    /// Largest `|Γ^s_{ij} + Γ^s_{ji}|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for s in 0..n {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.get(s, i, j) + self.get(s, j, i)).abs());
                }
            }
        }
        worst
    }

    /// Largest residual of the Jacobi identity
    /// `Σ_s Γ^s_{ij}Γ^r_{sk} + Γ^s_{jk}Γ^r_{si} + Γ^s_{ki}Γ^r_{sj}` over all `i, j, k, r`.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for r in 0..n {
                        let mut acc = 0.0;
                        for s in 0..n {
                            acc += self.get(s, i, j) * self.get(r, s, k)
                                + self.get(s, j, k) * self.get(r, s, i)
                                + self.get(s, k, i) * self.get(r, s, j);
                        }
                        worst = worst.max(acc.abs());
                    }
                }
            }
        }
        worst
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    if i == j || j == k || i == k {
        return 0.0;
    }
    // even permutations of (0, 1, 2)
    if (i, j, k) == (0, 1, 2) || (i, j, k) == (1, 2, 0) || (i, j, k) == (2, 0, 1) {
        1.0
    } else {
        -1.0
    }
}

pub fn structure_constants(group: GroupSpec) -> StructureConstants {
    let n = group.n;
    let mut sc = StructureConstants {
        n,
        gamma: vec![0.0; n * n * n],
    };
    match group.kind {
        GroupKind::So3 => {
            for s in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        sc.set(s, i, j, levi_civita(i, j, s) * FRAC_1_SQRT_2);
                    }
                }
            }
        }
        GroupKind::Se3 => {
            // (s, i, j, sign) with 1-based indices, Γ^s_{ij} = sign/√2
            const ENTRIES: [(usize, usize, usize, f64); 18] = [
                (5, 6, 1, 1.0),
                (5, 1, 6, -1.0),
                (4, 6, 2, -1.0),
                (4, 2, 6, 1.0),
                (5, 4, 3, -1.0),
                (5, 3, 4, 1.0),
                (6, 4, 2, 1.0),
                (6, 2, 4, -1.0),
                (4, 5, 3, 1.0),
                (4, 3, 5, -1.0),
                (6, 5, 1, -1.0),
                (6, 1, 5, 1.0),
                (2, 3, 1, 1.0),
                (2, 1, 3, -1.0),
                (1, 3, 2, -1.0),
                (1, 2, 3, 1.0),
                (3, 1, 2, 1.0),
                (3, 2, 1, -1.0),
            ];
            for (s, i, j, sign) in ENTRIES {
                sc.set(s - 1, i - 1, j - 1, sign * FRAC_1_SQRT_2);
            }
        }
    }
    sc
}

/// Stacked momenta `μ̆` of `N` particles.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    pub group: GroupSpec,
    pub num_particles: usize,
    pub mu: Vec<f64>,
}

impl PhaseState {
    pub fn new(group: GroupSpec, num_particles: usize, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != num_particles * group.n {
            return Err(Error::Dimension {
                what: "phase state length",
                expected: num_particles * group.n,
                got: mu.len(),
            });
        }
        if let Some(idx) = mu.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("in phase state component {idx}"),
            });
        }
        Ok(Self {
            group,
            num_particles,
            mu,
        })
    }

    pub fn zeros(group: GroupSpec, num_particles: usize) -> Self {
        Self {
            group,
            num_particles,
            mu: vec![0.0; group.n * num_particles],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Momenta of particle `k` (0-based).
    pub fn particle(&self, k: usize) -> &[f64] {
        let n = self.group.n;
        &self.mu[k * n..(k + 1) * n]
    }

    pub fn same_shape(&self, other: &PhaseState) -> bool {
        self.group == other.group && self.num_particles == other.num_particles
    }
}

fn hat3(v: &[f64]) -> [[f64; 3]; 3] {
    [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
}

/// The antisymmetric `n×n` block of one particle, as an explicit matrix.
///
/// so(3): the hat matrix of `μ_k`. se(3): `[[Π̂, p̂], [p̂, 0]]`.
pub fn hat_block(group: GroupSpec, mu_k: &[f64]) -> Result<DMatrix<f64>> {
    if mu_k.len() != group.n {
        return Err(Error::Dimension {
            what: "particle momentum",
            expected: group.n,
            got: mu_k.len(),
        });
    }
    let mut out = DMatrix::zeros(group.n, group.n);
    match group.kind {
        GroupKind::So3 => {
            let h = hat3(mu_k);
            for i in 0..3 {
                for j in 0..3 {
                    out[(i, j)] = h[i][j];
                }
            }
        }
        GroupKind::Se3 => {
            let pi_hat = hat3(&mu_k[0..3]);
            let p_hat = hat3(&mu_k[3..6]);
            for i in 0..3 {
                for j in 0..3 {
                    out[(i, j)] = pi_hat[i][j];
                    out[(i, j + 3)] = p_hat[i][j];
                    out[(i + 3, j)] = p_hat[i][j];
                }
            }
        }
    }
    Ok(out)
}

/// Full `(N·n)×(N·n)` Poisson tensor `Λ(μ̆)`.
pub fn poisson_tensor(state: &PhaseState) -> DMatrix<f64> {
    let n = state.group.n;
    let d = state.dim();
    let mut out = DMatrix::zeros(d, d);
    for k in 0..state.num_particles {
        let block = hat_block(state.group, state.particle(k)).expect("particle slice has length n");
        for i in 0..n {
            for j in 0..n {
                out[(k * n + i, k * n + j)] = FRAC_1_SQRT_2 * block[(i, j)];
            }
        }
    }
    out
}

#[inline]
fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `out = Λ(μ̆)·v` without building the matrix.
///
/// so(3): `μ_k × v_k / √2`. se(3): `Π̇ = (Π × a + p × b)/√2`, `ṗ = (p × a)/√2`
/// with `v_k = (a, b)`.
pub fn apply_poisson(group: GroupSpec, mu: &[f64], v: &[f64], out: &mut [f64]) {
    let n = group.n;
    debug_assert_eq!(mu.len(), v.len());
    debug_assert_eq!(mu.len(), out.len());
    for ((m, x), o) in mu
        .chunks_exact(n)
        .zip(v.chunks_exact(n))
        .zip(out.chunks_exact_mut(n))
    {
        match group.kind {
            GroupKind::So3 => {
                let c = cross(m, x);
                for i in 0..3 {
                    o[i] = FRAC_1_SQRT_2 * c[i];
                }
            }
            GroupKind::Se3 => {
                let a = cross(&m[0..3], &x[0..3]);
                let b = cross(&m[3..6], &x[3..6]);
                let c = cross(&m[3..6], &x[0..3]);
                for i in 0..3 {
                    o[i] = FRAC_1_SQRT_2 * (a[i] + b[i]);
                    o[i + 3] = FRAC_1_SQRT_2 * c[i];
                }
            }
        }
    }
}

/// Per-particle Casimir values, particle-major.
///
/// so(3): one value `c_k = ‖μ_k‖²` per particle. se(3): two values per
/// particle, `C_{1,k} = ‖p_k‖²` then `C_{2,k} = Π_k·p_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CasimirReport {
    pub group: GroupKind,
    pub num_particles: usize,
    pub values: Vec<f64>,
}

impl CasimirReport {
    pub fn per_particle(&self) -> usize {
        match self.group {
            GroupKind::So3 => 1,
            GroupKind::Se3 => 2,
        }
    }

    /// Casimir `j` of particle `k` (both 0-based).
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.per_particle() + j]
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.values.len());
        for k in 1..=self.num_particles {
            match self.group {
                GroupKind::So3 => out.push(format!("c_{k}")),
                GroupKind::Se3 => {
                    out.push(format!("C1_{k}"));
                    out.push(format!("C2_{k}"));
                }
            }
        }
        out
    }
}

pub fn casimirs(state: &PhaseState) -> CasimirReport {
    CasimirReport {
        group: state.group.kind,
        num_particles: state.num_particles,
        values: casimir_values(state.group, &state.mu),
    }
}

pub(crate) fn casimir_values(group: GroupSpec, mu: &[f64]) -> Vec<f64> {
    let n = group.n;
    let mut out = Vec::with_capacity(mu.len() / n * group.casimirs_per_particle());
    for m in mu.chunks_exact(n) {
        match group.kind {
            GroupKind::So3 => out.push(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]),
            GroupKind::Se3 => {
                out.push(m[3] * m[3] + m[4] * m[4] + m[5] * m[5]);
                out.push(m[0] * m[3] + m[1] * m[4] + m[2] * m[5]);
            }
        }
    }
    out
}

/// Natural magnitude of each Casimir, used to normalize drifts.
///
/// `‖μ_k‖²` and `‖p_k‖²` are their own scale; `Π_k·p_k` is measured against
/// `‖Π_k‖·‖p_k‖`, since the bilinear Casimir may be close to zero.
pub fn casimir_scales(state: &PhaseState) -> Vec<f64> {
    let n = state.group.n;
    let mut out = Vec::new();
    for m in state.mu.chunks_exact(n) {
        match state.group.kind {
            GroupKind::So3 => out.push(m.iter().map(|x| x * x).sum()),
            GroupKind::Se3 => {
                let pi: f64 = m[0..3].iter().map(|x| x * x).sum::<f64>().sqrt();
                let p: f64 = m[3..6].iter().map(|x| x * x).sum::<f64>().sqrt();
                out.push(p * p);
                out.push(pi * p);
            }
        }
    }
    out
}

/// Analytic gradients of every Casimir, one full-length vector per Casimir in
/// the same order as [`casimirs`].
pub fn casimir_gradients(state: &PhaseState) -> Vec<Vec<f64>> {
    let n = state.group.n;
    let d = state.dim();
    let mut out = Vec::new();
    for k in 0..state.num_particles {
        let m = state.particle(k);
        match state.group.kind {
            GroupKind::So3 => {
                let mut g = vec![0.0; d];
                for i in 0..3 {
                    g[k * n + i] = 2.0 * m[i];
                }
                out.push(g);
            }
            GroupKind::Se3 => {
                let mut g1 = vec![0.0; d];
                let mut g2 = vec![0.0; d];
                for i in 0..3 {
                    g1[k * n + 3 + i] = 2.0 * m[3 + i];
                    g2[k * n + i] = m[3 + i];
                    g2[k * n + 3 + i] = m[i];
                }
                out.push(g1);
                out.push(g2);
            }
        }
    }
    out
}
