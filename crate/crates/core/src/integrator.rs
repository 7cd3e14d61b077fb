//! Ground-truth trajectories from the implicit midpoint rule
//!
//! ```text
//! μ⁺ = μ + h·Λ(μ_mid)∇h(μ_mid),   μ_mid = (μ + μ⁺)/2
//! ```
//!
//! solved by fixed-point iteration. The rule is symmetric, second order and
//! conserves every quadratic first integral; here both the Casimirs and the
//! control Hamiltonian are quadratic, so their drift is set by the solver
//! tolerance and rounding.

use serde::{Deserialize, Serialize};

use crate::control::{ControlModel, ModelDescription};
use crate::error::{Error, Result};
use crate::lie::{casimir_scales, casimir_values, CasimirReport, PhaseState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Output interval Δt.
    pub dt_output: f64,
    /// Midpoint substeps per output interval.
    pub substeps: usize,
    /// Fixed-point tolerance on `‖update‖_∞`, relative to `max(1, ‖μ‖_∞)`.
    pub fp_tol: f64,
    pub max_iters: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt_output: 0.1,
            substeps: 100,
            fp_tol: 1e-14,
            max_iters: 200,
        }
    }
}

impl IntegratorConfig {
    pub fn with_dt(dt_output: f64) -> Self {
        Self {
            dt_output,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_output > 0.0 && self.dt_output.is_finite()) {
            return Err(Error::Config(format!("output interval must be positive, got {}", self.dt_output)));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        if !(self.fp_tol > 0.0) {
            return Err(Error::Config("fixed-point tolerance must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<PhaseState>,
    pub dt: f64,
    pub metadata: TrajectoryMeta,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub model: Option<ModelDescription>,
    pub integrator: Option<IntegratorConfig>,
    pub seed: Option<u64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|i| i as f64 * self.dt).collect()
    }
}

/// Reusable buffers for the fixed-point iteration.
pub(crate) struct Workspace {
    grad: Vec<f64>,
    field: Vec<f64>,
    mid: Vec<f64>,
    next: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(d: usize) -> Self {
        Self {
            grad: vec![0.0; d],
            field: vec![0.0; d],
            mid: vec![0.0; d],
            next: vec![0.0; d],
        }
    }
}

/// One midpoint step of size `h` applied in place to `mu`.
pub(crate) fn midpoint_in_place(
    model: &ControlModel,
    mu: &mut [f64],
    h: f64,
    config: &IntegratorConfig,
    ws: &mut Workspace,
) -> Result<()> {
    let d = mu.len();
    let scale = mu.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = config.fp_tol * scale;

    // explicit Euler predictor
    model.field_into(mu, &mut ws.grad, &mut ws.field);
    for i in 0..d {
        ws.next[i] = mu[i] + h * ws.field[i];
    }
    let mut residual = f64::INFINITY;
    for _ in 0..config.max_iters {
        for i in 0..d {
            ws.mid[i] = 0.5 * (mu[i] + ws.next[i]);
        }
        model.field_into(&ws.mid, &mut ws.grad, &mut ws.field);
        residual = 0.0;
        for i in 0..d {
            let updated = mu[i] + h * ws.field[i];
            residual = residual.max((updated - ws.next[i]).abs());
            ws.next[i] = updated;
        }
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            mu.copy_from_slice(&ws.next);
            return Ok(());
        }
    }
    Err(Error::NoConvergence {
        iters: config.max_iters,
        residual,
    })
}

/// One implicit midpoint substep of size `h`. Negative `h` integrates
/// backwards in time.
pub fn midpoint_substep(
    model: &ControlModel,
    state: &PhaseState,
    h: f64,
    config: &IntegratorConfig,
) -> Result<PhaseState> {
    model.check(state)?;
    if h == 0.0 || !h.is_finite() {
        return Err(Error::Config(format!("substep size must be finite and nonzero, got {h}")));
    }
    let mut mu = state.mu.clone();
    let mut ws = Workspace::new(mu.len());
    midpoint_in_place(model, &mut mu, h, config, &mut ws)?;
    Ok(PhaseState { mu, ..state.clone() })
}

/// Advance `mu` by `sign·dt_output` using `substeps` midpoint steps.
pub(crate) fn advance_in_place(
    model: &ControlModel,
    mu: &mut [f64],
    config: &IntegratorConfig,
    backwards: bool,
    ws: &mut Workspace,
) -> Result<()> {
    let mut h = config.dt_output / config.substeps as f64;
    if backwards {
        h = -h;
    }
    for _ in 0..config.substeps {
        midpoint_in_place(model, mu, h, config, ws)?;
    }
    Ok(())
}

/// Advance a state by one output interval (`substeps` midpoint steps), or
/// backwards in time when `backwards` is set.
pub fn advance(model: &ControlModel, state: &PhaseState, config: &IntegratorConfig, backwards: bool) -> Result<PhaseState> {
    model.check(state)?;
    config.validate()?;
    let mut mu = state.mu.clone();
    let mut ws = Workspace::new(mu.len());
    advance_in_place(model, &mut mu, config, backwards, &mut ws)?;
    Ok(PhaseState { mu, ..state.clone() })
}

/// Sample `num_points` states `dt_output` apart starting from `initial`.
pub fn integrate(
    model: &ControlModel,
    initial: &PhaseState,
    config: &IntegratorConfig,
    num_points: usize,
) -> Result<Trajectory> {
    model.check(initial)?;
    config.validate()?;
    if num_points < 2 {
        return Err(Error::Config(format!("a trajectory needs at least 2 points, got {num_points}")));
    }
    let mut states = Vec::with_capacity(num_points);
    states.push(initial.clone());
    let mut mu = initial.mu.clone();
    let mut ws = Workspace::new(mu.len());
    for step in 1..num_points {
        advance_in_place(model, &mut mu, config, false, &mut ws).map_err(|e| Error::Trajectory {
            trajectory: 0,
            step,
            source: Box::new(e),
        })?;
        states.push(PhaseState {
            mu: mu.clone(),
            ..initial.clone()
        });
    }
    Ok(Trajectory {
        states,
        dt: config.dt_output,
        metadata: TrajectoryMeta {
            model: Some(ModelDescription::of(model)),
            integrator: Some(*config),
            seed: None,
        },
    })
}

/// Energy and Casimir series along a trajectory.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub energy: Vec<f64>,
    pub casimirs: Vec<CasimirReport>,
    /// `max_t |h(t) − h(0)|`.
    pub max_energy_deviation: f64,
    /// Energy deviation normalized by the energy scale at t = 0.
    pub max_energy_relative: f64,
    /// Per Casimir (particle-major), `max_t |C(t) − C(0)|`.
    pub max_casimir_deviation: Vec<f64>,
    /// Per Casimir, deviation normalized by its natural scale at t = 0.
    pub max_casimir_relative: Vec<f64>,
}

impl Diagnostics {
    pub fn worst_casimir_relative(&self) -> f64 {
        self.max_casimir_relative.iter().copied().fold(0.0, f64::max)
    }
}

/// Normalized deviation: absolute deviation over `scale`, or the absolute
/// deviation itself when the scale vanishes (a zero Casimir stays zero).
pub(crate) fn relative(dev: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        dev / scale
    } else {
        dev
    }
}

pub fn diagnostics(model: &ControlModel, trajectory: &Trajectory) -> Result<Diagnostics> {
    let first = trajectory
        .states
        .first()
        .ok_or_else(|| Error::Config("diagnostics need a nonempty trajectory".into()))?;
    model.check(first)?;
    let energy: Vec<f64> = trajectory.states.iter().map(|s| model.energy(&s.mu)).collect();
    let casimirs: Vec<CasimirReport> = trajectory
        .states
        .iter()
        .map(|s| CasimirReport {
            group: s.group.kind,
            num_particles: s.num_particles,
            values: casimir_values(s.group, &s.mu),
        })
        .collect();
    let e0 = energy[0];
    let max_energy_deviation = energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    let c0 = &casimirs[0].values;
    let mut max_casimir_deviation = vec![0.0f64; c0.len()];
    for c in &casimirs {
        for (m, (v, v0)) in max_casimir_deviation.iter_mut().zip(c.values.iter().zip(c0)) {
            *m = m.max((v - v0).abs());
        }
    }
    let scales = casimir_scales(first);
    let max_casimir_relative = max_casimir_deviation
        .iter()
        .zip(&scales)
        .map(|(d, s)| relative(*d, *s))
        .collect();
    Ok(Diagnostics {
        max_energy_relative: relative(max_energy_deviation, model.energy_scale(&first.mu)),
        energy,
        casimirs,
        max_energy_deviation,
        max_casimir_deviation,
        max_casimir_relative,
    })
}
