//! Long-horizon reconstruction with a learned map and comparison against the
//! ground-truth integrator.

use rand::Rng;
use rand_distr::Uniform;
use rayon::prelude::*;

use crate::control::{ControlModel, ModelDescription};
use crate::error::{Error, Result};
use crate::integrator::{diagnostics, integrate, Diagnostics, IntegratorConfig, Trajectory, TrajectoryMeta};
use crate::lie::{GroupSpec, PhaseState};
use crate::model::CoLpNet;
use crate::rng::{seeded, Stream};

/// Iterate the learned step `num_steps` times from `initial`.
pub fn reconstruct(model: &CoLpNet, initial: &PhaseState, num_steps: usize) -> Result<Trajectory> {
    if num_steps == 0 {
        return Err(Error::Config("reconstruction needs at least one step".into()));
    }
    // validates the state against the model
    model.step_forward(initial)?;
    let mut states = Vec::with_capacity(num_steps + 1);
    states.push(initial.clone());
    let mut mu = initial.mu.clone();
    for step in 1..=num_steps {
        mu = model.step(&mu);
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::Trajectory {
                trajectory: 0,
                step,
                source: Box::new(Error::NonFinite {
                    context: "in reconstructed state".into(),
                }),
            });
        }
        states.push(PhaseState {
            mu: mu.clone(),
            ..initial.clone()
        });
    }
    Ok(Trajectory {
        states,
        dt: model.schedule.delta_t,
        metadata: TrajectoryMeta {
            seed: model.seed,
            ..TrajectoryMeta::default()
        },
    })
}

/// `count` initial conditions uniform in `[−ic_box, ic_box]^{N·n}` from the
/// evaluation stream of `seed` (disjoint from the training-data stream).
pub fn evaluation_initials(group: GroupSpec, num_particles: usize, ic_box: f64, seed: u64, count: usize) -> Result<Vec<PhaseState>> {
    let dist = Uniform::new_inclusive(-ic_box, ic_box).map_err(|e| Error::Config(format!("bad box: {e}")))?;
    let mut rng = seeded(seed, Stream::Evaluation);
    Ok((0..count)
        .map(|_| PhaseState {
            group,
            num_particles,
            mu: (0..num_particles * group.n).map(|_| rng.sample(dist)).collect(),
        })
        .collect())
}

/// Ground truth and reconstruction from one initial condition.
#[derive(Clone, Debug)]
pub struct EvalRun {
    pub truth: Trajectory,
    pub learned: Trajectory,
    pub truth_diagnostics: Diagnostics,
    pub learned_diagnostics: Diagnostics,
    /// Per-step mean absolute error over components.
    pub mae: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub runs: Vec<EvalRun>,
    /// Per-step MAE averaged over runs and components.
    pub mae: Vec<f64>,
}

impl EvalReport {
    /// Mean of the averaged MAE over steps `1..=steps` (clamped to the horizon).
    pub fn mean_mae(&self, steps: usize) -> f64 {
        let upto = steps.min(self.mae.len() - 1);
        if upto == 0 {
            return 0.0;
        }
        self.mae[1..=upto].iter().sum::<f64>() / upto as f64
    }

    pub fn worst_learned_casimir_relative(&self) -> f64 {
        self.runs.iter().map(|r| r.learned_diagnostics.worst_casimir_relative()).fold(0.0, f64::max)
    }

    pub fn worst_truth_casimir_relative(&self) -> f64 {
        self.runs.iter().map(|r| r.truth_diagnostics.worst_casimir_relative()).fold(0.0, f64::max)
    }

    pub fn worst_truth_energy_relative(&self) -> f64 {
        self.runs.iter().map(|r| r.truth_diagnostics.max_energy_relative).fold(0.0, f64::max)
    }

    /// Largest over runs of the learned energy's half-horizon ratio.
    pub fn worst_energy_half_ratio(&self) -> f64 {
        self.runs.iter().map(|r| energy_half_ratio(&r.learned_diagnostics.energy)).fold(0.0, f64::max)
    }
}

/// `max_{t in second half} |h(t) − h(0)|` over `max_{t in first half} |h(t) − h(0)|`.
/// A value ≤ 2 indicates no secular energy drift.
pub fn energy_half_ratio(energy: &[f64]) -> f64 {
    let e0 = energy[0];
    let mid = energy.len() / 2;
    let first = energy[..=mid].iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    let second = energy[mid..].iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    if first == 0.0 {
        if second == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        second / first
    }
}

fn mae(a: &Trajectory, b: &Trajectory) -> Vec<f64> {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.mu.iter().zip(&y.mu).map(|(p, q)| (p - q).abs()).sum::<f64>() / x.mu.len() as f64)
        .collect()
}

/// Compare the learned reconstruction against the ground truth from each
/// initial condition over `num_steps` steps of the model's `Δt`.
pub fn evaluate(
    model: &CoLpNet,
    ground: &ControlModel,
    integrator: &IntegratorConfig,
    initials: &[PhaseState],
    num_steps: usize,
) -> Result<EvalReport> {
    if initials.is_empty() {
        return Err(Error::Config("evaluation needs at least one initial condition".into()));
    }
    if ground.group.kind != model.group.kind || ground.num_particles != model.num_particles {
        return Err(Error::GroupMismatch {
            expected: format!("{} with {} particles", model.group, model.num_particles),
            got: format!("{} with {} particles", ground.group, ground.num_particles),
        });
    }
    let runs: Vec<EvalRun> = initials
        .par_iter()
        .enumerate()
        .map(|(i, init)| {
            let tag = |e: Error| match e {
                Error::Trajectory { step, source, .. } => Error::Trajectory {
                    trajectory: i,
                    step,
                    source,
                },
                other => other,
            };
            let truth = integrate(ground, init, integrator, num_steps + 1).map_err(tag)?;
            let mut learned = reconstruct(model, init, num_steps).map_err(tag)?;
            learned.metadata.model = Some(ModelDescription::of(ground));
            Ok(EvalRun {
                truth_diagnostics: diagnostics(ground, &truth)?,
                learned_diagnostics: diagnostics(ground, &learned)?,
                mae: mae(&truth, &learned),
                truth,
                learned,
            })
        })
        .collect::<Result<_>>()?;
    let mut avg = vec![0.0; num_steps + 1];
    for r in &runs {
        for (a, m) in avg.iter_mut().zip(&r.mae) {
            *a += m;
        }
    }
    for a in &mut avg {
        *a /= runs.len() as f64;
    }
    Ok(EvalReport { runs, mae: avg })
}
