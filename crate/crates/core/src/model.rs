//! The learned one-step map: a composition of `K` exact Poisson maps whose
//! rates `w_1..w_K` are produced by shallow networks evaluated at the step's
//! input state,
//!
//! ```text
//! μ⁽⁰⁾ = μ₀,  μ⁽ᵏ⁾ = A_k(w_k(μ₀))·μ⁽ᵏ⁻¹⁾,  step(μ₀) = μ⁽ᴷ⁾.
//! ```
//!
//! Because every `A_k` is an exact flow of a test Hamiltonian, `step`
//! preserves all Casimirs whatever the weights are.
//!
//! The loss is `L = Σ_j ‖μᶠ_j − step(μ⁰_j)‖²`. Its gradient is computed by a
//! reverse sweep over the stored intermediate states: with `λ_K = 2r`,
//! `∂L/∂w_k = λ_kᵀ(∂A_k/∂w_k)μ⁽ᵏ⁻¹⁾` and `λ_{k−1} = A_kᵀλ_k`; each `∂L/∂w_k` is
//! then pushed through its network. Samples are processed in fixed-size
//! chunks whose partial sums are added in chunk order, so the result does not
//! depend on the number of worker threads.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PairSet;
use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic};
use crate::lie::{GroupKind, GroupSpec, PhaseState};
use crate::maps::{apply_block, apply_block_transpose, d_block_dot, MapDescriptor, MapSchedule};
use crate::net::NetShape;

pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_WIDTH: usize = 3;
const CHUNK: usize = 128;

/// Record of how a model was trained, kept in the model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub epochs: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub num_pairs: usize,
    pub initial_mean_loss: f64,
    pub final_mean_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoLpNet {
    pub group: GroupSpec,
    pub num_particles: usize,
    pub schedule: MapSchedule,
    pub shape: NetShape,
    /// All network weights, net after net.
    pub params: Vec<f64>,
    /// Topology of the data the model was fitted to, if known.
    pub topology: Option<String>,
    pub seed: Option<u64>,
    pub training: Option<TrainingRecord>,
}

/// Intermediate results of one forward step.
#[derive(Clone, Debug)]
pub struct StepCache {
    /// `μ⁽⁰⁾..μ⁽ᴷ⁾`, row-major `(K+1) × d`.
    pub states: Vec<f64>,
    pub w: Vec<f64>,
    /// Hidden activations, `K × W`.
    pub hidden: Vec<f64>,
}

impl StepCache {
    fn new(k: usize, d: usize, width: usize) -> Self {
        Self {
            states: vec![0.0; (k + 1) * d],
            w: vec![0.0; k],
            hidden: vec![0.0; k * width],
        }
    }
}

impl CoLpNet {
    /// Model with all weights zero (every map the identity).
    pub fn zeros(group: GroupSpec, num_particles: usize, width: usize, schedule: MapSchedule) -> Result<Self> {
        if num_particles == 0 || width == 0 {
            return Err(Error::Config("a model needs at least one particle and a positive width".into()));
        }
        if !(schedule.delta_t.is_finite() && schedule.delta_t > 0.0) {
            return Err(Error::Config(format!("map time must be positive, got {}", schedule.delta_t)));
        }
        for d in &schedule.maps {
            d.validate(group, num_particles)?;
        }
        let shape = NetShape::new(num_particles * group.n, width);
        Ok(Self {
            group,
            num_particles,
            params: vec![0.0; schedule.len() * shape.num_params()],
            schedule,
            shape,
            topology: None,
            seed: None,
            training: None,
        })
    }

    /// Default architecture: one pass over all `N·n` components.
    pub fn with_defaults(group: GroupSpec, num_particles: usize, width: usize, delta_t: f64) -> Result<Self> {
        Self::zeros(group, num_particles, width, MapSchedule::default_for(group, num_particles, delta_t, 1))
    }

    /// Re-draw all weights (std `scale`), biases zero.
    pub fn initialize<R: Rng + ?Sized>(&mut self, scale: f64, rng: &mut R) {
        let p = self.shape.num_params();
        for net in self.params.chunks_mut(p) {
            self.shape.init(scale, rng, net);
        }
    }

    pub fn dim(&self) -> usize {
        self.num_particles * self.group.n
    }

    pub fn num_maps(&self) -> usize {
        self.schedule.len()
    }

    pub fn params_per_net(&self) -> usize {
        self.shape.num_params()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn net_params(&self, k: usize) -> &[f64] {
        let p = self.shape.num_params();
        &self.params[k * p..(k + 1) * p]
    }

    fn check_state(&self, state: &PhaseState) -> Result<()> {
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

    pub fn check_pairs(&self, pairs: &PairSet) -> Result<()> {
        if pairs.config.group != self.group.kind {
            return Err(Error::GroupMismatch {
                expected: self.group.to_string(),
                got: pairs.config.group.to_string(),
            });
        }
        if pairs.config.num_particles != self.num_particles {
            return Err(Error::Dimension {
                what: "number of particles",
                expected: self.num_particles,
                got: pairs.config.num_particles,
            });
        }
        Ok(())
    }

    fn forward_into(&self, mu0: &[f64], cache: &mut StepCache) {
        let d = self.dim();
        let n = self.group.n;
        let p = self.shape.num_params();
        let width = self.shape.width;
        cache.states[..d].copy_from_slice(mu0);
        for k in 0..self.num_maps() {
            let hidden = &mut cache.hidden[k * width..(k + 1) * width];
            cache.w[k] = self.shape.forward(&self.params[k * p..(k + 1) * p], mu0, hidden);
        }
        for (k, desc) in self.schedule.maps.iter().enumerate() {
            let (prev, next) = cache.states.split_at_mut((k + 1) * d);
            let next = &mut next[..d];
            next.copy_from_slice(&prev[k * d..]);
            let theta = cache.w[k] * self.schedule.delta_t;
            apply_block(self.group.kind, desc.component, theta, &mut next[desc.particle * n..(desc.particle + 1) * n]);
        }
    }

    /// Loss of one sample; when `grad` is given, also accumulates `∂L/∂θ`.
    fn sample_loss(&self, mu0: &[f64], target: &[f64], cache: &mut StepCache, lambda: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
        let d = self.dim();
        let k_total = self.num_maps();
        self.forward_into(mu0, cache);
        let out = &cache.states[k_total * d..];
        let mut loss = 0.0;
        for i in 0..d {
            let r = out[i] - target[i];
            loss += r * r;
            lambda[i] = 2.0 * r;
        }
        let Some(grad) = grad else { return loss };
        let n = self.group.n;
        let p = self.shape.num_params();
        let width = self.shape.width;
        let t_star = self.schedule.delta_t;
        for k in (0..k_total).rev() {
            let desc = self.schedule.maps[k];
            let block = desc.particle * n..(desc.particle + 1) * n;
            let theta = cache.w[k] * t_star;
            let x = &cache.states[k * d..(k + 1) * d];
            let g = d_block_dot(self.group.kind, desc.component, theta, t_star, &x[block.clone()], &lambda[block.clone()]);
            apply_block_transpose(self.group.kind, desc.component, theta, &mut lambda[block]);
            self.shape.accumulate_grad(
                &self.params[k * p..(k + 1) * p],
                mu0,
                &cache.hidden[k * width..(k + 1) * width],
                g,
                &mut grad[k * p..(k + 1) * p],
            );
        }
        loss
    }

    /// One learned step with the cache needed for backpropagation.
    pub fn step_forward(&self, mu0: &PhaseState) -> Result<(PhaseState, StepCache)> {
        self.check_state(mu0)?;
        let d = self.dim();
        let mut cache = StepCache::new(self.num_maps(), d, self.shape.width);
        self.forward_into(&mu0.mu, &mut cache);
        let mu = cache.states[self.num_maps() * d..].to_vec();
        Ok((PhaseState { mu, ..mu0.clone() }, cache))
    }

    /// One learned step on a raw state vector.
    pub fn step(&self, mu0: &[f64]) -> Vec<f64> {
        let mut cache = StepCache::new(self.num_maps(), self.dim(), self.shape.width);
        self.forward_into(mu0, &mut cache);
        cache.states[self.num_maps() * self.dim()..].to_vec()
    }

    fn run(&self, pairs: &PairSet, with_grad: bool) -> Result<(f64, Vec<f64>)> {
        self.check_pairs(pairs)?;
        let m = pairs.len();
        let np = self.num_params();
        let chunks: Vec<(f64, Vec<f64>)> = (0..m.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut cache = StepCache::new(self.num_maps(), self.dim(), self.shape.width);
                let mut lambda = vec![0.0; self.dim()];
                let mut grad = if with_grad { vec![0.0; np] } else { Vec::new() };
                let mut loss = 0.0;
                for j in c * CHUNK..((c + 1) * CHUNK).min(m) {
                    let g = if with_grad { Some(grad.as_mut_slice()) } else { None };
                    loss += self.sample_loss(pairs.begin_row(j), pairs.end_row(j), &mut cache, &mut lambda, g);
                }
                (loss, grad)
            })
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; if with_grad { np } else { 0 }];
        for (l, g) in chunks {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                context: "in loss".into(),
            });
        }
        Ok((loss, grad))
    }

    /// `L = Σ_j ‖μᶠ_j − step(μ⁰_j)‖²`.
    pub fn loss(&self, pairs: &PairSet) -> Result<f64> {
        Ok(self.run(pairs, false)?.0)
    }

    /// Loss and its gradient with respect to [`CoLpNet::params`].
    pub fn loss_and_grad(&self, pairs: &PairSet) -> Result<(f64, Vec<f64>)> {
        self.run(pairs, true)
    }

    pub fn grad_loss(&self, pairs: &PairSet) -> Result<Vec<f64>> {
        Ok(self.run(pairs, true)?.1)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let p = self.shape.num_params();
        let file = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            group: self.group.kind.name().to_string(),
            topology: self.topology.clone(),
            num_particles: self.num_particles,
            algebra_dim: self.group.n,
            width: self.shape.width,
            activation: "tanh".into(),
            delta_t: self.schedule.delta_t,
            schedule: self.schedule.maps.clone(),
            params_per_net: p,
            total_params: self.num_params(),
            nets: self.params.chunks(p).map(<[f64]>::to_vec).collect(),
            seed: self.seed,
            training: self.training.clone(),
        };
        let mut json = serde_json::to_string_pretty(&file).expect("model serializes");
        json.push('\n');
        write_atomic(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let f: ModelFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let bad = |msg: String| Error::format(path, msg);
        if f.schema_version != MODEL_SCHEMA_VERSION {
            return Err(bad(format!("schema_version {} is not supported", f.schema_version)));
        }
        if f.activation != "tanh" {
            return Err(bad(format!("unsupported activation {:?}", f.activation)));
        }
        let kind = GroupKind::parse(&f.group).ok_or_else(|| bad(format!("unknown group {:?}", f.group)))?;
        let group = GroupSpec::of(kind);
        if f.algebra_dim != group.n {
            return Err(bad(format!("algebra_dim {} does not match group {}", f.algebra_dim, f.group)));
        }
        let schedule = MapSchedule {
            maps: f.schedule,
            delta_t: f.delta_t,
        };
        let mut model = Self::zeros(group, f.num_particles, f.width, schedule).map_err(|e| bad(e.to_string()))?;
        let p = model.shape.num_params();
        if f.nets.len() != model.num_maps() || f.nets.iter().any(|n| n.len() != p) {
            return Err(bad(format!("expected {} nets of {p} weights", model.num_maps())));
        }
        model.params = f.nets.concat();
        model.topology = f.topology;
        model.seed = f.seed;
        model.training = f.training;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    group: String,
    topology: Option<String>,
    num_particles: usize,
    algebra_dim: usize,
    width: usize,
    activation: String,
    delta_t: f64,
    /// 0-based `(particle, component)` of each map, in application order.
    schedule: Vec<MapDescriptor>,
    params_per_net: usize,
    total_params: usize,
    /// Per net: `M` row-major, `b`, `v`, `c`.
    nets: Vec<Vec<f64>>,
    seed: Option<u64>,
    training: Option<TrainingRecord>,
}
