//! Training pairs sampled from ground-truth trajectories.
//!
//! `generate` draws `N_t` initial conditions uniformly from the box
//! `[−ic_box, ic_box]^{N·n}`, integrates each for `N_p` points and cuts every
//! trajectory into `N_p − 1` overlapping `(μ_α, μ_{α+1})` pairs.
//!
//! On disk a pair set is a directory with `manifest.json` and `pairs.csv`
//! (header `traj,step,b_0..,e_0..`, floats at 17 significant digits).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::Uniform;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{ControlModel, Topology};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::io::{fmt_f64, read_to_string, write_atomic};
use crate::lie::{GroupKind, GroupSpec, PhaseState};
use crate::rng::{seeded, Stream, RNG_NAME};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAIRS_FILE: &str = "pairs.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub group: GroupKind,
    pub topology: Topology,
    pub num_particles: usize,
    pub chi: f64,
    pub dt: f64,
    pub num_trajectories: usize,
    pub points_per_trajectory: usize,
    pub seed: u64,
    pub ic_box: f64,
}

impl DatasetConfig {
    /// Defaults: three particles, democracy, χ = 0.5, Δt = 0.1, 51 points per
    /// trajectory, 40 (SO(3)) or 80 (SE(3)) trajectories.
    pub fn defaults(group: GroupKind) -> Self {
        Self {
            group,
            topology: Topology::Democracy,
            num_particles: 3,
            chi: 0.5,
            dt: 0.1,
            num_trajectories: match group {
                GroupKind::So3 => 40,
                GroupKind::Se3 => 80,
            },
            points_per_trajectory: 51,
            seed: 0,
            ic_box: 1.0,
        }
    }

    pub fn group_spec(&self) -> GroupSpec {
        GroupSpec::of(self.group)
    }

    pub fn dim(&self) -> usize {
        self.num_particles * self.group_spec().n
    }

    /// Number of pairs `M = N_t·(N_p − 1)`.
    pub fn num_pairs(&self) -> usize {
        self.num_trajectories * self.points_per_trajectory.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trajectories == 0 {
            return Err(Error::Config("need at least one trajectory".into()));
        }
        if self.points_per_trajectory < 2 {
            return Err(Error::Config("need at least two points per trajectory".into()));
        }
        if !(self.ic_box > 0.0 && self.ic_box.is_finite()) {
            return Err(Error::Config(format!("ic_box must be positive, got {}", self.ic_box)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.chi >= 0.0 && self.chi.is_finite()) {
            return Err(Error::Config(format!("chi must be non-negative, got {}", self.chi)));
        }
        Ok(())
    }

    pub fn control_model(&self) -> Result<ControlModel> {
        ControlModel::new(self.group_spec(), self.topology.clone(), self.num_particles, self.chi)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig::with_dt(self.dt)
    }
}

/// Uniform draw of every component from `[−ic_box, ic_box]`.
pub fn sample_initial<R: Rng + ?Sized>(config: &DatasetConfig, rng: &mut R) -> PhaseState {
    let dist = Uniform::new_inclusive(-config.ic_box, config.ic_box).expect("validated box");
    let mu: Vec<f64> = (0..config.dim()).map(|_| rng.sample(dist)).collect();
    PhaseState {
        group: config.group_spec(),
        num_particles: config.num_particles,
        mu,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    /// Row-major `M × d` begin states.
    pub begin: Vec<f64>,
    /// Row-major `M × d` end states.
    pub end: Vec<f64>,
    /// `(trajectory, step)` of each row's begin state.
    pub provenance: Vec<(usize, usize)>,
    pub config: DatasetConfig,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn begin_row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.begin[i * d..(i + 1) * d]
    }

    pub fn end_row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.end[i * d..(i + 1) * d]
    }

    /// Pair set made of an explicit list of rows, e.g. for toy problems.
    pub fn from_rows(config: DatasetConfig, begin: Vec<Vec<f64>>, end: Vec<Vec<f64>>) -> Result<Self> {
        let d = config.dim();
        if begin.len() != end.len() {
            return Err(Error::Dimension {
                what: "pair rows",
                expected: begin.len(),
                got: end.len(),
            });
        }
        for row in begin.iter().chain(&end) {
            if row.len() != d {
                return Err(Error::Dimension {
                    what: "pair row length",
                    expected: d,
                    got: row.len(),
                });
            }
        }
        Ok(Self {
            provenance: (0..begin.len()).map(|i| (i, 0)).collect(),
            begin: begin.concat(),
            end: end.concat(),
            config,
        })
    }
}

/// Integrate `num_trajectories` random trajectories and cut them into pairs.
///
/// Initials are drawn sequentially from the data stream, trajectories are
/// integrated in parallel and assembled in trajectory order, so the result
/// does not depend on scheduling.
pub fn generate(config: &DatasetConfig) -> Result<PairSet> {
    config.validate()?;
    let model = config.control_model()?;
    let integrator = config.integrator();
    let mut rng = seeded(config.seed, Stream::Data);
    let initials: Vec<PhaseState> = (0..config.num_trajectories)
        .map(|_| sample_initial(config, &mut rng))
        .collect();
    let trajectories: Vec<_> = initials
        .par_iter()
        .enumerate()
        .map(|(t, init)| {
            integrate(&model, init, &integrator, config.points_per_trajectory).map_err(|e| match e {
                Error::Trajectory { step, source, .. } => Error::Trajectory {
                    trajectory: t,
                    step,
                    source,
                },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let m = config.num_pairs();
    let d = config.dim();
    let mut begin = Vec::with_capacity(m * d);
    let mut end = Vec::with_capacity(m * d);
    let mut provenance = Vec::with_capacity(m);
    for (t, traj) in trajectories.iter().enumerate() {
        for (step, w) in traj.states.windows(2).enumerate() {
            begin.extend_from_slice(&w[0].mu);
            end.extend_from_slice(&w[1].mu);
            provenance.push((t, step));
        }
    }
    Ok(PairSet {
        begin,
        end,
        provenance,
        config: config.clone(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    group: String,
    topology: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adjacency: Option<Vec<Vec<u8>>>,
    num_particles: usize,
    algebra_dim: usize,
    chi: f64,
    dt: f64,
    num_trajectories: usize,
    points_per_trajectory: usize,
    seed: u64,
    rng_name: String,
    ic_box: f64,
    pairs_file: String,
}

pub fn save(pairs: &PairSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let c = &pairs.config;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        group: c.group.name().to_string(),
        topology: c.topology.name().to_string(),
        adjacency: match &c.topology {
            Topology::Custom(rows) => Some(rows.clone()),
            _ => None,
        },
        num_particles: c.num_particles,
        algebra_dim: c.group_spec().n,
        chi: c.chi,
        dt: c.dt,
        num_trajectories: c.num_trajectories,
        points_per_trajectory: c.points_per_trajectory,
        seed: c.seed,
        rng_name: RNG_NAME.to_string(),
        ic_box: c.ic_box,
        pairs_file: PAIRS_FILE.to_string(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');

    let d = pairs.dim();
    let mut csv = String::from("traj,step");
    for prefix in ["b", "e"] {
        for i in 0..d {
            write!(csv, ",{prefix}_{i}").unwrap();
        }
    }
    csv.push('\n');
    for (row, (t, s)) in pairs.provenance.iter().enumerate() {
        write!(csv, "{t},{s}").unwrap();
        for v in pairs.begin_row(row).iter().chain(pairs.end_row(row)) {
            csv.push(',');
            csv.push_str(&fmt_f64(*v));
        }
        csv.push('\n');
    }
    write_atomic(&dir.join(PAIRS_FILE), csv.as_bytes())?;
    write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes())
}

/// Read and validate only `manifest.json`; returns the config and the name
/// of the pairs file.
pub fn load_config(dir: &Path) -> Result<(DatasetConfig, String)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = read_to_string(&manifest_path)?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    let bad = |msg: String| Error::format(&manifest_path, msg);
    if m.schema_version != SCHEMA_VERSION {
        return Err(bad(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            m.schema_version
        )));
    }
    let group = GroupKind::parse(&m.group).ok_or_else(|| bad(format!("unknown group {:?}", m.group)))?;
    let topology = match (m.topology.as_str(), m.adjacency) {
        ("custom", Some(rows)) => Topology::Custom(rows),
        ("custom", None) => return Err(bad("custom topology without adjacency".into())),
        (name, _) => Topology::parse(name).ok_or_else(|| bad(format!("unknown topology {name:?}")))?,
    };
    if m.algebra_dim != GroupSpec::of(group).n {
        return Err(bad(format!("algebra_dim {} does not match group {}", m.algebra_dim, m.group)));
    }
    let config = DatasetConfig {
        group,
        topology,
        num_particles: m.num_particles,
        chi: m.chi,
        dt: m.dt,
        num_trajectories: m.num_trajectories,
        points_per_trajectory: m.points_per_trajectory,
        seed: m.seed,
        ic_box: m.ic_box,
    };
    config.validate().map_err(|e| bad(e.to_string()))?;
    Ok((config, m.pairs_file))
}

pub fn load(dir: &Path) -> Result<PairSet> {
    let (config, pairs_file) = load_config(dir)?;
    let csv_path = dir.join(&pairs_file);
    let csv = read_to_string(&csv_path)?;
    let d = config.dim();
    let expected_rows = config.num_pairs();
    let mut lines = csv.lines();
    let header = lines.next().ok_or_else(|| Error::format(&csv_path, "empty file"))?;
    if header.split(',').count() != 2 + 2 * d {
        return Err(Error::format(&csv_path, format!("header has wrong number of columns for d = {d}")));
    }
    let mut begin = Vec::with_capacity(expected_rows * d);
    let mut end = Vec::with_capacity(expected_rows * d);
    let mut provenance = Vec::with_capacity(expected_rows);
    for (lineno, line) in lines.enumerate() {
        let row_err = |msg: String| Error::format(&csv_path, format!("row {}: {msg}", lineno + 1));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + 2 * d {
            return Err(row_err(format!("expected {} fields, found {}", 2 + 2 * d, fields.len())));
        }
        let t = fields[0].parse().map_err(|_| row_err("bad trajectory index".into()))?;
        let s = fields[1].parse().map_err(|_| row_err("bad step index".into()))?;
        provenance.push((t, s));
        for (j, f) in fields[2..].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| row_err(format!("bad number {f:?}")))?;
            if j < d {
                begin.push(v);
            } else {
                end.push(v);
            }
        }
    }
    if provenance.len() != expected_rows {
        return Err(Error::format(
            &csv_path,
            format!("found {} rows, manifest implies {expected_rows}", provenance.len()),
        ));
    }
    Ok(PairSet {
        begin,
        end,
        provenance,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::advance;
    use crate::lie::casimir_values;

    fn small(group: GroupKind) -> DatasetConfig {
        DatasetConfig {
            num_trajectories: 3,
            points_per_trajectory: 6,
            seed: 11,
            ..DatasetConfig::defaults(group)
        }
    }

    #[test]
    fn samples_stay_in_box_and_repeat() {
        let cfg = DatasetConfig {
            ic_box: 0.25,
            ..DatasetConfig::defaults(GroupKind::Se3)
        };
        let a = sample_initial(&cfg, &mut seeded(3, Stream::Data));
        let b = sample_initial(&cfg, &mut seeded(3, Stream::Data));
        assert_eq!(a, b);
        assert!(a.mu.iter().all(|v| v.abs() <= 0.25));
    }

    #[test]
    fn sample_mean_is_centered() {
        let cfg = DatasetConfig {
            num_particles: 1,
            ..DatasetConfig::defaults(GroupKind::So3)
        };
        let mut rng = seeded(5, Stream::Data);
        let n = 100_000;
        let mut sum = [0.0; 3];
        for _ in 0..n {
            let s = sample_initial(&cfg, &mut rng);
            for i in 0..3 {
                sum[i] += s.mu[i];
            }
        }
        // 3σ/√n with σ² = 1/3
        let bound = 3.0 * (1.0f64 / 3.0).sqrt() / (n as f64).sqrt();
        assert!(bound < 0.02);
        assert!(sum.iter().all(|s| (s / n as f64).abs() <= 0.02));
    }

    #[test]
    fn pair_counts() {
        assert_eq!(DatasetConfig::defaults(GroupKind::So3).num_pairs(), 2000);
        assert_eq!(DatasetConfig::defaults(GroupKind::Se3).num_pairs(), 4000);
        let cfg = DatasetConfig {
            points_per_trajectory: 2,
            ..small(GroupKind::So3)
        };
        assert_eq!(generate(&cfg).unwrap().len(), 3);
    }

    #[test]
    fn pairs_overlap_and_follow_the_flow() {
        let cfg = small(GroupKind::Se3);
        let p = generate(&cfg).unwrap();
        assert_eq!(p.len(), 15);
        // consecutive rows share a state within a trajectory
        assert_eq!(p.end_row(0), p.begin_row(1));
        assert_eq!(p.provenance[5], (1, 0));
        let model = cfg.control_model().unwrap();
        let integ = cfg.integrator();
        for i in [0, 7, 14] {
            let s = PhaseState::new(cfg.group_spec(), 3, p.begin_row(i).to_vec()).unwrap();
            let next = advance(&model, &s, &integ, false).unwrap();
            for (a, b) in next.mu.iter().zip(p.end_row(i)) {
                assert!((a - b).abs() <= 1e-13);
            }
            let (cb, ce) = (casimir_values(cfg.group_spec(), p.begin_row(i)), casimir_values(cfg.group_spec(), p.end_row(i)));
            for (a, b) in cb.iter().zip(&ce) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small(GroupKind::So3);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = DatasetConfig { seed: 12, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap().begin, generate(&other).unwrap().begin);
    }

    #[test]
    fn invalid_configs() {
        let base = small(GroupKind::So3);
        for bad in [
            DatasetConfig { num_trajectories: 0, ..base.clone() },
            DatasetConfig { points_per_trajectory: 1, ..base.clone() },
            DatasetConfig { ic_box: 0.0, ..base.clone() },
        ] {
            assert!(generate(&bad).is_err());
        }
    }
}
