//! Subcommands of the `colpnets` binary: `generate`, `train`, `evaluate`
//! and `selftest`.
//!
//! Every command writes its outputs plus a `run_manifest.json` recording the
//! resolved parameters and timing. All outputs except the manifest's
//! wall-clock field are pure functions of the flags.

pub mod selftest;
pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use colpnets::control::Topology;
use colpnets::dataset::{self, DatasetConfig};
use colpnets::eval::{evaluate, evaluation_initials, EvalReport};
use colpnets::io::{fmt_f64, write_atomic};
use colpnets::lie::{CasimirReport, GroupKind, GroupSpec};
use colpnets::maps::MapSchedule;
use colpnets::model::{CoLpNet, DEFAULT_WIDTH};
use colpnets::rng::RNG_NAME;
use colpnets::train::{initialize, train_with, TrainConfig};

use svg::{chart, Panel, Series, LEARNED, TRUTH};

pub const MANIFEST: &str = "run_manifest.json";

#[derive(Parser, Debug)]
#[command(name = "colpnets", version, about = "Learn Casimir-preserving flow maps of coupled Lie-Poisson control systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample ground-truth trajectories and write a pair set
    Generate(GenerateArgs),
    /// Fit a model to a pair set with full-batch Adam
    Train(TrainArgs),
    /// Compare learned reconstructions with the ground truth
    Evaluate(EvaluateArgs),
    /// Run the fast invariant checks
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GroupArg {
    So3,
    Se3,
}

impl From<GroupArg> for GroupKind {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::So3 => GroupKind::So3,
            GroupArg::Se3 => GroupKind::Se3,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TopologyArg {
    Dictatorship,
    Democracy,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub group: GroupArg,
    #[arg(long, value_enum, default_value = "democracy")]
    pub topology: TopologyArg,
    #[arg(long, default_value_t = 3)]
    pub particles: usize,
    #[arg(long, default_value_t = 0.5)]
    pub chi: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Number of trajectories [default: 40 for so3, 80 for se3]
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long, default_value_t = 51)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub ic_box: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Pair-set directory written by `generate`
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for model.json and loss.csv
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, default_value_t = DEFAULT_WIDTH)]
    pub width: usize,
    /// Passes over all N·n components in one step (K = passes·N·n)
    #[arg(long, default_value_t = 1)]
    pub passes: usize,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Trained model file
    #[arg(long)]
    pub model: PathBuf,
    /// Pair-set directory whose manifest defines the ground-truth system
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub num_initials: usize,
    /// Reconstruction steps [default: 1000 for so3, 200 for se3]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Seed of the evaluation stream (independent of the training data stream)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub ic_box: f64,
    /// Number of initial conditions to draw component charts for
    #[arg(long, default_value_t = 2)]
    pub plots: usize,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    /// Skip checks that involve training
    #[arg(long)]
    pub quick: bool,
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    parameters: serde_json::Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    seeds: serde_json::Value,
    rng_name: &'static str,
    tool_version: &'static str,
    wall_clock_seconds: f64,
}

fn write_manifest(dir: &Path, mut manifest: RunManifest, start: Instant) -> Result<()> {
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&dir.join(MANIFEST), text.as_bytes())?;
    Ok(())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Selftest(a) => cmd_selftest(&a),
    }
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let start = Instant::now();
    let group: GroupKind = a.group.into();
    let defaults = DatasetConfig::defaults(group);
    let config = DatasetConfig {
        group,
        topology: match a.topology {
            TopologyArg::Dictatorship => Topology::Dictatorship,
            TopologyArg::Democracy => Topology::Democracy,
        },
        num_particles: a.particles,
        chi: a.chi,
        dt: a.dt,
        num_trajectories: a.trajectories.unwrap_or(defaults.num_trajectories),
        points_per_trajectory: a.points,
        seed: a.seed,
        ic_box: a.ic_box,
    };
    config.validate()?;
    create_dir(&a.out)?;
    let pairs = dataset::generate(&config)?;
    dataset::save(&pairs, &a.out)?;
    println!(
        "wrote {} pairs ({}, {}, N = {}) to {}",
        pairs.len(),
        group,
        config.topology,
        config.num_particles,
        a.out.display()
    );
    write_manifest(
        &a.out,
        RunManifest {
            command: "generate",
            parameters: json!({
                "group": group.name(),
                "topology": config.topology.name(),
                "num_particles": config.num_particles,
                "chi": config.chi,
                "dt": config.dt,
                "num_trajectories": config.num_trajectories,
                "points_per_trajectory": config.points_per_trajectory,
                "ic_box": config.ic_box,
                "num_pairs": pairs.len(),
            }),
            inputs: vec![],
            outputs: vec![
                path_str(&a.out.join(dataset::MANIFEST_FILE)),
                path_str(&a.out.join(dataset::PAIRS_FILE)),
            ],
            seeds: json!({ "data": config.seed }),
            rng_name: RNG_NAME,
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_clock_seconds: 0.0,
        },
        start,
    )
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let pairs = dataset::load(&a.data).with_context(|| format!("cannot load pair set from {}", a.data.display()))?;
    let cfg = &pairs.config;
    let group = GroupSpec::of(cfg.group);
    if a.passes == 0 {
        bail!("--passes must be at least 1");
    }
    let schedule = MapSchedule::default_for(group, cfg.num_particles, cfg.dt, a.passes);
    let mut model = CoLpNet::zeros(group, cfg.num_particles, a.width, schedule)?;
    model.topology = Some(cfg.topology.name().to_string());
    let tc = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        init_scale: a.init_scale,
        seed: a.seed,
        ..TrainConfig::default()
    };
    tc.validate()?;
    create_dir(&a.out)?;
    println!(
        "training on {} pairs: {} maps x {} weights = {} parameters",
        pairs.len(),
        model.num_maps(),
        model.params_per_net(),
        model.num_params()
    );
    initialize(&mut model, &tc);
    let every = (a.epochs / 10).max(1);
    let outcome = train_with(model, &pairs, &tc, |epoch, loss| {
        if epoch % every == 0 {
            println!("epoch {epoch:>7}  mean loss {loss:.6e}");
        }
    })?;
    let final_loss = *outcome.history.last().expect("history has the initial loss");
    println!("epoch {:>7}  mean loss {final_loss:.6e} (final)", a.epochs);

    let model_path = a.out.join("model.json");
    outcome.model.save(&model_path)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in outcome.history.iter().enumerate() {
        writeln!(csv, "{e},{}", fmt_f64(*l)).unwrap();
    }
    let loss_path = a.out.join("loss.csv");
    write_atomic(&loss_path, csv.as_bytes())?;
    let svg = chart(
        "training loss (mean per sample)",
        &[Panel {
            title: "loss".into(),
            series: vec![Series {
                label: "loss".into(),
                color: LEARNED,
                points: outcome.history.iter().enumerate().map(|(e, l)| (e as f64, *l)).collect(),
            }],
            log_y: true,
        }],
        1,
    );
    write_atomic(&a.out.join("loss.svg"), svg.as_bytes())?;
    write_manifest(
        &a.out,
        RunManifest {
            command: "train",
            parameters: json!({
                "epochs": tc.epochs,
                "learning_rate": tc.learning_rate,
                "beta1": tc.beta1,
                "beta2": tc.beta2,
                "eps": tc.eps,
                "init_scale": tc.init_scale,
                "width": a.width,
                "passes": a.passes,
                "num_params": outcome.model.num_params(),
                "initial_mean_loss": outcome.history[0],
                "final_mean_loss": final_loss,
            }),
            inputs: vec![path_str(&a.data)],
            outputs: vec![path_str(&model_path), path_str(&loss_path), path_str(&a.out.join("loss.svg"))],
            seeds: json!({ "init": tc.seed, "data": cfg.seed }),
            rng_name: RNG_NAME,
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_clock_seconds: 0.0,
        },
        start,
    )
}

fn casimir_deviation_row(reports: &[CasimirReport], t: usize) -> Vec<f64> {
    reports[t].values.iter().zip(&reports[0].values).map(|(c, c0)| c - c0).collect()
}

fn write_series(out: &Path, report: &EvalReport, labels: &[String], casimir_labels: &[String], dt: f64) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let mut mae = String::from("step,time,mae\n");
    for (i, m) in report.mae.iter().enumerate() {
        writeln!(mae, "{i},{},{}", fmt_f64(i as f64 * dt), fmt_f64(*m)).unwrap();
    }
    let p = out.join("mae.csv");
    write_atomic(&p, mae.as_bytes())?;
    written.push(path_str(&p));

    for (r, run) in report.runs.iter().enumerate() {
        let mut csv = String::from("step,time");
        for l in labels {
            write!(csv, ",truth_{l}").unwrap();
        }
        for l in labels {
            write!(csv, ",learned_{l}").unwrap();
        }
        csv.push('\n');
        for (i, (t, l)) in run.truth.states.iter().zip(&run.learned.states).enumerate() {
            write!(csv, "{i},{}", fmt_f64(i as f64 * dt)).unwrap();
            for v in t.mu.iter().chain(&l.mu) {
                write!(csv, ",{}", fmt_f64(*v)).unwrap();
            }
            csv.push('\n');
        }
        let p = out.join(format!("trajectory_{r:02}.csv"));
        write_atomic(&p, csv.as_bytes())?;
        written.push(path_str(&p));

        let mut dev = String::from("step,time,energy_dev_truth,energy_dev_learned");
        for l in casimir_labels {
            write!(dev, ",{l}_dev_truth").unwrap();
        }
        for l in casimir_labels {
            write!(dev, ",{l}_dev_learned").unwrap();
        }
        dev.push('\n');
        let (td, ld) = (&run.truth_diagnostics, &run.learned_diagnostics);
        for i in 0..td.energy.len() {
            write!(
                dev,
                "{i},{},{},{}",
                fmt_f64(i as f64 * dt),
                fmt_f64(td.energy[i] - td.energy[0]),
                fmt_f64(ld.energy[i] - ld.energy[0])
            )
            .unwrap();
            for v in casimir_deviation_row(&td.casimirs, i).iter().chain(&casimir_deviation_row(&ld.casimirs, i)) {
                write!(dev, ",{}", fmt_f64(*v)).unwrap();
            }
            dev.push('\n');
        }
        let p = out.join(format!("deviations_{r:02}.csv"));
        write_atomic(&p, dev.as_bytes())?;
        written.push(path_str(&p));
    }
    Ok(written)
}

fn write_charts(out: &Path, report: &EvalReport, labels: &[String], casimir_labels: &[String], dt: f64, plots: usize, columns: usize) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let series = |label: &str, color: &'static str, ys: Vec<f64>| Series {
        label: label.into(),
        color,
        points: ys.into_iter().enumerate().map(|(i, y)| (i as f64 * dt, y)).collect(),
    };
    for (r, run) in report.runs.iter().take(plots).enumerate() {
        let panels: Vec<Panel> = labels
            .iter()
            .enumerate()
            .map(|(c, l)| Panel {
                title: l.clone(),
                series: vec![
                    series("ground truth", TRUTH, run.truth.states.iter().map(|s| s.mu[c]).collect()),
                    series("learned", LEARNED, run.learned.states.iter().map(|s| s.mu[c]).collect()),
                ],
                log_y: false,
            })
            .collect();
        let svg = chart(&format!("components, initial condition {r}"), &panels, columns);
        let p = out.join(format!("components_{r:02}.svg"));
        write_atomic(&p, svg.as_bytes())?;
        written.push(path_str(&p));

        let (td, ld) = (&run.truth_diagnostics, &run.learned_diagnostics);
        let mut panels = vec![Panel {
            title: "energy h(t) − h(0)".into(),
            series: vec![
                series("ground truth", TRUTH, td.energy.iter().map(|e| e - td.energy[0]).collect()),
                series("learned", LEARNED, ld.energy.iter().map(|e| e - ld.energy[0]).collect()),
            ],
            log_y: false,
        }];
        for (j, l) in casimir_labels.iter().enumerate() {
            panels.push(Panel {
                title: format!("{l}(t) − {l}(0)"),
                series: vec![
                    series("ground truth", TRUTH, td.casimirs.iter().map(|c| c.values[j] - td.casimirs[0].values[j]).collect()),
                    series("learned", LEARNED, ld.casimirs.iter().map(|c| c.values[j] - ld.casimirs[0].values[j]).collect()),
                ],
                log_y: false,
            });
        }
        let svg = chart(&format!("energy and Casimir deviations, initial condition {r}"), &panels, 3);
        let p = out.join(format!("deviations_{r:02}.svg"));
        write_atomic(&p, svg.as_bytes())?;
        written.push(path_str(&p));
    }
    let svg = chart(
        "mean absolute error",
        &[Panel {
            title: "MAE averaged over initial conditions".into(),
            series: vec![series("MAE", LEARNED, report.mae.clone())],
            log_y: false,
        }],
        1,
    );
    let p = out.join("mae.svg");
    write_atomic(&p, svg.as_bytes())?;
    written.push(path_str(&p));
    Ok(written)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let start = Instant::now();
    let model = CoLpNet::load(&a.model).with_context(|| format!("cannot load model {}", a.model.display()))?;
    let (data_cfg, _) = dataset::load_config(&a.data).with_context(|| format!("cannot read dataset manifest in {}", a.data.display()))?;
    if data_cfg.group != model.group.kind || data_cfg.num_particles != model.num_particles {
        bail!(
            "model ({}, N = {}) does not match dataset ({}, N = {})",
            model.group,
            model.num_particles,
            data_cfg.group,
            data_cfg.num_particles
        );
    }
    if a.num_initials == 0 {
        bail!("--num-initials must be at least 1");
    }
    let steps = a.steps.unwrap_or(match data_cfg.group {
        GroupKind::So3 => 1000,
        GroupKind::Se3 => 200,
    });
    if steps == 0 {
        bail!("--steps must be at least 1");
    }
    let ground = data_cfg.control_model()?;
    let integrator = data_cfg.integrator();
    let initials = evaluation_initials(model.group, model.num_particles, a.ic_box, a.seed, a.num_initials)?;
    let report = evaluate(&model, &ground, &integrator, &initials, steps)?;
    create_dir(&a.out)?;

    let n = model.group.n;
    let labels: Vec<String> = (0..model.num_particles)
        .flat_map(|k| (0..n).map(move |i| format!("mu_{}_{}", k + 1, i + 1)))
        .collect();
    let casimir_labels = colpnets::lie::casimirs(&initials[0]).labels();
    let mut outputs = write_series(&a.out, &report, &labels, &casimir_labels, data_cfg.dt)?;
    outputs.extend(write_charts(&a.out, &report, &labels, &casimir_labels, data_cfg.dt, a.plots, n)?);

    let runs: Vec<_> = report
        .runs
        .iter()
        .map(|r| {
            json!({
                "initial": r.truth.states[0].mu,
                "final_mae": r.mae.last(),
                "learned_max_casimir_relative": r.learned_diagnostics.worst_casimir_relative(),
                "truth_max_casimir_relative": r.truth_diagnostics.worst_casimir_relative(),
                "truth_max_energy_relative": r.truth_diagnostics.max_energy_relative,
                "truth_max_energy_deviation": r.truth_diagnostics.max_energy_deviation,
                "learned_max_energy_deviation": r.learned_diagnostics.max_energy_deviation,
                "learned_energy_half_ratio": colpnets::eval::energy_half_ratio(&r.learned_diagnostics.energy),
            })
        })
        .collect();
    let summary = json!({
        "group": model.group.kind.name(),
        "topology": data_cfg.topology.name(),
        "num_particles": model.num_particles,
        "chi": data_cfg.chi,
        "dt": data_cfg.dt,
        "steps": steps,
        "num_initials": a.num_initials,
        "evaluation_seed": a.seed,
        "ic_box": a.ic_box,
        "initial_conditions": format!(
            "uniform in [-{b}, {b}]^(N n) from the evaluation stream of the seed, separate from the training-data stream",
            b = a.ic_box
        ),
        "mean_mae_first_100_steps": report.mean_mae(100),
        "mean_mae_all_steps": report.mean_mae(steps),
        "final_mae": report.mae.last(),
        "learned_max_casimir_relative": report.worst_learned_casimir_relative(),
        "truth_max_casimir_relative": report.worst_truth_casimir_relative(),
        "truth_max_energy_relative": report.worst_truth_energy_relative(),
        "learned_worst_energy_half_ratio": report.worst_energy_half_ratio(),
        "runs": runs,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    let p = a.out.join("report.json");
    write_atomic(&p, text.as_bytes())?;
    outputs.push(path_str(&p));
    println!(
        "{} initials x {steps} steps: mean MAE (first 100 steps) {:.4e}, final MAE {:.4e}, learned Casimir drift {:.2e}",
        a.num_initials,
        report.mean_mae(100),
        report.mae.last().copied().unwrap_or(0.0),
        report.worst_learned_casimir_relative()
    );
    write_manifest(
        &a.out,
        RunManifest {
            command: "evaluate",
            parameters: json!({ "steps": steps, "num_initials": a.num_initials, "ic_box": a.ic_box, "plots": a.plots }),
            inputs: vec![path_str(&a.model), path_str(&a.data)],
            outputs,
            seeds: json!({ "evaluation": a.seed }),
            rng_name: RNG_NAME,
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_clock_seconds: 0.0,
        },
        start,
    )
}

pub fn cmd_selftest(a: &SelftestArgs) -> Result<()> {
    let checks = selftest::run(a.quick);
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut failed = 0;
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:<width$}  {:>7.2}s  {}", c.name, c.seconds, c.detail);
        failed += usize::from(!c.passed);
    }
    if a.quick {
        println!("(quick mode: training checks skipped)");
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

/// Cap the worker pool from `COLPNETS_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("COLPNETS_THREADS") {
        let n: usize = v.parse().with_context(|| format!("COLPNETS_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("COLPNETS_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
