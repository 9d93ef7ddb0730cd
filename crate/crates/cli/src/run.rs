//! The experiment commands, callable without going through the binary.

use std::path::Path;
use std::sync::Arc;

use lfrelay_core::{outage_closed_form, outage_monte_carlo, MonteCarloConfig, QuadratureConfig, SystemModel};
use lfrelay_rl::train::stream_rng;
use lfrelay_rl::{
    checkpoint, AgentKind, ClosedFormOutage, EnvState, GridCache, OutageFn, StepResult, TrainLog, Trainer,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, RunStatus};

const STREAM_GEOMETRY: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RunSpec {
    Validate,
    OutageMap { grid_n: usize },
    Train { agent: AgentKind, d_pair: Option<Vec<f64>> },
    Compare,
}

impl RunSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RunSpec::Validate => "validate",
            RunSpec::OutageMap { .. } => "outage-map",
            RunSpec::Train { .. } => "train",
            RunSpec::Compare => "compare",
        }
    }
}

/// z statistic of a Monte Carlo estimate against the closed form. When the
/// sample variance is zero the binomial variance implied by the closed form
/// is used instead, floored at one sample.
pub fn z_score(closed: f64, mc: f64, std_error: f64, samples: u64) -> f64 {
    let diff = mc - closed;
    if diff == 0.0 {
        return 0.0;
    }
    let n = samples as f64;
    let sigma = if std_error > 0.0 {
        std_error
    } else {
        let p = closed.clamp(0.0, 1.0);
        (p * (1.0 - p) / n).sqrt().max(1.0 / n)
    };
    diff / sigma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub geometry: usize,
    pub n1: f64,
    pub n2: f64,
    pub user: usize,
    pub d: f64,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
    pub z: f64,
}

/// Uniform UAV positions over the flight area.
pub fn random_positions(cfg: &ExperimentConfig, seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = stream_rng(seed, STREAM_GEOMETRY);
    let a = cfg.env.area;
    (0..n)
        .map(|_| {
            (
                rng.random_range(a.min[0]..=a.max[0]),
                rng.random_range(a.min[1]..=a.max[1]),
            )
        })
        .collect()
}

pub fn validation_rows(cfg: &ExperimentConfig, seed: u64) -> CliResult<Vec<ValidationRow>> {
    let sys = &cfg.system;
    let v = &cfg.validate;
    let k = sys.num_users();
    let mut rows = Vec::new();
    for (g, (x, y)) in random_positions(cfg, seed, v.geometries).into_iter().enumerate() {
        for user in 0..k {
            let budget = sys.budget_at(x, y, user)?;
            let spec = &sys.distortion[user];
            let cf = outage_closed_form(&budget, spec, sys.fading.m, &sys.quadrature)?;
            let mc_cfg = MonteCarloConfig {
                samples: v.samples,
                seed: seed.wrapping_mul(1_000_003).wrapping_add((g * k + user) as u64),
                workers: v.workers,
            };
            let mc = outage_monte_carlo(&budget, spec, sys.fading.m, &mc_cfg)?;
            rows.push(ValidationRow {
                geometry: g,
                n1: x,
                n2: y,
                user,
                d: spec.d,
                closed_form: cf.value,
                monte_carlo: mc.value,
                std_error: mc.std_error,
                z: z_score(cf.value, mc.value, mc.std_error, v.samples),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    pub n: usize,
    /// `(n1, n2, per-user outage, sum)` in row-major lattice order.
    pub cells: Vec<(f64, f64, Vec<f64>, f64)>,
    pub argmin: usize,
}

impl GridMap {
    pub fn best(&self) -> (f64, f64, f64) {
        let c = &self.cells[self.argmin];
        (c.0, c.1, c.3)
    }
}

/// Exhaustive outage evaluation on an `n x n` lattice over the flight area.
pub fn grid_search(
    model: &SystemModel,
    cfg: &ExperimentConfig,
    n: usize,
    quad: &QuadratureConfig,
) -> CliResult<GridMap> {
    if n < 2 {
        return Err(CliError::Config("grid needs at least 2 points per axis".into()));
    }
    let a = cfg.env.area;
    let mut cells = Vec::with_capacity(n * n);
    let mut argmin = 0;
    for i in 0..n {
        for j in 0..n {
            let x = a.min[0] + (a.max[0] - a.min[0]) * i as f64 / (n - 1) as f64;
            let y = a.min[1] + (a.max[1] - a.min[1]) * j as f64 / (n - 1) as f64;
            let o = model.outage_at_with(x, y, quad)?;
            let per: Vec<f64> = o.per_user.iter().map(|e| e.value).collect();
            if o.sum
                < cells
                    .get(argmin)
                    .map(|c: &(f64, f64, Vec<f64>, f64)| c.3)
                    .unwrap_or(f64::INFINITY)
            {
                argmin = cells.len();
            }
            cells.push((x, y, per, o.sum));
        }
    }
    Ok(GridMap { n, cells, argmin })
}

pub fn training_outage(cfg: &ExperimentConfig, model: &SystemModel) -> CliResult<Arc<dyn OutageFn>> {
    let f = ClosedFormOutage::new(model.clone(), cfg.experiment.training_quadrature)?;
    if cfg.experiment.outage_cache {
        log::info!("building {0}x{0} outage cache", cfg.experiment.cache_n);
        return Ok(Arc::new(GridCache::build(&f, cfg.env.area, cfg.experiment.cache_n)?));
    }
    Ok(Arc::new(f))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: AgentKind,
    pub seed: u64,
    pub d: Vec<f64>,
    pub trainer: lfrelay_rl::TrainerState,
    pub rollout: Vec<StepResult>,
    pub start: EnvState,
    pub start_outage: f64,
    /// Greedy end point and its outage sum at full quadrature accuracy.
    pub final_position: (f64, f64),
    pub final_outage: f64,
}

impl TrainOutcome {
    pub fn log(&self) -> &TrainLog {
        &self.trainer.log
    }
}

pub fn train_run(cfg: &ExperimentConfig, agent: AgentKind, d: Option<&[f64]>, seed: u64) -> CliResult<TrainOutcome> {
    let model = cfg.system_with(d)?;
    let f = training_outage(cfg, &model)?;
    let mut t = Trainer::new(agent, &cfg.sac, &cfg.ddpg, cfg.env, cfg.train.clone(), f.clone(), seed)?;
    t.run()?;
    let rollout = t.greedy_rollout()?;
    let start = cfg.train.start.unwrap_or(EnvState { n1: 0.0, n2: 0.0 });
    let last = rollout.last().expect("horizon >= 1").next_state;
    let final_outage = model.outage_at(last.n1, last.n2)?.sum;
    Ok(TrainOutcome {
        agent,
        seed,
        d: model.distortion.iter().map(|s| s.d).collect(),
        start_outage: f.outage_sum(start.n1, start.n2)?,
        trainer: t.into_state(),
        rollout,
        start,
        final_position: (last.n1, last.n2),
        final_outage,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub agent: AgentKind,
    pub d: Vec<f64>,
    pub seed: u64,
    pub final_n1: f64,
    pub final_n2: f64,
    pub final_outage: f64,
    pub grid_outage: f64,
    /// First episode whose final outage is within 10% of the best episode.
    pub episodes_to_10pct: usize,
    pub reward_var_last50: f64,
    pub rewards: Vec<f64>,
    pub episode_outages: Vec<f64>,
}

impl CompareRow {
    pub fn ratio(&self) -> f64 {
        self.final_outage / self.grid_outage
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub agent: AgentKind,
    pub d: Vec<f64>,
    pub mean_final_outage: f64,
    pub mean_episodes_to_10pct: f64,
    pub mean_reward_var_last50: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResults {
    pub grids: Vec<(Vec<f64>, (f64, f64, f64))>,
    pub rows: Vec<CompareRow>,
    pub summary: Vec<CompareSummary>,
    /// D-pairs where SAC's mean final outage exceeded DDPG's.
    pub ordering_warnings: Vec<Vec<f64>>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn tail_variance(v: &[f64], n: usize) -> f64 {
    let t = &v[v.len().saturating_sub(n)..];
    let m = mean(t);
    t.iter().map(|x| (x - m).powi(2)).sum::<f64>() / t.len() as f64
}

pub fn episodes_to_within(outages: &[f64], frac: f64) -> usize {
    let best = outages.iter().copied().fold(f64::INFINITY, f64::min);
    outages
        .iter()
        .position(|&o| o <= (1.0 + frac) * best)
        .map(|i| i + 1)
        .unwrap_or(outages.len())
}

pub fn compare(cfg: &ExperimentConfig, seeds: &[u64]) -> CliResult<CompareResults> {
    if seeds.len() < 2 {
        return Err(CliError::Config("compare needs at least two seeds".into()));
    }
    let agents = [AgentKind::Sac, AgentKind::Ddpg];
    let mut res = CompareResults {
        grids: Vec::new(),
        rows: Vec::new(),
        summary: Vec::new(),
        ordering_warnings: Vec::new(),
    };
    for d in &cfg.experiment.d_pairs {
        let model = cfg.system_with(Some(d))?;
        let grid = grid_search(&model, cfg, cfg.experiment.grid_n, &model.quadrature)?;
        let best = grid.best();
        log::info!("D = {d:?}: grid optimum {best:?}");
        res.grids.push((d.clone(), best));
        for &seed in seeds {
            for agent in agents {
                let o = train_run(cfg, agent, Some(d), seed)?;
                let rewards = o.log().rewards();
                let outs = o.log().final_outages();
                log::info!("{agent} D={d:?} seed {seed}: final outage {:.5}", o.final_outage);
                res.rows.push(CompareRow {
                    agent,
                    d: d.clone(),
                    seed,
                    final_n1: o.final_position.0,
                    final_n2: o.final_position.1,
                    final_outage: o.final_outage,
                    grid_outage: best.2,
                    episodes_to_10pct: episodes_to_within(&outs, 0.1),
                    reward_var_last50: tail_variance(&rewards, 50),
                    rewards,
                    episode_outages: outs,
                });
            }
        }
        let mut means = Vec::new();
        for agent in agents {
            let rows: Vec<&CompareRow> = res.rows.iter().filter(|r| r.agent == agent && &r.d == d).collect();
            let pick = |f: &dyn Fn(&CompareRow) -> f64| mean(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let s = CompareSummary {
                agent,
                d: d.clone(),
                mean_final_outage: pick(&|r| r.final_outage),
                mean_episodes_to_10pct: pick(&|r| r.episodes_to_10pct as f64),
                mean_reward_var_last50: pick(&|r| r.reward_var_last50),
            };
            means.push(s.mean_final_outage);
            res.summary.push(s);
        }
        if means[0] > means[1] {
            res.ordering_warnings.push(d.clone());
        }
    }
    Ok(res)
}

/// Typed result of a command, alongside the files it wrote.
#[derive(Debug, Clone)]
pub enum RunData {
    Validate(Vec<ValidationRow>),
    OutageMap(GridMap),
    Train(Box<TrainOutcome>),
    Compare(CompareResults),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<String>,
    pub violation: bool,
    pub report: Vec<String>,
    pub data: RunData,
}

fn fmt_d(d: &[f64]) -> String {
    d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("/")
}

struct Csv<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Csv<'_> {
    fn write(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

fn run_inner(spec: &RunSpec, cfg: &ExperimentConfig, seeds: &[u64], dir: &Path) -> CliResult<RunOutcome> {
    let mut out = Csv { dir, files: Vec::new() };
    let mut report = Vec::new();
    let mut violation = false;
    let data = match spec {
        RunSpec::Validate => {
            let rows = validation_rows(cfg, seeds[0])?;
            out.write(
                "validate.csv",
                &[
                    "geometry",
                    "n1",
                    "n2",
                    "user",
                    "d",
                    "closed_form",
                    "monte_carlo",
                    "std_error",
                    "z",
                ],
                rows.iter().map(|r| {
                    row![
                        r.geometry,
                        r.n1,
                        r.n2,
                        r.user + 1,
                        r.d,
                        r.closed_form,
                        r.monte_carlo,
                        r.std_error,
                        r.z
                    ]
                }),
            )?;
            report.push(format!(
                "{:>4} {:>9} {:>9} {:>4} {:>5} {:>12} {:>12} {:>10} {:>7}",
                "geom", "n1", "n2", "user", "D", "closed", "monte-carlo", "std-err", "z"
            ));
            for r in &rows {
                report.push(format!(
                    "{:>4} {:>9.1} {:>9.1} {:>4} {:>5} {:>12.6e} {:>12.6e} {:>10.3e} {:>7.2}",
                    r.geometry,
                    r.n1,
                    r.n2,
                    r.user + 1,
                    r.d,
                    r.closed_form,
                    r.monte_carlo,
                    r.std_error,
                    r.z
                ));
            }
            let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
            violation = worst > cfg.validate.z_fail;
            report.push(format!("max |z| = {worst:.3} (limit {})", cfg.validate.z_fail));
            RunData::Validate(rows)
        }
        RunSpec::OutageMap { grid_n } => {
            let g = grid_search(&cfg.system, cfg, *grid_n, &cfg.system.quadrature)?;
            let k = cfg.system.num_users();
            let mut header = vec!["n1".to_string(), "n2".to_string()];
            header.extend((1..=k).map(|u| format!("p_out_user{u}")));
            header.push("p_out_sum".into());
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            out.write(
                "outage_map.csv",
                &header,
                g.cells.iter().map(|(x, y, per, sum)| {
                    let mut r = row![x, y];
                    r.extend(per.iter().map(f64::to_string));
                    r.push(sum.to_string());
                    r
                }),
            )?;
            let (x, y, s) = g.best();
            report.push(format!("argmin cell ({x}, {y}) with outage sum {s:.6}"));
            RunData::OutageMap(g)
        }
        RunSpec::Train { agent, d_pair } => {
            let o = train_run(cfg, *agent, d_pair.as_deref(), seeds[0])?;
            write_train(&mut out, &o)?;
            let bytes = checkpoint::to_bytes(&o.trainer)?;
            let path = dir.join("checkpoint.json");
            std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            out.files.push("checkpoint.json".into());
            report.push(format!(
                "{} D={} seed {}: greedy final position ({:.1}, {:.1}), outage sum {:.6}",
                o.agent,
                fmt_d(&o.d),
                o.seed,
                o.final_position.0,
                o.final_position.1,
                o.final_outage
            ));
            RunData::Train(Box::new(o))
        }
        RunSpec::Compare => {
            let res = compare(cfg, seeds)?;
            write_compare(&mut out, &res)?;
            for s in &res.summary {
                report.push(format!(
                    "{:<5} D={:<8} mean final outage {:.5}  episodes to 10% {:>6.1}  reward var (last 50) {:.3e}",
                    s.agent.to_string(),
                    fmt_d(&s.d),
                    s.mean_final_outage,
                    s.mean_episodes_to_10pct,
                    s.mean_reward_var_last50
                ));
            }
            for d in &res.ordering_warnings {
                report.push(format!("WARNING: D={}: SAC mean final outage exceeds DDPG", fmt_d(d)));
            }
            RunData::Compare(res)
        }
    };
    Ok(RunOutcome {
        files: out.files,
        violation,
        report,
        data,
    })
}

fn write_train(out: &mut Csv, o: &TrainOutcome) -> CliResult<()> {
    let log = o.log();
    out.write(
        "rewards.csv",
        &["episode", "reward"],
        log.episodes.iter().enumerate().map(|(i, e)| row![i + 1, e.reward]),
    )?;
    out.write(
        "outage.csv",
        &["episode", "final_outage_sum", "final_n1", "final_n2"],
        log.episodes
            .iter()
            .enumerate()
            .map(|(i, e)| row![i + 1, e.final_outage, e.final_position[0], e.final_position[1]]),
    )?;
    out.write(
        "losses.csv",
        &["episode", "updates", "critic", "actor", "temperature", "alpha"],
        log.episodes.iter().enumerate().map(|(i, e)| {
            row![
                i + 1,
                e.updates,
                e.losses.critic,
                e.losses.actor,
                e.losses.temperature,
                e.losses.alpha
            ]
        }),
    )?;
    let first = std::iter::once(row![0, o.start.n1, o.start.n2, o.start_outage]);
    out.write(
        "trajectory.csv",
        &["step", "n1", "n2", "outage_sum"],
        first.chain(
            o.rollout
                .iter()
                .enumerate()
                .map(|(i, r)| row![i + 1, r.next_state.n1, r.next_state.n2, r.outage_sum]),
        ),
    )
}

fn write_compare(out: &mut Csv, res: &CompareResults) -> CliResult<()> {
    out.write(
        "compare.csv",
        &[
            "agent",
            "d",
            "seed",
            "final_n1",
            "final_n2",
            "final_outage_sum",
            "grid_outage_sum",
            "ratio_to_grid",
            "episodes_to_10pct",
            "reward_var_last50",
        ],
        res.rows.iter().map(|r| {
            row![
                r.agent,
                fmt_d(&r.d),
                r.seed,
                r.final_n1,
                r.final_n2,
                r.final_outage,
                r.grid_outage,
                r.ratio(),
                r.episodes_to_10pct,
                r.reward_var_last50
            ]
        }),
    )?;
    out.write(
        "compare_curves.csv",
        &["agent", "d", "seed", "episode", "reward", "final_outage_sum"],
        res.rows.iter().flat_map(|r| {
            r.rewards
                .iter()
                .zip(&r.episode_outages)
                .enumerate()
                .map(move |(i, (rw, o))| row![r.agent, fmt_d(&r.d), r.seed, i + 1, rw, o])
        }),
    )?;
    out.write(
        "summary.csv",
        &[
            "agent",
            "d",
            "mean_final_outage_sum",
            "mean_episodes_to_10pct",
            "mean_reward_var_last50",
            "sac_worse_than_ddpg",
        ],
        res.summary.iter().map(|s| {
            let flag = res.ordering_warnings.contains(&s.d);
            row![
                s.agent,
                fmt_d(&s.d),
                s.mean_final_outage,
                s.mean_episodes_to_10pct,
                s.mean_reward_var_last50,
                flag
            ]
        }),
    )?;
    out.write(
        "grid_optimum.csv",
        &["d", "n1", "n2", "outage_sum"],
        res.grids.iter().map(|(d, (x, y, s))| row![fmt_d(d), x, y, s]),
    )
}

/// Run `spec` into `dir`, bracketing it with a manifest.
pub fn execute(spec: &RunSpec, cfg: &ExperimentConfig, seeds: &[u64], dir: &Path) -> CliResult<RunOutcome> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(CliError::Config("no seeds given".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut manifest = RunManifest::begin(spec.clone(), cfg, seeds.to_vec());
    manifest.write(dir)?;
    match run_inner(spec, cfg, seeds, dir) {
        Ok(outcome) => {
            manifest.finish(dir, &outcome.files, RunStatus::Complete)?;
            manifest.write(dir)?;
            Ok(outcome)
        }
        Err(e) => {
            manifest.finish(dir, &[], RunStatus::Failed)?;
            manifest.write(dir)?;
            Err(e)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerunCheck {
    pub file: String,
    pub expected: String,
    pub actual: Option<String>,
}

impl RerunCheck {
    pub fn matches(&self) -> bool {
        self.actual.as_deref() == Some(self.expected.as_str())
    }
}

/// Re-execute the run a manifest describes into `dir` and compare every
/// recorded output digest.
pub fn rerun(manifest: &RunManifest, dir: &Path) -> CliResult<(RunOutcome, Vec<RerunCheck>)> {
    if manifest.status != RunStatus::Complete {
        return Err(CliError::Manifest("only completed runs can be re-executed".into()));
    }
    if manifest.code_version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest was written by version {}, this is {}",
            manifest.code_version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let outcome = execute(&manifest.run, &manifest.config, &manifest.seeds, dir)?;
    let checks = manifest
        .outputs
        .iter()
        .map(|o| RerunCheck {
            file: o.file.clone(),
            expected: o.sha256.clone(),
            actual: crate::manifest::file_digest(&dir.join(&o.file)).ok().map(|d| d.sha256),
        })
        .collect();
    Ok((outcome, checks))
}
