//! Configuration-driven experiments.
//!
//! A run builds options for each seed (successor options, eigen-options, the
//! incremental variant, or none for flat Q-learning), then trains a fresh SMDP
//! agent on every task of the task set, evaluating the frozen agent at evenly
//! spaced step counts. Results land under `<output_dir>/<name>/`:
//!
//! - `curve.csv`: `step,mean_return,stderr_over_seeds,mean_undiscounted_return,stderr_undiscounted`
//! - `seed-<s>.csv`: the per-seed curve
//! - `sr-seed-<s>.csv`, `subgoals-seed-<s>.txt`, `options-seed-<s>.txt`
//! - `heatmap-seed-<s>.pgm`, `counts-seed-<s>.txt`, `subgoals-seed-<s>.pgm`
//! - `meta.txt` (method and map) and `runs.txt` (status and wall time per seed)
//!
//! Every random draw comes from named substreams of the seed, so CSV outputs
//! are byte-identical across reruns of the same config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng as _;
use serde::Deserialize;

use crate::cluster::discover_subgoals;
use crate::eigen::{spectrum, train_eigen_options, LaplacianKind};
use crate::error::{Error, Result};
use crate::grid::{GridMap, Start, TaskSpec};
use crate::heatmap::{render_heatmap, render_subgoals, write_counts};
use crate::incremental::{run_incremental, IncrementalConfig, IncrementalResult};
use crate::options::{train_option, write_options, LearnedOption, OptionParams, PseudoReward};
use crate::rng::{Rng, SeedTree};
use crate::smdp::{run_episode, ActSettings, Env, Episode, ExplorationScheme, SmdpAgent};
use crate::sr::{learn_sr, EpisodeSchedule, SrLearnConfig, SrMatrix, StepSize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Q,
    Sr,
    SrNu,
    SrAe,
    Eigen,
    EigenNu,
    Incremental,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Q => "q",
            Method::Sr => "sr",
            Method::SrNu => "sr-nu",
            Method::SrAe => "sr-ae",
            Method::Eigen => "eigen",
            Method::EigenNu => "eigen-nu",
            Method::Incremental => "incremental",
        }
    }

    pub fn uses_options(self) -> bool {
        self != Method::Q
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
pub enum TaskProtocol {
    /// Random distinct start/goal pairs.
    #[serde(rename = "random-500")]
    Random,
    /// Bottom-left start, top-right goal, finite horizon.
    #[serde(rename = "fixed-corner")]
    FixedCorner,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianChoice {
    #[default]
    Combinatorial,
    Normalized,
}

/// Option count and NU/AE ratio for the shipped maps, by file stem.
pub fn map_defaults(stem: &str) -> (usize, f64) {
    match stem {
        "grid1" => (4, 15.0),
        "grid2" => (5, 15.0),
        "grid3" | "grid4" => (10, 50.0),
        _ => (4, 15.0),
    }
}

macro_rules! defaults {
    ($($name:ident: $t:ty = $v:expr;)*) => {
        $(fn $name() -> $t { $v })*
    };
}

defaults! {
    d_steps: u64 = 50_000;
    d_eval_points: usize = 100;
    d_gamma: f64 = 0.99;
    d_alpha: f64 = 0.1;
    d_epsilon: f64 = 0.1;
    d_eval_epsilon: f64 = 0.05;
    d_eval_max_steps: usize = 500;
    d_sr_alpha: f64 = 0.1;
    d_sr_decay_scale: Option<f64> = Some(300.0);
    d_option_budget: u64 = 200_000;
    d_kmeans_iters: usize = 100;
    d_n_iters: usize = 4;
    d_pct_min: f64 = 5.0;
    d_pct_max: f64 = 40.0;
    d_explore_budget: u64 = 2_000_000;
    d_ratio: f64 = 500.0;
    d_output_dir: PathBuf = PathBuf::from("runs");
    d_true: bool = true;
}

/// Experiment configuration, read from a flat TOML file. Unknown keys are errors.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output subdirectory; defaults to the config file stem.
    #[serde(default)]
    pub name: Option<String>,
    pub map: PathBuf,
    pub method: Method,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub e: Option<f64>,
    pub seeds: Vec<u64>,
    /// Training steps per task.
    #[serde(default = "d_steps")]
    pub steps: u64,
    #[serde(default = "d_eval_points")]
    pub eval_points: usize,
    pub tasks: TaskProtocol,
    /// Defaults to 500 for `random-500` and 1 for `fixed-corner`.
    #[serde(default)]
    pub n_tasks: Option<usize>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_epsilon")]
    pub epsilon: f64,
    #[serde(default = "d_eval_epsilon")]
    pub eval_epsilon: f64,
    #[serde(default = "d_eval_max_steps")]
    pub eval_max_steps: usize,
    /// SR learning steps; defaults to `50000 · |S|`.
    #[serde(default)]
    pub sr_budget: Option<u64>,
    #[serde(default = "d_sr_alpha")]
    pub sr_alpha: f64,
    /// Per-row `1/√n` decay scale; absent means constant step size.
    #[serde(default = "d_sr_decay_scale")]
    pub sr_decay_scale: Option<f64>,
    #[serde(default = "d_option_budget")]
    pub option_budget: u64,
    #[serde(default = "d_alpha")]
    pub option_alpha: f64,
    #[serde(default = "d_epsilon")]
    pub option_epsilon: f64,
    #[serde(default = "d_gamma")]
    pub option_gamma: f64,
    #[serde(default = "d_kmeans_iters")]
    pub kmeans_iters: usize,
    #[serde(default)]
    pub laplacian: LaplacianChoice,
    #[serde(default = "d_n_iters")]
    pub n_iters: usize,
    #[serde(default)]
    pub k_intermediate: Option<usize>,
    #[serde(default = "d_pct_min")]
    pub pct_min: f64,
    #[serde(default = "d_pct_max")]
    pub pct_max: f64,
    #[serde(default = "d_explore_budget")]
    pub explore_budget: u64,
    #[serde(default = "d_ratio")]
    pub option_sampling_ratio: f64,
    #[serde(default = "d_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "d_true")]
    pub heatmap: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config; relative `map` and `output_dir` paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if cfg.map.is_relative() {
            cfg.map = base.join(&cfg.map);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    /// A config with every default filled in.
    pub fn new(map: impl Into<PathBuf>, method: Method, seeds: Vec<u64>) -> ExperimentConfig {
        let text = format!(
            "map = {:?}\nmethod = {:?}\nseeds = {:?}\ntasks = \"random-500\"\n",
            map.into().to_string_lossy(),
            method.name(),
            seeds
        );
        toml::from_str(&text).expect("default config parses")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.eval_points == 0 || self.eval_points as u64 > self.steps {
            return bad(format!("eval_points must be in 1..={}", self.steps));
        }
        for (name, g) in [("gamma", self.gamma), ("option_gamma", self.option_gamma)] {
            if !(g > 0.0 && g < 1.0) {
                return bad(format!("{name} must be in (0,1), got {g}"));
            }
        }
        for (name, p) in [
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
            ("eval_epsilon", self.eval_epsilon),
            ("sr_alpha", self.sr_alpha),
            ("option_alpha", self.option_alpha),
            ("option_epsilon", self.option_epsilon),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0,1], got {p}"));
            }
        }
        if self.k == Some(0) || self.k_intermediate == Some(0) {
            return bad("option counts must be positive".into());
        }
        if self.e.is_some_and(|e| e.is_nan() || e <= 0.0) {
            return bad("e must be positive".into());
        }
        if self.n_tasks == Some(0) {
            return bad("n_tasks must be positive".into());
        }
        if self.horizon == Some(0) {
            return bad("horizon must be positive".into());
        }
        if self.sr_decay_scale.is_some_and(|s| s.is_nan() || s <= 0.0) {
            return bad("sr_decay_scale must be positive".into());
        }
        if self.method == Method::Incremental {
            self.incremental_config(4, 15.0).validate()?;
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!(
                "{}-{}",
                self.map.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                self.method.name()
            )
        })
    }

    fn map_stem(&self) -> String {
        self.map
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    /// `(k, e)` after applying per-map defaults.
    pub fn k_and_e(&self) -> (usize, f64) {
        let (k, e) = map_defaults(&self.map_stem());
        (self.k.unwrap_or(k), self.e.unwrap_or(e))
    }

    pub fn sr_step(&self) -> StepSize {
        match self.sr_decay_scale {
            Some(scale) => StepSize::InvSqrt {
                initial: self.sr_alpha,
                scale,
            },
            None => StepSize::Constant(self.sr_alpha),
        }
    }

    pub fn option_params(&self) -> OptionParams {
        OptionParams {
            alpha: self.option_alpha,
            epsilon: self.option_epsilon,
            gamma: self.option_gamma,
            budget: self.option_budget,
            ..OptionParams::default()
        }
    }

    fn incremental_config(&self, k: usize, _e: f64) -> IncrementalConfig {
        IncrementalConfig {
            n_iters: self.n_iters,
            k_final: k,
            k_intermediate: self.k_intermediate.unwrap_or(k),
            pct_min: self.pct_min,
            pct_max: self.pct_max,
            explore_budget: self.explore_budget,
            option_sampling_ratio: self.option_sampling_ratio,
            sr_step: self.sr_step(),
            gamma: self.gamma,
            option_params: self.option_params(),
            kmeans_iters: self.kmeans_iters,
        }
    }

    pub fn horizon_or_default(&self) -> Option<usize> {
        match (self.tasks, self.horizon) {
            (_, Some(h)) => Some(h),
            (TaskProtocol::FixedCorner, None) => Some(100),
            (TaskProtocol::Random, None) => None,
        }
    }
}

/// `n` tasks with uniformly random distinct start and goal states.
pub fn generate_tasks(map: &GridMap, n: usize, gamma: f64, rng: &mut Rng) -> Result<Vec<TaskSpec>> {
    let states = map.num_states();
    if states < 2 {
        return Err(Error::TooFewStates {
            need: 2,
            found: states,
        });
    }
    Ok((0..n)
        .map(|_| {
            let start = rng.random_range(0..states);
            let mut goal = rng.random_range(0..states - 1);
            if goal >= start {
                goal += 1;
            }
            TaskSpec {
                gamma,
                ..TaskSpec::new(start, goal)
            }
        })
        .collect())
}

/// The task set for a config: random pairs, or the single corner-to-corner task.
pub fn tasks_for(cfg: &ExperimentConfig, map: &GridMap, rng: &mut Rng) -> Result<Vec<TaskSpec>> {
    let horizon = cfg.horizon_or_default();
    match cfg.tasks {
        TaskProtocol::Random => {
            let mut tasks = generate_tasks(map, cfg.n_tasks.unwrap_or(500), cfg.gamma, rng)?;
            for t in &mut tasks {
                t.horizon = horizon;
            }
            Ok(tasks)
        }
        TaskProtocol::FixedCorner => {
            let task = TaskSpec {
                gamma: cfg.gamma,
                horizon,
                ..TaskSpec::new(map.bottom_left_state(), map.top_right_state())
            };
            Ok(vec![task; cfg.n_tasks.unwrap_or(1)])
        }
    }
}

/// Options and exploration scheme prepared for one seed.
#[derive(Clone, Debug)]
pub struct PreparedOptions {
    pub options: Vec<LearnedOption>,
    pub scheme: ExplorationScheme,
    pub sr: Option<SrMatrix>,
    /// Landmarks for SR methods, termination states for eigen-options.
    pub subgoals: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    /// Environment steps spent before task training (SR and option learning).
    pub pretraining_steps: u64,
    pub incremental: Option<IncrementalResult>,
}

pub fn prepare_options(cfg: &ExperimentConfig, map: &GridMap, seeds: &SeedTree) -> Result<PreparedOptions> {
    let (k, e) = cfg.k_and_e();
    let params = cfg.option_params();
    let none = PreparedOptions {
        options: Vec::new(),
        scheme: ExplorationScheme::uniform(),
        sr: None,
        subgoals: Vec::new(),
        cluster_sizes: Vec::new(),
        pretraining_steps: 0,
        incremental: None,
    };
    match cfg.method {
        Method::Q => Ok(none),
        Method::Sr | Method::SrNu | Method::SrAe => {
            let budget = cfg.sr_budget.unwrap_or(50_000 * map.num_states() as u64);
            let sr_cfg = SrLearnConfig {
                gamma: cfg.gamma,
                budget,
                step_size: cfg.sr_step(),
                schedule: EpisodeSchedule::for_map(map),
            };
            let sr = learn_sr(map, &sr_cfg, &mut seeds.stream("sr"));
            let reached = sr.reached_states();
            let (_, goals) = discover_subgoals(&sr, &reached, k, &mut seeds.stream("cluster"), cfg.kmeans_iters)?;
            let options: Vec<LearnedOption> = goals
                .goals
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let pr = PseudoReward::from_sr(&sr, g.landmark);
                    train_option(map, i, &pr, &params, &mut seeds.indexed("option", i as u64))
                })
                .collect();
            let sizes = goals.cluster_sizes();
            let scheme = match cfg.method {
                Method::Sr => ExplorationScheme::uniform(),
                Method::SrNu => ExplorationScheme::non_uniform(e),
                _ => ExplorationScheme::adaptive(e, sizes.clone()),
            };
            Ok(PreparedOptions {
                pretraining_steps: budget + params.budget * options.len() as u64,
                options,
                scheme,
                sr: Some(sr),
                subgoals: goals.landmarks(),
                cluster_sizes: sizes,
                incremental: None,
            })
        }
        Method::Eigen | Method::EigenNu => {
            let kind = match cfg.laplacian {
                LaplacianChoice::Combinatorial => LaplacianKind::Combinatorial,
                LaplacianChoice::Normalized => LaplacianKind::Normalized,
            };
            let sp = spectrum(map, kind)?;
            let options = train_eigen_options(map, &sp, k, &params, seeds)?;
            let mut subgoals: Vec<usize> = options.iter().flat_map(|o| o.termination_states()).collect();
            subgoals.sort_unstable();
            subgoals.dedup();
            Ok(PreparedOptions {
                pretraining_steps: params.budget * options.len() as u64,
                scheme: if cfg.method == Method::Eigen {
                    ExplorationScheme::uniform()
                } else {
                    ExplorationScheme::non_uniform(e)
                },
                options,
                sr: None,
                subgoals,
                cluster_sizes: Vec::new(),
                incremental: None,
            })
        }
        Method::Incremental => {
            let task = TaskSpec {
                gamma: cfg.gamma,
                horizon: Some(cfg.horizon_or_default().unwrap_or(100)),
                ..TaskSpec::new(map.bottom_left_state(), map.top_right_state())
            };
            let inc = run_incremental(map, &task, &cfg.incremental_config(k, e), seeds)?;
            let sizes = inc.subgoals.cluster_sizes();
            Ok(PreparedOptions {
                options: inc.options.clone(),
                scheme: ExplorationScheme::adaptive(e, sizes.clone()),
                sr: Some(inc.sr.clone()),
                subgoals: inc.subgoals.landmarks(),
                cluster_sizes: sizes,
                pretraining_steps: inc.total_steps(),
                incremental: Some(inc),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub mean_return: f64,
    pub mean_undiscounted_return: f64,
    pub mean_eval_steps: f64,
}

/// Training settings shared by every task of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSettings {
    pub steps: u64,
    pub eval_points: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub eval_epsilon: f64,
    pub eval_max_steps: usize,
}

impl From<&ExperimentConfig> for TrainSettings {
    fn from(cfg: &ExperimentConfig) -> Self {
        TrainSettings {
            steps: cfg.steps,
            eval_points: cfg.eval_points,
            alpha: cfg.alpha,
            epsilon: cfg.epsilon,
            eval_epsilon: cfg.eval_epsilon,
            eval_max_steps: cfg.eval_max_steps,
        }
    }
}

impl TrainSettings {
    pub fn eval_steps(&self) -> Vec<u64> {
        (0..self.eval_points as u64)
            .map(|i| i * self.steps / self.eval_points as u64)
            .collect()
    }
}

/// Curve of one task: evaluation results at each evaluation point.
///
/// Evaluation happens at the first decision boundary at or after each point,
/// with a frozen copy of the exploration state and a separate random stream.
pub fn train_task(
    map: &GridMap,
    task: &TaskSpec,
    prepared: &PreparedOptions,
    settings: &TrainSettings,
    seeds: &SeedTree,
    mut visits: Option<&mut [u64]>,
) -> Vec<CurvePoint> {
    let env = Env {
        map,
        task,
        options: &prepared.options,
    };
    let mut agent = SmdpAgent::new(
        map.num_states(),
        prepared.options.len(),
        settings.alpha,
        task.gamma,
        settings.epsilon,
    );
    let mut scheme = prepared.scheme.clone();
    let mut rng = seeds.stream("agent");
    let mut eval_rng = seeds.stream("eval");
    let train = ActSettings {
        learn: true,
        epsilon: settings.epsilon,
    };
    let eval = ActSettings {
        learn: false,
        epsilon: settings.eval_epsilon,
    };
    let mut ep = Episode::new(&env, &mut rng);
    let mut trained = 0u64;
    let mut curve = Vec::with_capacity(settings.eval_points);
    let mut run = |target: u64, agent: &mut SmdpAgent, scheme: &mut ExplorationScheme, visits: Option<&mut [u64]>| {
        let mut visits = visits;
        while trained < target {
            if ep.is_over(task) {
                ep = Episode::new(&env, &mut rng);
            }
            let t = ep.advance(&env, agent, scheme, &mut rng, train, usize::MAX, visits.as_deref_mut());
            trained += t.steps as u64;
        }
    };
    for point in settings.eval_steps() {
        run(point, &mut agent, &mut scheme, visits.as_deref_mut());
        let mut frozen = scheme.clone();
        let out = run_episode(&env, &mut agent, &mut frozen, &mut eval_rng, eval, settings.eval_max_steps, None);
        curve.push(CurvePoint {
            step: point,
            mean_return: out.discounted_return,
            mean_undiscounted_return: out.undiscounted_return,
            mean_eval_steps: out.steps as f64,
        });
    }
    run(settings.steps, &mut agent, &mut scheme, visits);
    curve
}

/// Mean curve over a task set, plus summed training visitation counts.
pub fn train_tasks(
    map: &GridMap,
    tasks: &[TaskSpec],
    prepared: &PreparedOptions,
    settings: &TrainSettings,
    seeds: &SeedTree,
) -> (Vec<CurvePoint>, Vec<u64>) {
    let mut visits = vec![0u64; map.num_states()];
    let mut sum: Vec<CurvePoint> = settings
        .eval_steps()
        .into_iter()
        .map(|step| CurvePoint {
            step,
            ..CurvePoint::default()
        })
        .collect();
    for (j, task) in tasks.iter().enumerate() {
        let curve = train_task(map, task, prepared, settings, &seeds.child("task", j as u64), Some(&mut visits));
        for (acc, p) in sum.iter_mut().zip(curve) {
            acc.mean_return += p.mean_return;
            acc.mean_undiscounted_return += p.mean_undiscounted_return;
            acc.mean_eval_steps += p.mean_eval_steps;
        }
    }
    let n = tasks.len().max(1) as f64;
    for p in &mut sum {
        p.mean_return /= n;
        p.mean_undiscounted_return /= n;
        p.mean_eval_steps /= n;
    }
    (sum, visits)
}

/// Everything one seed produced.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub prepared: PreparedOptions,
    pub curve: Vec<CurvePoint>,
    pub visits: Vec<u64>,
}

pub fn run_seed(cfg: &ExperimentConfig, map: &GridMap, seed: u64) -> Result<SeedRun> {
    let seeds = SeedTree::new(seed);
    let prepared = prepare_options(cfg, map, &seeds)?;
    let tasks = tasks_for(cfg, map, &mut seeds.stream("tasks"))?;
    let (curve, visits) = train_tasks(map, &tasks, &prepared, &TrainSettings::from(cfg), &seeds);
    Ok(SeedRun {
        seed,
        prepared,
        curve,
        visits,
    })
}

/// Area under a curve, as the mean evaluation return over all points.
pub fn auc(curve: &[CurvePoint]) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    curve.iter().map(|p| p.mean_return).sum::<f64>() / curve.len() as f64
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub seed: u64,
    pub method: Method,
    pub curve: Vec<CurvePoint>,
    pub pretraining_steps: u64,
    pub wall_time: Duration,
    pub artifacts: Vec<PathBuf>,
    /// Set when this seed failed; the other seeds still ran.
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub records: Vec<RunRecord>,
}

impl ExperimentOutput {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("step,mean_return,mean_undiscounted_return,mean_eval_steps\n");
    for p in curve {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.3}",
            p.step, p.mean_return, p.mean_undiscounted_return, p.mean_eval_steps
        );
    }
    out
}

/// Mean curve across seeds with standard errors.
pub fn aggregate_csv(curves: &[&[CurvePoint]]) -> String {
    let mut out = String::from("step,mean_return,stderr_over_seeds,mean_undiscounted_return,stderr_undiscounted\n");
    let Some(first) = curves.first() else {
        return out;
    };
    for (i, p) in first.iter().enumerate() {
        let disc: Vec<f64> = curves.iter().map(|c| c[i].mean_return).collect();
        let und: Vec<f64> = curves.iter().map(|c| c[i].mean_undiscounted_return).collect();
        let (m, se) = mean_stderr(&disc);
        let (mu, seu) = mean_stderr(&und);
        let _ = writeln!(out, "{},{:.6},{:.6},{:.6},{:.6}", p.step, m, se, mu, seu);
    }
    out
}

fn write_seed_artifacts(dir: &Path, map: &GridMap, run: &SeedRun, heatmap: bool) -> Result<Vec<PathBuf>> {
    let s = run.seed;
    let mut files = Vec::new();
    let mut put = |name: String| {
        let p = dir.join(name);
        files.push(p.clone());
        p
    };
    std::fs::write(put(format!("seed-{s}.csv")), curve_csv(&run.curve))?;
    if let Some(sr) = &run.prepared.sr {
        sr.write_csv(put(format!("sr-seed-{s}.csv")))?;
    }
    if !run.prepared.options.is_empty() {
        write_options(put(format!("options-seed-{s}.txt")), &run.prepared.options)?;
        let mut text = String::from("option,subgoal,cluster_size\n");
        for (i, o) in run.prepared.options.iter().enumerate() {
            let size = run.prepared.cluster_sizes.get(i).copied().unwrap_or(0);
            let _ = writeln!(text, "{i},{},{size}", o.goal);
        }
        std::fs::write(put(format!("subgoals-seed-{s}.txt")), text)?;
        render_subgoals(&run.prepared.subgoals, map).save(put(format!("subgoals-seed-{s}.pgm")))?;
    }
    if let Some(inc) = &run.prepared.incremental {
        let d = put(format!("incremental-seed-{s}"));
        inc.write_snapshots(&d, map)?;
    }
    if heatmap {
        write_counts(put(format!("counts-seed-{s}.txt")), &run.visits)?;
        render_heatmap(&run.visits, map)?.save(put(format!("heatmap-seed-{s}.pgm")))?;
    }
    Ok(files)
}

/// Runs every seed of `cfg` and writes all outputs under `output_dir/name`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let map = GridMap::load(&cfg.map)?;
    let dir = cfg.output_dir.join(cfg.name());
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join("meta.txt"),
        format!(
            "method={}\nmap={}\nstates={}\n",
            cfg.method.name(),
            cfg.map.display(),
            map.num_states()
        ),
    )?;

    let mut records = Vec::new();
    let mut curves: Vec<Vec<CurvePoint>> = Vec::new();
    for &seed in &cfg.seeds {
        let t0 = Instant::now();
        let result = run_seed(cfg, &map, seed).and_then(|run| {
            let files = write_seed_artifacts(&dir, &map, &run, cfg.heatmap)?;
            Ok((run, files))
        });
        let wall_time = t0.elapsed();
        match result {
            Ok((run, files)) => {
                records.push(RunRecord {
                    seed,
                    method: cfg.method,
                    curve: run.curve.clone(),
                    pretraining_steps: run.prepared.pretraining_steps,
                    wall_time,
                    artifacts: files,
                    error: None,
                });
                curves.push(run.curve);
            }
            Err(e) => records.push(RunRecord {
                seed,
                method: cfg.method,
                curve: Vec::new(),
                pretraining_steps: 0,
                wall_time,
                artifacts: Vec::new(),
                error: Some(e.to_string()),
            }),
        }
    }
    let refs: Vec<&[CurvePoint]> = curves.iter().map(|c| c.as_slice()).collect();
    std::fs::write(dir.join("curve.csv"), aggregate_csv(&refs))?;

    let mut log = String::from("seed,status,pretraining_steps,wall_seconds\n");
    for r in &records {
        let status = r.error.as_deref().unwrap_or("ok").replace(',', ";");
        let _ = writeln!(
            log,
            "{},{},{},{:.3}",
            r.seed,
            status,
            r.pretraining_steps,
            r.wall_time.as_secs_f64()
        );
    }
    std::fs::write(dir.join("runs.txt"), log)?;
    Ok(ExperimentOutput { dir, records })
}

/// One row of a `compare` table.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub name: String,
    pub method: String,
    pub auc: f64,
    pub final_return: f64,
    pub initial_return: f64,
}

fn read_curve_means(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::format(path, format!("bad row {l:?}")))
        })
        .collect()
}

/// Summarizes every run directory (one holding `curve.csv`) under `root`, sorted by AUC.
pub fn compare(root: impl AsRef<Path>) -> Result<Vec<Summary>> {
    let root = root.as_ref();
    let mut dirs = vec![root.to_path_buf()];
    for entry in std::fs::read_dir(root)? {
        let p = entry?.path();
        if p.is_dir() {
            dirs.push(p);
        }
    }
    dirs.sort();
    let mut rows = Vec::new();
    for d in dirs {
        let curve = d.join("curve.csv");
        if !curve.exists() {
            continue;
        }
        let means = read_curve_means(&curve)?;
        let method = std::fs::read_to_string(d.join("meta.txt"))
            .ok()
            .and_then(|t| {
                t.lines()
                    .find_map(|l| l.strip_prefix("method=").map(str::to_string))
            })
            .unwrap_or_else(|| "?".into());
        let n = means.len().max(1) as f64;
        rows.push(Summary {
            name: d
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            method,
            auc: means.iter().sum::<f64>() / n,
            final_return: means.last().copied().unwrap_or(0.0),
            initial_return: means.first().copied().unwrap_or(0.0),
        });
    }
    rows.sort_by(|a, b| b.auc.total_cmp(&a.auc).then_with(|| a.name.cmp(&b.name)));
    Ok(rows)
}

/// Whether a task's start is fixed (used by the CLI's `tasks` listing).
pub fn task_start(task: &TaskSpec) -> Option<usize> {
    match task.start {
        Start::Fixed(s) => Some(s),
        Start::Uniform => None,
    }
}
