//! Incremental successor options for finite-horizon exploration.
//!
//! Each iteration grows the SR with episodes that mix uniform primitives and
//! the current intermediate options (the SR only learns from primitive
//! steps), picks candidate sub-goals whose SR L1 norm falls between two
//! percentiles, clusters them, and replaces the option set with options to the
//! new landmarks. A final sub-goal set and option set are then built from the
//! finished SR over every reached state.

use std::io::Write;
use std::path::Path;

use rand::Rng as _;

use crate::cluster::{discover_subgoals, filter_candidates, ClusterResult, SubGoalSet};
use crate::error::{Error, Result};
use crate::grid::{Action, GridMap, Start, TaskSpec, NUM_ACTIONS};
use crate::heatmap::{render_subgoals, render_values};
use crate::options::{train_option, LearnedOption, OptionParams, PseudoReward, Restart};
use crate::rng::{Rng, SeedTree};
use crate::sr::{continue_sr, EpisodeSchedule, SrLearnConfig, SrMatrix, StepSize};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncrementalConfig {
    pub n_iters: usize,
    pub k_final: usize,
    pub k_intermediate: usize,
    pub pct_min: f64,
    pub pct_max: f64,
    /// Environment steps of SR collection per iteration.
    pub explore_budget: u64,
    /// Primitive draws per option draw during SR collection.
    pub option_sampling_ratio: f64,
    pub sr_step: StepSize,
    pub gamma: f64,
    /// Parameters for intermediate and final options; the restart rule is
    /// replaced by the task's start state and horizon.
    pub option_params: OptionParams,
    pub kmeans_iters: usize,
}

impl Default for IncrementalConfig {
    fn default() -> Self {
        IncrementalConfig {
            n_iters: 4,
            k_final: 10,
            k_intermediate: 10,
            pct_min: 5.0,
            pct_max: 40.0,
            explore_budget: 2_000_000,
            option_sampling_ratio: 500.0,
            sr_step: StepSize::default(),
            gamma: 0.99,
            option_params: OptionParams::default(),
            kmeans_iters: 100,
        }
    }
}

impl IncrementalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 {
            return Err(Error::Config("n_iters must be at least 1".into()));
        }
        if self.k_final == 0 || self.k_intermediate == 0 {
            return Err(Error::Config("option counts must be positive".into()));
        }
        if !(0.0..=100.0).contains(&self.pct_min)
            || !(0.0..=100.0).contains(&self.pct_max)
            || self.pct_min >= self.pct_max
        {
            return Err(Error::Config("need 0 <= pct_min < pct_max <= 100".into()));
        }
        if self.option_sampling_ratio.is_nan() || self.option_sampling_ratio <= 0.0 {
            return Err(Error::Config("option_sampling_ratio must be positive".into()));
        }
        Ok(())
    }

    /// Environment steps consumed by the whole run, option training included
    /// (the final option build is excluded, as it is for plain SR options).
    pub fn total_budget(&self) -> u64 {
        self.n_iters as u64
            * (self.explore_budget + self.k_intermediate as u64 * self.option_params.budget)
    }
}

/// Instrumentation for one call of [`update_sr_with_options`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SrUpdateStats {
    pub primitive_steps: u64,
    pub option_steps: u64,
    pub options_invoked: u64,
    pub episodes: u64,
}

/// Finite-horizon SR collection with options assisting exploration.
///
/// At each decision an option is picked with probability `1 / (1 + ratio)`,
/// otherwise a uniform primitive. Primitive transitions update the SR; steps
/// inside options do not, but count against both the horizon and `budget`.
#[allow(clippy::too_many_arguments)]
pub fn update_sr_with_options(
    sr: &mut SrMatrix,
    map: &GridMap,
    options: &[LearnedOption],
    budget: u64,
    ratio: f64,
    start: usize,
    horizon: usize,
    step: &StepSize,
    rng: &mut Rng,
) -> SrUpdateStats {
    let mut stats = SrUpdateStats::default();
    let p_option = if options.is_empty() { 0.0 } else { 1.0 / (1.0 + ratio) };
    let mut used = 0u64;
    while used < budget {
        stats.episodes += 1;
        let mut s = start;
        let mut t = 0usize;
        while t < horizon && used < budget {
            if p_option > 0.0 && rng.random::<f64>() < p_option {
                let opt = &options[rng.random_range(0..options.len())];
                stats.options_invoked += 1;
                let mut k = 0;
                while !opt.terminates(s) && k < opt.max_duration && t < horizon && used < budget {
                    s = map.next_state(s, opt.greedy_action(s));
                    k += 1;
                    t += 1;
                    used += 1;
                    stats.option_steps += 1;
                }
                continue;
            }
            let a = Action::ALL[rng.random_range(0..NUM_ACTIONS)];
            let next = map.next_state(s, a);
            sr.scheduled_update(s, next, step);
            stats.primitive_steps += 1;
            t += 1;
            used += 1;
            s = next;
        }
    }
    stats
}

/// State of the run after one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationSnapshot {
    pub iteration: usize,
    pub l1_norms: Vec<f64>,
    pub candidates: Vec<usize>,
    pub subgoals: Vec<usize>,
    /// Number of states with a nonzero SR row.
    pub coverage: usize,
    pub stats: SrUpdateStats,
    /// Clusters used this iteration, after any reduction to the candidate count.
    pub k_used: usize,
}

#[derive(Clone, Debug)]
pub struct IncrementalResult {
    pub sr: SrMatrix,
    pub clusters: ClusterResult,
    pub subgoals: SubGoalSet,
    pub options: Vec<LearnedOption>,
    pub snapshots: Vec<IterationSnapshot>,
    pub explore_steps: u64,
    pub option_training_steps: u64,
}

impl IncrementalResult {
    pub fn total_steps(&self) -> u64 {
        self.explore_steps + self.option_training_steps
    }

    /// Per-iteration files: L1 norms (CSV and PGM), candidates and sub-goals.
    pub fn write_snapshots(&self, dir: impl AsRef<Path>, map: &GridMap) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for snap in &self.snapshots {
            let i = snap.iteration;
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("iter-{i}-l1.csv")))?);
            writeln!(f, "state,l1_norm")?;
            for (s, v) in snap.l1_norms.iter().enumerate() {
                writeln!(f, "{s},{v}")?;
            }
            f.flush()?;
            render_values(&snap.l1_norms, map)?.save(dir.join(format!("iter-{i}-l1.pgm")))?;
            let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n");
            std::fs::write(dir.join(format!("iter-{i}-candidates.txt")), join(&snap.candidates) + "\n")?;
            std::fs::write(dir.join(format!("iter-{i}-subgoals.txt")), join(&snap.subgoals) + "\n")?;
            render_subgoals(&snap.subgoals, map).save(dir.join(format!("iter-{i}-subgoals.pgm")))?;
        }
        Ok(())
    }
}

fn fixed_start(task: &TaskSpec) -> Result<(usize, usize)> {
    let start = match task.start {
        Start::Fixed(s) => s,
        Start::Uniform => return Err(Error::Config("incremental runs need a fixed start state".into())),
    };
    let horizon = task
        .horizon
        .ok_or_else(|| Error::Config("incremental runs need a finite horizon".into()))?;
    Ok((start, horizon))
}

fn build_options(
    map: &GridMap,
    sr: &SrMatrix,
    goals: &SubGoalSet,
    params: &OptionParams,
    seeds: &SeedTree,
    stream: &str,
) -> Vec<LearnedOption> {
    goals
        .goals
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let pr = PseudoReward::from_sr(sr, g.landmark);
            train_option(map, i, &pr, params, &mut seeds.indexed(stream, i as u64))
        })
        .collect()
}

/// Alternates option-assisted SR growth and option reconstruction for
/// `cfg.n_iters` iterations, then builds `cfg.k_final` options from the final SR.
pub fn run_incremental(
    map: &GridMap,
    task: &TaskSpec,
    cfg: &IncrementalConfig,
    seeds: &SeedTree,
) -> Result<IncrementalResult> {
    cfg.validate()?;
    task.validate(map)?;
    let (start, horizon) = fixed_start(task)?;
    let params = OptionParams {
        restart: Restart::Fixed { start, horizon },
        ..cfg.option_params
    };
    let mut sr = SrMatrix::zeros(map.num_states(), cfg.gamma);
    let mut options: Vec<LearnedOption> = Vec::new();
    let mut snapshots = Vec::with_capacity(cfg.n_iters);
    let mut explore_steps = 0;
    let mut option_training_steps = 0;
    let mut explore_rng = seeds.stream("sr");

    for iteration in 0..cfg.n_iters {
        let stats = update_sr_with_options(
            &mut sr,
            map,
            &options,
            cfg.explore_budget,
            cfg.option_sampling_ratio,
            start,
            horizon,
            &cfg.sr_step,
            &mut explore_rng,
        );
        explore_steps += stats.primitive_steps + stats.option_steps;

        let candidates = match filter_candidates(&sr, cfg.pct_min, cfg.pct_max) {
            Ok(c) => c,
            Err(Error::TooFewStates { .. }) => Vec::new(),
            Err(e) => return Err(e),
        };
        // the old option set is dropped whatever happens next
        options.clear();
        let mut subgoals = Vec::new();
        let mut k_used = 0;
        if !candidates.is_empty() {
            let iter_seeds = seeds.child("iteration", iteration as u64);
            let (clusters, goals) = discover_subgoals(
                &sr,
                &candidates,
                cfg.k_intermediate,
                &mut iter_seeds.stream("cluster"),
                cfg.kmeans_iters,
            )?;
            k_used = clusters.k;
            options = build_options(map, &sr, &goals, &params, &iter_seeds, "option");
            option_training_steps += params.budget * options.len() as u64;
            subgoals = goals.landmarks();
        }
        let l1_norms = sr.l1_norms();
        let coverage = l1_norms.iter().filter(|&&x| x > 0.0).count();
        snapshots.push(IterationSnapshot {
            iteration,
            l1_norms,
            candidates,
            subgoals,
            coverage,
            stats,
            k_used,
        });
    }

    let reached = sr.reached_states();
    if reached.is_empty() {
        return Err(Error::TooFewStates { need: 1, found: 0 });
    }
    let final_seeds = seeds.child("final", 0);
    let (clusters, subgoals) = discover_subgoals(
        &sr,
        &reached,
        cfg.k_final,
        &mut final_seeds.stream("cluster"),
        cfg.kmeans_iters,
    )?;
    let options = build_options(map, &sr, &subgoals, &params, &final_seeds, "option");
    Ok(IncrementalResult {
        sr,
        clusters,
        subgoals,
        options,
        snapshots,
        explore_steps,
        option_training_steps,
    })
}

/// Plain successor options under the same finite-horizon task: SR from
/// `budget` uniform-random primitive steps, then `k` sub-goals over reached states.
pub fn plain_finite_horizon(
    map: &GridMap,
    task: &TaskSpec,
    budget: u64,
    k: usize,
    sr_step: StepSize,
    seeds: &SeedTree,
) -> Result<(SrMatrix, SubGoalSet)> {
    let (start, horizon) = fixed_start(task)?;
    let cfg = SrLearnConfig {
        gamma: task.gamma,
        budget,
        step_size: sr_step,
        schedule: EpisodeSchedule::FixedStart { start, horizon },
    };
    let mut sr = SrMatrix::zeros(map.num_states(), task.gamma);
    continue_sr(&mut sr, map, &cfg, &mut seeds.stream("sr"));
    let reached = sr.reached_states();
    let (_, goals) = discover_subgoals(&sr, &reached, k, &mut seeds.stream("cluster"), 100)?;
    Ok((sr, goals))
}
