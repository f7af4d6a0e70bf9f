//! Options that hill-climb a potential over states.
//!
//! For a successor option the potential is the SR row of its landmark `g`,
//! and the intra-option reward for `s -> s'` is `ψ_g(s') - ψ_g(s)`. The same
//! machinery trains eigen-options with a Laplacian eigenvector as potential.
//! An option may start anywhere and terminates (β = 1) exactly where its
//! value `max_a q[s][a]` is nonpositive.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::grid::{Action, GridMap, NUM_ACTIONS};
use crate::rng::Rng;
use crate::sr::SrMatrix;

/// An option terminates where its value is at or below this.
///
/// Exactly zero: pseudo-rewards from a fixed-start SR can be far below any
/// absolute tolerance near the start state, and zero-initialised estimates
/// never exceed `max(Q*, 0)`, so the peak still terminates.
pub const TERMINATION_TOL: f64 = 0.0;

/// A frozen potential whose differences form the intra-option reward.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoReward {
    potential: Vec<f64>,
    goal: Option<usize>,
}

impl PseudoReward {
    /// Snapshot of the SR row of landmark `goal`.
    pub fn from_sr(sr: &SrMatrix, goal: usize) -> PseudoReward {
        PseudoReward {
            potential: sr.row(goal).to_vec(),
            goal: Some(goal),
        }
    }

    pub fn from_potential(potential: Vec<f64>) -> PseudoReward {
        PseudoReward {
            potential,
            goal: None,
        }
    }

    #[inline]
    pub fn reward(&self, s: usize, s_next: usize) -> f64 {
        self.potential[s_next] - self.potential[s]
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// The landmark, or the potential's argmax when built from a raw potential.
    pub fn goal(&self) -> usize {
        self.goal.unwrap_or_else(|| self.peak())
    }

    /// Lowest-index argmax of the potential.
    pub fn peak(&self) -> usize {
        let mut best = 0;
        for (s, &v) in self.potential.iter().enumerate() {
            if v > self.potential[best] {
                best = s;
            }
        }
        best
    }
}

/// Where option-training episodes restart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Restart {
    /// Uniformly random state, episodes capped at the option's max duration.
    Uniform,
    /// One start state with a finite horizon.
    Fixed { start: usize, horizon: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptionParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub budget: u64,
    pub restart: Restart,
    /// Execution cap; `None` means `|S|`.
    pub max_duration: Option<usize>,
}

impl Default for OptionParams {
    fn default() -> Self {
        OptionParams {
            alpha: 0.1,
            epsilon: 0.1,
            gamma: 0.99,
            budget: 200_000,
            restart: Restart::Uniform,
            max_duration: None,
        }
    }
}

/// A trained option with its greedy policy and termination set cached.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnedOption {
    pub id: usize,
    pub goal: usize,
    pub max_duration: usize,
    pub trained: bool,
    q: Vec<[f64; NUM_ACTIONS]>,
    greedy: Vec<Action>,
    terminal: Vec<bool>,
}

/// Path followed by one execution of an option, start state first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptionRun {
    pub path: Vec<usize>,
    /// The duration cap was hit before a terminal state.
    pub truncated: bool,
}

impl OptionRun {
    pub fn end(&self) -> usize {
        self.path[self.path.len() - 1]
    }

    pub fn steps(&self) -> usize {
        self.path.len() - 1
    }
}

fn argmax_lowest(row: &[f64; NUM_ACTIONS]) -> usize {
    let mut best = 0;
    for a in 1..NUM_ACTIONS {
        if row[a] > row[best] {
            best = a;
        }
    }
    best
}

fn row_max(row: &[f64; NUM_ACTIONS]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl LearnedOption {
    pub fn from_q(id: usize, goal: usize, q: Vec<[f64; NUM_ACTIONS]>, max_duration: usize) -> Self {
        let greedy = q
            .iter()
            .map(|row| Action::ALL[argmax_lowest(row)])
            .collect();
        let terminal = q.iter().map(|row| row_max(row) <= TERMINATION_TOL).collect();
        LearnedOption {
            id,
            goal,
            max_duration,
            trained: true,
            q,
            greedy,
            terminal,
        }
    }

    pub fn num_states(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self, s: usize) -> &[f64; NUM_ACTIONS] {
        &self.q[s]
    }

    pub fn value(&self, s: usize) -> f64 {
        row_max(&self.q[s])
    }

    /// β(s): 1 exactly where the option value is nonpositive.
    #[inline]
    pub fn terminates(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// Greedy intra-option action, lowest action index on ties.
    #[inline]
    pub fn greedy_action(&self, s: usize) -> Action {
        self.greedy[s]
    }

    pub fn termination_states(&self) -> Vec<usize> {
        (0..self.q.len()).filter(|&s| self.terminal[s]).collect()
    }

    /// Follows the greedy policy from `s` until a terminal state or the duration cap.
    ///
    /// Starting in a terminal state returns immediately with zero steps.
    pub fn execute(&self, map: &GridMap, s: usize) -> Result<OptionRun> {
        map.check_state(s)?;
        if s >= self.q.len() {
            return Err(Error::InvalidState(s));
        }
        let mut path = vec![s];
        let mut cur = s;
        while !self.terminal[cur] {
            if path.len() > self.max_duration {
                return Ok(OptionRun { path, truncated: true });
            }
            cur = map.next_state(cur, self.greedy[cur]);
            path.push(cur);
        }
        Ok(OptionRun { path, truncated: false })
    }
}

/// Standalone form of [`LearnedOption::execute`].
pub fn execute_option(map: &GridMap, opt: &LearnedOption, s: usize) -> Result<OptionRun> {
    opt.execute(map, s)
}

/// ε-greedy tabular Q-learning on the pseudo-reward.
///
/// Episodes restart per `params.restart`. Uniform-restart episodes end at a
/// state whose current value is nonpositive or at the cap; fixed-start
/// episodes run to the horizon. Targets always bootstrap
/// from the next state's value, so the fixed point is the infinite-horizon
/// optimum, which is zero at the potential's peak and positive elsewhere.
pub fn train_option(
    map: &GridMap,
    id: usize,
    pr: &PseudoReward,
    params: &OptionParams,
    rng: &mut Rng,
) -> LearnedOption {
    let n = map.num_states();
    let max_duration = params.max_duration.unwrap_or(n).max(1);
    let cap = match params.restart {
        Restart::Uniform => max_duration,
        Restart::Fixed { horizon, .. } => horizon.max(1),
    };
    let mut q = vec![[0.0f64; NUM_ACTIONS]; n];
    let mut steps = 0u64;
    while steps < params.budget {
        let mut s = match params.restart {
            Restart::Uniform => rng.random_range(0..n),
            Restart::Fixed { start, .. } => start,
        };
        let mut t = 0;
        while steps < params.budget {
            let a = if rng.random::<f64>() < params.epsilon {
                rng.random_range(0..NUM_ACTIONS)
            } else {
                greedy_random_ties(&q[s], rng)
            };
            let next = map.next_state(s, Action::ALL[a]);
            let r = pr.reward(s, next);
            let target = r + params.gamma * row_max(&q[next]);
            q[s][a] += params.alpha * (target - q[s][a]);
            steps += 1;
            t += 1;
            // fixed-start episodes always run the full horizon: zero-initialised
            // values would otherwise end every episode after its first step
            let stop = match params.restart {
                Restart::Uniform => row_max(&q[next]) <= TERMINATION_TOL,
                Restart::Fixed { .. } => false,
            };
            if t >= cap || stop {
                break;
            }
            s = next;
        }
    }
    LearnedOption::from_q(id, pr.goal(), q, max_duration)
}

fn greedy_random_ties(row: &[f64; NUM_ACTIONS], rng: &mut Rng) -> usize {
    let m = row_max(row);
    let ties = row.iter().filter(|&&v| v == m).count();
    if ties == 1 {
        return argmax_lowest(row);
    }
    let mut pick = rng.random_range(0..ties);
    for (a, &v) in row.iter().enumerate() {
        if v == m {
            if pick == 0 {
                return a;
            }
            pick -= 1;
        }
    }
    0
}

/// Writes options as blocks: a `# option ...` header then one CSV row of
/// action values per state.
pub fn write_options(path: impl AsRef<Path>, options: &[LearnedOption]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for o in options {
        writeln!(
            out,
            "# option id={} goal={} states={} max_duration={}",
            o.id,
            o.goal,
            o.q.len(),
            o.max_duration
        )?;
        for row in &o.q {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_options(path: impl AsRef<Path>) -> Result<Vec<LearnedOption>> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut options = Vec::new();
    let mut header: Option<(usize, usize, usize, usize)> = None;
    let mut rows: Vec<[f64; NUM_ACTIONS]> = Vec::new();
    let finish = |header: Option<(usize, usize, usize, usize)>,
                  rows: &mut Vec<[f64; NUM_ACTIONS]>,
                  options: &mut Vec<LearnedOption>|
     -> Result<()> {
        if let Some((id, goal, n, dur)) = header {
            if rows.len() != n {
                return Err(Error::format(path, format!("option {id}: {} rows, expected {n}", rows.len())));
            }
            options.push(LearnedOption::from_q(id, goal, std::mem::take(rows), dur));
        }
        Ok(())
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            finish(header.take(), &mut rows, &mut options)?;
            let mut fields = [None; 4];
            for kv in rest.split_whitespace() {
                let slot = match kv.split_once('=') {
                    Some(("id", v)) => (0, v),
                    Some(("goal", v)) => (1, v),
                    Some(("states", v)) => (2, v),
                    Some(("max_duration", v)) => (3, v),
                    _ => continue,
                };
                fields[slot.0] = slot.1.parse::<usize>().ok();
            }
            match fields {
                [Some(a), Some(b), Some(c), Some(d)] => header = Some((a, b, c, d)),
                _ => return Err(Error::format(path, format!("line {}: bad option header", lineno + 1))),
            }
            continue;
        }
        if header.is_none() {
            return Err(Error::format(path, "values before option header"));
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        let row: [f64; NUM_ACTIONS] = vals
            .try_into()
            .map_err(|_| Error::format(path, format!("line {}: expected 5 values", lineno + 1)))?;
        rows.push(row);
    }
    finish(header, &mut rows, &mut options)?;
    Ok(options)
}
