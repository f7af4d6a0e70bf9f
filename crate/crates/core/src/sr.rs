//! Successor representation: TD learning and the closed-form oracle.
//!
//! `psi[s][s']` is the expected discounted number of visits to `s'` when
//! starting in `s` and following the uniform random policy. Learning applies
//!
//! ```text
//! psi[s_t] += α (onehot(s_t) + γ psi[s_{t+1}] - psi[s_t])
//! ```
//!
//! to every primitive transition. Only row `s_t` changes, so rows of states
//! never left from stay exactly zero.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::grid::{Action, GridMap, Start, NUM_ACTIONS};
use crate::rng::Rng;

/// Learning-rate schedule for TD updates, indexed by how often a row was updated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `α(n) = initial · sqrt(scale / (scale + n))` for the row's n-th update.
    InvSqrt { initial: f64, scale: f64 },
}

impl StepSize {
    pub fn at(&self, n: u64) -> f64 {
        match *self {
            StepSize::Constant(a) => a,
            StepSize::InvSqrt { initial, scale } => initial * (scale / (scale + n as f64)).sqrt(),
        }
    }

    /// Largest step the schedule can produce.
    pub fn max(&self) -> f64 {
        self.at(0)
    }
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::InvSqrt {
            initial: 0.1,
            scale: 300.0,
        }
    }
}

/// How SR-collection episodes are laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpisodeSchedule {
    /// Fixed-length episodes from a uniformly random free cell.
    UniformRestarts { length: usize },
    /// Finite-horizon episodes from one start state.
    FixedStart { start: usize, horizon: usize },
}

impl EpisodeSchedule {
    /// Episodes of `10 · max(width, height)` steps with uniform restarts.
    pub fn for_map(map: &GridMap) -> Self {
        EpisodeSchedule::UniformRestarts {
            length: 10 * map.width().max(map.height()),
        }
    }

    pub fn start_state(&self, map: &GridMap, rng: &mut Rng) -> usize {
        match *self {
            EpisodeSchedule::UniformRestarts { .. } => rng.random_range(0..map.num_states()),
            EpisodeSchedule::FixedStart { start, .. } => start,
        }
    }

    pub fn episode_len(&self) -> usize {
        match *self {
            EpisodeSchedule::UniformRestarts { length } => length,
            EpisodeSchedule::FixedStart { horizon, .. } => horizon,
        }
    }

    pub fn from_start(start: Start, horizon: Option<usize>, map: &GridMap) -> Self {
        let len = horizon.unwrap_or(10 * map.width().max(map.height()));
        match start {
            Start::Fixed(s) => EpisodeSchedule::FixedStart { start: s, horizon: len },
            Start::Uniform => EpisodeSchedule::UniformRestarts { length: len },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SrLearnConfig {
    pub gamma: f64,
    pub budget: u64,
    pub step_size: StepSize,
    pub schedule: EpisodeSchedule,
}

impl SrLearnConfig {
    pub fn for_map(map: &GridMap, budget: u64) -> Self {
        SrLearnConfig {
            gamma: 0.99,
            budget,
            step_size: StepSize::default(),
            schedule: EpisodeSchedule::for_map(map),
        }
    }
}

/// A dense `|S| × |S|` SR estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct SrMatrix {
    n: usize,
    gamma: f64,
    psi: Vec<f64>,
    row_updates: Vec<u64>,
    update_count: u64,
}

impl SrMatrix {
    pub fn zeros(n: usize, gamma: f64) -> SrMatrix {
        SrMatrix {
            n,
            gamma,
            psi: vec![0.0; n * n],
            row_updates: vec![0; n],
            update_count: 0,
        }
    }

    pub fn from_dmatrix(m: &DMatrix<f64>, gamma: f64) -> SrMatrix {
        let n = m.nrows();
        let mut sr = SrMatrix::zeros(n, gamma);
        for s in 0..n {
            for t in 0..n {
                sr.psi[s * n + t] = m[(s, t)];
            }
        }
        sr
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.psi)
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.psi[s * self.n..(s + 1) * self.n]
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.psi[s * self.n + t]
    }

    /// How many TD updates row `s` has received.
    pub fn row_updates(&self, s: usize) -> u64 {
        self.row_updates[s]
    }

    /// One TD update of row `s` towards `onehot(s) + γ psi[s_next]`.
    pub fn td_update(&mut self, s: usize, s_next: usize, alpha: f64) -> Result<()> {
        if s >= self.n {
            return Err(Error::InvalidState(s));
        }
        if s_next >= self.n {
            return Err(Error::InvalidState(s_next));
        }
        self.td_update_unchecked(s, s_next, alpha);
        Ok(())
    }

    pub(crate) fn td_update_unchecked(&mut self, s: usize, s_next: usize, alpha: f64) {
        let n = self.n;
        let g = self.gamma;
        if s == s_next {
            let row = &mut self.psi[s * n..(s + 1) * n];
            for x in row.iter_mut() {
                *x += alpha * (g * *x - *x);
            }
            row[s] += alpha;
        } else {
            let (row, next) = if s < s_next {
                let (a, b) = self.psi.split_at_mut(s_next * n);
                (&mut a[s * n..(s + 1) * n], &b[..n])
            } else {
                let (a, b) = self.psi.split_at_mut(s * n);
                (&mut b[..n], &a[s_next * n..(s_next + 1) * n])
            };
            for (x, &y) in row.iter_mut().zip(next) {
                *x += alpha * (g * y - *x);
            }
            row[s] += alpha;
        }
        self.row_updates[s] += 1;
        self.update_count += 1;
    }

    /// TD update whose step size comes from a per-row schedule.
    pub fn scheduled_update(&mut self, s: usize, s_next: usize, step: &StepSize) {
        let alpha = step.at(self.row_updates[s]);
        self.td_update_unchecked(s, s_next, alpha);
    }

    /// `Σ_{s'} |psi[s][s']|` per state, a proxy for how well each row is developed.
    pub fn l1_norms(&self) -> Vec<f64> {
        (0..self.n)
            .map(|s| self.row(s).iter().map(|x| x.abs()).sum())
            .collect()
    }

    /// States whose row has nonzero L1 norm.
    pub fn reached_states(&self) -> Vec<usize> {
        self.l1_norms()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(s, _)| s)
            .collect()
    }

    pub fn max_abs_diff(&self, other: &DMatrix<f64>) -> f64 {
        let mut worst = 0.0f64;
        for s in 0..self.n {
            for t in 0..self.n {
                worst = worst.max((self.get(s, t) - other[(s, t)]).abs());
            }
        }
        worst
    }

    /// Writes `# sr states=<n> gamma=<γ> updates=<u>` followed by one CSV line per row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
        writeln!(
            out,
            "# sr states={} gamma={} updates={}",
            self.n, self.gamma, self.update_count
        )?;
        for s in 0..self.n {
            let line: Vec<String> = self.row(s).iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<SrMatrix> {
        let path = path.as_ref();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(path, "missing header"))??;
        let mut n = None;
        let mut gamma = None;
        let mut updates = 0;
        for field in header.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("states", v)) => n = v.parse::<usize>().ok(),
                Some(("gamma", v)) => gamma = v.parse::<f64>().ok(),
                Some(("updates", v)) => updates = v.parse::<u64>().unwrap_or(0),
                _ => {}
            }
        }
        let (n, gamma) = match (n, gamma) {
            (Some(n), Some(g)) => (n, g),
            _ => return Err(Error::format(path, "header needs states= and gamma=")),
        };
        let mut sr = SrMatrix::zeros(n, gamma);
        sr.update_count = updates;
        let mut rows = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if rows >= n {
                return Err(Error::format(path, "too many rows"));
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, format!("row {rows}: {e}")))?;
            if vals.len() != n {
                return Err(Error::format(path, format!("row {rows} has {} values", vals.len())));
            }
            sr.psi[rows * n..(rows + 1) * n].copy_from_slice(&vals);
            rows += 1;
        }
        if rows != n {
            return Err(Error::format(path, format!("expected {n} rows, found {rows}")));
        }
        Ok(sr)
    }
}

/// Learns the SR of the uniform random policy from `cfg.budget` primitive transitions.
pub fn learn_sr(map: &GridMap, cfg: &SrLearnConfig, rng: &mut Rng) -> SrMatrix {
    let mut sr = SrMatrix::zeros(map.num_states(), cfg.gamma);
    continue_sr(&mut sr, map, cfg, rng);
    sr
}

/// Runs `cfg.budget` more uniform-random transitions into an existing estimate.
pub fn continue_sr(sr: &mut SrMatrix, map: &GridMap, cfg: &SrLearnConfig, rng: &mut Rng) {
    let len = cfg.schedule.episode_len().max(1);
    let mut remaining = cfg.budget;
    while remaining > 0 {
        let mut s = cfg.schedule.start_state(map, rng);
        for _ in 0..len {
            if remaining == 0 {
                break;
            }
            let a = Action::ALL[rng.random_range(0..NUM_ACTIONS)];
            let next = map.next_state(s, a);
            sr.scheduled_update(s, next, &cfg.step_size);
            remaining -= 1;
            s = next;
        }
    }
}

/// Exact SR `(I - γP)⁻¹` for a row-stochastic `P`.
pub fn sr_oracle(p: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(Error::EmptyInput);
    }
    let system = DMatrix::identity(n, n) - p * gamma;
    system.lu().try_inverse().ok_or(Error::Singular)
}

/// Exact SR of the uniform random policy on `map`.
pub fn uniform_oracle(map: &GridMap, gamma: f64) -> Result<SrMatrix> {
    let p = map.transition_matrix(&map.uniform_policy())?;
    Ok(SrMatrix::from_dmatrix(&sr_oracle(&p, gamma)?, gamma))
}
