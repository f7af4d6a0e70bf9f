//! Deterministic grid-world MDPs.
//!
//! A map is a rectangle of cells, each either blocked (`#`) or free (`.`, or
//! the cosmetic `S` / `G` markers). Free cells are numbered in row-major order
//! and those numbers are the MDP states. Moves into a wall or off the grid
//! leave the agent where it is.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const NUM_ACTIONS: usize = 5;

/// Primitive actions, in the column order used by every Q-table in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    NoOp = 0,
    Left = 1,
    Right = 2,
    Up = 3,
    Down = 4,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::NoOp,
        Action::Left,
        Action::Right,
        Action::Up,
        Action::Down,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::NoOp => (0, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::NoOp => "noop",
            Action::Left => "left",
            Action::Right => "right",
            Action::Up => "up",
            Action::Down => "down",
        };
        f.write_str(s)
    }
}

/// An immutable grid map with precomputed successor table.
#[derive(Clone, Debug)]
pub struct GridMap {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    cells: Vec<(usize, usize)>,
    state_of_cell: Vec<Option<usize>>,
    next: Vec<[usize; NUM_ACTIONS]>,
}

impl GridMap {
    /// Parses an ASCII map: `#` is a wall, `.`, `S` and `G` are free cells.
    ///
    /// Lines must all have the same length. Trailing blank lines are ignored.
    pub fn parse(text: &str) -> Result<GridMap> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .collect::<Vec<_>>();
        let end = lines
            .iter()
            .rposition(|l| !l.is_empty())
            .map(|i| i + 1)
            .unwrap_or(0);
        let lines = &lines[..end];
        if lines.is_empty() {
            return Err(Error::MapParse {
                line: 1,
                msg: "empty map".into(),
            });
        }
        let width = lines[0].chars().count();
        let mut blocked = Vec::with_capacity(width * lines.len());
        for (i, line) in lines.iter().enumerate() {
            let n = line.chars().count();
            if n != width || n == 0 {
                return Err(Error::MapParse {
                    line: i + 1,
                    msg: format!("expected {width} cells, found {n}"),
                });
            }
            for ch in line.chars() {
                match ch {
                    '#' => blocked.push(true),
                    '.' | 'S' | 'G' => blocked.push(false),
                    other => {
                        return Err(Error::MapParse {
                            line: i + 1,
                            msg: format!("unknown character {other:?}"),
                        })
                    }
                }
            }
        }
        Self::from_mask(width, lines.len(), blocked)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GridMap> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    /// Builds a map from a row-major wall mask.
    pub fn from_mask(width: usize, height: usize, blocked: Vec<bool>) -> Result<GridMap> {
        if width == 0 || height == 0 || blocked.len() != width * height {
            return Err(Error::MapParse {
                line: 1,
                msg: "mask does not match dimensions".into(),
            });
        }
        let mut cells = Vec::new();
        let mut state_of_cell = vec![None; width * height];
        for r in 0..height {
            for c in 0..width {
                if !blocked[r * width + c] {
                    state_of_cell[r * width + c] = Some(cells.len());
                    cells.push((r, c));
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::MapParse {
                line: 1,
                msg: "map has no free cells".into(),
            });
        }
        let next = cells
            .iter()
            .enumerate()
            .map(|(s, &(r, c))| {
                let mut row = [s; NUM_ACTIONS];
                for a in Action::ALL {
                    let (dr, dc) = a.delta();
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr >= height as isize || nc >= width as isize {
                        continue;
                    }
                    if let Some(t) = state_of_cell[nr as usize * width + nc as usize] {
                        row[a.index()] = t;
                    }
                }
                row
            })
            .collect();
        Ok(GridMap {
            width,
            height,
            blocked,
            cells,
            state_of_cell,
            next,
        })
    }

    /// An obstacle-free `height × width` map.
    pub fn open(width: usize, height: usize) -> Result<GridMap> {
        Self::from_mask(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_states(&self) -> usize {
        self.cells.len()
    }

    pub fn is_blocked(&self, row: usize, col: usize) -> bool {
        self.blocked[row * self.width + col]
    }

    /// `(row, col)` of a state.
    pub fn cell(&self, s: usize) -> (usize, usize) {
        self.cells[s]
    }

    pub fn state_at(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.height || col >= self.width {
            return None;
        }
        self.state_of_cell[row * self.width + col]
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s < self.num_states() {
            Ok(())
        } else {
            Err(Error::InvalidState(s))
        }
    }

    /// One deterministic transition. Always takes exactly one time step.
    pub fn step(&self, s: usize, a: Action) -> Result<usize> {
        self.check_state(s)?;
        Ok(self.next[s][a.index()])
    }

    /// Unchecked variant of [`GridMap::step`] for inner loops; panics on a bad index.
    #[inline]
    pub fn next_state(&self, s: usize, a: Action) -> usize {
        self.next[s][a.index()]
    }

    /// Row-stochastic `P[s][s'] = Σ_a π(a|s)·[step(s,a) = s']`.
    pub fn transition_matrix(&self, policy: &[[f64; NUM_ACTIONS]]) -> Result<DMatrix<f64>> {
        let n = self.num_states();
        if policy.len() != n {
            return Err(Error::MalformedPolicy {
                state: policy.len().min(n),
                sum: f64::NAN,
            });
        }
        let mut p = DMatrix::zeros(n, n);
        for (s, dist) in policy.iter().enumerate() {
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || dist.iter().any(|&x| x < 0.0) {
                return Err(Error::MalformedPolicy { state: s, sum });
            }
            for a in Action::ALL {
                p[(s, self.next[s][a.index()])] += dist[a.index()];
            }
        }
        Ok(p)
    }

    /// Uniform policy over the 5 primitives, one row per state.
    pub fn uniform_policy(&self) -> Vec<[f64; NUM_ACTIONS]> {
        vec![[1.0 / NUM_ACTIONS as f64; NUM_ACTIONS]; self.num_states()]
    }

    /// Distinct states reachable in one move (self-loops excluded).
    pub fn neighbors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.next[s];
        Action::ALL[1..]
            .iter()
            .map(move |a| row[a.index()])
            .filter(move |&t| t != s)
    }

    /// Breadth-first shortest-path distances from `from`; `None` if unreachable.
    pub fn distances_from(&self, from: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_states()];
        let mut queue = VecDeque::new();
        dist[from] = Some(0);
        queue.push_back(from);
        while let Some(s) = queue.pop_front() {
            let d = dist[s].unwrap_or(0);
            for t in self.neighbors(s) {
                if dist[t].is_none() {
                    dist[t] = Some(d + 1);
                    queue.push_back(t);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.distances_from(0).iter().all(Option::is_some)
    }

    /// Shortest-path distance between two states, `None` if disconnected.
    pub fn distance(&self, a: usize, b: usize) -> Option<usize> {
        self.distances_from(a)[b]
    }

    /// Mean shortest-path distance over unordered pairs of `states`; 0 for fewer than two.
    pub fn mean_pairwise_distance(&self, states: &[usize]) -> f64 {
        let mut total = 0usize;
        let mut pairs = 0usize;
        for (i, &a) in states.iter().enumerate() {
            let dist = self.distances_from(a);
            for &b in &states[i + 1..] {
                total += dist[b].unwrap_or(0);
                pairs += 1;
            }
        }
        if pairs == 0 {
            0.0
        } else {
            total as f64 / pairs as f64
        }
    }

    /// The free cell in the bottom-most row, left-most among ties.
    pub fn bottom_left_state(&self) -> usize {
        (0..self.num_states())
            .max_by_key(|&s| {
                let (r, c) = self.cells[s];
                (r, std::cmp::Reverse(c))
            })
            .unwrap_or(0)
    }

    /// The free cell in the top-most row, right-most among ties.
    pub fn top_right_state(&self) -> usize {
        (0..self.num_states())
            .max_by_key(|&s| {
                let (r, c) = self.cells[s];
                (std::cmp::Reverse(r), c)
            })
            .unwrap_or(0)
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.height {
            for c in 0..self.width {
                f.write_str(if self.is_blocked(r, c) { "#" } else { "." })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Where episodes begin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    Fixed(usize),
    Uniform,
}

/// A navigation task on a map.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub start: Start,
    pub goal: usize,
    pub goal_reward: f64,
    pub step_reward: f64,
    pub gamma: f64,
    pub horizon: Option<usize>,
}

impl TaskSpec {
    /// +10 on reaching the goal, 0 otherwise, γ = 0.99, no horizon.
    pub fn new(start: usize, goal: usize) -> TaskSpec {
        TaskSpec {
            start: Start::Fixed(start),
            goal,
            goal_reward: 10.0,
            step_reward: 0.0,
            gamma: 0.99,
            horizon: None,
        }
    }

    pub fn with_horizon(mut self, horizon: usize) -> TaskSpec {
        self.horizon = Some(horizon);
        self
    }

    pub fn validate(&self, map: &GridMap) -> Result<()> {
        map.check_state(self.goal)?;
        if let Start::Fixed(s) = self.start {
            map.check_state(s)?;
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0,1)", self.gamma)));
        }
        if self.horizon == Some(0) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn reward(&self, next_state: usize) -> f64 {
        if next_state == self.goal {
            self.goal_reward
        } else {
            self.step_reward
        }
    }
}

/// A primitive action or an option index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Choice {
    Primitive(Action),
    Option(usize),
}

impl Choice {
    /// Column of this choice in a Q-table over primitives followed by options.
    pub fn column(self) -> usize {
        match self {
            Choice::Primitive(a) => a.index(),
            Choice::Option(o) => NUM_ACTIONS + o,
        }
    }

    pub fn from_column(col: usize) -> Choice {
        match Action::from_index(col) {
            Some(a) => Choice::Primitive(a),
            None => Choice::Option(col - NUM_ACTIONS),
        }
    }
}

/// Outcome of executing a primitive or an option from `state`.
///
/// For options `reward` is the discounted sum `Σ_{i<τ} γ^i r_i` and `steps` is `τ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub choice: Choice,
    pub next_state: usize,
    pub reward: f64,
    pub done: bool,
    pub steps: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_open_and_walled() {
        let m = GridMap::parse("..\n..").unwrap();
        assert_eq!((m.width(), m.height(), m.num_states()), (2, 2, 4));
        let m = GridMap::parse("#.\n.#\n").unwrap();
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.cell(0), (0, 1));
        assert_eq!(m.cell(1), (1, 0));
        let m = GridMap::parse("S.\n.G\n\n").unwrap();
        assert_eq!(m.num_states(), 4);
    }

    #[test]
    fn parse_errors() {
        assert!(GridMap::parse("").is_err());
        assert!(GridMap::parse("..\n.").is_err());
        assert!(GridMap::parse(".x").is_err());
        assert!(GridMap::parse("##\n##").is_err());
    }

    #[test]
    fn step_geometry() {
        let m = GridMap::open(3, 3).unwrap();
        let center = m.state_at(1, 1).unwrap();
        assert_eq!(m.step(center, Action::Up).unwrap(), m.state_at(0, 1).unwrap());
        assert_eq!(m.step(center, Action::Down).unwrap(), m.state_at(2, 1).unwrap());
        assert_eq!(m.step(center, Action::Left).unwrap(), m.state_at(1, 0).unwrap());
        assert_eq!(m.step(center, Action::Right).unwrap(), m.state_at(1, 2).unwrap());
        let corner = m.state_at(0, 0).unwrap();
        assert_eq!(m.step(corner, Action::Left).unwrap(), corner);
        assert_eq!(m.step(corner, Action::Up).unwrap(), corner);
        for s in 0..m.num_states() {
            assert_eq!(m.step(s, Action::NoOp).unwrap(), s);
        }
        assert!(matches!(m.step(9, Action::NoOp), Err(Error::InvalidState(9))));
    }

    #[test]
    fn walls_clamp() {
        let m = GridMap::parse(".#.").unwrap();
        assert_eq!(m.step(0, Action::Right).unwrap(), 0);
        assert!(!m.is_connected());
    }

    #[test]
    fn transition_matrices() {
        let one = GridMap::open(1, 1).unwrap();
        let p = one.transition_matrix(&one.uniform_policy()).unwrap();
        assert_eq!(p[(0, 0)], 1.0);

        let pair = GridMap::open(2, 1).unwrap();
        let p = pair.transition_matrix(&pair.uniform_policy()).unwrap();
        let expected = [[0.8, 0.2], [0.2, 0.8]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((p[(i, j)] - expected[i][j]).abs() < 1e-12);
            }
        }

        let bad = vec![[0.5, 0.0, 0.0, 0.0, 0.0]; 2];
        assert!(matches!(
            pair.transition_matrix(&bad),
            Err(Error::MalformedPolicy { state: 0, .. })
        ));
    }

    #[test]
    fn choice_columns() {
        assert_eq!(Choice::Primitive(Action::Down).column(), 4);
        assert_eq!(Choice::Option(2).column(), 7);
        assert_eq!(Choice::from_column(7), Choice::Option(2));
        assert_eq!(Choice::from_column(1), Choice::Primitive(Action::Left));
    }

    #[test]
    fn corner_states() {
        let m = GridMap::parse("#..\n...\n..#").unwrap();
        assert_eq!(m.cell(m.bottom_left_state()), (2, 0));
        assert_eq!(m.cell(m.top_right_state()), (0, 2));
    }
}
