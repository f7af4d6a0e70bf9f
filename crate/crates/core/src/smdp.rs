//! SMDP Q-learning over primitives and options.
//!
//! The Q-table has `5 + m` columns: the primitives in [`Action`] order, then
//! one column per option. Options are executed greedily to termination; the
//! option column gets the multi-step target `R + γ^τ max_c Q(s', c)` and every
//! primitive step along the way also feeds intra-option updates to all options
//! whose greedy action agrees with it.

use rand::Rng as _;

use crate::grid::{Action, Choice, GridMap, Start, TaskSpec, Transition, NUM_ACTIONS};
use crate::options::LearnedOption;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    /// Exploratory draws are uniform over all `5 + m` columns.
    Uniform,
    /// Options and primitives are drawn in the ratio `1 : e`.
    NonUniform,
    /// As `NonUniform`, with `e` scaled by the size of the last picked
    /// option's cluster relative to the mean cluster size.
    Adaptive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplorationScheme {
    pub kind: SchemeKind,
    pub e: f64,
    pub cluster_sizes: Vec<usize>,
    pub last_option: Option<usize>,
}

impl ExplorationScheme {
    pub fn uniform() -> Self {
        ExplorationScheme {
            kind: SchemeKind::Uniform,
            e: 1.0,
            cluster_sizes: Vec::new(),
            last_option: None,
        }
    }

    pub fn non_uniform(e: f64) -> Self {
        ExplorationScheme {
            kind: SchemeKind::NonUniform,
            e,
            cluster_sizes: Vec::new(),
            last_option: None,
        }
    }

    pub fn adaptive(e: f64, cluster_sizes: Vec<usize>) -> Self {
        ExplorationScheme {
            kind: SchemeKind::Adaptive,
            e,
            cluster_sizes,
            last_option: None,
        }
    }

    /// The effective `e` for the next exploratory draw.
    pub fn effective_ratio(&self) -> f64 {
        match (self.kind, self.last_option) {
            (SchemeKind::Adaptive, Some(o)) if !self.cluster_sizes.is_empty() => {
                let mean = self.cluster_sizes.iter().sum::<usize>() as f64
                    / self.cluster_sizes.len() as f64;
                let size = self.cluster_sizes.get(o).copied().unwrap_or(0) as f64;
                if mean > 0.0 {
                    self.e * size / mean
                } else {
                    self.e
                }
            }
            _ => self.e,
        }
    }

    /// Probability that an exploratory draw picks the option class.
    pub fn option_probability(&self, num_options: usize) -> f64 {
        if num_options == 0 {
            return 0.0;
        }
        match self.kind {
            SchemeKind::Uniform => num_options as f64 / (NUM_ACTIONS + num_options) as f64,
            _ => 1.0 / (1.0 + self.effective_ratio()),
        }
    }

    fn explore(&self, num_options: usize, rng: &mut Rng) -> Choice {
        match self.kind {
            SchemeKind::Uniform => Choice::from_column(rng.random_range(0..NUM_ACTIONS + num_options)),
            _ => {
                if num_options > 0 && rng.random::<f64>() < self.option_probability(num_options) {
                    Choice::Option(rng.random_range(0..num_options))
                } else {
                    Choice::Primitive(Action::ALL[rng.random_range(0..NUM_ACTIONS)])
                }
            }
        }
    }

    fn note(&mut self, choice: Choice) {
        if let Choice::Option(o) = choice {
            self.last_option = Some(o);
        }
    }
}

/// Tabular action values over primitives followed by options.
#[derive(Clone, Debug, PartialEq)]
pub struct SmdpAgent {
    num_states: usize,
    num_options: usize,
    q: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl SmdpAgent {
    pub fn new(num_states: usize, num_options: usize, alpha: f64, gamma: f64, epsilon: f64) -> Self {
        SmdpAgent {
            num_states,
            num_options,
            q: vec![0.0; num_states * (NUM_ACTIONS + num_options)],
            alpha,
            gamma,
            epsilon,
        }
    }

    pub fn num_columns(&self) -> usize {
        NUM_ACTIONS + self.num_options
    }

    pub fn num_options(&self) -> usize {
        self.num_options
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        let w = self.num_columns();
        &self.q[s * w..(s + 1) * w]
    }

    #[inline]
    pub fn q(&self, s: usize, choice: Choice) -> f64 {
        self.q[s * self.num_columns() + choice.column()]
    }

    pub fn set_q(&mut self, s: usize, choice: Choice, v: f64) {
        let w = self.num_columns();
        self.q[s * w + choice.column()] = v;
    }

    pub fn value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scale(&mut self, c: f64) {
        self.q.iter_mut().for_each(|x| *x *= c);
    }

    /// Greedy choice with uniformly random tie-breaking.
    pub fn greedy(&self, s: usize, rng: &mut Rng) -> Choice {
        let row = self.row(s);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties = row.iter().filter(|&&v| v == m).count();
        let mut pick = if ties > 1 { rng.random_range(0..ties) } else { 0 };
        for (c, &v) in row.iter().enumerate() {
            if v == m {
                if pick == 0 {
                    return Choice::from_column(c);
                }
                pick -= 1;
            }
        }
        Choice::from_column(0)
    }

    /// ε-greedy selection; exploratory draws follow `scheme`.
    pub fn choose(&self, scheme: &mut ExplorationScheme, s: usize, rng: &mut Rng) -> Choice {
        self.choose_with(self.epsilon, scheme, s, rng)
    }

    pub fn choose_with(
        &self,
        epsilon: f64,
        scheme: &mut ExplorationScheme,
        s: usize,
        rng: &mut Rng,
    ) -> Choice {
        let choice = if rng.random::<f64>() < epsilon {
            scheme.explore(self.num_options, rng)
        } else {
            self.greedy(s, rng)
        };
        scheme.note(choice);
        choice
    }

    /// `Q(s,c) += α (R + γ^τ max_c' Q(s',c') - Q(s,c))`, bootstrapping 0 at the goal.
    pub fn smdp_update(&mut self, t: &Transition) {
        let boot = if t.done {
            0.0
        } else {
            self.gamma.powi(t.steps as i32) * self.value(t.next_state)
        };
        let idx = t.state * self.num_columns() + t.choice.column();
        self.q[idx] += self.alpha * (t.reward + boot - self.q[idx]);
    }

    /// Intra-option updates from one primitive transition `(s, a, r, s')`.
    ///
    /// Every option whose greedy action in `s` is `a` moves towards
    /// `r + γ U(s', o)` with `U = (1-β) Q(s',o) + β max_c Q(s',c)`.
    /// Returns how many options were updated.
    pub fn intra_option_update(
        &mut self,
        options: &[LearnedOption],
        s: usize,
        a: Action,
        r: f64,
        s_next: usize,
        done: bool,
    ) -> usize {
        let w = self.num_columns();
        let next_max = self.value(s_next);
        let mut updated = 0;
        for (o, opt) in options.iter().enumerate() {
            if opt.greedy_action(s) != a {
                continue;
            }
            let cont = if done {
                0.0
            } else if opt.terminates(s_next) {
                next_max
            } else {
                self.q[s_next * w + NUM_ACTIONS + o]
            };
            let idx = s * w + NUM_ACTIONS + o;
            self.q[idx] += self.alpha * (r + self.gamma * cont - self.q[idx]);
            updated += 1;
        }
        updated
    }
}

/// The fixed parts of an episode: map, task and option set.
#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    pub map: &'a GridMap,
    pub task: &'a TaskSpec,
    pub options: &'a [LearnedOption],
}

/// Per-call execution settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActSettings {
    pub learn: bool,
    pub epsilon: f64,
}

/// A resumable episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub state: usize,
    pub steps: usize,
    pub discounted_return: f64,
    pub undiscounted_return: f64,
    pub reached_goal: bool,
    discount: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub discounted_return: f64,
    pub undiscounted_return: f64,
    pub steps: usize,
    pub reached_goal: bool,
}

impl Episode {
    /// A start equal to the goal counts as an immediate arrival: return `goal_reward`, 0 steps.
    pub fn new(env: &Env<'_>, rng: &mut Rng) -> Episode {
        let state = match env.task.start {
            Start::Fixed(s) => s,
            Start::Uniform => rng.random_range(0..env.map.num_states()),
        };
        let at_goal = state == env.task.goal;
        let r = if at_goal { env.task.goal_reward } else { 0.0 };
        Episode {
            state,
            steps: 0,
            discounted_return: r,
            undiscounted_return: r,
            reached_goal: at_goal,
            discount: 1.0,
        }
    }

    pub fn is_over(&self, task: &TaskSpec) -> bool {
        self.reached_goal || task.horizon.is_some_and(|h| self.steps >= h)
    }

    /// Makes one decision and executes it for at most `step_cap` primitive
    /// steps (further limited by the task horizon).
    #[allow(clippy::too_many_arguments)]
    pub fn advance(
        &mut self,
        env: &Env<'_>,
        agent: &mut SmdpAgent,
        scheme: &mut ExplorationScheme,
        rng: &mut Rng,
        settings: ActSettings,
        step_cap: usize,
        mut visits: Option<&mut [u64]>,
    ) -> Transition {
        let limit = match env.task.horizon {
            Some(h) => step_cap.min(h.saturating_sub(self.steps)),
            None => step_cap,
        }
        .max(1);
        let s = self.state;
        let choice = agent.choose_with(settings.epsilon, scheme, s, rng);
        let gamma = env.task.gamma;
        let mut cur = s;
        let mut total = 0.0;
        let mut disc = 1.0;
        let mut k = 0;
        let mut done;
        loop {
            let a = match choice {
                Choice::Primitive(a) => a,
                Choice::Option(o) => env.options[o].greedy_action(cur),
            };
            let next = env.map.next_state(cur, a);
            let r = env.task.reward(next);
            done = next == env.task.goal;
            if let Some(v) = visits.as_deref_mut() {
                v[cur] += 1;
            }
            if settings.learn {
                agent.intra_option_update(env.options, cur, a, r, next, done);
            }
            total += disc * r;
            self.discounted_return += self.discount * r;
            self.undiscounted_return += r;
            self.discount *= gamma;
            disc *= gamma;
            k += 1;
            cur = next;
            let stop = match choice {
                Choice::Primitive(_) => true,
                Choice::Option(o) => {
                    let opt = &env.options[o];
                    opt.terminates(cur) || k >= opt.max_duration
                }
            };
            if done || stop || k >= limit {
                break;
            }
        }
        self.state = cur;
        self.steps += k;
        self.reached_goal = done;
        let t = Transition {
            state: s,
            choice,
            next_state: cur,
            reward: total,
            done,
            steps: k,
        };
        if settings.learn {
            agent.smdp_update(&t);
        }
        t
    }

    pub fn outcome(&self) -> EpisodeOutcome {
        EpisodeOutcome {
            discounted_return: self.discounted_return,
            undiscounted_return: self.undiscounted_return,
            steps: self.steps,
            reached_goal: self.reached_goal,
        }
    }
}

/// Runs one episode until the goal, the task horizon, or `max_steps` primitive steps.
///
/// Each primitive step, including those inside options, increments the
/// visit count of the state it was taken from.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    env: &Env<'_>,
    agent: &mut SmdpAgent,
    scheme: &mut ExplorationScheme,
    rng: &mut Rng,
    settings: ActSettings,
    max_steps: usize,
    mut visits: Option<&mut [u64]>,
) -> EpisodeOutcome {
    let mut ep = Episode::new(env, rng);
    while !ep.is_over(env.task) && ep.steps < max_steps {
        let cap = max_steps - ep.steps;
        ep.advance(env, agent, scheme, rng, settings, cap, visits.as_deref_mut());
    }
    ep.outcome()
}

/// Visitation counts of a purely exploratory walk of `steps` primitive steps
/// from `start`: every decision is an exploratory draw from `scheme`, and
/// options run greedily (at least one step) until termination, their cap, or
/// the budget.
pub fn exploration_visits(
    map: &GridMap,
    options: &[LearnedOption],
    scheme: &mut ExplorationScheme,
    steps: u64,
    start: usize,
    rng: &mut Rng,
) -> Vec<u64> {
    let mut visits = vec![0u64; map.num_states()];
    let mut s = start;
    let mut used = 0u64;
    while used < steps {
        let choice = scheme.explore(options.len(), rng);
        scheme.note(choice);
        match choice {
            Choice::Primitive(a) => {
                visits[s] += 1;
                s = map.next_state(s, a);
                used += 1;
            }
            Choice::Option(o) => {
                let opt = &options[o];
                let mut k = 0;
                loop {
                    visits[s] += 1;
                    s = map.next_state(s, opt.greedy_action(s));
                    k += 1;
                    used += 1;
                    if opt.terminates(s) || k >= opt.max_duration || used >= steps {
                        break;
                    }
                }
            }
        }
    }
    visits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn chain() -> GridMap {
        GridMap::open(3, 1).unwrap()
    }

    #[test]
    fn greedy_when_epsilon_zero() {
        let mut agent = SmdpAgent::new(2, 1, 0.1, 0.99, 0.0);
        agent.set_q(0, Choice::Option(0), 3.0);
        let mut rng = SeedTree::new(1).stream("agent");
        for kind in [
            ExplorationScheme::uniform(),
            ExplorationScheme::non_uniform(15.0),
            ExplorationScheme::adaptive(15.0, vec![4]),
        ] {
            let mut scheme = kind;
            for _ in 0..100 {
                assert_eq!(agent.choose(&mut scheme, 0, &mut rng), Choice::Option(0));
            }
        }
    }

    #[test]
    fn primitive_step_into_goal() {
        let map = chain();
        let task = TaskSpec::new(1, 2);
        let env = Env { map: &map, task: &task, options: &[] };
        let mut agent = SmdpAgent::new(3, 0, 0.5, 0.99, 0.0);
        agent.set_q(1, Choice::Primitive(Action::Right), 1e-6);
        let mut ep = Episode::new(&env, &mut SeedTree::new(0).stream("agent"));
        let t = ep.advance(
            &env,
            &mut agent,
            &mut ExplorationScheme::uniform(),
            &mut SeedTree::new(0).stream("agent"),
            ActSettings { learn: true, epsilon: 0.0 },
            usize::MAX,
            None,
        );
        assert!(t.done);
        assert_eq!(t.reward, 10.0);
        assert!((agent.q(1, Choice::Primitive(Action::Right)) - (1e-6 + 0.5 * (10.0 - 1e-6))).abs() < 1e-12);
        assert!(ep.is_over(&task));
        assert_eq!(ep.discounted_return, 10.0);
    }

    #[test]
    fn zero_reward_option_target() {
        let mut agent = SmdpAgent::new(4, 1, 0.5, 0.99, 0.0);
        agent.set_q(0, Choice::Option(0), 2.0);
        let t = Transition {
            state: 0,
            choice: Choice::Option(0),
            next_state: 3,
            reward: 0.0,
            done: false,
            steps: 3,
        };
        agent.smdp_update(&t);
        assert!((agent.q(0, Choice::Option(0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multi_step_discount_matches_compounding() {
        // values consistent along 0 -> 1 -> 2 -> 3 with zero rewards: V(i) = γ V(i+1)
        let g: f64 = 0.9;
        let mut agent = SmdpAgent::new(4, 0, 1.0, g, 0.0);
        let v3 = 5.0;
        for (s, v) in [(3, v3), (2, g * v3), (1, g * g * v3)] {
            agent.set_q(s, Choice::Primitive(Action::NoOp), v);
        }
        for tau in 1..=3usize {
            let next = tau;
            let mut a = agent.clone();
            a.smdp_update(&Transition {
                state: 0,
                choice: Choice::Primitive(Action::Right),
                next_state: next,
                reward: 0.0,
                done: false,
                steps: tau,
            });
            let one_step = g * agent.value(1);
            let got = a.q(0, Choice::Primitive(Action::Right));
            let expected = g.powi(tau as i32) * agent.value(next);
            assert!((got - expected).abs() < 1e-12);
            if tau == 3 {
                assert!((got - g * g * g * v3).abs() < 1e-12);
            }
            assert!((one_step - g * g * g * v3).abs() < 1e-12);
        }
    }

    #[test]
    fn intra_option_no_match_no_update() {
        let q = vec![[0.0, 0.0, 1.0, 0.0, 0.0]; 3];
        let opt = LearnedOption::from_q(0, 2, q, 3);
        let mut agent = SmdpAgent::new(3, 1, 0.5, 0.99, 0.1);
        let before = agent.clone();
        assert_eq!(agent.intra_option_update(&[opt], 0, Action::Left, 0.0, 0, false), 0);
        assert_eq!(agent, before);
    }

    #[test]
    fn intra_option_termination_collapses_to_max() {
        // option goes right and terminates in state 2 (all-zero row)
        let q = vec![[0.0, 0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0, 0.0], [0.0; 5]];
        let opt = LearnedOption::from_q(0, 2, q, 3);
        assert!(opt.terminates(2));
        let mut agent = SmdpAgent::new(3, 1, 1.0, 0.99, 0.1);
        agent.set_q(2, Choice::Primitive(Action::Up), 4.0);
        agent.set_q(2, Choice::Option(0), -1.0);
        agent.intra_option_update(std::slice::from_ref(&opt), 1, Action::Right, 0.5, 2, false);
        assert!((agent.q(1, Choice::Option(0)) - (0.5 + 0.99 * 4.0)).abs() < 1e-12);
        // non-terminal continuation uses the option's own column
        agent.set_q(1, Choice::Option(0), 7.0);
        agent.intra_option_update(std::slice::from_ref(&opt), 0, Action::Right, 0.0, 1, false);
        assert!((agent.q(0, Choice::Option(0)) - 0.99 * 7.0).abs() < 1e-12);
    }

    #[test]
    fn start_at_goal() {
        let map = chain();
        let task = TaskSpec::new(2, 2);
        let env = Env { map: &map, task: &task, options: &[] };
        let mut agent = SmdpAgent::new(3, 0, 0.1, 0.99, 0.1);
        let out = run_episode(
            &env,
            &mut agent,
            &mut ExplorationScheme::uniform(),
            &mut SeedTree::new(0).stream("agent"),
            ActSettings { learn: true, epsilon: 0.1 },
            100,
            None,
        );
        assert_eq!(out.steps, 0);
        assert_eq!(out.discounted_return, 10.0);
    }

    #[test]
    fn adaptive_ratio_tracks_last_option() {
        let mut s = ExplorationScheme::adaptive(10.0, vec![10, 30]);
        assert_eq!(s.effective_ratio(), 10.0);
        s.note(Choice::Option(1));
        assert!((s.effective_ratio() - 15.0).abs() < 1e-12);
        s.note(Choice::Primitive(Action::Up));
        assert!((s.effective_ratio() - 15.0).abs() < 1e-12);
        s.note(Choice::Option(0));
        assert!((s.effective_ratio() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn option_execution_counts_visits_and_discounts() {
        let map = GridMap::open(4, 1).unwrap();
        // option walks right, terminating at state 3
        let mut q = vec![[0.0, 0.0, 1.0, 0.0, 0.0]; 4];
        q[3] = [0.0; 5];
        let opt = LearnedOption::from_q(0, 3, q, 4);
        let task = TaskSpec::new(0, 2);
        let opts = [opt];
        let env = Env { map: &map, task: &task, options: &opts };
        let mut agent = SmdpAgent::new(4, 1, 0.1, 0.99, 0.0);
        agent.set_q(0, Choice::Option(0), 1.0);
        let mut visits = vec![0u64; 4];
        let mut ep = Episode::new(&env, &mut SeedTree::new(0).stream("a"));
        let t = ep.advance(
            &env,
            &mut agent,
            &mut ExplorationScheme::uniform(),
            &mut SeedTree::new(0).stream("b"),
            ActSettings { learn: false, epsilon: 0.0 },
            usize::MAX,
            Some(&mut visits),
        );
        // the goal at state 2 cuts the option short
        assert_eq!(t.next_state, 2);
        assert_eq!(t.steps, 2);
        assert!(t.done);
        assert!((t.reward - 0.99 * 10.0).abs() < 1e-12);
        assert_eq!(visits, vec![1, 1, 0, 0]);
    }
}
