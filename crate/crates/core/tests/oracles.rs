//! Checks against independently computed reference values.

use std::collections::VecDeque;

use rand::Rng as _;
use successor_options::cluster::{discover_subgoals, kmeans_pp};
use successor_options::eigen::{build_laplacian, spectrum, train_eigen_options, LaplacianKind};
use successor_options::harness::generate_tasks;
use successor_options::incremental::update_sr_with_options;
use successor_options::options::{train_option, LearnedOption, OptionParams, PseudoReward};
use successor_options::rng::{Rng, SeedTree};
use successor_options::smdp::{run_episode, ActSettings, Env, ExplorationScheme, SmdpAgent};
use successor_options::sr::{learn_sr, uniform_oracle, SrLearnConfig, SrMatrix, StepSize};
use successor_options::{maps_dir, Action, Choice, GridMap, TaskSpec};

fn load(name: &str) -> GridMap {
    GridMap::load(maps_dir().join(format!("{name}.map"))).unwrap()
}

fn rng(name: &str) -> Rng {
    SeedTree::new(42).stream(name)
}

/// Breadth-first distances written out independently of the crate.
fn bfs(map: &GridMap, from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; map.num_states()];
    let mut queue = VecDeque::from([from]);
    dist[from] = 0;
    while let Some(s) = queue.pop_front() {
        for a in Action::ALL {
            let t = map.next_state(s, a);
            if dist[t] == usize::MAX {
                dist[t] = dist[s] + 1;
                queue.push_back(t);
            }
        }
    }
    dist
}

#[test]
fn sampled_transitions_match_uniform_matrix() {
    let map = load("two_rooms");
    let n = map.num_states();
    let p = map.transition_matrix(&map.uniform_policy()).unwrap();
    let mut rng = rng("mc");
    let draws = 100_000;
    for s in 0..n {
        let mut counts = vec![0u32; n];
        for _ in 0..draws {
            counts[map.next_state(s, Action::ALL[rng.random_range(0..5)])] += 1;
        }
        for t in 0..n {
            let freq = counts[t] as f64 / draws as f64;
            assert!((freq - p[(s, t)]).abs() < 0.02, "P[{s}][{t}] = {} vs {freq}", p[(s, t)]);
        }
    }
}

#[test]
fn two_state_sr_matches_direct_solve() {
    let map = GridMap::open(2, 1).unwrap();
    let g: f64 = 0.99;
    // (I - γP) for P = [[.8,.2],[.2,.8]], inverted by the 2x2 formula
    let (a, b) = (1.0 - g * 0.8, -g * 0.2);
    let det = a * a - b * b;
    let exact = [[a / det, -b / det], [-b / det, a / det]];
    assert!((exact[0][0] + exact[0][1] - 100.0).abs() < 1e-9);

    let sr = learn_sr(&map, &SrLearnConfig::for_map(&map, 1_000_000), &mut rng("pair"));
    for (i, row) in exact.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            assert!((sr.get(i, j) - x).abs() < 0.5, "psi[{i}][{j}] = {} vs {x}", sr.get(i, j));
        }
    }
}

#[test]
fn open_grid_sr_converges_to_closed_form() {
    let map = load("open5x5");
    let sr = learn_sr(&map, &SrLearnConfig::for_map(&map, 2_000_000), &mut rng("sr"));
    let exact = uniform_oracle(&map, 0.99).unwrap();
    assert!(sr.max_abs_diff(&exact.to_dmatrix()) < 1.0);
    for s in 0..map.num_states() {
        assert!((exact.row(s).iter().sum::<f64>() - 100.0).abs() < 1e-6);
    }
}

#[test]
fn two_blobs_are_recovered() {
    let mut r = rng("blobs");
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        let label = i % 2;
        let cx = if label == 0 { -50.0 } else { 50.0 };
        points.push(vec![cx + r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]);
        labels.push(label);
    }
    let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
    let res = kmeans_pp(&refs, 2, &mut r, 100).unwrap();
    let flip = res.assignment[0] != labels[0];
    for (a, l) in res.assignment.iter().zip(&labels) {
        assert_eq!((*a == 1) ^ flip, *l == 1);
    }
}

#[test]
fn open_grid_landmarks_one_per_quadrant() {
    let map = load("open5x5");
    let sr = uniform_oracle(&map, 0.99).unwrap();
    let all: Vec<usize> = (0..25).collect();
    // quadrants share the middle row and column
    let quadrants = [(0..=2, 0..=2), (0..=2, 2..=4), (2..=4, 0..=2), (2..=4, 2..=4)];
    for seed in 0..5 {
        let (_, goals) = discover_subgoals(&sr, &all, 4, &mut SeedTree::new(seed).stream("cluster"), 100).unwrap();
        let cells: Vec<(usize, usize)> = goals.landmarks().into_iter().map(|s| map.cell(s)).collect();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|&(r, c)| r != 2 || c != 2), "center chosen: {cells:?}");
        let fits = |perm: &[usize]| {
            perm.iter()
                .zip(&cells)
                .all(|(&q, (r, c))| quadrants[q].0.contains(r) && quadrants[q].1.contains(c))
        };
        let mut found = false;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let perm = [a, b, c, d];
                        let mut sorted = perm;
                        sorted.sort();
                        found |= sorted == [0, 1, 2, 3] && fits(&perm);
                    }
                }
            }
        }
        assert!(found, "seed {seed}: {cells:?}");
    }
}

#[test]
fn chain_center_attracts() {
    let map = GridMap::open(3, 1).unwrap();
    let sr = uniform_oracle(&map, 0.99).unwrap();
    let pr = PseudoReward::from_sr(&sr, 1);
    assert!(pr.reward(0, 1) > 0.0);
    assert!(pr.reward(2, 1) > 0.0);
    assert_eq!(pr.reward(1, 1), 0.0);
}

#[test]
fn center_option_follows_shortest_paths() {
    let map = load("open5x5");
    let sr = uniform_oracle(&map, 0.99).unwrap();
    let center = map.state_at(2, 2).unwrap();
    let pr = PseudoReward::from_sr(&sr, center);
    assert_eq!(pr.peak(), center);
    let opt = train_option(&map, 0, &pr, &OptionParams::default(), &mut rng("option"));
    let dist = bfs(&map, center);
    for (s, &d) in dist.iter().enumerate() {
        let run = opt.execute(&map, s).unwrap();
        assert_eq!(run.end(), center, "from {s}");
        assert_eq!(run.steps(), d);
        assert!(run.steps() <= 8);
    }
    let corner = map.state_at(0, 0).unwrap();
    assert_eq!(opt.execute(&map, corner).unwrap().end(), pr.peak());
}

#[test]
fn peak_terminates_on_small_maps() {
    for name in ["open5x5", "two_rooms", "grid1"] {
        let map = load(name);
        let sr = uniform_oracle(&map, 0.99).unwrap();
        let mut r = rng(name);
        for _ in 0..3 {
            let pr = PseudoReward::from_sr(&sr, r.random_range(0..map.num_states()));
            let opt = train_option(&map, 0, &pr, &OptionParams::default(), &mut r);
            assert!(opt.value(pr.peak()) <= 0.0, "{name}: V(peak) = {}", opt.value(pr.peak()));
            assert!(!opt.termination_states().is_empty());
        }
    }
}

#[test]
fn non_uniform_option_frequency() {
    let agent = SmdpAgent::new(1, 3, 0.1, 0.99, 1.0);
    let mut scheme = ExplorationScheme::non_uniform(15.0);
    let mut r = rng("nu");
    let draws = 1_000_000;
    let hits = (0..draws)
        .filter(|_| matches!(agent.choose(&mut scheme, 0, &mut r), Choice::Option(_)))
        .count() as f64;
    let p = 1.0 / 16.0;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    assert!((hits - draws as f64 * p).abs() < 3.0 * sigma, "{hits} option picks");
}

#[test]
fn adaptive_with_equal_clusters_replays_non_uniform() {
    let agent = SmdpAgent::new(1, 4, 0.1, 0.99, 1.0);
    let mut nu = ExplorationScheme::non_uniform(15.0);
    let mut ae = ExplorationScheme::adaptive(15.0, vec![7; 4]);
    let (mut r1, mut r2) = (rng("ae"), rng("ae"));
    for _ in 0..10_000 {
        assert_eq!(agent.choose(&mut nu, 0, &mut r1), agent.choose(&mut ae, 0, &mut r2));
    }
}

/// Value iteration over primitive actions with the goal absorbing at value 0.
fn value_iteration(map: &GridMap, goal: usize, gamma: f64) -> Vec<f64> {
    let mut v = vec![0.0; map.num_states()];
    for _ in 0..10_000 {
        let mut next = v.clone();
        for (s, x) in next.iter_mut().enumerate() {
            *x = Action::ALL
                .iter()
                .map(|&a| {
                    let t = map.next_state(s, a);
                    if t == goal {
                        10.0
                    } else {
                        gamma * v[t]
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
        v = next;
    }
    v
}

#[test]
fn chain_values_match_value_iteration() {
    let map = GridMap::open(3, 1).unwrap();
    let g: f64 = 0.99;
    let vi = value_iteration(&map, 2, g);
    assert!((vi[0] - 10.0 * g).abs() < 1e-12);
    assert!((vi[1] - 10.0).abs() < 1e-12);

    let mut agent = SmdpAgent::new(3, 0, 0.1, g, 0.1);
    let mut scheme = ExplorationScheme::uniform();
    let mut r = rng("chain");
    let settings = ActSettings { learn: true, epsilon: 0.3 };
    for i in 0..5000 {
        let task = TaskSpec::new(i % 2, 2);
        let env = Env { map: &map, task: &task, options: &[] };
        run_episode(&env, &mut agent, &mut scheme, &mut r, settings, 100, None);
    }
    for (s, d) in [(0, 2), (1, 1)] {
        let expect = 10.0 * g.powi(d - 1);
        assert!((agent.value(s) - expect).abs() < 1e-6, "V({s}) = {}", agent.value(s));
        assert!((agent.value(s) - vi[s]).abs() < 1e-6);
    }
}

#[test]
fn intra_option_updates_hold_the_fixed_point() {
    let map = GridMap::open(3, 1).unwrap();
    let g: f64 = 0.99;
    let vi = value_iteration(&map, 2, g);
    // one option stepping right everywhere, terminating only at the right end
    let right = |s: usize| {
        let mut row = [0.0; 5];
        if s < 2 {
            row[Action::Right.index()] = 1.0;
        }
        row
    };
    let opt = LearnedOption::from_q(0, 2, (0..3).map(right).collect(), 3);
    let mut agent = SmdpAgent::new(3, 1, 0.1, g, 0.0);
    for s in 0..2 {
        for a in Action::ALL {
            let t = map.next_state(s, a);
            let q = if t == 2 { 10.0 } else { g * vi[t] };
            agent.set_q(s, Choice::Primitive(a), q);
        }
        // the option moves right, which is optimal here
        agent.set_q(s, Choice::Option(0), vi[s]);
    }
    let before = agent.clone();
    for s in 0..2 {
        let t = map.next_state(s, Action::Right);
        let r = if t == 2 { 10.0 } else { 0.0 };
        assert_eq!(agent.intra_option_update(std::slice::from_ref(&opt), s, Action::Right, r, t, t == 2), 1);
    }
    for s in 0..3 {
        for c in 0..6 {
            let ch = Choice::from_column(c);
            assert!((agent.q(s, ch) - before.q(s, ch)).abs() < 1e-9);
        }
    }
}

/// Textbook ε-greedy tabular Q-learning drawing randomness in the same order.
fn textbook_q_learning(map: &GridMap, task: &TaskSpec, episodes: usize, r: &mut Rng) -> Vec<[f64; 5]> {
    let (alpha, gamma, eps) = (0.1, task.gamma, 0.1);
    let mut q = vec![[0.0f64; 5]; map.num_states()];
    for _ in 0..episodes {
        let mut s = match task.start {
            successor_options::Start::Fixed(s) => s,
            successor_options::Start::Uniform => unreachable!(),
        };
        let mut steps = 0;
        while s != task.goal && steps < 200 {
            let a = if r.random::<f64>() < eps {
                r.random_range(0..5)
            } else {
                let m = q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ties: Vec<usize> = (0..5).filter(|&a| q[s][a] == m).collect();
                if ties.len() > 1 {
                    ties[r.random_range(0..ties.len())]
                } else {
                    ties[0]
                }
            };
            let t = map.next_state(s, Action::ALL[a]);
            let done = t == task.goal;
            let reward = if done { 10.0 } else { 0.0 };
            let boot = if done {
                0.0
            } else {
                gamma * q[t].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            q[s][a] += alpha * (reward + boot - q[s][a]);
            s = t;
            steps += 1;
        }
    }
    q
}

#[test]
fn flat_agent_is_textbook_q_learning() {
    let map = load("two_rooms");
    let task = TaskSpec::new(0, map.num_states() - 1);
    let expected = textbook_q_learning(&map, &task, 200, &mut rng("flat"));

    let mut agent = SmdpAgent::new(map.num_states(), 0, 0.1, task.gamma, 0.1);
    let mut scheme = ExplorationScheme::uniform();
    let mut r = rng("flat");
    let env = Env { map: &map, task: &task, options: &[] };
    let settings = ActSettings { learn: true, epsilon: 0.1 };
    for _ in 0..200 {
        run_episode(&env, &mut agent, &mut scheme, &mut r, settings, 200, None);
    }
    for (s, row) in expected.iter().enumerate() {
        for (a, &x) in row.iter().enumerate() {
            assert_eq!(agent.row(s)[a].to_bits(), x.to_bits(), "q[{s}][{a}]");
        }
    }
}

#[test]
fn task_starts_are_uniform() {
    let map = load("grid1");
    let n = map.num_states();
    let tasks = generate_tasks(&map, 100_000, 0.99, &mut rng("tasks")).unwrap();
    let mut counts = vec![0f64; n];
    for t in &tasks {
        assert_ne!(t.start, successor_options::Start::Fixed(t.goal));
        if let successor_options::Start::Fixed(s) = t.start {
            counts[s] += 1.0;
        }
    }
    let expect = tasks.len() as f64 / n as f64;
    let chi2: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
    // 103 degrees of freedom; the 0.999 quantile is about 153
    assert!(chi2 < 153.0, "chi2 = {chi2}");
}

#[test]
fn fiedler_vector_splits_two_rooms() {
    let map = load("two_rooms");
    let l = build_laplacian(&map, LaplacianKind::Combinatorial).unwrap();
    let sp = spectrum(&map, LaplacianKind::Combinatorial).unwrap();
    assert!(sp.eigenvalues[0].abs() < 1e-9);
    let v = &sp.eigenvectors[1];
    assert!(((&l * v) - v * sp.eigenvalues[1]).amax() < 1e-6);
    let side = |s: usize| map.cell(s).1.cmp(&5);
    let left: Vec<f64> = (0..map.num_states()).filter(|&s| side(s).is_lt()).map(|s| v[s]).collect();
    let right: Vec<f64> = (0..map.num_states()).filter(|&s| side(s).is_gt()).map(|s| v[s]).collect();
    let sign = left[0].signum();
    assert!(left.iter().all(|x| x.signum() == sign));
    assert!(right.iter().all(|x| x.signum() == -sign));

    // ascending +v ends in the room where v is positive
    let opts = train_eigen_options(&map, &sp, 1, &OptionParams::default(), &SeedTree::new(1)).unwrap();
    for s in 0..map.num_states() {
        let end = opts[0].execute(&map, s).unwrap().end();
        assert!(v[end] > 0.0, "from {s} ended at {end}");
    }
}

/// An option that walks shortest paths to `target`.
fn goto_option(map: &GridMap, target: usize) -> LearnedOption {
    let d = bfs(map, target);
    let q = (0..map.num_states())
        .map(|s| {
            let mut row = [0.0; 5];
            for a in Action::ALL {
                row[a.index()] = d[s] as f64 - d[map.next_state(s, a)] as f64;
            }
            row
        })
        .collect();
    LearnedOption::from_q(0, target, q, map.num_states())
}

#[test]
fn corridor_option_extends_sr_reach() {
    let map = load("corridors");
    let start = map.bottom_left_state();
    let target = map.state_at(4, 40).unwrap();
    let far_room: Vec<usize> = (0..map.num_states()).filter(|&s| map.cell(s).1 >= 32).collect();
    let horizon = 70;
    assert!(bfs(&map, start)[target] < horizon);
    let opt = goto_option(&map, target);
    assert_eq!(opt.execute(&map, start).unwrap().end(), target);

    let step = StepSize::default();
    let budget = 50_000;
    let mut plain = SrMatrix::zeros(map.num_states(), 0.99);
    update_sr_with_options(&mut plain, &map, &[], budget, 1.0, start, horizon, &step, &mut rng("a"));
    let mut assisted = SrMatrix::zeros(map.num_states(), 0.99);
    let stats = update_sr_with_options(&mut assisted, &map, &[opt], budget, 1.0, start, horizon, &step, &mut rng("a"));

    assert!(far_room.iter().all(|&s| plain.row_updates(s) == 0));
    assert!(far_room.iter().any(|&s| assisted.row_updates(s) > 0));
    assert!(stats.option_steps > 0);
    assert_eq!(assisted.update_count(), stats.primitive_steps);
}
