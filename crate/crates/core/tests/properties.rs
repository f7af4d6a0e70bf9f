//! Property tests over randomly generated maps, matrices and inputs.

use proptest::prelude::*;
use rand::Rng as _;
use successor_options::cluster::{filter_by_norms, kmeans_pp};
use successor_options::eigen::{spectrum, LaplacianKind};
use successor_options::harness::generate_tasks;
use successor_options::heatmap::{render_heatmap, Graymap};
use successor_options::options::PseudoReward;
use successor_options::rng::SeedTree;
use successor_options::smdp::{ExplorationScheme, SmdpAgent};
use successor_options::sr::{learn_sr, SrLearnConfig, SrMatrix};
use successor_options::{Action, GridMap};

/// Random maps up to 6x6 with at least one free cell.
fn any_map() -> impl Strategy<Value = GridMap> {
    (1usize..7, 1usize..7)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(prop::bool::weighted(0.3), w * h)))
        .prop_map(|(w, h, mut blocked)| {
            blocked[0] = false;
            GridMap::from_mask(w, h, blocked).unwrap()
        })
}

fn connected_map() -> impl Strategy<Value = GridMap> {
    any_map().prop_filter("connected", |m| m.is_connected() && m.num_states() >= 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sr_stays_nonnegative_and_bounded(map in any_map(), alpha in 0.01f64..=1.0, seed in any::<u64>()) {
        let n = map.num_states();
        let g = 0.99;
        let mut sr = SrMatrix::zeros(n, g);
        let mut rng = SeedTree::new(seed).stream("walk");
        let bound = 1.0 / (1.0 - g) + alpha * (1.0 + g / (1.0 - g));
        let mut s = 0;
        for _ in 0..2000 {
            let next = map.next_state(s, Action::ALL[rng.random_range(0..5)]);
            sr.td_update(s, next, alpha).unwrap();
            s = if rng.random::<f64>() < 0.05 { rng.random_range(0..n) } else { next };
        }
        for r in 0..n {
            prop_assert!(sr.row(r).iter().all(|&x| x >= 0.0));
            prop_assert!(sr.row(r).iter().sum::<f64>() <= bound + 1e-9);
        }
    }

    #[test]
    fn sr_coverage_grows_with_budget(map in any_map(), seed in any::<u64>(), small in 1u64..500, extra in 0u64..2000) {
        let learn = |budget| learn_sr(&map, &SrLearnConfig::for_map(&map, budget), &mut SeedTree::new(seed).stream("sr"));
        let a = learn(small).reached_states();
        let b = learn(small + extra).reached_states();
        prop_assert!(a.iter().all(|s| b.contains(s)));
        prop_assert_eq!(learn(small), learn(small));
    }

    #[test]
    fn uniform_transition_rows_sum_to_one(map in any_map()) {
        let p = map.transition_matrix(&map.uniform_policy()).unwrap();
        for s in 0..map.num_states() {
            prop_assert!((p.row(s).sum() - 1.0).abs() < 1e-9);
            prop_assert!(p[(s, s)] >= 0.2 - 1e-12);
        }
    }

    #[test]
    fn kmeans_objective_never_increases(
        points in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 4..60),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        let run = || kmeans_pp(&refs, k, &mut SeedTree::new(seed).stream("cluster"), 100);
        if let Ok(res) = run() {
            for w in res.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{} -> {}", w[0], w[1]);
            }
            prop_assert_eq!(res.cluster_sizes.iter().sum::<usize>(), points.len());
            prop_assert_eq!(&res, &run().unwrap());
        }
    }

    #[test]
    fn greedy_choice_ignores_positive_scaling(
        values in proptest::collection::vec(-5i32..5, 8),
        c in 0.01f64..100.0,
        seed in any::<u64>(),
    ) {
        // small integer values make ties common
        let mut agent = SmdpAgent::new(1, 3, 0.1, 0.99, 0.0);
        for (col, v) in values.iter().enumerate() {
            agent.set_q(0, successor_options::Choice::from_column(col), *v as f64);
        }
        let mut scaled = agent.clone();
        scaled.scale(c);
        let (mut r1, mut r2) = (SeedTree::new(seed).stream("g"), SeedTree::new(seed).stream("g"));
        let (mut s1, mut s2) = (ExplorationScheme::uniform(), ExplorationScheme::uniform());
        for _ in 0..50 {
            prop_assert_eq!(agent.choose(&mut s1, 0, &mut r1), scaled.choose(&mut s2, 0, &mut r2));
        }
    }

    #[test]
    fn pseudo_rewards_telescope(
        map in any_map(),
        seed in any::<u64>(),
        len in 0usize..300,
    ) {
        let n = map.num_states();
        let mut rng = SeedTree::new(seed).stream("t");
        let psi: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let pr = PseudoReward::from_potential(psi.clone());
        let start = rng.random_range(0..n);
        let mut s = start;
        let mut total = 0.0;
        for _ in 0..len {
            let next = map.next_state(s, Action::ALL[rng.random_range(0..5)]);
            total += pr.reward(s, next);
            s = next;
        }
        prop_assert!((total - (psi[s] - psi[start])).abs() < 1e-9);
    }

    #[test]
    fn one_hot_features_give_the_same_reward(map in any_map(), seed in any::<u64>()) {
        let n = map.num_states();
        let mut rng = SeedTree::new(seed).stream("phi");
        let psi: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let pr = PseudoReward::from_potential(psi.clone());
        let phi = |s: usize| (0..n).map(|i| if i == s { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
        for _ in 0..20 {
            let s = rng.random_range(0..n);
            let t = map.next_state(s, Action::ALL[rng.random_range(0..5)]);
            let (fs, ft) = (phi(s), phi(t));
            let dot: f64 = (0..n).map(|i| psi[i] * (ft[i] - fs[i])).sum();
            prop_assert_eq!(pr.reward(s, t), dot);
        }
    }

    #[test]
    fn candidates_are_strict_subsets_of_reached(
        norms in proptest::collection::vec(prop_oneof![Just(0.0), 0.5f64..100.0], 2..80),
        lo in 0.0f64..50.0,
        width in 1.0f64..50.0,
    ) {
        let hi = lo + width;
        let reached: Vec<usize> = (0..norms.len()).filter(|&s| norms[s] > 0.0).collect();
        match filter_by_norms(&norms, lo, hi) {
            Ok(c) => {
                prop_assert!(c.iter().all(|s| reached.contains(s)));
                prop_assert!(c.len() < reached.len());
            }
            Err(_) => prop_assert!(reached.len() < 2),
        }
    }

    #[test]
    fn laplacian_eigenpairs_are_exact(map in connected_map()) {
        let sp = spectrum(&map, LaplacianKind::Combinatorial).unwrap();
        let l = successor_options::eigen::build_laplacian(&map, LaplacianKind::Combinatorial).unwrap();
        prop_assert!(sp.eigenvalues[0].abs() < 1e-9);
        for (lambda, v) in sp.eigenvalues.iter().zip(&sp.eigenvectors) {
            prop_assert!((&l * v - v * *lambda).amax() < 1e-6);
            prop_assert!((v.norm() - 1.0).abs() < 1e-6);
        }
        for i in 0..sp.len() {
            for j in 0..i {
                prop_assert!(sp.eigenvectors[i].dot(&sp.eigenvectors[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn tasks_never_start_at_their_goal(map in connected_map(), n in 1usize..50, seed in any::<u64>()) {
        let tasks = generate_tasks(&map, n, 0.99, &mut SeedTree::new(seed).stream("tasks")).unwrap();
        prop_assert_eq!(tasks.len(), n);
        for t in tasks {
            prop_assert_ne!(t.start, successor_options::Start::Fixed(t.goal));
        }
    }

    #[test]
    fn heatmaps_survive_both_encodings(map in any_map(), seed in any::<u64>()) {
        let mut rng = SeedTree::new(seed).stream("counts");
        let counts: Vec<u64> = (0..map.num_states()).map(|_| rng.random_range(0..1000)).collect();
        let img = render_heatmap(&counts, &map).unwrap();
        prop_assert_eq!(&Graymap::parse(&img.to_p5()).unwrap(), &img);
        prop_assert_eq!(&Graymap::parse(img.to_p2().as_bytes()).unwrap(), &img);
        for r in 0..map.height() {
            for c in 0..map.width() {
                if map.is_blocked(r, c) {
                    prop_assert_eq!(img.pixel(r, c), 0);
                }
            }
        }
    }
}
