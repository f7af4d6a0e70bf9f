//! Finite-horizon exploration from a fixed corner: plain successor options
//! against the incremental variant at the same total step budget.
//!
//! ```text
//! cargo run --release --example incremental -- [map] [seed] [option-budget] [explore-budget] [ratio]
//! ```

use successor_options::incremental::{plain_finite_horizon, run_incremental, IncrementalConfig};
use successor_options::options::OptionParams;
use successor_options::rng::SeedTree;
use successor_options::{maps_dir, GridMap, TaskSpec};

fn main() -> successor_options::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("grid4", String::as_str);
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let map = GridMap::load(maps_dir().join(format!("{name}.map")))?;
    let n = map.num_states();

    let mut cfg = IncrementalConfig::default();
    if let Some(b) = args.get(2).and_then(|s| s.parse().ok()) {
        cfg.option_params = OptionParams {
            budget: b,
            ..cfg.option_params
        };
    }
    if let Some(b) = args.get(3).and_then(|s| s.parse().ok()) {
        cfg.explore_budget = b;
    }
    if let Some(r) = args.get(4).and_then(|s| s.parse().ok()) {
        cfg.option_sampling_ratio = r;
    }
    let task = TaskSpec::new(map.bottom_left_state(), map.top_right_state()).with_horizon(100);
    let seeds = SeedTree::new(seed);

    let inc = run_incremental(&map, &task, &cfg, &seeds)?;
    for snap in &inc.snapshots {
        println!(
            "iteration {}: {:>3}/{n} states reached, {} candidates, {} sub-goals, {} option invocations",
            snap.iteration,
            snap.coverage,
            snap.candidates.len(),
            snap.subgoals.len(),
            snap.stats.options_invoked
        );
    }
    let budget = inc.total_steps();
    let (plain_sr, plain_goals) =
        plain_finite_horizon(&map, &task, budget, cfg.k_final, cfg.sr_step, &seeds.child("plain", 0))?;
    let plain_reach = plain_sr.reached_states();
    let inc_reach = inc.sr.reached_states();
    println!("budget {budget} steps");
    println!(
        "plain:       {:>5.1}% of states reached",
        100.0 * plain_reach.len() as f64 / n as f64
    );
    println!(
        "incremental: {:>5.1}% of states reached",
        100.0 * inc_reach.len() as f64 / n as f64
    );
    let beyond: Vec<usize> = inc
        .subgoals
        .landmarks()
        .into_iter()
        .filter(|s| plain_sr.row_updates(*s) == 0)
        .collect();
    println!(
        "{} of {} final sub-goals lie where plain exploration never went",
        beyond.len(),
        inc.subgoals.len()
    );

    let mark = |states: &[usize], r: usize, c: usize| match map.state_at(r, c) {
        None => '#',
        Some(s) if states.contains(&s) => 'G',
        Some(s) if plain_sr.row_updates(s) > 0 => '.',
        Some(s) if inc.sr.row_updates(s) > 0 => '+',
        Some(_) => ' ',
    };
    println!("'.' reached by both, '+' only by incremental, G sub-goal");
    for (title, goals) in [("plain", plain_goals.landmarks()), ("incremental", inc.subgoals.landmarks())] {
        println!("{title}:");
        for r in 0..map.height() {
            let line: String = (0..map.width()).map(|c| mark(&goals, r, c)).collect();
            println!("  {line}");
        }
    }
    Ok(())
}
