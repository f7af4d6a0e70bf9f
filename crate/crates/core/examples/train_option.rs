//! Discovers sub-goals from the exact SR of a map, trains one option per
//! sub-goal on the pseudo-reward, and checks where each greedy rollout ends.
//!
//! ```text
//! cargo run --release --example train_option -- [map] [k] [option-budget]
//! ```

use successor_options::cluster::discover_subgoals;
use successor_options::harness::map_defaults;
use successor_options::options::{train_option, OptionParams, PseudoReward};
use successor_options::rng::SeedTree;
use successor_options::sr::uniform_oracle;
use successor_options::{maps_dir, GridMap};

fn main() -> successor_options::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("grid1", String::as_str);
    let map = GridMap::load(maps_dir().join(format!("{name}.map")))?;
    let n = map.num_states();
    let k = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(map_defaults(name).0);
    let params = OptionParams {
        budget: args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200_000),
        ..OptionParams::default()
    };

    let seeds = SeedTree::new(0);
    let sr = uniform_oracle(&map, 0.99)?;
    let all: Vec<usize> = (0..n).collect();
    let (_, goals) = discover_subgoals(&sr, &all, k, &mut seeds.stream("cluster"), 100)?;

    println!("{name}: {n} states, {} sub-goals", goals.len());
    for (i, g) in goals.goals.iter().enumerate() {
        let pr = PseudoReward::from_sr(&sr, g.landmark);
        let opt = train_option(&map, i, &pr, &params, &mut seeds.indexed("option", i as u64));
        let peak = pr.potential()[pr.peak()];
        let mut near_peak = 0;
        let mut total_steps = 0;
        for s in 0..n {
            let run = opt.execute(&map, s)?;
            total_steps += run.steps();
            if !run.truncated && pr.potential()[run.end()] >= 0.99 * peak {
                near_peak += 1;
            }
        }
        let (r, c) = map.cell(g.landmark);
        println!(
            "option {i}: sub-goal ({r},{c}) cluster {:>3} states, {:.1}% of starts end near the peak, mean rollout {:.1} steps",
            g.cluster_size,
            100.0 * near_peak as f64 / n as f64,
            total_steps as f64 / n as f64
        );
    }
    Ok(())
}
