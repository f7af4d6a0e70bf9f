//! Pure exploration with successor options at two option:action ratios.
//! Frequent options pull the visitation mass towards the sub-goals.
//!
//! ```text
//! cargo run --release --example smdp_exploration -- [map] [steps] [seed]
//! ```

use successor_options::harness::{prepare_options, ExperimentConfig, Method};
use successor_options::heatmap::{mass_near, render_heatmap};
use successor_options::rng::SeedTree;
use successor_options::smdp::{exploration_visits, ExplorationScheme};
use successor_options::{maps_dir, GridMap};

const SHADES: &[u8] = b" .:-=+*%@";

fn main() -> successor_options::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("grid1", String::as_str);
    let steps: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50_000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let path = maps_dir().join(format!("{name}.map"));
    let map = GridMap::load(&path)?;

    let seeds = SeedTree::new(seed);
    let cfg = ExperimentConfig::new(&path, Method::SrNu, vec![seed]);
    let prepared = prepare_options(&cfg, &map, &seeds)?;
    let start = map.bottom_left_state();

    for ratio in [1.0, 500.0] {
        let mut scheme = ExplorationScheme::non_uniform(ratio);
        let visits = exploration_visits(&map, &prepared.options, &mut scheme, steps, start, &mut seeds.stream("walk"));
        let near = mass_near(&visits, &map, &prepared.subgoals, 2);
        println!("option:action 1:{ratio}: {:.1}% of visits within 2 steps of a sub-goal", 100.0 * near);
        let img = render_heatmap(&visits, &map)?;
        for (r, row) in img.pixels.chunks(img.width).enumerate() {
            let line: String = row
                .iter()
                .enumerate()
                .map(|(c, &p)| {
                    if map.is_blocked(r, c) {
                        '#'
                    } else {
                        SHADES[p as usize * (SHADES.len() - 1) / 255] as char
                    }
                })
                .collect();
            println!("  {line}");
        }
    }
    Ok(())
}
