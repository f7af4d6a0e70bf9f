//! Eigen-options next to successor options on the same map: where each set
//! of options terminates, and how spread out those states are.
//!
//! ```text
//! cargo run --release --example eigen_baseline -- [map] [seed] [combinatorial|normalized]
//! ```

use successor_options::harness::{prepare_options, ExperimentConfig, LaplacianChoice, Method};
use successor_options::heatmap::render_subgoals;
use successor_options::rng::SeedTree;
use successor_options::{maps_dir, GridMap};

fn main() -> successor_options::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("grid1", String::as_str);
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let laplacian = match args.get(2).map(String::as_str) {
        Some("normalized") => LaplacianChoice::Normalized,
        _ => LaplacianChoice::Combinatorial,
    };
    let path = maps_dir().join(format!("{name}.map"));
    let map = GridMap::load(&path)?;

    for method in [Method::Sr, Method::Eigen] {
        let mut cfg = ExperimentConfig::new(&path, method, vec![seed]);
        cfg.laplacian = laplacian;
        let prepared = prepare_options(&cfg, &map, &SeedTree::new(seed))?;
        let states = &prepared.subgoals;
        println!(
            "{:<6} {} options, {} distinct termination/sub-goal states, mean pairwise distance {:.2}",
            method.name(),
            prepared.options.len(),
            states.len(),
            map.mean_pairwise_distance(states)
        );
        let img = render_subgoals(states, &map);
        for row in img.pixels.chunks(img.width) {
            let line: String = row
                .iter()
                .map(|&p| match p {
                    0 => '#',
                    255 => 'G',
                    _ => '.',
                })
                .collect();
            println!("  {line}");
        }
    }
    Ok(())
}
