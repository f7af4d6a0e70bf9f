//! Writes the three PGM renderings for one map: SR L1 norms after a short
//! learning run, the discovered sub-goals, and visitation counts of an
//! option-heavy exploratory walk.
//!
//! ```text
//! cargo run --release --example heatmap -- [map] [out-dir] [seed]
//! ```

use std::path::PathBuf;

use successor_options::cluster::discover_subgoals;
use successor_options::harness::map_defaults;
use successor_options::heatmap::{render_heatmap, render_subgoals, render_values, Graymap};
use successor_options::options::{train_option, OptionParams, PseudoReward};
use successor_options::rng::SeedTree;
use successor_options::smdp::{exploration_visits, ExplorationScheme};
use successor_options::sr::{learn_sr, SrLearnConfig};
use successor_options::{maps_dir, GridMap};

const SHADES: &[u8] = b" .:-=+*%@";

fn preview(img: &Graymap, map: &GridMap) {
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

fn main() -> successor_options::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("grid2", String::as_str);
    let out = args.get(1).map_or_else(|| PathBuf::from("target/heatmaps"), PathBuf::from);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let map = GridMap::load(maps_dir().join(format!("{name}.map")))?;
    let n = map.num_states();
    let seeds = SeedTree::new(seed);
    std::fs::create_dir_all(&out)?;

    // a budget well short of convergence keeps the norms informative
    let short = learn_sr(&map, &SrLearnConfig::for_map(&map, 20 * n as u64), &mut seeds.stream("short"));
    let norms = render_values(&short.l1_norms(), &map)?;
    norms.save(out.join(format!("{name}-norms.pgm")))?;
    println!("SR L1 norms after {} updates:", short.update_count());
    preview(&norms, &map);

    let sr = learn_sr(&map, &SrLearnConfig::for_map(&map, 50_000 * n as u64), &mut seeds.stream("sr"));
    let reached = sr.reached_states();
    let (_, goals) = discover_subgoals(&sr, &reached, map_defaults(name).0, &mut seeds.stream("cluster"), 100)?;
    let marks = render_subgoals(&goals.landmarks(), &map);
    marks.save(out.join(format!("{name}-subgoals.pgm")))?;
    println!("{} sub-goals:", goals.len());
    preview(&marks, &map);

    let options: Vec<_> = goals
        .goals
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let pr = PseudoReward::from_sr(&sr, g.landmark);
            train_option(&map, i, &pr, &OptionParams::default(), &mut seeds.indexed("option", i as u64))
        })
        .collect();
    let mut scheme = ExplorationScheme::non_uniform(1.0);
    let visits = exploration_visits(&map, &options, &mut scheme, 50_000, map.bottom_left_state(), &mut seeds.stream("walk"));
    let heat = render_heatmap(&visits, &map)?;
    heat.save(out.join(format!("{name}-visits.pgm")))?;
    println!("visits, options and primitives drawn 1:1:");
    preview(&heat, &map);

    println!("wrote {name}-{{norms,subgoals,visits}}.pgm to {}", out.display());
    Ok(())
}
