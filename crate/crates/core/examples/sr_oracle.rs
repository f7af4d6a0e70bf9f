//! Learns the successor representation of a map by TD and compares it with
//! the closed form `(I - γP)⁻¹`.
//!
//! ```text
//! cargo run --release --example sr_oracle -- [map] [budget] [alpha] [decay-scale]
//! ```

use std::time::Instant;

use successor_options::rng::SeedTree;
use successor_options::sr::{learn_sr, uniform_oracle, SrLearnConfig, StepSize};
use successor_options::{maps_dir, GridMap};

fn main() -> successor_options::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("grid1", String::as_str);
    let map = GridMap::load(maps_dir().join(format!("{name}.map")))?;
    let n = map.num_states();
    let budget: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50_000 * n as u64);
    let alpha: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let scale: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(300.0);

    let mut cfg = SrLearnConfig::for_map(&map, budget);
    cfg.step_size = StepSize::InvSqrt { initial: alpha, scale };
    let t0 = Instant::now();
    let sr = learn_sr(&map, &cfg, &mut SeedTree::new(0).stream("sr"));
    let learned_in = t0.elapsed();
    let oracle = uniform_oracle(&map, cfg.gamma)?;

    let err = sr.max_abs_diff(&oracle.to_dmatrix());
    let sums: Vec<f64> = (0..n).map(|s| sr.row(s).iter().sum()).collect();
    let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("{name}: {n} states, {budget} TD updates in {:.2}s", learned_in.as_secs_f64());
    println!("max |learned - exact| = {err:.4}");
    println!("row sums in [{lo:.3}, {hi:.3}] (exact {:.1})", 1.0 / (1.0 - cfg.gamma));
    Ok(())
}
