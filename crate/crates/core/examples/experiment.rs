//! Runs experiment configs through the harness and prints the comparison
//! table, as `sropt run` followed by `sropt compare` would.
//!
//! ```text
//! cargo run --release --example experiment -- [config.toml ...]
//! ```

use std::path::PathBuf;

use successor_options::harness::{auc, compare, run_experiment, ExperimentConfig};

fn main() -> successor_options::Result<()> {
    let mut configs: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if configs.is_empty() {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
        configs = ["grid1-q", "grid1-sr-nu", "grid1-sr-ae"]
            .iter()
            .map(|c| dir.join(format!("{c}.toml")))
            .collect();
    }

    let mut roots = Vec::new();
    for path in &configs {
        let cfg = ExperimentConfig::load(path)?;
        let (k, e) = cfg.k_and_e();
        println!(
            "{}: {} on {}, k={k} e={e}, {} seeds",
            cfg.name(),
            cfg.method.name(),
            cfg.map.display(),
            cfg.seeds.len()
        );
        let out = run_experiment(&cfg)?;
        for r in &out.records {
            match &r.error {
                None => println!("  seed {}: auc {:.4} in {:.1}s", r.seed, auc(&r.curve), r.wall_time.as_secs_f64()),
                Some(e) => println!("  seed {}: failed: {e}", r.seed),
            }
        }
        if let Some(parent) = out.dir.parent() {
            if !roots.contains(&parent.to_path_buf()) {
                roots.push(parent.to_path_buf());
            }
        }
    }

    for root in roots {
        println!("\n{}", root.display());
        for s in compare(&root)? {
            println!(
                "  {:<24} {:<12} auc {:.4}  return {:.3} -> {:.3}",
                s.name, s.method, s.auc, s.initial_return, s.final_return
            );
        }
    }
    Ok(())
}
