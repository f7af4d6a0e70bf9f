use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use successor_options::harness::{compare, generate_tasks, run_experiment, task_start, ExperimentConfig};
use successor_options::heatmap::{read_counts, render_heatmap};
use successor_options::rng::SeedTree;
use successor_options::{Error, GridMap};

#[derive(Parser)]
#[command(name = "sropt", about = "Successor-option experiments on grid worlds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment described by a TOML config.
    Run { config: PathBuf },
    /// Print `n` random start/goal tasks for a map.
    Tasks { map: PathBuf, n: usize, seed: u64 },
    /// Render a visitation counts file as a PGM heatmap.
    Render {
        counts: PathBuf,
        map: PathBuf,
        /// Output image; defaults to the counts path with a .pgm extension.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Summarize run directories by area under the curve.
    Compare { record_dir: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io(_) | Error::Format { .. } => 3,
        Error::MapParse { .. } | Error::Disconnected | Error::TooFewStates { .. } => 4,
        _ => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cmd: Cmd) -> successor_options::Result<ExitCode> {
    match cmd {
        Cmd::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run_experiment(&cfg)?;
            for r in &out.records {
                match &r.error {
                    None => println!(
                        "seed {}: auc {:.4} final {:.4} ({:.1}s)",
                        r.seed,
                        successor_options::harness::auc(&r.curve),
                        r.curve.last().map_or(0.0, |p| p.mean_return),
                        r.wall_time.as_secs_f64()
                    ),
                    Some(e) => println!("seed {}: failed: {e}", r.seed),
                }
            }
            println!("results in {}", out.dir.display());
            Ok(if out.failed() > 0 {
                ExitCode::from(5)
            } else {
                ExitCode::SUCCESS
            })
        }
        Cmd::Tasks { map, n, seed } => {
            let map = GridMap::load(&map)?;
            let tasks = generate_tasks(&map, n, 0.99, &mut SeedTree::new(seed).stream("tasks"))?;
            println!("start,goal,start_row,start_col,goal_row,goal_col");
            for t in tasks {
                let s = task_start(&t).expect("generated tasks have fixed starts");
                let (sr, sc) = map.cell(s);
                let (gr, gc) = map.cell(t.goal);
                println!("{s},{},{sr},{sc},{gr},{gc}", t.goal);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Render { counts, map, out } => {
            let map = GridMap::load(&map)?;
            let img = render_heatmap(&read_counts(&counts)?, &map)?;
            let out = out.unwrap_or_else(|| counts.with_extension("pgm"));
            img.save(&out)?;
            println!("{}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Compare { record_dir } => {
            let rows = compare(&record_dir)?;
            if rows.is_empty() {
                return Err(Error::Config(format!("no curve.csv under {}", record_dir.display())));
            }
            println!("{:<28} {:<12} {:>10} {:>10} {:>10}", "run", "method", "auc", "initial", "final");
            for r in rows {
                println!(
                    "{:<28} {:<12} {:>10.4} {:>10.4} {:>10.4}",
                    r.name, r.method, r.auc, r.initial_return, r.final_return
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
