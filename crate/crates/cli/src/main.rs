use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modalnav::costmap::generate_costmap;
use modalnav::grid::GridText;
use modalnav::perception::compute_traversability;
use modalnav::postprocess::first_blocked_edge;
use modalnav::render::render_costmap;
use modalnav::scenario::{plan_scenario, write_report, Comparison};
use modalnav::{run_scenario, ElevationGrid, Error, ModalPath, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "modalnav",
    version,
    about = "Energy-aware ground/aerial path planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (key = value lines).
    config: PathBuf,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; defaults to the config's output_dir or out/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Plan and prune a path, write path, metrics, costmap and image.
    Plan(RunArgs),
    /// Plan, then execute the path in the kinematic simulator and write the trace too.
    Simulate(RunArgs),
    /// Print the multimodal plan against the fly-everything baseline.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the report files.
        #[arg(long)]
        write: bool,
    },
    /// Render a costmap grid with a path overlay as a binary PPM.
    Render {
        costmap: PathBuf,
        path: PathBuf,
        out: PathBuf,
        /// Cost at and above which cells are aerial-only.
        #[arg(long, default_value_t = 60.0)]
        energy_ratio: f64,
    },
    /// Check every edge of a path file against a heightmap.
    Validate {
        path: PathBuf,
        heightmap: PathBuf,
        /// Override a planning parameter; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn apply_overrides(cfg: &mut ScenarioConfig, sets: &[String]) -> modalnav::Result<()> {
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::InvalidParam(format!("--set expects KEY=VALUE, got {s:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn load_config(args: &RunArgs) -> modalnav::Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    apply_overrides(&mut cfg, &args.set)?;
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &ScenarioConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&cfg.name))
}

fn summarize(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

enum Outcome {
    Done,
    /// A checked path does not hold up against the map.
    Blocked,
}

fn run(cmd: Command) -> modalnav::Result<Outcome> {
    match cmd {
        Command::Plan(args) => {
            let cfg = load_config(&args)?;
            let report = plan_scenario(&cfg)?;
            println!(
                "{}: {} waypoints, {} aerial segment(s), cost {:.3}",
                report.name,
                report.path.waypoints.len(),
                report.aerial_segments,
                report.path.total_cost
            );
            summarize(&write_report(&report, &out_dir(&args, &cfg))?);
        }
        Command::Simulate(args) => {
            let cfg = load_config(&args)?;
            let report = run_scenario(&cfg)?;
            if let Some(end) = report.executed() {
                println!(
                    "{}: executed in {:.2} s using {:.2} J (planned {:.2} s, {:.2} J)",
                    report.name, end.timestamp, end.state.energy, report.m4.time, report.m4.energy
                );
            }
            summarize(&write_report(&report, &out_dir(&args, &cfg))?);
        }
        Command::Compare { run, write } => {
            let cfg = load_config(&run)?;
            let report = plan_scenario(&cfg)?;
            print!("{}", Comparison(&report));
            if write {
                summarize(&write_report(&report, &out_dir(&run, &cfg))?);
            }
        }
        Command::Render {
            costmap,
            path,
            out,
            energy_ratio,
        } => {
            let grid = GridText::load(costmap)?;
            let path = ModalPath::load(path)?;
            render_costmap(
                &grid.meta,
                &grid.values,
                energy_ratio,
                Some(&path.waypoints),
            )
            .save(&out)?;
            println!("wrote {}", out.display());
        }
        Command::Validate {
            path,
            heightmap,
            set,
        } => {
            let mut cfg = ScenarioConfig::new(&heightmap, [0.0, 0.0], [0.0, 0.0]);
            apply_overrides(&mut cfg, &set)?;
            let elev = ElevationGrid::load(&cfg.heightmap, cfg.prior_variance)?;
            let trav = compute_traversability(&elev, &cfg.traversability)?;
            let costmap = generate_costmap(&elev, &trav, &cfg.costmap)?;
            let path = ModalPath::load(path)?;
            let mut planner = cfg.planner;
            planner.energy_ratio = costmap.energy_ratio();
            match first_blocked_edge(&path.waypoints, &costmap, &elev, &planner) {
                None => println!("ok: {} waypoints, all edges clear", path.waypoints.len()),
                Some(i) => {
                    let (a, b) = (&path.waypoints[i], &path.waypoints[i + 1]);
                    eprintln!(
                        "blocked: edge {i} ({:.3}, {:.3}, {:.3}) -> ({:.3}, {:.3}, {:.3})",
                        a.x, a.y, a.z, b.x, b.y, b.z
                    );
                    return Ok(Outcome::Blocked);
                }
            }
        }
    }
    Ok(Outcome::Done)
}

/// 0 success, 1 no path (or a blocked path under `validate`), 2 anything else.
fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Blocked) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_no_path() { 1 } else { 2 })
        }
    }
}
