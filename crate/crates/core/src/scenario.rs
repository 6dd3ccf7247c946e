//! End-to-end scenario runs driven by flat `key = value` config files.
//!
//! ```text
//! name = step
//! heightmap = step.grid
//! start = -8.0 0.0
//! goal = 8.0 0.0
//! fly_power = 60
//! ```
//!
//! Relative file paths resolve against the config file's directory.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::costmap::{generate_costmap, CostmapParams, ModalCostmap};
use crate::energy::{drone_baseline, plan_metrics, EnergyModel, PlanMetrics};
use crate::error::{Error, Result};
use crate::executor::{execute, round6, write_trace_csv, ExecutorParams, TraceEvent};
use crate::grid::ElevationGrid;
use crate::perception::{
    compute_traversability, fuse_points, load_point_stream, TraversabilityGrid,
    TraversabilityParams,
};
use crate::planner::{plan, Connectivity, ModalPath, PlannerParams};
use crate::postprocess::{first_blocked_edge, partition_path, postprocess};
use crate::render::render_costmap;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub heightmap: PathBuf,
    /// Optional `x y z variance` stream fused onto the heightmap before planning.
    pub points: Option<PathBuf>,
    pub prior_variance: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub output_dir: Option<PathBuf>,
    pub planner: PlannerParams,
    pub costmap: CostmapParams,
    pub traversability: TraversabilityParams,
    pub energy: EnergyModel,
    pub executor: ExecutorParams,
    /// Capture radius override; defaults to one cell.
    pub waypoint_tolerance: Option<f64>,
}

impl ScenarioConfig {
    pub fn new(heightmap: impl Into<PathBuf>, start: [f64; 2], goal: [f64; 2]) -> Self {
        ScenarioConfig {
            name: "scenario".into(),
            heightmap: heightmap.into(),
            points: None,
            prior_variance: 0.01,
            start,
            goal,
            output_dir: None,
            planner: PlannerParams::default(),
            costmap: CostmapParams::default(),
            traversability: TraversabilityParams::default(),
            energy: EnergyModel::default(),
            executor: ExecutorParams::default(),
            waypoint_tolerance: None,
        }
    }

    /// Parses config text; relative paths are joined onto `base_dir`.
    pub fn parse(input: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = ScenarioConfig::new(PathBuf::new(), [f64::NAN; 2], [f64::NAN; 2]);
        let mut have_map = false;
        for (i, raw) in input.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(
                    i + 1,
                    format!("expected key = value, got {line:?}"),
                ));
            };
            let key = key.trim();
            if key == "heightmap" {
                have_map = true;
            }
            cfg.set(key, value.trim())
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        if !have_map {
            return Err(Error::parse(0, "missing key heightmap"));
        }
        if cfg.start.iter().any(|v| v.is_nan()) {
            return Err(Error::parse(0, "missing key start"));
        }
        if cfg.goal.iter().any(|v| v.is_nan()) {
            return Err(Error::parse(0, "missing key goal"));
        }
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        // Joining an absolute path yields that path unchanged.
        self.heightmap = base.join(&self.heightmap);
        self.points = self.points.as_deref().map(|p| base.join(p));
        self.output_dir = self.output_dir.as_deref().map(|p| base.join(p));
    }

    /// Sets one key. Paths are taken as given.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| {
                    Error::InvalidParam(format!("{key}: expected a number, got {value:?}"))
                })
        };
        let count = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| Error::InvalidParam(format!("{key}: expected a count, got {value:?}")))
        };
        let point = || -> Result<[f64; 2]> {
            let v: Vec<f64> = value
                .split([' ', '\t', ','])
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| {
                    Error::InvalidParam(format!("{key}: expected `x y`, got {value:?}"))
                })?;
            match v[..] {
                [x, y] if x.is_finite() && y.is_finite() => Ok([x, y]),
                _ => Err(Error::InvalidParam(format!(
                    "{key}: expected `x y`, got {value:?}"
                ))),
            }
        };
        let flag = || -> Result<bool> {
            match value {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(Error::InvalidParam(format!(
                    "{key}: expected true or false, got {value:?}"
                ))),
            }
        };
        match key {
            "name" => self.name = value.to_string(),
            "heightmap" => self.heightmap = PathBuf::from(value),
            "points" => self.points = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "prior_variance" => self.prior_variance = num()?,
            "start" => self.start = point()?,
            "goal" => self.goal = point()?,

            "clearance" => self.planner.clearance = num()?,
            "aerial_extra_cost" => self.planner.aerial_extra_cost = num()?,
            "goal_threshold" => self.planner.goal_threshold = Some(num()?),
            "connectivity" => self.planner.connectivity = Connectivity::try_from(count()? as u32)?,
            "aerial_enabled" => self.planner.aerial_enabled = flag()?,
            "energy_ratio" => {
                let v = num()?;
                self.planner.energy_ratio = v;
                self.costmap.energy_ratio = v;
            }
            "inflation_radius" => self.costmap.inflation_radius = count()?,

            "max_slope" => self.traversability.max_slope = num()?,
            "max_step" => self.traversability.max_step = num()?,
            "slope_weight" => self.traversability.slope_weight = num()?,
            "step_weight" => self.traversability.step_weight = num()?,
            "window" => self.traversability.window = count()?,

            "drive_power" => self.energy.drive_power = num()?,
            "drive_speed" => self.energy.drive_speed = num()?,
            "fly_power" => self.energy.fly_power = num()?,
            "fly_speed" => self.energy.fly_speed = num()?,
            "morph_power" => self.energy.morph_power = num()?,
            "morph_duration" => self.energy.morph_duration = num()?,

            "dt" => self.executor.dt = num()?,
            "k_v" => self.executor.gains.k_v = num()?,
            "k_omega" => self.executor.gains.k_omega = num()?,
            "max_omega" => self.executor.gains.max_omega = num()?,
            "stall_timeout" => self.executor.stall_timeout = num()?,
            "waypoint_tolerance" => self.waypoint_tolerance = Some(num()?),
            _ => return Err(Error::InvalidParam(format!("unknown key {key:?}"))),
        }
        Ok(())
    }
}

/// Everything one scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub name: String,
    pub elevation: ElevationGrid,
    pub traversability: TraversabilityGrid,
    pub costmap: ModalCostmap,
    /// Planner output before pruning.
    pub raw_path: ModalPath,
    pub path: ModalPath,
    pub aerial_segments: usize,
    pub m4: PlanMetrics,
    pub drone: PlanMetrics,
    pub trace: Vec<TraceEvent>,
}

impl ScenarioReport {
    /// Final executed state.
    pub fn executed(&self) -> Option<&TraceEvent> {
        self.trace.last()
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Loads inputs and runs the pipeline without the executor.
pub fn plan_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut elevation = stage(
        "load",
        ElevationGrid::load(&cfg.heightmap, cfg.prior_variance),
    )?;
    if let Some(points) = &cfg.points {
        let stream = stage("load", load_point_stream(points))?;
        stage("load", fuse_points(&mut elevation, &stream).map(|_| ()))?;
    }
    let traversability = stage(
        "traversability",
        compute_traversability(&elevation, &cfg.traversability),
    )?;
    let costmap = stage(
        "costmap",
        generate_costmap(&elevation, &traversability, &cfg.costmap),
    )?;
    let mut planner = cfg.planner;
    planner.energy_ratio = costmap.energy_ratio();
    let raw_path = stage(
        "plan",
        plan(&costmap, &elevation, cfg.start, cfg.goal, &planner),
    )?;
    let path = postprocess(&raw_path, &costmap, &elevation, &planner);
    if let Some(i) = first_blocked_edge(&path.waypoints, &costmap, &elevation, &planner) {
        return stage(
            "postprocess",
            Err(Error::InvalidParam(format!(
                "edge {i} of the pruned path is blocked"
            ))),
        );
    }
    stage("metrics", cfg.energy.validate())?;
    let m4 = plan_metrics(&path.waypoints, &cfg.energy);
    let drone = stage(
        "drone_baseline",
        drone_baseline(&elevation, cfg.start, cfg.goal, &cfg.energy, &planner),
    )?;
    let aerial_segments = partition_path(&path)
        .segments
        .iter()
        .filter(|s| s.mode == crate::planner::Mode::Aerial)
        .count();
    Ok(ScenarioReport {
        name: cfg.name.clone(),
        elevation,
        traversability,
        costmap,
        raw_path,
        path,
        aerial_segments,
        m4,
        drone,
        trace: Vec::new(),
    })
}

/// Full pipeline including the simulated execution.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut report = plan_scenario(cfg)?;
    let mut exec = cfg.executor;
    exec.waypoint_tolerance = cfg
        .waypoint_tolerance
        .unwrap_or(report.elevation.meta().resolution);
    report.trace = stage(
        "execute",
        execute(&report.path.waypoints, &cfg.energy, &exec),
    )?;
    Ok(report)
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    scenario: &'a str,
    agent: &'a str,
    #[serde(rename = "energy_J")]
    energy: f64,
    #[serde(rename = "time_s")]
    time: f64,
    #[serde(rename = "length_m")]
    length: f64,
    morphs: usize,
}

/// `scenario,agent,energy_J,time_s,length_m,morphs`, one row per agent.
pub fn write_metrics_csv<W: std::io::Write>(
    name: &str,
    m4: &PlanMetrics,
    drone: &PlanMetrics,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (agent, m) in [("m4", m4), ("drone", drone)] {
        w.serialize(MetricsRow {
            scenario: name,
            agent,
            energy: round6(m.energy),
            time: round6(m.time),
            length: round6(m.length),
            morphs: m.morph_count,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `path.txt`, `path.json`, `metrics.csv`, `costmap.txt`,
/// `costmap.ppm` and, when the run was executed, `trace.csv`.
pub fn write_report(report: &ScenarioReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let write = || -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let mut out = |name: &str| {
            let p = dir.join(name);
            files.push(p.clone());
            p
        };
        report.path.save(out("path.txt"))?;
        std::fs::write(out("path.json"), report.path.to_json()?)?;
        let f = std::fs::File::create(out("metrics.csv"))?;
        write_metrics_csv(&report.name, &report.m4, &report.drone, f)?;
        report.costmap.to_text().save(out("costmap.txt"))?;
        let img = render_costmap(
            report.costmap.meta(),
            report.costmap.costs(),
            report.costmap.energy_ratio(),
            Some(&report.path.waypoints),
        );
        img.save(out("costmap.ppm"))?;
        if !report.trace.is_empty() {
            let f = std::fs::File::create(out("trace.csv"))?;
            write_trace_csv(&report.trace, f)?;
        }
        Ok(files)
    };
    stage("write", write())
}

/// Fixed-width M4 vs drone table.
pub struct Comparison<'a>(pub &'a ScenarioReport);

impl fmt::Display for Comparison<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.0;
        writeln!(f, "scenario: {}", r.name)?;
        writeln!(
            f,
            "{:<8} {:>12} {:>10} {:>10} {:>7}",
            "agent", "energy_J", "time_s", "length_m", "morphs"
        )?;
        for (agent, m) in [("m4", &r.m4), ("drone", &r.drone)] {
            writeln!(
                f,
                "{:<8} {:>12.3} {:>10.3} {:>10.3} {:>7}",
                agent, m.energy, m.time, m.length, m.morph_count
            )?;
        }
        if r.drone.energy > 0.0 {
            writeln!(
                f,
                "energy ratio m4/drone: {:.4}",
                r.m4.energy / r.drone.energy
            )?;
        }
        Ok(())
    }
}
