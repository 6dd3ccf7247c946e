//! Energy-aware A* over the 2.5D grid.
//!
//! Nodes are grid cells. Moving onto a ground cell costs the metric step
//! length plus the cell's costmap value. Moving onto an aerial-only cell also
//! pays the cell cost once per resolution-sized elevation change and the
//! aerial surcharge, and places the waypoint above the cell's 2x2 footprint.
//! Every step therefore costs at least its Euclidean length, which keeps the
//! Euclidean heuristic consistent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::costmap::{ModalCostmap, DEFAULT_ENERGY_RATIO};
use crate::error::{Error, Result};
use crate::grid::{Cell, ElevationGrid, GridMeta};

/// Slack on the goal-region test so a neighbor exactly one diagonal away
/// still counts under the default threshold.
pub const GOAL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Ground,
    Aerial,
}

impl Mode {
    pub fn symbol(self) -> char {
        match self {
            Mode::Ground => 'G',
            Mode::Aerial => 'A',
        }
    }

    pub fn from_symbol(s: &str) -> Option<Mode> {
        match s {
            "G" => Some(Mode::Ground),
            "A" => Some(Mode::Aerial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalWaypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub mode: Mode,
}

impl ModalWaypoint {
    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(&self, other: &ModalWaypoint) -> f64 {
        let [dx, dy, dz] = [other.x - self.x, other.y - self.y, other.z - self.z];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

impl TryFrom<u32> for Connectivity {
    type Error = Error;

    fn try_from(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::InvalidParam(format!(
                "connectivity must be 4 or 8, got {n}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    /// Vertical margin above the footprint for aerial waypoints, meters.
    pub clearance: f64,
    /// Flat surcharge on every aerial step.
    pub aerial_extra_cost: f64,
    /// Search stops at the first expanded cell this close to the goal, meters.
    /// `None` means one cell diagonal.
    pub goal_threshold: Option<f64>,
    /// Costmap values at or above this are aerial-only.
    pub energy_ratio: f64,
    pub connectivity: Connectivity,
    /// When false, aerial-only cells are impassable.
    pub aerial_enabled: bool,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            clearance: 0.5,
            aerial_extra_cost: 0.0,
            goal_threshold: None,
            energy_ratio: DEFAULT_ENERGY_RATIO,
            connectivity: Connectivity::Eight,
            aerial_enabled: true,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.clearance.is_finite() && self.clearance >= 0.0) {
            return Err(Error::InvalidParam("clearance must be non-negative".into()));
        }
        if !(self.aerial_extra_cost.is_finite() && self.aerial_extra_cost >= 0.0) {
            return Err(Error::InvalidParam(
                "aerial_extra_cost must be non-negative".into(),
            ));
        }
        if let Some(t) = self.goal_threshold {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidParam(
                    "goal_threshold must be non-negative".into(),
                ));
            }
        }
        if !self.energy_ratio.is_finite() {
            return Err(Error::InvalidParam("energy_ratio must be finite".into()));
        }
        Ok(())
    }

    pub fn goal_threshold_for(&self, meta: &GridMeta) -> f64 {
        self.goal_threshold
            .unwrap_or(meta.resolution * std::f64::consts::SQRT_2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalPath {
    pub waypoints: Vec<ModalWaypoint>,
    /// Accumulated search cost of the returned route.
    pub total_cost: f64,
}

/// Euclidean distance in the xy plane.
pub fn heuristic(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// Cost, mode and altitude of moving from `current` onto `neighbor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub cost: f64,
    pub mode: Mode,
    pub z: f64,
}

pub fn step_cost(
    current: Cell,
    neighbor: Cell,
    costmap: &ModalCostmap,
    elev: &ElevationGrid,
    params: &PlannerParams,
) -> Result<Step> {
    let meta = elev.meta();
    let e_c = elev.require_height(current)?;
    let e_n = elev.require_height(neighbor)?;
    let c_n = costmap.cost(neighbor);
    let dist = heuristic(meta.center(current), meta.center(neighbor));
    if is_aerial_cell(costmap, neighbor, params) {
        let delta_e = ((e_c - e_n).abs() / meta.resolution).round();
        Ok(Step {
            cost: dist + c_n * delta_e + params.aerial_extra_cost + c_n,
            mode: Mode::Aerial,
            z: elev.max_elevation_footprint(neighbor)? + params.clearance,
        })
    } else {
        Ok(Step {
            cost: dist + c_n,
            mode: Mode::Ground,
            z: e_n,
        })
    }
}

pub(crate) fn is_aerial_cell(costmap: &ModalCostmap, cell: Cell, params: &PlannerParams) -> bool {
    costmap.is_aerial(cell) || costmap.cost(cell) >= params.energy_ratio
}

pub fn neighbors(
    meta: &GridMeta,
    cell: Cell,
    connectivity: Connectivity,
) -> impl Iterator<Item = Cell> + '_ {
    connectivity.offsets().iter().filter_map(move |&(dr, dc)| {
        let r = cell.row.checked_add_signed(dr)?;
        let c = cell.col.checked_add_signed(dc)?;
        let n = Cell::new(r, c);
        meta.contains(n).then_some(n)
    })
}

/// Goal-region membership used by the search termination test.
pub fn within_goal(meta: &GridMeta, cell: Cell, goal: [f64; 2], threshold: f64) -> bool {
    heuristic(meta.center(cell), goal) <= threshold + GOAL_EPS
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    f: f64,
    h: f64,
    cell: Cell,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed: BinaryHeap is a max-heap and we pop the lowest (f, h, cell).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

#[derive(Debug, Clone, Copy)]
struct Visit {
    g: f64,
    parent: usize,
    z: f64,
    mode: Mode,
}

/// A* from `start` to the goal region around `goal` (world xy, meters).
///
/// The priority of a cell is `g + max(0, |cell - goal| - threshold)`: the
/// Euclidean estimate to the goal region rather than to the goal point, so the
/// first goal-region cell popped has the minimum cost over the whole region.
/// With a zero threshold this is exactly the Euclidean heuristic. Ties break
/// on lower heuristic, then on lower `(row, col)`. Cells whose step cost
/// cannot be evaluated (unobserved elevation) are not entered.
pub fn plan(
    costmap: &ModalCostmap,
    elev: &ElevationGrid,
    start: [f64; 2],
    goal: [f64; 2],
    params: &PlannerParams,
) -> Result<ModalPath> {
    params.validate()?;
    let meta = *elev.meta();
    meta.ensure_same(costmap.meta(), "elevation vs costmap")?;
    let start_cell = meta.world_to_grid(start[0], start[1])?;
    meta.world_to_grid(goal[0], goal[1])?;
    if is_aerial_cell(costmap, start_cell, params) {
        return Err(Error::StartNotGround {
            row: start_cell.row,
            col: start_cell.col,
        });
    }
    let start_z = elev.require_height(start_cell)?;
    let threshold = params.goal_threshold_for(&meta);
    let estimate = |cell: Cell| (heuristic(meta.center(cell), goal) - threshold).max(0.0);

    const UNSEEN: usize = usize::MAX;
    let mut visits: Vec<Option<Visit>> = vec![None; meta.len()];
    let mut closed = vec![false; meta.len()];
    let mut open = BinaryHeap::new();

    let s = meta.index(start_cell);
    visits[s] = Some(Visit {
        g: 0.0,
        parent: UNSEEN,
        z: start_z,
        mode: Mode::Ground,
    });
    let h0 = estimate(start_cell);
    open.push(Entry {
        f: h0,
        h: h0,
        cell: start_cell,
    });

    while let Some(Entry { cell, .. }) = open.pop() {
        let ci = meta.index(cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        let g_c = visits[ci].map(|v| v.g).unwrap_or(0.0);

        if within_goal(&meta, cell, goal, threshold) {
            return Ok(reconstruct(&meta, &visits, ci, g_c));
        }

        for n in neighbors(&meta, cell, params.connectivity) {
            let ni = meta.index(n);
            if closed[ni] {
                continue;
            }
            let step = match step_cost(cell, n, costmap, elev, params) {
                Ok(step) => step,
                Err(Error::Unobserved { .. }) => continue,
                Err(e) => return Err(e),
            };
            if step.mode == Mode::Aerial && !params.aerial_enabled {
                continue;
            }
            let g_n = g_c + step.cost;
            let better = visits[ni].is_none_or(|v| g_n < v.g);
            if better {
                visits[ni] = Some(Visit {
                    g: g_n,
                    parent: ci,
                    z: step.z,
                    mode: step.mode,
                });
                let h = estimate(n);
                open.push(Entry {
                    f: g_n + h,
                    h,
                    cell: n,
                });
            }
        }
    }
    Err(Error::NoPath)
}

fn reconstruct(
    meta: &GridMeta,
    visits: &[Option<Visit>],
    goal_index: usize,
    cost: f64,
) -> ModalPath {
    let mut waypoints = Vec::new();
    let mut i = goal_index;
    loop {
        let v = visits[i].expect("visited cells form the parent chain");
        let [x, y] = meta.center(meta.cell_at(i));
        waypoints.push(ModalWaypoint {
            x,
            y,
            z: v.z,
            mode: v.mode,
        });
        if v.parent == usize::MAX {
            break;
        }
        i = v.parent;
    }
    waypoints.reverse();
    ModalPath {
        waypoints,
        total_cost: cost,
    }
}

impl ModalPath {
    /// Text export: one `x y z flag` line per waypoint, flag `G` or `A`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for w in &self.waypoints {
            let _ = writeln!(out, "{:.6} {:.6} {:.6} {}", w.x, w.y, w.z, w.mode.symbol());
        }
        out
    }

    /// Parses the text export. The search cost is not part of the format and
    /// reads back as 0.
    pub fn parse_text(input: &str) -> Result<ModalPath> {
        let mut waypoints = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::parse(line_no, "expected 4 fields: x y z flag"));
            }
            let mut xyz = [0.0; 3];
            for (slot, tok) in xyz.iter_mut().zip(&fields[..3]) {
                *slot = tok
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::parse(line_no, format!("not a finite number: {tok:?}"))
                    })?;
            }
            let mode = Mode::from_symbol(fields[3]).ok_or_else(|| {
                Error::parse(line_no, format!("flag must be G or A, got {:?}", fields[3]))
            })?;
            waypoints.push(ModalWaypoint {
                x: xyz[0],
                y: xyz[1],
                z: xyz[2],
                mode,
            });
        }
        Ok(ModalPath {
            waypoints,
            total_cost: 0.0,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModalPath> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// 3D polyline length, meters.
    pub fn length(&self) -> f64 {
        polyline_length(&self.waypoints)
    }
}

pub fn polyline_length(waypoints: &[ModalWaypoint]) -> f64 {
    waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{generate_costmap, CostmapParams};
    use crate::perception::TraversabilityGrid;
    use approx::assert_abs_diff_eq;

    fn setup(n: usize, trav: Vec<f64>, elev: Vec<f64>) -> (ElevationGrid, ModalCostmap) {
        let m = GridMeta::new(n, n, 0.1, [0.0, 0.0]).unwrap();
        let e = ElevationGrid::from_heights(m, elev, 0.01).unwrap();
        let t = TraversabilityGrid::from_scores(m, trav).unwrap();
        let c = generate_costmap(
            &e,
            &t,
            &CostmapParams {
                inflation_radius: 0,
                ..Default::default()
            },
        )
        .unwrap();
        (e, c)
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn heuristic_examples() {
        assert_eq!(heuristic([0.0, 0.0], [3.0, 4.0]), 5.0);
        assert_eq!(heuristic([2.5, -1.0], [2.5, -1.0]), 0.0);
        assert_abs_diff_eq!(
            heuristic([0.0, 0.0], [1.0, 1.0]),
            1.41421356,
            epsilon = 1e-8
        );
    }

    #[test]
    fn ground_step_cost() {
        let n = 3;
        let mut trav = vec![1.0; 9];
        trav[4] = 0.8;
        let (e, c) = setup(n, trav, vec![0.0; 9]);
        let s = step_cost(
            Cell::new(1, 0),
            Cell::new(1, 1),
            &c,
            &e,
            &PlannerParams::default(),
        )
        .unwrap();
        assert_eq!(s.mode, Mode::Ground);
        assert_abs_diff_eq!(s.cost, 0.1 + 0.2, epsilon = 1e-12);
        assert_eq!(s.z, 0.0);

        let flat = step_cost(
            Cell::new(2, 1),
            Cell::new(1, 0),
            &c,
            &e,
            &PlannerParams::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(flat.cost, 0.1 * std::f64::consts::SQRT_2, epsilon = 1e-12);
        assert_eq!(flat.mode, Mode::Ground);
    }

    #[test]
    fn aerial_step_cost() {
        let n = 3;
        let mut trav = vec![1.0; 9];
        let mut elev = vec![0.0; 9];
        trav[4] = 0.0;
        elev[4] = 1.5;
        let (e, c) = setup(n, trav, elev);
        assert_abs_diff_eq!(c.cost(Cell::new(1, 1)), 60.015, epsilon = 1e-12);
        let params = PlannerParams::default();
        let s = step_cost(Cell::new(1, 0), Cell::new(1, 1), &c, &e, &params).unwrap();
        assert_eq!(s.mode, Mode::Aerial);
        assert_abs_diff_eq!(s.cost, 0.1 + 60.015 * 15.0 + 60.015, epsilon = 1e-9);
        assert_abs_diff_eq!(s.z, 1.5 + 0.5, epsilon = 1e-12);

        let mut trav2 = vec![1.0; 9];
        trav2[4] = 0.0;
        let mut elev2 = vec![0.0; 9];
        elev2[4] = 2.0;
        // 60 + 2.0 * 0.01 = 60.02 and a 1.5 m drop from the current cell.
        elev2[3] = 0.5;
        let (e2, c2) = setup(n, trav2, elev2);
        let s = step_cost(Cell::new(1, 0), Cell::new(1, 1), &c2, &e2, &params).unwrap();
        assert_abs_diff_eq!(s.cost, 960.42, epsilon = 1e-9);
    }

    #[test]
    fn unobserved_neighbor_is_error() {
        let n = 3;
        let mut elev = vec![0.0; 9];
        elev[4] = f64::NAN;
        let (e, c) = setup(n, vec![1.0; 9], elev);
        let err = step_cost(
            Cell::new(1, 0),
            Cell::new(1, 1),
            &c,
            &e,
            &PlannerParams::default(),
        );
        assert!(matches!(err, Err(Error::Unobserved { row: 1, col: 1 })));
    }

    #[test]
    fn start_equals_goal() {
        let (e, c) = setup(5, vec![1.0; 25], vec![0.0; 25]);
        let p = plan(&c, &e, [0.0, 0.0], [0.0, 0.0], &PlannerParams::default()).unwrap();
        assert_eq!(p.waypoints.len(), 1);
        assert_eq!(p.total_cost, 0.0);
        assert_eq!(p.waypoints[0].mode, Mode::Ground);
    }

    #[test]
    fn flat_grid_diagonal() {
        let (e, c) = setup(5, vec![1.0; 25], vec![0.0; 25]);
        let params = PlannerParams {
            goal_threshold: Some(0.0),
            ..Default::default()
        };
        let p = plan(&c, &e, [-0.2, -0.2], [0.2, 0.2], &params).unwrap();
        assert_eq!(p.waypoints.len(), 5);
        assert!(p.waypoints.iter().all(|w| w.mode == Mode::Ground));
        assert_abs_diff_eq!(
            p.total_cost,
            4.0 * 0.1 * std::f64::consts::SQRT_2,
            epsilon = 1e-12
        );
        for pair in p.waypoints.windows(2) {
            assert!(pair[1].x > pair[0].x && pair[1].y > pair[0].y);
        }
    }

    #[test]
    fn out_of_bounds_and_no_path() {
        let (e, c) = setup(5, vec![1.0; 25], vec![0.0; 25]);
        let params = PlannerParams::default();
        assert!(matches!(
            plan(&c, &e, [5.0, 0.0], [0.0, 0.0], &params),
            Err(Error::OutOfBounds { .. })
        ));
        // full-width aerial wall with flight disabled
        let trav = (0..25)
            .map(|i| if i / 5 == 2 { 0.0 } else { 1.0 })
            .collect();
        let (e, c) = setup(5, trav, vec![0.0; 25]);
        let no_fly = PlannerParams {
            aerial_enabled: false,
            ..params
        };
        assert!(matches!(
            plan(&c, &e, [-0.2, 0.0], [0.2, 0.0], &no_fly),
            Err(Error::NoPath)
        ));
        assert!(plan(&c, &e, [-0.2, 0.0], [0.2, 0.0], &params).is_ok());
        assert!(matches!(
            plan(&c, &e, [0.0, 0.0], [0.2, 0.0], &params),
            Err(Error::StartNotGround { .. })
        ));
    }

    #[test]
    fn path_text_round_trip_and_errors() {
        let path = ModalPath {
            waypoints: vec![
                ModalWaypoint {
                    x: 0.05,
                    y: -0.05,
                    z: 0.0,
                    mode: Mode::Ground,
                },
                ModalWaypoint {
                    x: 0.15,
                    y: -0.05,
                    z: 2.0,
                    mode: Mode::Aerial,
                },
            ],
            total_cost: 3.0,
        };
        let text = path.to_text();
        assert_eq!(
            text,
            "0.050000 -0.050000 0.000000 G\n0.150000 -0.050000 2.000000 A\n"
        );
        let back = ModalPath::parse_text(&text).unwrap();
        assert_eq!(back.waypoints, path.waypoints);
        assert!(matches!(
            ModalPath::parse_text("0 0 0 X\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ModalPath::parse_text("0 0 0 G\n0 0 G\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
