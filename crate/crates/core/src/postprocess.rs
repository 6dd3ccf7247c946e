//! Mode partitioning, collinear pruning and edge clearance.

use serde::{Deserialize, Serialize};

use crate::costmap::ModalCostmap;
use crate::grid::{Cell, ElevationGrid, GridMeta};
use crate::planner::{is_aerial_cell, ModalPath, ModalWaypoint, Mode, PlannerParams};

pub const COLLINEAR_EPS: f64 = 1e-9;
pub const CLEARANCE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub mode: Mode,
    pub waypoints: Vec<ModalWaypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPartition {
    pub segments: Vec<Segment>,
    /// Index (into the original path) of the last waypoint of each segment.
    pub boundaries: Vec<usize>,
}

impl PathPartition {
    pub fn concat(&self) -> Vec<ModalWaypoint> {
        self.segments
            .iter()
            .flat_map(|s| s.waypoints.iter().copied())
            .collect()
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.segments.iter().map(|s| s.mode).collect()
    }
}

/// Splits the path into maximal runs of equal mode.
pub fn partition_path(path: &ModalPath) -> PathPartition {
    partition_waypoints(&path.waypoints)
}

pub fn partition_waypoints(waypoints: &[ModalWaypoint]) -> PathPartition {
    let mut segments: Vec<Segment> = Vec::new();
    let mut boundaries = Vec::new();
    for (i, w) in waypoints.iter().enumerate() {
        match segments.last_mut() {
            Some(s) if s.mode == w.mode => s.waypoints.push(*w),
            _ => {
                if i > 0 {
                    boundaries.push(i - 1);
                }
                segments.push(Segment {
                    mode: w.mode,
                    waypoints: vec![*w],
                });
            }
        }
    }
    if !waypoints.is_empty() {
        boundaries.push(waypoints.len() - 1);
    }
    PathPartition {
        segments,
        boundaries,
    }
}

/// Cells crossed by the segment `a -> b` (world xy), in order. A cell counts
/// when the segment passes through its interior; passing exactly through a
/// cell corner steps diagonally without touching the two side cells. Cells
/// off the grid are returned too so callers can reject them.
pub fn supercover(meta: &GridMeta, a: [f64; 2], b: [f64; 2]) -> Vec<(isize, isize)> {
    const EPS: f64 = 1e-9;
    let (u0, v0) = meta.world_to_continuous(a[0], a[1]);
    let (u1, v1) = meta.world_to_continuous(b[0], b[1]);
    let mut r = (u0 + EPS).floor() as isize;
    let mut c = (v0 + EPS).floor() as isize;
    let end_r = (u1 + EPS).floor() as isize;
    let end_c = (v1 + EPS).floor() as isize;
    let (du, dv) = (u1 - u0, v1 - v0);

    let axis = |p0: f64, d: f64, idx: isize| -> (isize, f64, f64) {
        if d > 0.0 {
            (1, ((idx + 1) as f64 - p0) / d, 1.0 / d)
        } else if d < 0.0 {
            (-1, (p0 - idx as f64) / -d, -1.0 / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_r, mut t_r, dt_r) = axis(u0, du, r);
    let (step_c, mut t_c, dt_c) = axis(v0, dv, c);

    let limit = end_r.abs_diff(r) + end_c.abs_diff(c) + 2;
    let mut cells = Vec::with_capacity(limit);
    cells.push((r, c));
    while (r, c) != (end_r, end_c) && cells.len() <= limit {
        if (t_r - t_c).abs() <= EPS {
            r += step_r;
            c += step_c;
            t_r += dt_r;
            t_c += dt_c;
        } else if t_r < t_c {
            r += step_r;
            t_r += dt_r;
        } else {
            c += step_c;
            t_c += dt_c;
        }
        cells.push((r, c));
    }
    cells
}

/// Whether the straight edge between two waypoints is collision free.
///
/// Ground edges need every crossed cell to be ground-traversable. Aerial
/// edges interpolate altitude linearly and need it to clear the footprint
/// maximum plus clearance at the projection of every crossed cell's center.
/// A mode-transition edge checks each endpoint cell under its own mode and the
/// cells in between as aerial.
pub fn clear_edge(
    a: &ModalWaypoint,
    b: &ModalWaypoint,
    costmap: &ModalCostmap,
    elev: &ElevationGrid,
    params: &PlannerParams,
) -> bool {
    let meta = elev.meta();
    if !meta.same_geometry(costmap.meta()) {
        return false;
    }
    let cells = supercover(meta, [a.x, a.y], [b.x, b.y]);
    let last = cells.len() - 1;
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;

    let ground_ok = |cell: Cell| !is_aerial_cell(costmap, cell, params);
    let air_ok = |cell: Cell| {
        let [cx, cy] = meta.center(cell);
        let t = if len2 > 0.0 {
            (((cx - a.x) * dx + (cy - a.y) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let z = a.z + t * (b.z - a.z);
        match elev.max_elevation_footprint(cell) {
            Ok(top) => z >= top + params.clearance - CLEARANCE_EPS,
            Err(_) => false,
        }
    };

    cells.iter().enumerate().all(|(i, &(r, c))| {
        if r < 0 || c < 0 {
            return false;
        }
        let cell = Cell::new(r as usize, c as usize);
        if !meta.contains(cell) {
            return false;
        }
        let mode = match (a.mode, b.mode) {
            (m, n) if m == n => m,
            _ if i == 0 => a.mode,
            _ if i == last => b.mode,
            _ => Mode::Aerial,
        };
        match mode {
            Mode::Ground => ground_ok(cell),
            Mode::Aerial => air_ok(cell),
        }
    })
}

/// `mid` lies on the line through `from` and `to`, between them. Ground
/// segments compare xy only; aerial segments compare xyz.
fn collinear_between(
    from: &ModalWaypoint,
    mid: &ModalWaypoint,
    to: &ModalWaypoint,
    mode: Mode,
) -> bool {
    let dims = if mode == Mode::Aerial { 3 } else { 2 };
    let (p, q, r) = (from.xyz(), mid.xyz(), to.xyz());
    let mut u = [0.0; 3];
    let mut v = [0.0; 3];
    for k in 0..dims {
        u[k] = p[k] - q[k];
        v[k] = r[k] - q[k];
    }
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let norm = cross.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    norm < COLLINEAR_EPS && dot <= COLLINEAR_EPS
}

/// Prunes one single-mode segment by pulling the string from its tail.
///
/// Walking backwards with an anchor starting at the last waypoint, a waypoint
/// is dropped when it is collinear with its successor and the anchor, or when
/// it has a clear edge to the anchor. Otherwise the successor is kept and
/// becomes the new anchor. The first and last waypoints always survive.
pub fn prune_partition(
    segment: &[ModalWaypoint],
    costmap: &ModalCostmap,
    elev: &ElevationGrid,
    params: &PlannerParams,
) -> Vec<ModalWaypoint> {
    let n = segment.len();
    if n <= 2 {
        return segment.to_vec();
    }
    let last = n - 1;
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[last] = true;
    let mut anchor = last;
    for i in (0..last).rev() {
        let (x_i, succ, x) = (&segment[i], &segment[i + 1], &segment[anchor]);
        let visible =
            collinear_between(x_i, succ, x, x_i.mode) || clear_edge(x_i, x, costmap, elev, params);
        if !visible {
            keep[i + 1] = true;
            anchor = i + 1;
        }
    }
    segment
        .iter()
        .zip(keep)
        .filter_map(|(w, k)| k.then_some(*w))
        .collect()
}

/// Partition, prune each segment, and stitch the segments back together.
pub fn postprocess(
    path: &ModalPath,
    costmap: &ModalCostmap,
    elev: &ElevationGrid,
    params: &PlannerParams,
) -> ModalPath {
    let partition = partition_path(path);
    let waypoints = partition
        .segments
        .iter()
        .flat_map(|s| prune_partition(&s.waypoints, costmap, elev, params))
        .collect();
    ModalPath {
        waypoints,
        total_cost: path.total_cost,
    }
}

/// Index of the first consecutive pair that fails `clear_edge`, if any.
pub fn first_blocked_edge(
    waypoints: &[ModalWaypoint],
    costmap: &ModalCostmap,
    elev: &ElevationGrid,
    params: &PlannerParams,
) -> Option<usize> {
    waypoints
        .windows(2)
        .position(|w| !clear_edge(&w[0], &w[1], costmap, elev, params))
}
