#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::PathBuf;

use modalnav::costmap::base_costmap;
use modalnav::grid::Cell;
use modalnav::perception::TraversabilityGrid;
use modalnav::planner::{step_cost, within_goal, Mode};
use modalnav::{
    generate_costmap, CostmapParams, ElevationGrid, GridMeta, ModalCostmap, PlannerParams,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub struct World {
    pub elev: ElevationGrid,
    pub trav: TraversabilityGrid,
    pub costmap: ModalCostmap,
}

impl World {
    pub fn meta(&self) -> &GridMeta {
        self.elev.meta()
    }
}

/// Independent per-cell traversability and elevation.
pub fn noise_world(rng: &mut StdRng, n: usize, res: f64) -> World {
    let meta = GridMeta::new(n, n, res, [0.0, 0.0]).unwrap();
    let aerial_share = rng.random_range(0.02..0.2);
    let trav: Vec<f64> = (0..n * n)
        .map(|_| {
            if rng.random::<f64>() < aerial_share {
                rng.random_range(0.0..0.5)
            } else {
                rng.random_range(0.5..=1.0)
            }
        })
        .collect();
    let heights: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..3.0)).collect();
    build(meta, heights, trav, rng.random_range(0..2))
}

/// Flat ground with raised rectangular blocks; the blocks and their rims are
/// not drivable.
pub fn block_world(rng: &mut StdRng, n: usize, res: f64) -> World {
    let meta = GridMeta::new(n, n, res, [0.0, 0.0]).unwrap();
    let mut heights = vec![0.0; n * n];
    let mut trav: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.7..=1.0)).collect();
    for _ in 0..rng.random_range(1..6) {
        let (h, w) = (rng.random_range(2..n / 3), rng.random_range(2..n / 3));
        let (r0, c0) = (rng.random_range(0..n - h), rng.random_range(0..n - w));
        let top = rng.random_range(0.3..2.5);
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                heights[r * n + c] = top;
                trav[r * n + c] = rng.random_range(0.0..0.5);
            }
        }
    }
    build(meta, heights, trav, rng.random_range(0..3))
}

pub fn build(meta: GridMeta, heights: Vec<f64>, trav: Vec<f64>, radius: usize) -> World {
    let elev = ElevationGrid::from_heights(meta, heights, 0.01).unwrap();
    let trav = TraversabilityGrid::from_scores(meta, trav).unwrap();
    let params = CostmapParams {
        inflation_radius: radius,
        ..Default::default()
    };
    let costmap = generate_costmap(&elev, &trav, &params).unwrap();
    World {
        elev,
        trav,
        costmap,
    }
}

pub fn base_only(world: &World) -> ModalCostmap {
    base_costmap(&world.elev, &world.trav, &CostmapParams::default()).unwrap()
}

/// Random world position inside the cell.
pub fn point_in(rng: &mut StdRng, meta: &GridMeta, cell: Cell) -> [f64; 2] {
    let [x, y] = meta.grid_to_world(cell).unwrap();
    let j = 0.45 * meta.resolution;
    [x + rng.random_range(-j..j), y + rng.random_range(-j..j)]
}

pub fn random_cell(rng: &mut StdRng, meta: &GridMeta) -> Cell {
    Cell::new(
        rng.random_range(0..meta.rows),
        rng.random_range(0..meta.cols),
    )
}

pub fn ground_cell(rng: &mut StdRng, world: &World) -> Option<Cell> {
    (0..200)
        .map(|_| random_cell(rng, world.meta()))
        .find(|&c| !world.costmap.is_aerial(c))
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Brute-force Dijkstra over the same step costs the planner uses. Returns
/// the cheapest cost to any cell of the goal region, or `None` when the start
/// is not drivable or the region is unreachable.
pub fn dijkstra(
    world: &World,
    start: [f64; 2],
    goal: [f64; 2],
    params: &PlannerParams,
) -> Option<f64> {
    let meta = *world.meta();
    let s = meta.world_to_grid(start[0], start[1]).ok()?;
    if world.costmap.is_aerial(s) || world.costmap.cost(s) >= params.energy_ratio {
        return None;
    }
    let offsets: &[(isize, isize)] = match params.connectivity {
        modalnav::planner::Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        modalnav::planner::Connectivity::Eight => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };
    let mut dist = vec![f64::INFINITY; meta.len()];
    let mut heap = BinaryHeap::new();
    dist[meta.index(s)] = 0.0;
    heap.push(Item(0.0, meta.index(s)));
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        let cu = meta.cell_at(u);
        for &(dr, dc) in offsets {
            let (r, c) = (cu.row as isize + dr, cu.col as isize + dc);
            if r < 0 || c < 0 || r as usize >= meta.rows || c as usize >= meta.cols {
                continue;
            }
            let n = Cell::new(r as usize, c as usize);
            let Ok(step) = step_cost(cu, n, &world.costmap, &world.elev, params) else {
                continue;
            };
            if step.mode == Mode::Aerial && !params.aerial_enabled {
                continue;
            }
            let nd = d + step.cost;
            let ni = meta.index(n);
            if nd < dist[ni] {
                dist[ni] = nd;
                heap.push(Item(nd, ni));
            }
        }
    }
    let threshold = params.goal_threshold_for(&meta);
    meta.cells()
        .filter(|&c| within_goal(&meta, c, goal, threshold))
        .map(|c| dist[meta.index(c)])
        .filter(|d| d.is_finite())
        .min_by(|a, b| a.total_cmp(b))
}

pub fn seeded(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}
