//! Writes the scenario heightmaps and configs.
//!
//! Usage: `cargo run -p modalnav --example gen_fixtures [out_dir]`

use std::path::{Path, PathBuf};

use modalnav::{ElevationGrid, GridMeta};

const RES: f64 = 0.1;

struct Fixture {
    name: &'static str,
    /// Extent along x (rows) and y (columns), meters.
    size: [f64; 2],
    start: [f64; 2],
    goal: [f64; 2],
    height: fn(f64, f64) -> f64,
    note: &'static str,
}

fn in_box(x: f64, y: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> bool {
    x >= x0 && x < x1 && y >= y0 && y < y1
}

/// Two ground levels joined by a 1.5 m plateau spanning the whole width.
fn step(x: f64, _y: f64) -> f64 {
    if (-4.0..4.0).contains(&x) {
        1.5
    } else {
        0.0
    }
}

/// A 1 m square wall around the goal with gaps narrower than the robot.
fn enclosure(x: f64, y: f64) -> f64 {
    let (outer, t) = (2.5, 0.3);
    let inside_outer = x.abs() < outer && y.abs() < outer;
    let inside_inner = x.abs() < outer - t && y.abs() < outer - t;
    let gap = x.abs() < 0.1 || y.abs() < 0.1;
    if inside_outer && !inside_inner && !gap {
        1.0
    } else {
        0.0
    }
}

/// Serpentine corridors, 1 m walls, and a flat 2 x 2 m roof on the middle wall.
fn maze(x: f64, y: f64) -> f64 {
    let t = 0.3;
    let walls = [(-3.5, true), (0.0, false), (3.5, true)];
    for (wx, gap_high) in walls {
        if (x - wx).abs() < t / 2.0 {
            let open = if gap_high { y >= 4.5 } else { y < -4.5 };
            if !open {
                return 1.0;
            }
        }
    }
    if in_box(x, y, -1.0, 1.0, -1.0, 1.0) {
        return 1.0;
    }
    0.0
}

/// Gentle rolling terrain with one hill too steep to drive over.
fn hilly(x: f64, y: f64) -> f64 {
    let bump = |cx: f64, cy: f64, a: f64, s: f64| {
        let r2 = (x - cx).powi(2) + (y - cy).powi(2);
        a * (-r2 / (2.0 * s * s)).exp()
    };
    bump(-3.0, 2.0, 0.4, 1.8)
        + bump(3.0, -2.5, 0.35, 1.5)
        + bump(0.5, 0.5, 1.6, 0.8)
        + bump(4.0, 4.0, 0.3, 2.0)
}

fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture {
            name: "step",
            size: [30.0, 6.0],
            start: [-13.0, 0.0],
            goal: [13.0, 0.0],
            height: step,
            note: "ground, 1.5 m plateau across the full width, ground",
        },
        Fixture {
            name: "enclosure",
            size: [16.0, 16.0],
            start: [-7.0, -7.0],
            goal: [0.0, 0.0],
            height: enclosure,
            note: "goal inside a walled square whose gaps are too narrow to drive through",
        },
        Fixture {
            name: "maze",
            size: [14.0, 14.0],
            start: [-6.0, -6.0],
            goal: [6.0, 6.0],
            height: maze,
            note: "serpentine corridors with a landable roof the planner should ignore",
        },
        Fixture {
            name: "hilly",
            size: [16.0, 16.0],
            start: [-7.0, -7.0],
            goal: [7.0, 7.0],
            height: hilly,
            note: "smooth bumps and one steep hill",
        },
    ]
}

fn write(dir: &Path, f: &Fixture) -> modalnav::Result<()> {
    let meta = GridMeta::from_extent(RES, f.size[1], f.size[0], [0.0, 0.0])?;
    let heights = meta
        .cells()
        .map(|c| {
            let [x, y] = meta.grid_to_world(c).expect("cell in range");
            (f.height)(x, y)
        })
        .collect();
    let grid = ElevationGrid::from_heights(meta, heights, 0.01)?;
    grid.save(dir.join(format!("{}.grid", f.name)))?;
    let conf = format!(
        "# {}\nname = {}\nheightmap = {}.grid\nstart = {} {}\ngoal = {} {}\n",
        f.note, f.name, f.name, f.start[0], f.start[1], f.goal[0], f.goal[1]
    );
    std::fs::write(dir.join(format!("{}.conf", f.name)), conf)?;
    Ok(())
}

fn main() -> modalnav::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "fixtures".into());
    std::fs::create_dir_all(&dir)?;
    for f in fixtures() {
        write(&dir, &f)?;
        println!("wrote {}", dir.join(f.name).display());
    }
    Ok(())
}
