//! Height fusion and classical traversability.
//!
//! Each cell runs an independent scalar Kalman filter on its height: the cell
//! estimate is the prior and a point measurement is the observation. The
//! traversability layer combines a slope filter (surface gradient from central
//! differences) and a step filter (largest height jump inside a window).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, ElevationGrid, GridMeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMeasurement {
    /// World xyz, meters.
    pub position: [f64; 3],
    /// Variance of the z reading, m^2.
    pub variance: f64,
}

impl PointMeasurement {
    pub fn new(position: [f64; 3], variance: f64) -> Result<Self> {
        if !position.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParam(
                "measurement position must be finite".into(),
            ));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidParam(format!(
                "measurement variance must be positive, got {variance}"
            )));
        }
        Ok(PointMeasurement { position, variance })
    }
}

/// Scalar Kalman update of a height estimate `(h, var)` with observation
/// `(z, var_z)`. Returns the posterior pair.
pub fn kalman_update(height: f64, variance: f64, z: f64, z_variance: f64) -> (f64, f64) {
    let s = variance + z_variance;
    if s <= 0.0 {
        return (height, variance);
    }
    let h = (z_variance * height + variance * z) / s;
    let v = (variance * z_variance) / s;
    (h, v)
}

/// Fuses one point into the grid cell under it. An unobserved cell takes the
/// measurement as its initial estimate. Returns the updated cell.
pub fn fuse_point(grid: &mut ElevationGrid, m: &PointMeasurement) -> Result<Cell> {
    if !(m.variance.is_finite() && m.variance > 0.0) || !m.position.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParam(
            "measurement needs finite position and positive variance".into(),
        ));
    }
    let cell = grid.meta().world_to_grid(m.position[0], m.position[1])?;
    let z = m.position[2];
    let (h, v) = match (grid.height(cell), grid.variance(cell)) {
        (Some(h), Some(v)) => kalman_update(h, v, z, m.variance),
        _ => (z, m.variance),
    };
    grid.set(cell, h, v)?;
    Ok(cell)
}

/// Fuses a batch in order. Stops at the first failing measurement and reports
/// its position in the batch.
pub fn fuse_points<'a>(
    grid: &mut ElevationGrid,
    points: impl IntoIterator<Item = &'a PointMeasurement>,
) -> Result<usize> {
    let mut n = 0;
    for p in points {
        fuse_point(grid, p).map_err(|e| match e {
            Error::OutOfBounds { .. } | Error::InvalidParam(_) => {
                Error::InvalidParam(format!("measurement #{}: {e}", n + 1))
            }
            e => e,
        })?;
        n += 1;
    }
    Ok(n)
}

/// Parses a point stream: one `x y z variance` line per measurement. Blank
/// lines and lines starting with `#` are skipped.
pub fn parse_point_stream(input: &str) -> Result<Vec<PointMeasurement>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut vals = [0.0; 4];
        let mut n = 0;
        for tok in line.split_whitespace() {
            if n == 4 {
                return Err(Error::parse(line_no, "expected 4 fields: x y z variance"));
            }
            vals[n] = tok
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line_no, format!("not a finite number: {tok:?}")))?;
            n += 1;
        }
        if n != 4 {
            return Err(Error::parse(line_no, "expected 4 fields: x y z variance"));
        }
        let m = PointMeasurement::new([vals[0], vals[1], vals[2]], vals[3])
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.push(m);
    }
    Ok(out)
}

pub fn load_point_stream(path: impl AsRef<Path>) -> Result<Vec<PointMeasurement>> {
    parse_point_stream(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraversabilityParams {
    /// Slope (radians) at which the slope score reaches 0.
    pub max_slope: f64,
    /// Height jump (meters) at which the step score reaches 0.
    pub max_step: f64,
    pub slope_weight: f64,
    pub step_weight: f64,
    /// Side length of the step window in cells; odd.
    pub window: usize,
}

impl Default for TraversabilityParams {
    fn default() -> Self {
        TraversabilityParams {
            max_slope: 0.35,
            max_step: 0.08,
            slope_weight: 0.5,
            step_weight: 0.5,
            window: 3,
        }
    }
}

impl TraversabilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_slope.is_finite() && self.max_slope > 0.0) {
            return Err(Error::InvalidParam("max_slope must be positive".into()));
        }
        if !(self.max_step.is_finite() && self.max_step > 0.0) {
            return Err(Error::InvalidParam("max_step must be positive".into()));
        }
        let w = [self.slope_weight, self.step_weight];
        if !w.iter().all(|v| (0.0..=1.0).contains(v)) || (w[0] + w[1] - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(
                "slope_weight and step_weight must lie in [0, 1] and sum to 1".into(),
            ));
        }
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParam(
                "window must be odd and at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-cell ground traversability in `[0, 1]`; 0 for unobserved cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversabilityGrid {
    meta: GridMeta,
    scores: Vec<f64>,
}

impl TraversabilityGrid {
    pub fn from_scores(meta: GridMeta, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != meta.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} scores, got {}",
                meta.len(),
                scores.len()
            )));
        }
        if !scores.iter().all(|s| (0.0..=1.0).contains(s)) {
            return Err(Error::InvalidParam(
                "traversability scores must lie in [0, 1]".into(),
            ));
        }
        Ok(TraversabilityGrid { meta, scores })
    }

    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    pub fn score(&self, cell: Cell) -> f64 {
        if self.meta.contains(cell) {
            self.scores[self.meta.index(cell)]
        } else {
            0.0
        }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Slope/step traversability. Cells whose neighborhood touches unobserved
/// data score 0; neighborhoods are clipped at the grid border and gradients
/// there fall back to one-sided differences.
pub fn compute_traversability(
    grid: &ElevationGrid,
    params: &TraversabilityParams,
) -> Result<TraversabilityGrid> {
    params.validate()?;
    let meta = *grid.meta();
    let radius = (params.window / 2).max(1);
    let scores = meta
        .cells()
        .map(|cell| cell_score(grid, cell, radius, params))
        .collect();
    Ok(TraversabilityGrid { meta, scores })
}

fn cell_score(grid: &ElevationGrid, cell: Cell, radius: usize, p: &TraversabilityParams) -> f64 {
    let meta = grid.meta();
    let Some(center) = grid.height(cell) else {
        return 0.0;
    };
    let r0 = cell.row.saturating_sub(radius);
    let c0 = cell.col.saturating_sub(radius);
    let r1 = (cell.row + radius).min(meta.rows - 1);
    let c1 = (cell.col + radius).min(meta.cols - 1);
    let step_radius = p.window / 2;

    let mut max_step: f64 = 0.0;
    for r in r0..=r1 {
        for c in c0..=c1 {
            let Some(h) = grid.height(Cell::new(r, c)) else {
                return 0.0;
            };
            if r.abs_diff(cell.row) <= step_radius && c.abs_diff(cell.col) <= step_radius {
                max_step = max_step.max((h - center).abs());
            }
        }
    }

    let res = meta.resolution;
    // Neighbors were all observed above, so these lookups cannot fail.
    let h = |r: usize, c: usize| grid.height(Cell::new(r, c)).unwrap_or(center);
    let derivative = |lo: Option<(usize, usize)>, hi: Option<(usize, usize)>| match (lo, hi) {
        (Some(a), Some(b)) => (h(b.0, b.1) - h(a.0, a.1)) / (2.0 * res),
        (None, Some(b)) => (h(b.0, b.1) - center) / res,
        (Some(a), None) => (center - h(a.0, a.1)) / res,
        (None, None) => 0.0,
    };
    let up = |i: usize, n: usize| (i + 1 < n).then_some(i + 1);
    let down = |i: usize| i.checked_sub(1);
    let gx = derivative(
        down(cell.row).map(|r| (r, cell.col)),
        up(cell.row, meta.rows).map(|r| (r, cell.col)),
    );
    let gy = derivative(
        down(cell.col).map(|c| (cell.row, c)),
        up(cell.col, meta.cols).map(|c| (cell.row, c)),
    );
    let slope = gx.hypot(gy).atan();

    let slope_score = (1.0 - slope / p.max_slope).clamp(0.0, 1.0);
    let step_score = (1.0 - max_step / p.max_step).clamp(0.0, 1.0);
    (p.slope_weight * slope_score + p.step_weight * step_score).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn meta(n: usize) -> GridMeta {
        GridMeta::new(n, n, 0.1, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn kalman_update_hand_values() {
        let (h, v) = kalman_update(1.0, 0.04, 1.2, 0.04);
        assert_abs_diff_eq!(h, 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.02, epsilon = 1e-12);
    }

    #[test]
    fn fuse_initializes_unobserved_cell() {
        let mut g = ElevationGrid::unobserved(meta(4));
        let cell = fuse_point(
            &mut g,
            &PointMeasurement::new([0.0, 0.0, 0.7], 0.01).unwrap(),
        )
        .unwrap();
        assert_eq!(g.height(cell), Some(0.7));
        assert_eq!(g.variance(cell), Some(0.01));
    }

    #[test]
    fn zero_variance_prior_dominates() {
        let mut g = ElevationGrid::flat(meta(4), 2.0, 0.0).unwrap();
        let cell = fuse_point(
            &mut g,
            &PointMeasurement::new([0.05, 0.05, 9.0], 0.5).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(g.height(cell).unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn fuse_out_of_extent_is_bounds_error() {
        let mut g = ElevationGrid::unobserved(meta(4));
        let err = fuse_point(
            &mut g,
            &PointMeasurement::new([5.0, 0.0, 1.0], 0.01).unwrap(),
        );
        assert!(matches!(err, Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn point_stream_parsing() {
        let pts = parse_point_stream("# x y z var\n0 0 1.0 0.01\n\n0.1 -0.1 2 0.5\n").unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].position, [0.1, -0.1, 2.0]);
        assert!(matches!(
            parse_point_stream("0 0 1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_point_stream("0 0 1 0.1\n0 0 1 0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_point_stream("0 0 1 0.1 5\n").is_err());
        assert!(parse_point_stream("0 0 nan 0.1\n").is_err());
    }

    #[test]
    fn flat_grid_fully_traversable() {
        let g = ElevationGrid::flat(meta(7), 0.0, 0.01).unwrap();
        let t = compute_traversability(&g, &TraversabilityParams::default()).unwrap();
        assert!(t.scores().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn step_zeroes_step_component() {
        let m = meta(8);
        let heights = m
            .cells()
            .map(|c| if c.row >= 4 { 1.5 } else { 0.0 })
            .collect();
        let g = ElevationGrid::from_heights(m, heights, 0.01).unwrap();
        let params = TraversabilityParams {
            max_step: 0.1,
            slope_weight: 0.0,
            step_weight: 1.0,
            ..Default::default()
        };
        let t = compute_traversability(&g, &params).unwrap();
        for c in 0..8 {
            assert_eq!(t.score(Cell::new(3, c)), 0.0);
            assert_eq!(t.score(Cell::new(4, c)), 0.0);
            assert_eq!(t.score(Cell::new(1, c)), 1.0);
            assert_eq!(t.score(Cell::new(6, c)), 1.0);
        }
    }

    #[test]
    fn ramp_at_max_slope_has_zero_slope_score() {
        let p = TraversabilityParams {
            slope_weight: 1.0,
            step_weight: 0.0,
            ..Default::default()
        };
        let m = meta(9);
        let grad = p.max_slope.tan();
        let heights = m
            .cells()
            .map(|c| c.row as f64 * m.resolution * grad)
            .collect();
        let g = ElevationGrid::from_heights(m, heights, 0.01).unwrap();
        let t = compute_traversability(&g, &p).unwrap();
        for r in 1..8 {
            assert_abs_diff_eq!(t.score(Cell::new(r, 4)), 0.0, epsilon = 1e-9);
        }

        // With the step filter alone, each window sees a rise of res * tan(max_slope).
        let step_only = TraversabilityParams {
            slope_weight: 0.0,
            step_weight: 1.0,
            ..p
        };
        let t = compute_traversability(&g, &step_only).unwrap();
        let expected = (1.0 - 0.1 * grad / step_only.max_step).clamp(0.0, 1.0);
        assert_abs_diff_eq!(t.score(Cell::new(4, 4)), expected, epsilon = 1e-9);
    }

    #[test]
    fn unobserved_neighborhood_scores_zero() {
        let m = meta(5);
        let mut heights = vec![0.0; m.len()];
        heights[m.index(Cell::new(2, 2))] = f64::NAN;
        let g = ElevationGrid::from_heights(m, heights, 0.01).unwrap();
        let t = compute_traversability(&g, &TraversabilityParams::default()).unwrap();
        assert_eq!(t.score(Cell::new(2, 2)), 0.0);
        assert_eq!(t.score(Cell::new(1, 1)), 0.0);
        assert_eq!(t.score(Cell::new(3, 2)), 0.0);
        assert_eq!(t.score(Cell::new(0, 0)), 1.0);
    }

    #[test]
    fn params_validation() {
        let bad = [
            TraversabilityParams {
                window: 2,
                ..Default::default()
            },
            TraversabilityParams {
                window: 0,
                ..Default::default()
            },
            TraversabilityParams {
                slope_weight: 0.7,
                ..Default::default()
            },
            TraversabilityParams {
                max_step: 0.0,
                ..Default::default()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
        assert!(TraversabilityParams::default().validate().is_ok());
    }
}
