//! 2.5D grid containers, world/grid transforms and the plain-text grid format.
//!
//! Cells are stored row-major. Row 0 sits at the minimum-x edge of the map and
//! column 0 at the minimum-y edge, so rows advance along world x and columns
//! along world y. The map is `height` meters long in x and `width` meters long
//! in y, centered on `origin`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when flooring world coordinates onto cell indices, so that a
/// position sitting on a cell boundary is not pushed into the previous cell by
/// rounding noise in `pos / res`.
const INDEX_EPS: f64 = 1e-9;

/// Upper bound on cells accepted from a text header.
pub const MAX_CELLS: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    /// Meters per cell.
    pub resolution: f64,
    /// Extent along world y, in meters.
    pub width: f64,
    /// Extent along world x, in meters.
    pub height: f64,
    /// World position of the map center.
    pub origin: [f64; 2],
    pub rows: usize,
    pub cols: usize,
}

impl GridMeta {
    pub fn new(rows: usize, cols: usize, resolution: f64, origin: [f64; 2]) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidParam(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParam(
                "grid must have at least one cell".into(),
            ));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParam("origin must be finite".into()));
        }
        Ok(GridMeta {
            resolution,
            width: cols as f64 * resolution,
            height: rows as f64 * resolution,
            origin,
            rows,
            cols,
        })
    }

    /// Builds the geometry from metric extents; cell counts are rounded.
    pub fn from_extent(resolution: f64, width: f64, height: f64, origin: [f64; 2]) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidParam(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        let rows = (height / resolution).round();
        let cols = (width / resolution).round();
        if !(rows >= 1.0 && cols >= 1.0 && rows * cols <= MAX_CELLS as f64) {
            return Err(Error::InvalidParam(format!(
                "extent {height} x {width} m does not give a usable grid at {resolution} m"
            )));
        }
        let mut meta = GridMeta::new(rows as usize, cols as usize, resolution, origin)?;
        meta.width = width;
        meta.height = height;
        Ok(meta)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    /// Flat row-major index. Caller guarantees `contains(cell)`.
    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.cols + cell.col
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.cols, index % self.cols)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| Cell::new(r, c)))
    }

    /// Continuous grid coordinates (in cells) of a world position; cell
    /// `(r, c)` covers `[r, r+1) x [c, c+1)`.
    pub fn world_to_continuous(&self, x: f64, y: f64) -> (f64, f64) {
        let u = (self.height / 2.0 + x - self.origin[0]) / self.resolution;
        let v = (self.width / 2.0 + y - self.origin[1]) / self.resolution;
        (u, v)
    }

    pub fn world_to_grid(&self, x: f64, y: f64) -> Result<Cell> {
        let (u, v) = self.world_to_continuous(x, y);
        // Cells are half-open, except that the far edge of the map belongs to
        // the last row/column so the whole closed extent is addressable.
        let snap = |p: f64, n: usize| -> Option<usize> {
            let i = (p + INDEX_EPS).floor();
            if i >= 0.0 && i < n as f64 {
                Some(i as usize)
            } else if i == n as f64 && p <= n as f64 + INDEX_EPS {
                Some(n - 1)
            } else {
                None
            }
        };
        match (snap(u, self.rows), snap(v, self.cols)) {
            (Some(r), Some(c)) => Ok(Cell::new(r, c)),
            _ => Err(Error::OutOfBounds { x, y }),
        }
    }

    /// World position of the cell center.
    pub fn grid_to_world(&self, cell: Cell) -> Result<[f64; 2]> {
        if !self.contains(cell) {
            return Err(Error::CellOutOfBounds {
                row: cell.row,
                col: cell.col,
            });
        }
        Ok(self.center(cell))
    }

    #[inline]
    pub(crate) fn center(&self, cell: Cell) -> [f64; 2] {
        [
            (cell.row as f64 + 0.5) * self.resolution - self.height / 2.0 + self.origin[0],
            (cell.col as f64 + 0.5) * self.resolution - self.width / 2.0 + self.origin[1],
        ]
    }

    /// True when both grids describe the same cells in the same place.
    pub fn same_geometry(&self, other: &GridMeta) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        self.rows == other.rows
            && self.cols == other.cols
            && close(self.resolution, other.resolution)
            && close(self.origin[0], other.origin[0])
            && close(self.origin[1], other.origin[1])
    }

    pub(crate) fn ensure_same(&self, other: &GridMeta, what: &str) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} @ {} vs {}x{} @ {}",
                self.rows, self.cols, self.resolution, other.rows, other.cols, other.resolution
            )))
        }
    }
}

/// Height field with per-cell variance. Unobserved cells hold `NaN` in both
/// layers and are reported as `None` by the accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    meta: GridMeta,
    heights: Vec<f64>,
    variances: Vec<f64>,
}

impl ElevationGrid {
    pub fn unobserved(meta: GridMeta) -> Self {
        ElevationGrid {
            meta,
            heights: vec![f64::NAN; meta.len()],
            variances: vec![f64::NAN; meta.len()],
        }
    }

    /// Every `NaN` height is kept unobserved; the rest start at `prior_variance`.
    pub fn from_heights(meta: GridMeta, heights: Vec<f64>, prior_variance: f64) -> Result<Self> {
        if heights.len() != meta.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} heights, got {}",
                meta.len(),
                heights.len()
            )));
        }
        if !(prior_variance.is_finite() && prior_variance >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "prior variance must be finite and non-negative, got {prior_variance}"
            )));
        }
        if heights.iter().any(|h| h.is_infinite()) {
            return Err(Error::InvalidParam("heights must be finite or NaN".into()));
        }
        let variances = heights
            .iter()
            .map(|h| if h.is_nan() { f64::NAN } else { prior_variance })
            .collect();
        Ok(ElevationGrid {
            meta,
            heights,
            variances,
        })
    }

    pub fn flat(meta: GridMeta, height: f64, prior_variance: f64) -> Result<Self> {
        Self::from_heights(meta, vec![height; meta.len()], prior_variance)
    }

    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    pub fn height(&self, cell: Cell) -> Option<f64> {
        if !self.meta.contains(cell) {
            return None;
        }
        let h = self.heights[self.meta.index(cell)];
        (!h.is_nan()).then_some(h)
    }

    pub fn variance(&self, cell: Cell) -> Option<f64> {
        if !self.meta.contains(cell) {
            return None;
        }
        let v = self.variances[self.meta.index(cell)];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_observed(&self, cell: Cell) -> bool {
        self.height(cell).is_some()
    }

    pub(crate) fn require_height(&self, cell: Cell) -> Result<f64> {
        if !self.meta.contains(cell) {
            return Err(Error::CellOutOfBounds {
                row: cell.row,
                col: cell.col,
            });
        }
        self.height(cell).ok_or(Error::Unobserved {
            row: cell.row,
            col: cell.col,
        })
    }

    pub fn set(&mut self, cell: Cell, height: f64, variance: f64) -> Result<()> {
        if !self.meta.contains(cell) {
            return Err(Error::CellOutOfBounds {
                row: cell.row,
                col: cell.col,
            });
        }
        if !height.is_finite() || !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "cell value must be finite with non-negative variance, got ({height}, {variance})"
            )));
        }
        let i = self.meta.index(cell);
        self.heights[i] = height;
        self.variances[i] = variance;
        Ok(())
    }

    /// Raw height layer, `NaN` where unobserved.
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn max_observed_height(&self) -> Option<f64> {
        self.heights
            .iter()
            .copied()
            .filter(|h| !h.is_nan())
            .reduce(f64::max)
    }

    /// Maximum observed height over the 2x2 block anchored at `cell`
    /// (`cell`, one row up, one column up, and the diagonal). Block members
    /// falling off the grid are skipped.
    pub fn max_elevation_footprint(&self, cell: Cell) -> Result<f64> {
        if !self.meta.contains(cell) {
            return Err(Error::CellOutOfBounds {
                row: cell.row,
                col: cell.col,
            });
        }
        [(0, 0), (1, 0), (0, 1), (1, 1)]
            .into_iter()
            .filter_map(|(dr, dc)| self.height(Cell::new(cell.row + dr, cell.col + dc)))
            .reduce(f64::max)
            .ok_or(Error::Unobserved {
                row: cell.row,
                col: cell.col,
            })
    }

    pub fn to_text(&self) -> GridText {
        GridText {
            meta: self.meta,
            values: self.heights.clone(),
        }
    }

    pub fn from_text(text: GridText, prior_variance: f64) -> Result<Self> {
        Self::from_heights(text.meta, text.values, prior_variance)
    }

    pub fn load(path: impl AsRef<Path>, prior_variance: f64) -> Result<Self> {
        Self::from_text(GridText::load(path)?, prior_variance)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_text().save(path)
    }
}

/// Plain-text grid file.
///
/// ```text
/// rows cols resolution origin_x origin_y
/// v v v ...   (cols values, `rows` lines)
/// ```
///
/// Values are meters (heightmaps) or costs (costmap exports); `nan` marks an
/// unobserved cell. Serialization writes six decimal places.
#[derive(Debug, Clone, PartialEq)]
pub struct GridText {
    pub meta: GridMeta,
    pub values: Vec<f64>,
}

impl GridText {
    pub fn parse(input: &str) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());

        let (header_line, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                header_line,
                format!(
                    "header needs 5 fields (rows cols resolution origin_x origin_y), found {}",
                    fields.len()
                ),
            ));
        }
        let count = |s: &str, name: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| {
                Error::parse(header_line, format!("{name} is not a cell count: {s:?}"))
            })
        };
        let real = |s: &str, name: &str| -> Result<f64> {
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(
                    header_line,
                    format!("{name} is not a finite number: {s:?}"),
                )),
            }
        };
        let rows = count(fields[0], "rows")?;
        let cols = count(fields[1], "cols")?;
        let resolution = real(fields[2], "resolution")?;
        let origin = [real(fields[3], "origin_x")?, real(fields[4], "origin_y")?];
        match rows.checked_mul(cols) {
            Some(n) if n <= MAX_CELLS => {}
            _ => {
                return Err(Error::parse(
                    header_line,
                    format!("grid of {rows}x{cols} is too large"),
                ))
            }
        }
        let meta = GridMeta::new(rows, cols, resolution, origin)
            .map_err(|e| Error::parse(header_line, e.to_string()))?;

        let mut values = Vec::with_capacity(meta.len().min(1 << 20));
        let mut seen_rows = 0;
        let mut last_line = header_line;
        for (line_no, line) in lines {
            last_line = line_no;
            if seen_rows == rows {
                return Err(Error::parse(
                    line_no,
                    format!("header declares {rows} rows but more data follows"),
                ));
            }
            let before = values.len();
            for tok in line.split_whitespace() {
                values.push(
                    parse_value(tok)
                        .ok_or_else(|| Error::parse(line_no, format!("not a number: {tok:?}")))?,
                );
            }
            let got = values.len() - before;
            if got != cols {
                return Err(Error::parse(
                    line_no,
                    format!("expected {cols} values, found {got}"),
                ));
            }
            seen_rows += 1;
        }
        if seen_rows != rows {
            return Err(Error::parse(
                last_line,
                format!("header declares {rows} rows but only {seen_rows} present"),
            ));
        }
        Ok(GridText { meta, values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

impl std::fmt::Display for GridText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let m = &self.meta;
        writeln!(
            f,
            "{} {} {:.6} {:.6} {:.6}",
            m.rows, m.cols, m.resolution, m.origin[0], m.origin[1]
        )?;
        let mut line = String::new();
        for row in self.values.chunks(m.cols) {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                write_value(&mut line, *v);
            }
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn parse_value(tok: &str) -> Option<f64> {
    if tok == "nan" {
        return Some(f64::NAN);
    }
    // Rust accepts "inf"/"NaN" spellings too; only finite decimals are valid here.
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub(crate) fn write_value(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("nan");
    } else {
        let _ = write!(out, "{v:.6}");
    }
}
