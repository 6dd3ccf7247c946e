//! Multimodal locomotion costmap.
//!
//! Ground-traversable cells (traversability >= 0.5) cost `1 - traversability`,
//! so they lie in `[0, 0.5]`. Every other cell is aerial-only and costs the
//! locomotion energy ratio `L_e` plus a hundredth of its elevation. Cells whose
//! cost exceeds `L_e` are obstacles: every cell in the square neighborhood of
//! an obstacle is raised to at least the obstacle's cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, ElevationGrid, GridMeta, GridText};
use crate::perception::TraversabilityGrid;

pub const DEFAULT_ENERGY_RATIO: f64 = 60.0;
pub const DEFAULT_INFLATION_RADIUS: usize = 2;
/// Traversability below this is ground-impassable.
pub const TRAVERSABILITY_THRESHOLD: f64 = 0.5;
pub const ELEVATION_WEIGHT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostmapParams {
    /// Aerial-to-ground cost ratio `L_e`.
    pub energy_ratio: f64,
    /// Inflation half-width in cells.
    pub inflation_radius: usize,
}

impl Default for CostmapParams {
    fn default() -> Self {
        CostmapParams {
            energy_ratio: DEFAULT_ENERGY_RATIO,
            inflation_radius: DEFAULT_INFLATION_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalCostmap {
    meta: GridMeta,
    energy_ratio: f64,
    inflation_radius: usize,
    /// Costs straight out of the per-cell rule, before inflation.
    base: Vec<f64>,
    /// Traversability fell below the threshold.
    below_threshold: Vec<bool>,
    cost: Vec<f64>,
}

impl ModalCostmap {
    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    pub fn energy_ratio(&self) -> f64 {
        self.energy_ratio
    }

    pub fn inflation_radius(&self) -> usize {
        self.inflation_radius
    }

    pub fn cost(&self, cell: Cell) -> f64 {
        self.cost[self.meta.index(cell)]
    }

    pub fn base_cost(&self, cell: Cell) -> f64 {
        self.base[self.meta.index(cell)]
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn base_costs(&self) -> &[f64] {
        &self.base
    }

    /// Aerial-only: either the cell itself failed the traversability threshold
    /// or its (inflated) cost reached `L_e`. For non-negative elevations this
    /// is the same as `cost >= L_e`; the explicit mask keeps cells below the
    /// datum (whose aerial cost dips under `L_e`) classified correctly.
    pub fn is_aerial(&self, cell: Cell) -> bool {
        let i = self.meta.index(cell);
        self.below_threshold[i] || self.cost[i] >= self.energy_ratio
    }

    pub fn is_inflated(&self) -> bool {
        self.cost != self.base
    }

    pub fn to_text(&self) -> GridText {
        GridText {
            meta: self.meta,
            values: self.cost.clone(),
        }
    }
}

/// Per-cell cost rule without inflation.
pub fn cell_cost(traversability: f64, elevation: Option<f64>, energy_ratio: f64) -> f64 {
    if traversability < TRAVERSABILITY_THRESHOLD {
        energy_ratio + elevation.unwrap_or(0.0) * ELEVATION_WEIGHT
    } else {
        1.0 - traversability
    }
}

/// Costmap before the inflation pass.
pub fn base_costmap(
    elev: &ElevationGrid,
    trav: &TraversabilityGrid,
    params: &CostmapParams,
) -> Result<ModalCostmap> {
    let meta = *elev.meta();
    meta.ensure_same(trav.meta(), "elevation vs traversability")?;
    if !(params.energy_ratio.is_finite() && params.energy_ratio > TRAVERSABILITY_THRESHOLD) {
        return Err(Error::InvalidParam(format!(
            "energy ratio must exceed the ground cost range, got {}",
            params.energy_ratio
        )));
    }
    let mut base = Vec::with_capacity(meta.len());
    let mut below = Vec::with_capacity(meta.len());
    for cell in meta.cells() {
        let t = trav.score(cell);
        below.push(t < TRAVERSABILITY_THRESHOLD);
        base.push(cell_cost(t, elev.height(cell), params.energy_ratio));
    }
    Ok(ModalCostmap {
        meta,
        energy_ratio: params.energy_ratio,
        inflation_radius: params.inflation_radius,
        cost: base.clone(),
        below_threshold: below,
        base,
    })
}

/// Inflation pass. Obstacles are taken from the pre-inflation costs, so
/// applying it again yields the same map.
pub fn inflate(costmap: &ModalCostmap) -> ModalCostmap {
    let meta = costmap.meta;
    let radius = costmap.inflation_radius;
    let mut cost = costmap.base.clone();
    for (i, &value) in costmap.base.iter().enumerate() {
        if value <= costmap.energy_ratio {
            continue;
        }
        let cell = meta.cell_at(i);
        let r0 = cell.row.saturating_sub(radius);
        let r1 = (cell.row + radius).min(meta.rows - 1);
        let c0 = cell.col.saturating_sub(radius);
        let c1 = (cell.col + radius).min(meta.cols - 1);
        for r in r0..=r1 {
            let row = &mut cost[r * meta.cols + c0..=r * meta.cols + c1];
            for v in row {
                if *v < value {
                    *v = value;
                }
            }
        }
    }
    ModalCostmap {
        cost,
        ..costmap.clone()
    }
}

/// Full costmap: per-cell rule followed by inflation.
pub fn generate_costmap(
    elev: &ElevationGrid,
    trav: &TraversabilityGrid,
    params: &CostmapParams,
) -> Result<ModalCostmap> {
    Ok(inflate(&base_costmap(elev, trav, params)?))
}
