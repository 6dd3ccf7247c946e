//! Energy, time and length accounting, plus the fly-everything baseline.
//!
//! An edge between consecutive waypoints is flown when either end is aerial
//! (take-off and landing legs are flights) and driven otherwise. Each change
//! of mode along the path costs one morph.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ElevationGrid;
use crate::planner::{ModalWaypoint, Mode, PlannerParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    /// Average driving power, W.
    pub drive_power: f64,
    /// Driving speed, m/s.
    pub drive_speed: f64,
    /// Average flying power, W.
    pub fly_power: f64,
    /// Flying speed, m/s.
    pub fly_speed: f64,
    /// Servo power while morphing, W.
    pub morph_power: f64,
    /// Morph duration, s.
    pub morph_duration: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            drive_power: 1.0,
            drive_speed: 1.0,
            fly_power: 60.0,
            fly_speed: 1.0,
            morph_power: 30.0,
            morph_duration: 5.0,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("drive_power", self.drive_power),
            ("drive_speed", self.drive_speed),
            ("fly_power", self.fly_power),
            ("fly_speed", self.fly_speed),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("morph_power", self.morph_power),
            ("morph_duration", self.morph_duration),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParam(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Joules per meter driven.
    pub fn drive_cost_per_meter(&self) -> f64 {
        self.drive_power / self.drive_speed
    }

    /// Joules per meter flown.
    pub fn fly_cost_per_meter(&self) -> f64 {
        self.fly_power / self.fly_speed
    }

    /// Joules per morph, constant servo power over the morph duration.
    pub fn morph_cost(&self) -> f64 {
        self.morph_power * self.morph_duration
    }

    pub fn speed(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Ground => self.drive_speed,
            Mode::Aerial => self.fly_speed,
        }
    }

    pub fn power(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Ground => self.drive_power,
            Mode::Aerial => self.fly_power,
        }
    }

    pub fn scaled_power(&self, k: f64) -> EnergyModel {
        EnergyModel {
            drive_power: self.drive_power * k,
            fly_power: self.fly_power * k,
            morph_power: self.morph_power * k,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanMetrics {
    /// Joules.
    pub energy: f64,
    /// Seconds.
    pub time: f64,
    /// Meters.
    pub length: f64,
    pub morph_count: usize,
}

/// Locomotion used on the edge `a -> b`.
pub fn edge_mode(a: &ModalWaypoint, b: &ModalWaypoint) -> Mode {
    if a.mode == Mode::Aerial || b.mode == Mode::Aerial {
        Mode::Aerial
    } else {
        Mode::Ground
    }
}

pub fn plan_metrics(waypoints: &[ModalWaypoint], model: &EnergyModel) -> PlanMetrics {
    let mut ground = 0.0;
    let mut air = 0.0;
    for w in waypoints.windows(2) {
        let d = w[0].distance(&w[1]);
        match edge_mode(&w[0], &w[1]) {
            Mode::Ground => ground += d,
            Mode::Aerial => air += d,
        }
    }
    let morph_count = waypoints
        .windows(2)
        .filter(|w| w[0].mode != w[1].mode)
        .count();
    let morphs = morph_count as f64;
    PlanMetrics {
        energy: ground * model.drive_cost_per_meter()
            + air * model.fly_cost_per_meter()
            + morphs * model.morph_cost(),
        time: ground / model.drive_speed + air / model.fly_speed + morphs * model.morph_duration,
        length: ground + air,
        morph_count,
    }
}

/// A pure flyer: climbs vertically from the start to the tallest terrain on
/// the map plus clearance, flies straight to above the goal and descends.
pub fn drone_baseline(
    elev: &ElevationGrid,
    start: [f64; 2],
    goal: [f64; 2],
    model: &EnergyModel,
    params: &PlannerParams,
) -> Result<PlanMetrics> {
    let meta = elev.meta();
    let start_cell = meta.world_to_grid(start[0], start[1])?;
    let goal_cell = meta.world_to_grid(goal[0], goal[1])?;
    let ground_start = elev.require_height(start_cell)?;
    let ground_goal = elev.require_height(goal_cell)?;
    let top = elev.max_observed_height().unwrap_or(0.0);
    let cruise = top + params.clearance;
    let climb = (cruise - ground_start).max(0.0);
    let descent = (cruise - ground_goal).max(0.0);
    let length = climb + (goal[0] - start[0]).hypot(goal[1] - start[1]) + descent;
    Ok(PlanMetrics {
        energy: length * model.fly_cost_per_meter(),
        time: length / model.fly_speed,
        length,
        morph_count: 0,
    })
}

/// Cruise altitude used by [`drone_baseline`].
pub fn drone_cruise_altitude(elev: &ElevationGrid, params: &PlannerParams) -> f64 {
    elev.max_observed_height().unwrap_or(0.0) + params.clearance
}
