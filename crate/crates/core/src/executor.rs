//! Stepped kinematic simulation of a mode-tagged path.
//!
//! Ground edges are tracked by a proportional unicycle controller, flown
//! edges by a constant-speed straight-line follower. Switching locomotion
//! inserts a stationary morph of fixed duration. Energy integrates the active
//! mode's power over time spent moving, plus one morph cost per switch.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::energy::{edge_mode, EnergyModel};
use crate::error::{Error, Result};
use crate::planner::{ModalWaypoint, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    /// Speed gain on remaining distance, 1/s.
    pub k_v: f64,
    /// Turn-rate gain on heading error, 1/s.
    pub k_omega: f64,
    /// Turn-rate limit, rad/s.
    pub max_omega: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains {
            k_v: 2.0,
            k_omega: 2.0,
            max_omega: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutorParams {
    /// Control period, s. 0.02 s is a 50 Hz loop.
    pub dt: f64,
    pub gains: ControlGains,
    /// Capture radius for waypoints, m.
    pub waypoint_tolerance: f64,
    /// Fail when the distance to the current target has not improved for this long, s.
    pub stall_timeout: f64,
    /// Starting heading; `None` faces the first waypoint that is not at the start.
    pub initial_heading: Option<f64>,
}

impl Default for ExecutorParams {
    fn default() -> Self {
        ExecutorParams {
            dt: 0.02,
            gains: ControlGains::default(),
            waypoint_tolerance: 0.1,
            stall_timeout: 10.0,
            initial_heading: None,
        }
    }
}

impl ExecutorParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("dt", self.dt),
            ("k_v", self.gains.k_v),
            ("k_omega", self.gains.k_omega),
            ("max_omega", self.gains.max_omega),
            ("waypoint_tolerance", self.waypoint_tolerance),
            ("stall_timeout", self.stall_timeout),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RobotMode {
    Ground,
    Aerial,
    Morphing { remaining: f64 },
}

impl RobotMode {
    pub fn label(&self) -> &'static str {
        match self {
            RobotMode::Ground => "ground",
            RobotMode::Aerial => "aerial",
            RobotMode::Morphing { .. } => "morphing",
        }
    }
}

impl From<Mode> for RobotMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ground => RobotMode::Ground,
            Mode::Aerial => RobotMode::Aerial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Heading, rad.
    pub theta: f64,
    pub mode: RobotMode,
    /// Distance travelled, m.
    pub odometer: f64,
    /// Simulation time, s.
    pub clock: f64,
    /// Energy spent, J.
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    SegmentStart,
    WaypointReached,
    MorphStart,
    MorphEnd,
    PathComplete,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::SegmentStart => "SEGMENT_START",
            EventKind::WaypointReached => "WAYPOINT_REACHED",
            EventKind::MorphStart => "MORPH_START",
            EventKind::MorphEnd => "MORPH_END",
            EventKind::PathComplete => "PATH_COMPLETE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub timestamp: f64,
    pub state: RobotState,
    pub kind: EventKind,
    /// Waypoint the event refers to, when there is one.
    pub waypoint: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionFailure {
    pub reason: String,
    pub trace: Vec<TraceEvent>,
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Proportional unicycle law toward `target`. Returns `(v, omega)`.
pub fn diff_drive_control(
    state: &RobotState,
    target: [f64; 2],
    gains: &ControlGains,
    max_speed: f64,
) -> (f64, f64) {
    let distance = (target[0] - state.x).hypot(target[1] - state.y);
    p_control(state, target, distance, gains, max_speed)
}

/// Same law with the speed term driven by `speed_distance` instead of the
/// distance to `target`, so a follower can hold speed through intermediate
/// waypoints.
fn p_control(
    state: &RobotState,
    target: [f64; 2],
    speed_distance: f64,
    gains: &ControlGains,
    max_speed: f64,
) -> (f64, f64) {
    let (dx, dy) = (target[0] - state.x, target[1] - state.y);
    if dx.hypot(dy) < 1e-12 {
        return (0.0, 0.0);
    }
    let error = wrap_angle(dy.atan2(dx) - state.theta);
    let omega = (gains.k_omega * error).clamp(-gains.max_omega, gains.max_omega);
    // The cosine taper takes speed to zero smoothly at the gate; without it a
    // saturated turn can circle a close waypoint forever.
    let v = if error.abs() >= PI / 2.0 {
        0.0
    } else {
        (gains.k_v * speed_distance).min(max_speed).max(0.0) * error.cos()
    };
    (v, omega)
}

/// Wheel angular speeds `(u_L, u_R)` for a differential drive.
pub fn wheel_commands(v: f64, omega: f64, wheelbase: f64, wheel_radius: f64) -> (f64, f64) {
    let half = omega * wheelbase / 2.0;
    ((v - half) / wheel_radius, (v + half) / wheel_radius)
}

struct Sim<'a> {
    model: &'a EnergyModel,
    params: &'a ExecutorParams,
    state: RobotState,
    trace: Vec<TraceEvent>,
}

impl Sim<'_> {
    fn log(&mut self, kind: EventKind, waypoint: Option<usize>) {
        self.trace.push(TraceEvent {
            timestamp: self.state.clock,
            state: self.state,
            kind,
            waypoint,
        });
    }

    fn fail(&mut self, reason: String) -> Error {
        Error::Execution(Box::new(ExecutionFailure {
            reason,
            trace: std::mem::take(&mut self.trace),
        }))
    }

    fn morph(&mut self, to: Mode, at: usize) {
        let t = self.model.morph_duration;
        self.state.mode = RobotMode::Morphing { remaining: t };
        self.log(EventKind::MorphStart, Some(at));
        self.state.clock += t;
        self.state.energy += self.model.morph_cost();
        self.state.mode = to.into();
        self.log(EventKind::MorphEnd, Some(at));
    }

    /// Straight-line flight onto the waypoint at constant speed.
    fn fly_to(&mut self, target: &ModalWaypoint) {
        let speed = self.model.fly_speed;
        loop {
            let d = [
                target.x - self.state.x,
                target.y - self.state.y,
                target.z - self.state.z,
            ];
            let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if dist <= 1e-12 {
                break;
            }
            let step = speed * self.params.dt;
            let (frac, dt) = if dist <= step {
                (1.0, dist / speed)
            } else {
                (step / dist, self.params.dt)
            };
            if d[0].hypot(d[1]) > 1e-12 {
                self.state.theta = d[1].atan2(d[0]);
            }
            self.state.x += d[0] * frac;
            self.state.y += d[1] * frac;
            self.state.z += d[2] * frac;
            self.state.odometer += dist * frac;
            self.state.clock += dt;
            self.state.energy += self.model.fly_power * dt;
        }
        self.state.x = target.x;
        self.state.y = target.y;
        self.state.z = target.z;
    }

    /// Drives toward `target` until within the capture radius.
    fn drive_to(
        &mut self,
        from: &ModalWaypoint,
        target: &ModalWaypoint,
        beyond: f64,
    ) -> Result<()> {
        let p = self.params;
        let goal = [target.x, target.y];
        let edge_len = (target.x - from.x).hypot(target.y - from.y);
        let mut best = f64::INFINITY;
        let mut since_progress = 0.0;
        loop {
            let dist = (goal[0] - self.state.x).hypot(goal[1] - self.state.y);
            if dist <= p.waypoint_tolerance {
                return Ok(());
            }
            if dist < best - 1e-9 {
                best = dist;
                since_progress = 0.0;
            } else {
                since_progress += p.dt;
                if since_progress > p.stall_timeout {
                    let msg = format!(
                        "no progress toward ({:.3}, {:.3}) for {:.1} s",
                        goal[0], goal[1], p.stall_timeout
                    );
                    return Err(self.fail(msg));
                }
            }
            let (v, omega) = p_control(
                &self.state,
                goal,
                dist + beyond,
                &p.gains,
                self.model.drive_speed,
            );
            let s = &mut self.state;
            s.theta = wrap_angle(s.theta + omega * p.dt);
            s.x += v * s.theta.cos() * p.dt;
            s.y += v * s.theta.sin() * p.dt;
            let left = (goal[0] - s.x).hypot(goal[1] - s.y);
            let progress = if edge_len > 0.0 {
                (1.0 - left / edge_len).clamp(0.0, 1.0)
            } else {
                1.0
            };
            s.z = from.z + progress * (target.z - from.z);
            s.odometer += v * p.dt;
            s.clock += p.dt;
            if v != 0.0 || omega != 0.0 {
                s.energy += self.model.drive_power * p.dt;
            }
        }
    }
}

/// Runs the path and returns the event trace, ending in `PathComplete`.
pub fn execute(
    waypoints: &[ModalWaypoint],
    model: &EnergyModel,
    params: &ExecutorParams,
) -> Result<Vec<TraceEvent>> {
    model.validate()?;
    params.validate()?;
    let Some(first) = waypoints.first() else {
        return Err(Error::InvalidParam("cannot execute an empty path".into()));
    };
    let theta = params.initial_heading.unwrap_or_else(|| {
        waypoints
            .iter()
            .find(|w| (w.x - first.x).hypot(w.y - first.y) > 1e-9)
            .map(|w| (w.y - first.y).atan2(w.x - first.x))
            .unwrap_or(0.0)
    });
    let mut sim = Sim {
        model,
        params,
        state: RobotState {
            x: first.x,
            y: first.y,
            z: first.z,
            theta,
            mode: first.mode.into(),
            odometer: 0.0,
            clock: 0.0,
            energy: 0.0,
        },
        trace: Vec::new(),
    };

    // Remaining driven length after each waypoint, up to the next flight.
    let n = waypoints.len();
    let mut ground_tail = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        let (a, b) = (&waypoints[i], &waypoints[i + 1]);
        if edge_mode(a, b) == Mode::Ground {
            ground_tail[i] = (b.x - a.x).hypot(b.y - a.y) + ground_tail[i + 1];
        }
    }

    let mut previous_edge = None;
    for i in 1..n {
        let (from, to) = (&waypoints[i - 1], &waypoints[i]);
        let need = edge_mode(from, to);
        if RobotMode::from(need) != sim.state.mode {
            sim.morph(need, i - 1);
        }
        if previous_edge != Some(need) {
            sim.log(EventKind::SegmentStart, Some(i - 1));
            previous_edge = Some(need);
        }
        match need {
            Mode::Ground => sim.drive_to(from, to, ground_tail[i])?,
            Mode::Aerial => sim.fly_to(to),
        }
        sim.log(EventKind::WaypointReached, Some(i));
        if to.mode == Mode::Ground && sim.state.mode == RobotMode::Aerial {
            sim.morph(Mode::Ground, i);
        }
    }
    sim.log(EventKind::PathComplete, Some(n - 1));
    Ok(sim.trace)
}

#[derive(Serialize)]
struct TraceRow<'a> {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
    theta: f64,
    mode: &'a str,
    #[serde(rename = "energy_J")]
    energy: f64,
    event: &'a str,
}

/// CSV export with columns `t,x,y,z,theta,mode,energy_J,event`.
pub fn write_trace_csv<W: Write>(trace: &[TraceEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in trace {
        let s = &e.state;
        w.serialize(TraceRow {
            t: round6(e.timestamp),
            x: round6(s.x),
            y: round6(s.y),
            z: round6(s.z),
            theta: round6(s.theta),
            mode: s.mode.label(),
            energy: round6(s.energy),
            event: e.kind.label(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn at(x: f64, y: f64, theta: f64) -> RobotState {
        RobotState {
            x,
            y,
            z: 0.0,
            theta,
            mode: RobotMode::Ground,
            odometer: 0.0,
            clock: 0.0,
            energy: 0.0,
        }
    }

    fn wp(x: f64, z: f64, mode: Mode) -> ModalWaypoint {
        ModalWaypoint { x, y: 0.0, z, mode }
    }

    #[test]
    fn control_dead_ahead() {
        let gains = ControlGains {
            k_v: 1.0,
            ..Default::default()
        };
        let (v, w) = diff_drive_control(&at(0.0, 0.0, 0.0), [10.0, 0.0], &gains, 1.0);
        assert_eq!(v, 1.0);
        assert_eq!(w, 0.0);
    }

    #[test]
    fn control_turns_in_place_when_target_abeam() {
        let gains = ControlGains::default();
        let (v, w) = diff_drive_control(&at(0.0, 0.0, 0.0), [0.0, 3.0], &gains, 1.0);
        assert_eq!(v, 0.0);
        assert_abs_diff_eq!(
            w,
            (gains.k_omega * PI / 2.0).min(gains.max_omega),
            epsilon = 1e-12
        );
        let loose = ControlGains {
            max_omega: 10.0,
            ..gains
        };
        let (_, w) = diff_drive_control(&at(0.0, 0.0, 0.0), [0.0, 3.0], &loose, 1.0);
        assert_abs_diff_eq!(w, loose.k_omega * PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn control_at_target() {
        let (v, w) = diff_drive_control(
            &at(1.0, 2.0, 0.3),
            [1.0, 2.0],
            &ControlGains::default(),
            1.0,
        );
        assert_eq!((v, w), (0.0, 0.0));
    }

    #[test]
    fn wheel_command_examples() {
        let (l, r) = wheel_commands(1.0, 0.0, 0.4, 0.1);
        assert_eq!(l, r);
        let (l, r) = wheel_commands(0.0, 1.5, 0.4, 0.1);
        assert_eq!(l, -r);
        let (l, r) = wheel_commands(1.0, 1.0, 0.4, 0.1);
        assert_abs_diff_eq!(l, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 12.0, epsilon = 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(2.0 * PI + 0.1), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn straight_ground_segment() {
        let model = EnergyModel::default();
        let path = [wp(0.0, 0.0, Mode::Ground), wp(10.0, 0.0, Mode::Ground)];
        let trace = execute(&path, &model, &ExecutorParams::default()).unwrap();
        let last = trace.last().unwrap();
        assert_eq!(last.kind, EventKind::PathComplete);
        assert!(
            (last.timestamp - 10.0).abs() / 10.0 < 0.1,
            "{}",
            last.timestamp
        );
        assert!(
            (last.state.energy - 10.0).abs() / 10.0 < 0.1,
            "{}",
            last.state.energy
        );
        assert!((last.state.x - 10.0).abs() <= 0.1);
    }

    #[test]
    fn ground_to_air_morphs_once() {
        let model = EnergyModel::default();
        let path = [wp(0.0, 0.0, Mode::Ground), wp(3.0, 1.0, Mode::Aerial)];
        let trace = execute(&path, &model, &ExecutorParams::default()).unwrap();
        let starts: Vec<_> = trace
            .iter()
            .filter(|e| e.kind == EventKind::MorphStart)
            .collect();
        let ends: Vec<_> = trace
            .iter()
            .filter(|e| e.kind == EventKind::MorphEnd)
            .collect();
        assert_eq!((starts.len(), ends.len()), (1, 1));
        assert_abs_diff_eq!(
            ends[0].timestamp - starts[0].timestamp,
            model.morph_duration,
            epsilon = 1e-12
        );
        let last = trace.last().unwrap();
        let flight = 10f64.sqrt();
        assert_abs_diff_eq!(
            last.timestamp,
            model.morph_duration + flight,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(last.state.energy, 150.0 + 60.0 * flight, epsilon = 1e-6);
    }

    #[test]
    fn single_waypoint_completes_immediately() {
        let trace = execute(
            &[wp(2.0, 0.0, Mode::Ground)],
            &EnergyModel::default(),
            &ExecutorParams::default(),
        )
        .unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].kind, EventKind::PathComplete);
        assert_eq!(trace[0].state.energy, 0.0);
        assert_eq!(trace[0].timestamp, 0.0);
    }

    #[test]
    fn stall_reports_partial_trace() {
        // A turn-rate limit this low cannot bring the heading around before
        // the stall timer runs out.
        let params = ExecutorParams {
            gains: ControlGains {
                max_omega: 1e-6,
                ..Default::default()
            },
            initial_heading: Some(PI),
            stall_timeout: 1.0,
            ..Default::default()
        };
        let path = [wp(0.0, 0.0, Mode::Ground), wp(5.0, 0.0, Mode::Ground)];
        match execute(&path, &EnergyModel::default(), &params) {
            Err(Error::Execution(f)) => {
                assert!(!f.trace.is_empty());
                assert!(f.trace.iter().all(|e| e.kind != EventKind::PathComplete));
            }
            other => panic!("expected execution failure, got {other:?}"),
        }
    }

    #[test]
    fn trace_csv_columns() {
        let trace = execute(
            &[wp(0.0, 0.0, Mode::Ground), wp(1.0, 0.0, Mode::Ground)],
            &EnergyModel::default(),
            &ExecutorParams::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,y,z,theta,mode,energy_J,event\n"));
        assert!(text.trim_end().ends_with("PATH_COMPLETE"));
    }
}
