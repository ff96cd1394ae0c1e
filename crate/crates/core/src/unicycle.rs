//! Unicycle kinematics `ẋ = v cos θ, ẏ = v sin θ, θ̇ = ω` under
//! piecewise-constant controls, and the sensitivity of past states to
//! perturbations of the final state.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Point2};
use crate::scenario::TrajectoryV;

/// Below this angular rate a segment is integrated as a straight line.
pub const STRAIGHT_OMEGA: f64 = 1e-12;

/// Step used when integrating the variational equation.
const SENSITIVITY_STEP: f64 = 1e-3;

/// Slack on the horizon check so that sample times computed by summing
/// durations are accepted.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSegment {
    pub v: f64,
    pub omega: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnicycleControls {
    pub segments: Vec<ControlSegment>,
}

impl UnicycleControls {
    pub fn new(segments: Vec<ControlSegment>) -> Result<Self> {
        for (i, s) in segments.iter().enumerate() {
            if !(s.v.is_finite() && s.omega.is_finite()) {
                return Err(Error::Schema(format!("controls[{i}] has non-finite v or omega")));
            }
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::Schema(format!("controls[{i}].duration must be > 0")));
            }
        }
        Ok(Self { segments })
    }

    pub fn horizon(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Segment active at time `t` and the segment's start time. At a boundary
    /// the later segment is returned.
    fn segment_at(&self, t: f64) -> Option<(usize, f64)> {
        let mut start = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if t < start + s.duration || i + 1 == self.segments.len() {
                return Some((i, start));
            }
            start += s.duration;
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UnicycleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl UnicycleState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Exact flow of one constant-control segment for a time `dt`. The heading is
/// left unwrapped.
fn advance(state: UnicycleState, seg: &ControlSegment, dt: f64) -> UnicycleState {
    let th = state.theta;
    if seg.omega.abs() < STRAIGHT_OMEGA {
        UnicycleState {
            x: state.x + seg.v * dt * th.cos(),
            y: state.y + seg.v * dt * th.sin(),
            theta: th,
        }
    } else {
        let r = seg.v / seg.omega;
        let th1 = th + seg.omega * dt;
        UnicycleState {
            x: state.x + r * (th1.sin() - th.sin()),
            y: state.y - r * (th1.cos() - th.cos()),
            theta: th1,
        }
    }
}

fn check_time(controls: &UnicycleControls, t: f64) -> Result<()> {
    let horizon = controls.horizon();
    if !(t >= -TIME_SLACK && t <= horizon + TIME_SLACK) || controls.segments.is_empty() {
        return Err(Error::TimeOutOfRange { t, horizon });
    }
    Ok(())
}

/// State at time `t` starting from `initial`, heading unwrapped.
fn state_at_raw(controls: &UnicycleControls, initial: UnicycleState, t: f64) -> Result<UnicycleState> {
    check_time(controls, t)?;
    let t = t.clamp(0.0, controls.horizon());
    let mut state = initial;
    let mut start = 0.0;
    for seg in &controls.segments {
        if t <= start + seg.duration {
            return Ok(advance(state, seg, t - start));
        }
        state = advance(state, seg, seg.duration);
        start += seg.duration;
    }
    Ok(state)
}

/// States at the requested times, starting from `initial`.
pub fn integrate_from(
    controls: &UnicycleControls,
    initial: UnicycleState,
    sample_times: &[f64],
) -> Result<Vec<UnicycleState>> {
    sample_times
        .iter()
        .map(|&t| {
            state_at_raw(controls, initial, t).map(|s| UnicycleState::new(s.x, s.y, s.theta))
        })
        .collect()
}

/// States at the requested times, starting from the origin with zero heading.
pub fn integrate(controls: &UnicycleControls, sample_times: &[f64]) -> Result<Vec<UnicycleState>> {
    integrate_from(controls, UnicycleState::default(), sample_times)
}

/// Vehicle-frame measurement points and headings (the frame is defined by a
/// zero initial state).
pub fn controls_to_trajectory_v(controls: &UnicycleControls, sample_times: &[f64]) -> Result<TrajectoryV> {
    let states = integrate(controls, sample_times)?;
    Ok(TrajectoryV {
        points: states.iter().map(UnicycleState::position).collect(),
        headings: Some(states.iter().map(|s| s.theta).collect()),
    })
}

/// `Φ(t, t_f) = ∂q(t)/∂q(t_f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityMatrix(pub Matrix3<f64>);

impl SensitivityMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

fn linearized_dynamics(v: f64, theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(0.0, 0.0, -v * s, 0.0, 0.0, v * c, 0.0, 0.0, 0.0)
}

/// Sensitivity along the nominal trajectory that starts at `initial`.
///
/// Integrates `dΦ/dτ = F(τ) Φ` backward from `Φ(t_f, t_f) = I` with classical
/// RK4, splitting at segment boundaries so each step sees constant controls.
pub fn sensitivity_from(
    controls: &UnicycleControls,
    initial: UnicycleState,
    t: f64,
    t_f: f64,
) -> Result<SensitivityMatrix> {
    check_time(controls, t)?;
    check_time(controls, t_f)?;
    if t > t_f {
        return Err(Error::TimeOutOfRange { t, horizon: t_f });
    }
    let horizon = controls.horizon();
    let (t, t_f) = (t.clamp(0.0, horizon), t_f.clamp(0.0, horizon));

    // segment boundaries inside (t, t_f), walked backwards
    let mut cuts = vec![t_f];
    let mut acc = 0.0;
    let mut bounds = Vec::new();
    for seg in &controls.segments {
        acc += seg.duration;
        if acc > t && acc < t_f {
            bounds.push(acc);
        }
    }
    cuts.extend(bounds.into_iter().rev());
    cuts.push(t);

    let mut phi = Matrix3::identity();
    for w in cuts.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        if hi - lo <= 0.0 {
            continue;
        }
        let mid = 0.5 * (hi + lo);
        let (seg_idx, seg_start) = controls.segment_at(mid).expect("non-empty controls");
        let seg = controls.segments[seg_idx];
        let seg_start_state = state_at_raw(controls, initial, seg_start)?;
        let theta_at = |tau: f64| advance(seg_start_state, &seg, tau - seg_start).theta;
        let f = |tau: f64| linearized_dynamics(seg.v, theta_at(tau));

        let n = ((hi - lo) / SENSITIVITY_STEP).ceil().max(1.0) as usize;
        let h = -(hi - lo) / n as f64;
        let mut tau = hi;
        for _ in 0..n {
            let k1 = f(tau) * phi;
            let k2 = f(tau + 0.5 * h) * (phi + k1 * (0.5 * h));
            let k3 = f(tau + 0.5 * h) * (phi + k2 * (0.5 * h));
            let k4 = f(tau + h) * (phi + k3 * h);
            phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            tau += h;
        }
    }
    Ok(SensitivityMatrix(phi))
}

/// Sensitivity along the trajectory that starts at the origin.
pub fn sensitivity(controls: &UnicycleControls, t: f64, t_f: f64) -> Result<SensitivityMatrix> {
    sensitivity_from(controls, UnicycleState::default(), t, t_f)
}
