use serde::{Deserialize, Serialize};

use crate::simcore::Twist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainStep {
    Up,
    Down,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TeleopInput {
    pub axis_forward: f64,
    pub axis_turn: f64,
    pub deadman: bool,
    pub gain_step: GainStep,
}

impl TeleopInput {
    /// Axes clamped to [-1, 1], non-finite values read as centered.
    pub fn clamped(self) -> Self {
        let c = |a: f64| if a.is_finite() { a.clamp(-1.0, 1.0) } else { 0.0 };
        Self { axis_forward: c(self.axis_forward), axis_turn: c(self.axis_turn), ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeleopConfig {
    /// Speed increment per tick at full axis, m/s.
    pub delta_v: f64,
    /// Yaw-rate increment per tick at full axis, rad/s.
    pub delta_omega: f64,
    /// Multiplier applied to the increments by one gain step.
    pub gain_factor: f64,
    pub gain_min: f64,
    pub gain_max: f64,
    /// Setpoint limits; unset means the drivetrain's own limits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        Self {
            delta_v: 0.02,
            delta_omega: 0.05,
            gain_factor: 1.25,
            gain_min: 0.25,
            gain_max: 4.0,
            v_max: None,
            omega_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeleopState {
    pub setpoint: Twist,
    pub gain: f64,
}

impl Default for TeleopState {
    fn default() -> Self {
        Self { setpoint: Twist::ZERO, gain: 1.0 }
    }
}

/// One tick of the joystick mapping: the axes nudge the held setpoint.
/// Releasing the deadman zeroes it at once.
pub fn teleop_map(input: &TeleopInput, prev: &TeleopState, cfg: &TeleopConfig) -> TeleopState {
    let input = input.clamped();
    let gain = match input.gain_step {
        GainStep::Up => prev.gain * cfg.gain_factor,
        GainStep::Down => prev.gain / cfg.gain_factor,
        GainStep::None => prev.gain,
    }
    .clamp(cfg.gain_min, cfg.gain_max);
    if !input.deadman {
        return TeleopState { setpoint: Twist::ZERO, gain };
    }
    let v_max = cfg.v_max.unwrap_or(f64::INFINITY);
    let omega_max = cfg.omega_max.unwrap_or(f64::INFINITY);
    let v = (prev.setpoint.v + input.axis_forward * cfg.delta_v * gain).clamp(-v_max, v_max);
    let omega = (prev.setpoint.omega + input.axis_turn * cfg.delta_omega * gain).clamp(-omega_max, omega_max);
    TeleopState { setpoint: Twist { v, omega }, gain }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::RobotParams;
    use approx::assert_abs_diff_eq;

    fn cfg() -> TeleopConfig {
        let p = RobotParams::default();
        TeleopConfig { v_max: Some(p.max_speed()), omega_max: Some(p.max_yaw_rate(p.slip_widening_factor)), ..Default::default() }
    }

    fn held(fwd: f64, turn: f64) -> TeleopInput {
        TeleopInput { axis_forward: fwd, axis_turn: turn, deadman: true, gain_step: GainStep::None }
    }

    #[test]
    fn deadman_release_zeroes() {
        let prev = TeleopState { setpoint: Twist::new(0.8, 0.3), gain: 1.0 };
        let out = teleop_map(&TeleopInput { axis_forward: 1.0, ..Default::default() }, &prev, &cfg());
        assert_eq!(out.setpoint, Twist::ZERO);
    }

    #[test]
    fn centered_axes_hold_setpoint() {
        let prev = TeleopState { setpoint: Twist::new(0.5, -0.2), gain: 1.0 };
        assert_eq!(teleop_map(&held(0.0, 0.0), &prev, &cfg()).setpoint, prev.setpoint);
    }

    #[test]
    fn accumulates_then_clamps_at_top_speed() {
        let c = cfg();
        let mut s = TeleopState::default();
        for _ in 0..100 {
            s = teleop_map(&held(1.0, 0.0), &s, &c);
        }
        // 100 × 0.02 = 2.0 m/s requested, 2π·60·0.2/60 available
        assert_abs_diff_eq!(s.setpoint.v, 2.0f64.min(0.4 * std::f64::consts::PI), epsilon = 1e-12);
        assert_abs_diff_eq!(s.setpoint.v, 1.2566, epsilon = 1e-4);
    }

    #[test]
    fn gain_scales_increments() {
        let c = cfg();
        let up = teleop_map(&TeleopInput { gain_step: GainStep::Up, ..held(1.0, 1.0) }, &TeleopState::default(), &c);
        assert_abs_diff_eq!(up.gain, 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(up.setpoint.v, 0.025, epsilon = 1e-12);
        assert_abs_diff_eq!(up.setpoint.omega, 0.0625, epsilon = 1e-12);
        let mut s = TeleopState::default();
        for _ in 0..50 {
            s = teleop_map(&TeleopInput { gain_step: GainStep::Down, ..Default::default() }, &s, &c);
        }
        assert_eq!(s.gain, c.gain_min);
    }

    #[test]
    fn axes_are_clamped() {
        let out = teleop_map(&held(7.0, f64::NAN), &TeleopState::default(), &cfg());
        assert_eq!(out.setpoint, Twist::new(0.02, 0.0));
    }
}
