//! Drivetrain sizing: from robot weight and worst-case soil friction to the
//! torque each side's belt must deliver, the torque the gearbox provides,
//! and the top speed at the motor's free speed.
//!
//! The arithmetic is deliberately the simple worst-case chain (equal
//! four-wheel load split, Coulomb friction only, no rolling resistance and
//! no gearbox losses) so the numbers can be checked by hand.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::world::{RobotParams, SurfaceParams};

/// 1 kgf·cm in N·m.
pub const KGF_CM_TO_NM: f64 = 0.0980665;

pub const STANDARD_GRAVITY: f64 = 9.8;

pub fn kgf_cm_to_nm(kgf_cm: f64) -> f64 {
    kgf_cm * KGF_CM_TO_NM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizingReport {
    /// N_w, N.
    pub normal_force_per_wheel: f64,
    /// F_w, N.
    pub friction_force_per_wheel: f64,
    /// τ_w, N·m.
    pub torque_per_wheel: f64,
    /// Torque one motor must deliver to its two belted wheels, N·m.
    pub required_side_torque: f64,
    /// Rated motor torque through the gearbox, N·m.
    pub gearbox_output_torque: f64,
    pub torque_margin: f64,
    /// m/s
    pub max_linear_speed: f64,
    pub feasible: bool,
}

impl SizingReport {
    /// `(key, value, unit)` rows in report order.
    pub fn rows(&self) -> [(&'static str, f64, &'static str); 7] {
        [
            ("normal_force_per_wheel", self.normal_force_per_wheel, "N"),
            ("friction_force_per_wheel", self.friction_force_per_wheel, "N"),
            ("torque_per_wheel", self.torque_per_wheel, "N.m"),
            ("required_side_torque", self.required_side_torque, "N.m"),
            ("gearbox_output_torque", self.gearbox_output_torque, "N.m"),
            ("torque_margin", self.torque_margin, "N.m"),
            ("max_linear_speed", self.max_linear_speed, "m/s"),
        ]
    }
}

/// Sizing chain for `params` on `worst_surface`.
///
/// Zero mass is accepted (everything collapses to zero load); the gear ratio
/// and wheel radius must still make sense.
pub fn sizing_report(params: &RobotParams, worst_surface: &SurfaceParams, g: f64) -> Result<SizingReport> {
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::InvalidParams(format!("g must be > 0, got {g}")));
    }
    for (name, v) in [
        ("mass", params.mass),
        ("wheel_radius", params.wheel_radius),
        ("motor_rated_torque", params.motor_rated_torque),
        ("motor_free_speed", params.motor_free_speed),
        ("mu", worst_surface.mu),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
        }
    }

    let normal = params.mass * g / 4.0;
    let friction = normal * worst_surface.mu;
    let wheel_torque = friction * params.wheel_radius;
    // One motor drives both wheels of its side through the belt.
    let required = 2.0 * wheel_torque;
    let output = params.gear_ratio * params.motor_rated_torque;
    let v = max_linear_speed(params.motor_free_speed, params.gear_ratio, params.wheel_radius)?;

    Ok(SizingReport {
        normal_force_per_wheel: normal,
        friction_force_per_wheel: friction,
        torque_per_wheel: wheel_torque,
        required_side_torque: required,
        gearbox_output_torque: output,
        torque_margin: output - required,
        max_linear_speed: v,
        feasible: output >= required,
    })
}

/// Ground speed with the motor at `free_speed` rpm behind a `gear_ratio`
/// reduction, m/s.
pub fn max_linear_speed(free_speed: f64, gear_ratio: f64, wheel_radius: f64) -> Result<f64> {
    if gear_ratio == 0.0 {
        return Err(Error::DivisionByZero("gear_ratio"));
    }
    if free_speed < 0.0 || gear_ratio < 0.0 || wheel_radius < 0.0 {
        return Err(Error::InvalidParams("speed inputs must be >= 0".into()));
    }
    Ok(2.0 * PI * (free_speed / gear_ratio) * wheel_radius / 60.0)
}

pub fn mps_to_kmh(v: f64) -> f64 {
    v * 3.6
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> RobotParams {
        RobotParams::default()
    }

    #[test]
    fn reproduces_reference_chain() {
        let r = sizing_report(&reference(), &SurfaceParams::SAND, 9.8).unwrap();
        assert_relative_eq!(r.normal_force_per_wheel, 318.5, max_relative = 1e-12);
        assert_relative_eq!(r.friction_force_per_wheel, 191.1, max_relative = 1e-12);
        assert_relative_eq!(r.torque_per_wheel, 38.22, max_relative = 1e-12);
        assert_relative_eq!(r.required_side_torque, 76.44, max_relative = 1e-12);
        assert_relative_eq!(r.gearbox_output_torque, 78.5, max_relative = 1e-12);
        assert_relative_eq!(r.torque_margin, 2.06, epsilon = 1e-9);
        assert_relative_eq!(r.max_linear_speed, 1.2566370614359172, max_relative = 1e-12);
        assert!(r.feasible);
    }

    #[test]
    fn zero_mass() {
        let p = RobotParams { mass: 0.0, ..reference() };
        let r = sizing_report(&p, &SurfaceParams::SAND, 9.8).unwrap();
        assert_eq!(r.normal_force_per_wheel, 0.0);
        assert_eq!(r.friction_force_per_wheel, 0.0);
        assert_eq!(r.torque_per_wheel, 0.0);
        assert_eq!(r.required_side_torque, 0.0);
        assert!(r.feasible);
    }

    #[test]
    fn heavy_robot_is_infeasible() {
        let p = RobotParams { mass: 200.0, ..reference() };
        let r = sizing_report(&p, &SurfaceParams::SAND, 9.8).unwrap();
        // 200 * 9.8 / 4 = 490; * 0.6 = 294; * 0.2 = 58.8; * 2 = 117.6
        assert_relative_eq!(r.required_side_torque, 117.6, max_relative = 1e-12);
        assert!(!r.feasible);
        assert!(r.torque_margin < 0.0);
    }

    #[test]
    fn exact_motor_torque_conversion() {
        let nm = kgf_cm_to_nm(16.0);
        assert_relative_eq!(nm, 1.569064, max_relative = 1e-12);
        assert_relative_eq!(50.0 * nm, 78.4532, max_relative = 1e-12);
    }

    #[test]
    fn top_speed() {
        let v = max_linear_speed(3000.0, 50.0, 0.2).unwrap();
        assert_relative_eq!(v, 1.2566370614359172, max_relative = 1e-12);
        assert_relative_eq!(mps_to_kmh(v), 4.523893421169302, max_relative = 1e-12);
        assert_eq!(max_linear_speed(0.0, 50.0, 0.2).unwrap(), 0.0);
        assert_relative_eq!(max_linear_speed(1500.0, 50.0, 0.2).unwrap(), v / 2.0, max_relative = 1e-15);
        assert_eq!(max_linear_speed(3000.0, 0.0, 0.2), Err(Error::DivisionByZero("gear_ratio")));
    }

    #[test]
    fn rejects_bad_gravity() {
        assert!(sizing_report(&reference(), &SurfaceParams::SAND, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn torques_monotone(m in 0.0f64..500.0, dm in 0.0f64..100.0,
                            mu in 0.05f64..1.5, dmu in 0.0f64..0.5,
                            rw in 0.05f64..0.5, drw in 0.0f64..0.2) {
            let surf = |mu: f64| SurfaceParams { mu, ..SurfaceParams::SAND };
            let base = RobotParams { mass: m, wheel_radius: rw, ..reference() };
            let a = sizing_report(&base, &surf(mu), 9.8).unwrap();
            let b = sizing_report(&RobotParams { mass: m + dm, wheel_radius: rw + drw, ..base },
                                  &surf(mu + dmu), 9.8).unwrap();
            prop_assert!(b.torque_per_wheel >= a.torque_per_wheel);
            prop_assert!(b.required_side_torque >= a.required_side_torque);
            prop_assert!(b.gearbox_output_torque >= a.gearbox_output_torque);
        }

        #[test]
        fn doubling_mass_doubles_loads(m in 0.0f64..500.0) {
            let a = sizing_report(&RobotParams { mass: m, ..reference() }, &SurfaceParams::SAND, 9.8).unwrap();
            let b = sizing_report(&RobotParams { mass: 2.0 * m, ..reference() }, &SurfaceParams::SAND, 9.8).unwrap();
            prop_assert_eq!(b.normal_force_per_wheel, 2.0 * a.normal_force_per_wheel);
            prop_assert_eq!(b.friction_force_per_wheel, 2.0 * a.friction_force_per_wheel);
            prop_assert_eq!(b.torque_per_wheel, 2.0 * a.torque_per_wheel);
            prop_assert_eq!(b.required_side_torque, 2.0 * a.required_side_torque);
        }
    }
}
