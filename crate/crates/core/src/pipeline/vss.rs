//! Vehicle support system: relays, bus currents, battery state and the
//! lid's internal climate.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub mod relay {
    pub const DRIVERS: &str = "drivers";
    pub const LIDAR: &str = "lidar";
    pub const THERMAL: &str = "thermal_camera";
    pub const SUN_SENSOR: &str = "sun_sensor";
    pub const HT: &str = "ht_sensor";
    pub const LIGHTS: &str = "lights";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VssConfig {
    /// V
    pub bus48_voltage: f64,
    pub bus12_voltage: f64,
    /// Pack capacity at the 48 V nominal, Ah.
    pub capacity_ah: f64,
    pub v_empty: f64,
    pub v_full: f64,
    pub initial_soc: f64,
    /// Per motor driver, enabled and idle, A on the 48 V bus.
    pub driver_idle_current: f64,
    pub driver_efficiency: f64,
    /// Onboard computer, always powered, A on the 12 V bus.
    pub computer_current: f64,
    /// Relay-switched 12 V loads, A. Entries given in a scenario file are
    /// merged over the defaults.
    #[serde(deserialize_with = "merge::devices")]
    pub devices: BTreeMap<String, f64>,
    #[serde(deserialize_with = "merge::relays")]
    pub initial_relays: BTreeMap<String, bool>,
    /// °C
    pub ambient_temp: f64,
    /// %RH
    pub ambient_humidity: f64,
    /// Steady-state temperature rise per watt dissipated in the lid, °C/W.
    pub thermal_resistance: f64,
    /// s
    pub thermal_time_constant: f64,
}

impl Default for VssConfig {
    fn default() -> Self {
        let devices = [
            (relay::LIDAR, 0.5),
            (relay::THERMAL, 0.3),
            (relay::SUN_SENSOR, 0.05),
            (relay::HT, 0.02),
            (relay::LIGHTS, 1.5),
        ];
        let initial_relays = [
            (relay::DRIVERS, true),
            (relay::LIDAR, true),
            (relay::THERMAL, true),
            (relay::SUN_SENSOR, true),
            (relay::HT, true),
            (relay::LIGHTS, false),
        ];
        Self {
            bus48_voltage: 48.0,
            bus12_voltage: 12.0,
            capacity_ah: 30.0,
            v_empty: 42.0,
            v_full: 54.0,
            initial_soc: 1.0,
            driver_idle_current: 0.15,
            driver_efficiency: 0.85,
            computer_current: 2.5,
            devices: devices.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            initial_relays: initial_relays.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            ambient_temp: 30.0,
            ambient_humidity: 70.0,
            thermal_resistance: 0.25,
            thermal_time_constant: 600.0,
        }
    }
}

impl VssConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bus48_voltage", self.bus48_voltage),
            ("bus12_voltage", self.bus12_voltage),
            ("capacity_ah", self.capacity_ah),
            ("v_empty", self.v_empty),
            ("driver_efficiency", self.driver_efficiency),
            ("thermal_time_constant", self.thermal_time_constant),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("vss.{name} must be positive, got {v}")));
            }
        }
        if self.v_full < self.v_empty {
            return Err(Error::InvalidParams("vss.v_full below vss.v_empty".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return Err(Error::InvalidParams(format!("vss.initial_soc {} outside [0, 1]", self.initial_soc)));
        }
        if let Some((k, v)) = self.devices.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::InvalidParams(format!("device {k} draws {v} A")));
        }
        Ok(())
    }

    /// Usable pack energy, Wh.
    pub fn capacity_wh(&self) -> f64 {
        self.bus48_voltage * self.capacity_ah
    }

    pub fn initial_state(&self) -> VssState {
        let mut state = VssState {
            battery_voltage: 0.0,
            state_of_charge: self.initial_soc,
            bus48_current: 0.0,
            bus12_current: 0.0,
            relays: self.initial_relays.clone(),
            internal_temp: self.ambient_temp,
            internal_humidity: self.ambient_humidity,
            exhausted: false,
        };
        state.battery_voltage = self.voltage_at(state.state_of_charge);
        state.bus12_current = self.bus12_draw(&state.relays);
        state.bus48_current = self.bus48_draw(&state.relays, 0.0);
        state
    }

    pub fn voltage_at(&self, soc: f64) -> f64 {
        self.v_empty + (self.v_full - self.v_empty) * soc.clamp(0.0, 1.0)
    }

    /// Computer plus every enabled relay-switched device.
    pub fn bus12_draw(&self, relays: &BTreeMap<String, bool>) -> f64 {
        self.computer_current
            + self.devices.iter().filter(|(k, _)| relays.get(*k).copied().unwrap_or(false)).map(|(_, a)| a).sum::<f64>()
    }

    /// Both motor drivers: idle draw plus the mechanical output over the
    /// driver efficiency. Braking returns nothing.
    pub fn bus48_draw(&self, relays: &BTreeMap<String, bool>, mechanical_power: f64) -> f64 {
        if !relays.get(relay::DRIVERS).copied().unwrap_or(false) {
            return 0.0;
        }
        2.0 * self.driver_idle_current + mechanical_power.max(0.0) / (self.driver_efficiency * self.bus48_voltage)
    }
}

mod merge {
    use serde::{Deserialize, Deserializer};
    use std::collections::BTreeMap;

    pub fn devices<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let mut out = super::VssConfig::default().devices;
        out.extend(BTreeMap::<String, f64>::deserialize(d)?);
        Ok(out)
    }

    pub fn relays<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, bool>, D::Error> {
        let mut out = super::VssConfig::default().initial_relays;
        out.extend(BTreeMap::<String, bool>::deserialize(d)?);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VssState {
    /// V
    pub battery_voltage: f64,
    pub state_of_charge: f64,
    /// A
    pub bus48_current: f64,
    pub bus12_current: f64,
    pub relays: BTreeMap<String, bool>,
    /// °C
    pub internal_temp: f64,
    /// %RH
    pub internal_humidity: f64,
    pub exhausted: bool,
}

impl VssState {
    pub fn relay(&self, name: &str) -> bool {
        self.relays.get(name).copied().unwrap_or(false)
    }

    /// Power drawn from the pack, W.
    pub fn bus_power(&self, cfg: &VssConfig) -> f64 {
        cfg.bus48_voltage * self.bus48_current + cfg.bus12_voltage * self.bus12_current
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayCommand {
    pub name: String,
    pub on: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VssStep {
    pub state: VssState,
    /// Set on the step the pack runs dry.
    pub power_exhausted: bool,
}

/// Advances the VSS by `dt`. Currents are evaluated with the relays as
/// commanded for this step and held over it.
pub fn vss_step(state: &VssState, relay_cmds: &[RelayCommand], mechanical_power: f64, cfg: &VssConfig, dt: f64) -> Result<VssStep> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    let mut relays = state.relays.clone();
    for c in relay_cmds {
        relays.insert(c.name.clone(), c.on);
    }
    let (bus12, bus48) = if state.exhausted {
        (0.0, 0.0)
    } else {
        (cfg.bus12_draw(&relays), cfg.bus48_draw(&relays, mechanical_power))
    };
    let power = cfg.bus48_voltage * bus48 + cfg.bus12_voltage * bus12;
    let soc = (state.state_of_charge - power * dt / 3600.0 / cfg.capacity_wh()).max(0.0);
    let power_exhausted = soc <= 0.0 && !state.exhausted;

    // heat in the lid: electronics plus driver losses
    let driver_loss = if bus48 > 0.0 { mechanical_power.max(0.0) * (1.0 / cfg.driver_efficiency - 1.0) } else { 0.0 };
    let dissipated = cfg.bus12_voltage * bus12 + driver_loss;
    let target = cfg.ambient_temp + cfg.thermal_resistance * dissipated;
    let internal_temp = target + (state.internal_temp - target) * (-dt / cfg.thermal_time_constant).exp();
    // same moisture, warmer air: saturation pressure roughly doubles per 10 °C
    let internal_humidity = (cfg.ambient_humidity * 0.5f64.powf((internal_temp - cfg.ambient_temp) / 10.0)).clamp(0.0, 100.0);

    Ok(VssStep {
        state: VssState {
            battery_voltage: cfg.voltage_at(soc),
            state_of_charge: soc,
            bus48_current: bus48,
            bus12_current: bus12,
            relays,
            internal_temp,
            internal_humidity,
            exhausted: state.exhausted || power_exhausted,
        },
        power_exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn all_off(cfg: &VssConfig) -> Vec<RelayCommand> {
        cfg.initial_relays.keys().map(|k| RelayCommand { name: k.clone(), on: false }).collect()
    }

    #[test]
    fn idle_draws_computer_only() {
        let cfg = VssConfig::default();
        let s = vss_step(&cfg.initial_state(), &all_off(&cfg), 0.0, &cfg, 0.01).unwrap().state;
        assert_eq!(s.bus12_current, cfg.computer_current);
        assert_eq!(s.bus48_current, 0.0);
    }

    #[test]
    fn lidar_relay_adds_its_draw() {
        let cfg = VssConfig::default();
        let off = vss_step(&cfg.initial_state(), &all_off(&cfg), 0.0, &cfg, 0.01).unwrap().state;
        let on = vss_step(&off, &[RelayCommand { name: relay::LIDAR.into(), on: true }], 0.0, &cfg, 0.01).unwrap().state;
        assert_abs_diff_eq!(on.bus12_current - off.bus12_current, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn motor_power_on_48v_bus() {
        let cfg = VssConfig::default();
        let s = vss_step(&cfg.initial_state(), &[], 408.0, &cfg, 0.01).unwrap().state;
        assert_abs_diff_eq!(s.bus48_current, 0.3 + 408.0 / (0.85 * 48.0), epsilon = 1e-12);
        let regen = vss_step(&cfg.initial_state(), &[], -100.0, &cfg, 0.01).unwrap().state;
        assert_abs_diff_eq!(regen.bus48_current, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn soc_bookkeeping() {
        let cfg = VssConfig::default();
        let mut s = cfg.initial_state();
        let mut energy_wh = 0.0;
        for i in 0..12_000 {
            s = vss_step(&s, &[], 200.0 + (i % 100) as f64, &cfg, 0.01).unwrap().state;
            energy_wh += s.bus_power(&cfg) * 0.01 / 3600.0;
        }
        assert_abs_diff_eq!((1.0 - s.state_of_charge) * cfg.capacity_wh(), energy_wh, epsilon = 1e-9);
        assert!(s.internal_temp > cfg.ambient_temp);
        assert!(s.internal_humidity < cfg.ambient_humidity);
        assert!(s.battery_voltage < cfg.v_full);
    }

    #[test]
    fn exhaustion_event_fires_once() {
        let cfg = VssConfig { initial_soc: 1e-7, ..Default::default() };
        let first = vss_step(&cfg.initial_state(), &[], 500.0, &cfg, 1.0).unwrap();
        assert!(first.power_exhausted);
        assert_eq!(first.state.state_of_charge, 0.0);
        assert!(first.state.battery_voltage > 0.0);
        let second = vss_step(&first.state, &[], 500.0, &cfg, 1.0).unwrap();
        assert!(!second.power_exhausted);
        assert_eq!(second.state.bus12_current, 0.0);
    }

    #[test]
    fn rejects_bad_dt() {
        let cfg = VssConfig::default();
        assert!(vss_step(&cfg.initial_state(), &[], 0.0, &cfg, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn soc_never_increases(powers in prop::collection::vec(-500.0f64..2000.0, 1..200), toggles in prop::collection::vec(any::<bool>(), 1..200)) {
            let cfg = VssConfig::default();
            let mut s = cfg.initial_state();
            for (i, p) in powers.iter().enumerate() {
                let cmd = [RelayCommand { name: relay::LIGHTS.into(), on: toggles[i % toggles.len()] }];
                let next = vss_step(&s, &cmd, *p, &cfg, 0.05).unwrap().state;
                prop_assert!(next.state_of_charge <= s.state_of_charge);
                prop_assert!(next.bus12_current >= 0.0 && next.bus48_current >= 0.0);
                s = next;
            }
        }
    }
}
