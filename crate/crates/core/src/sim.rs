//! The simulation executive: one stepping context that runs sensing,
//! navigation, the drive chain, physics and the VSS at the fixed timestep,
//! and emits run-log records.
//!
//! Record stamps: step `n` covers `[t_n, t_n+1]`. Inputs, nav events,
//! commands and sensor frames are stamped `(n, t_n)`; the physical outcome
//! (pose, wheels, VSS) is stamped `(n + 1, t_n+1)`.

use std::collections::{BTreeMap, VecDeque};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::metrics::{MetricsAccumulator, RunMetrics};
use crate::nav::{corridor_steer, lidar_corridor, sun_heading, thermal_centerline, waypoint_steer, NavMode, SteerGains, ThermalNavConfig, WaypointCommand, WaypointConfig};
use crate::pipeline::runlog::{event, CommandRecord, EventRecord, LogHeader, Payload, PoseRecord, RunRecord, ThermalFrame, WheelRecord};
use crate::pipeline::{decode_wheel_command, encode_wheel_command, teleop_map, vss_step, RelayCommand, TeleopConfig, TeleopInput, TeleopState, VssState, WHEEL_COMMAND_ID};
use crate::pipeline::vss::relay;
use crate::rng::{self, stream};
use crate::sensors::{ht_sample, lidar_scan, odometry_update, thermal_render, LidarScan, OdometryEstimate, ThermalImage};
use crate::simcore::{step_motors, twist_to_wheel_speeds, wheel_speeds_to_twist_chi, integrate_pose, DriveState, Pose2D, Twist, WheelSpeeds, DT};
use crate::world::{generate_tunnel, TunnelScenario};

/// Inputs from outside the loop, applied at the start of the next step.
#[derive(Debug, Clone, PartialEq)]
pub enum SimCommand {
    Teleop(TeleopInput),
    Relay(RelayCommand),
    Mode(NavMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Timeout,
    OutOfBounds,
}

/// Completion reasons carried in the `complete` event message.
pub mod reason {
    pub const TUNNEL_END: &str = "tunnel_end";
    pub const PATH_DONE: &str = "path_done";
}

#[derive(Debug, Clone, PartialEq)]
enum ScriptItem {
    Setpoint(CommandRecord),
    Relay(RelayCommand),
    Mode(NavMode),
    Passthrough(EventRecord),
}

/// Latest state for telemetry. Cloned out of the loop, never shared.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub t: f64,
    pub pose: Pose2D,
    pub odometry: Pose2D,
    pub setpoint: Twist,
    pub mode: NavMode,
    pub vss: VssState,
    pub scan: Option<LidarScan>,
    pub thermal: Option<ThermalImage>,
}

fn period_steps(period: f64) -> u64 {
    ((period / DT).round() as u64).max(1)
}

pub struct Simulation {
    cfg: ScenarioConfig,
    scene: TunnelScenario,
    thermal_nav: ThermalNavConfig,
    gains: SteerGains,
    waypoint_cfg: WaypointConfig,
    teleop_cfg: TeleopConfig,
    waypoints: Vec<(f64, f64)>,

    step: u64,
    total_steps: u64,
    pose: Pose2D,
    drive: DriveState,
    odom: OdometryEstimate,
    vss: VssState,
    mode: NavMode,
    teleop: TeleopState,
    setpoint: Twist,
    source: String,
    last_logged: Option<CommandRecord>,
    lost_since: Option<f64>,
    stopped: bool,
    row_end: bool,
    outcome: Option<Outcome>,

    queue: VecDeque<SimCommand>,
    script: Option<BTreeMap<u64, Vec<ScriptItem>>>,
    render_all: bool,
    scan: Option<LidarScan>,
    thermal: Option<ThermalImage>,
    /// Steps the current `scan` / `thermal` were taken at.
    scan_step: Option<u64>,
    thermal_step: Option<u64>,
    out: Vec<RunRecord>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let scene = generate_tunnel(cfg.seed, &cfg.tunnel_spec())?;
        let thermal_nav = ThermalNavConfig { camera: cfg.thermal.camera, ..cfg.nav.thermal };
        let n = &cfg.nav;
        let gains = SteerGains { k_y: n.k_y, k_theta: n.k_theta, v_ref: n.v_ref, omega_max: n.omega_max };
        let waypoint_cfg = WaypointConfig { lookahead: n.lookahead_m, arrival_radius: n.arrival_radius_m, v_ref: n.v_ref, omega_max: n.omega_max };
        let p = cfg.robot;
        let teleop_cfg = TeleopConfig {
            v_max: Some(cfg.teleop.v_max.unwrap_or(p.max_speed())),
            omega_max: Some(cfg.teleop.omega_max.unwrap_or(p.max_yaw_rate(p.slip_widening_factor))),
            ..cfg.teleop
        };
        let start = cfg.start.pose();
        let mut sim = Self {
            waypoints: cfg.waypoints(),
            total_steps: (cfg.duration_s / DT).round() as u64,
            pose: start,
            drive: DriveState::default(),
            odom: OdometryEstimate::at(start),
            vss: cfg.vss.initial_state(),
            mode: cfg.nav.mode,
            teleop: TeleopState::default(),
            setpoint: Twist::ZERO,
            source: cfg.nav.mode.to_string(),
            last_logged: None,
            lost_since: None,
            stopped: false,
            row_end: false,
            outcome: None,
            queue: VecDeque::new(),
            script: None,
            render_all: false,
            scan: None,
            thermal: None,
            scan_step: None,
            thermal_step: None,
            out: Vec::new(),
            step: 0,
            cfg,
            scene,
            thermal_nav,
            gains,
            waypoint_cfg,
            teleop_cfg,
        };
        sim.begin();
        Ok(sim)
    }

    /// Re-drives a recorded run: setpoints, relay and mode changes and nav
    /// events come from the log; everything physical is recomputed.
    pub fn replay(header: &LogHeader, records: &[RunRecord]) -> Result<Self> {
        let cfg = ScenarioConfig::from_json(&header.config)?;
        if cfg.seed != header.seed {
            return Err(Error::CorruptLog(format!("header seed {} differs from config seed {}", header.seed, cfg.seed)));
        }
        let mut script: BTreeMap<u64, Vec<ScriptItem>> = BTreeMap::new();
        for r in records {
            let item = match &r.payload {
                Payload::Command(c) => ScriptItem::Setpoint(c.clone()),
                Payload::Event(e) => match e.name.as_str() {
                    event::RELAY => match &e.relay {
                        Some(rc) => ScriptItem::Relay(rc.clone()),
                        None => return Err(Error::CorruptLog(format!("step {}: relay event without a command", r.step))),
                    },
                    event::MODE => {
                        let m = e.message.as_deref().unwrap_or_default();
                        ScriptItem::Mode(m.parse().map_err(|_| Error::CorruptLog(format!("step {}: bad mode {m:?}", r.step)))?)
                    }
                    event::NAV_LOST | event::NAV_STOP | event::NAV_RECOVERED | event::ROW_END => ScriptItem::Passthrough(e.clone()),
                    event::COMPLETE if e.message.as_deref() == Some(reason::PATH_DONE) => ScriptItem::Passthrough(e.clone()),
                    _ => continue,
                },
                _ => continue,
            };
            script.entry(r.step).or_default().push(item);
        }
        let mut sim = Self::new(cfg)?;
        sim.script = Some(script);
        Ok(sim)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &TunnelScenario {
        &self.scene
    }

    pub fn header(&self) -> LogHeader {
        LogHeader::new(self.cfg.seed, self.cfg.to_json())
    }

    /// Fresh accumulator for this run's scene.
    pub fn metrics(&self) -> MetricsAccumulator {
        MetricsAccumulator::new(&self.cfg, self.scene.clone())
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn pose(&self) -> Pose2D {
        self.pose
    }

    pub fn odometry(&self) -> Pose2D {
        self.odom.pose
    }

    pub fn vss(&self) -> &VssState {
        &self.vss
    }

    pub fn setpoint(&self) -> Twist {
        self.setpoint
    }

    pub fn mode(&self) -> NavMode {
        self.mode
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * DT
    }

    /// Render both exteroceptive sensors every control tick, for
    /// telemetry, whatever the nav mode needs.
    pub fn set_render_all(&mut self, on: bool) {
        self.render_all = on;
    }

    pub fn push_command(&mut self, cmd: SimCommand) {
        self.queue.push_back(cmd);
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            step: self.step,
            t: self.time(),
            pose: self.pose,
            odometry: self.odom.pose,
            setpoint: self.setpoint,
            mode: self.mode,
            vss: self.vss.clone(),
            scan: self.scan.clone(),
            thermal: self.thermal.clone(),
        }
    }

    /// Records produced so far and not yet taken (the start records right
    /// after construction).
    pub fn take_records(&mut self) -> Vec<RunRecord> {
        std::mem::take(&mut self.out)
    }

    fn emit(&mut self, step: u64, payload: Payload) {
        self.out.push(RunRecord { step, t: step as f64 * DT, payload });
    }

    fn event(&mut self, step: u64, e: EventRecord) {
        self.emit(step, Payload::Event(e));
    }

    fn begin(&mut self) {
        self.event(0, EventRecord::with_message(event::START, self.mode.to_string()));
        // initial heading from the sun, if the sensor sees it
        if self.vss.relay(relay::SUN_SENSOR) {
            let reading = self.cfg.sun_sensor.observe(self.pose.theta, &self.scene.sun);
            let fix = if reading.valid {
                self.cfg
                    .sun_sensor
                    .estimate(&reading)
                    .and_then(|a| sun_heading(&a, &self.scene.sun, self.cfg.nav.sun_elevation_max_deg.to_radians()))
            } else {
                Err(Error::InsufficientLight { sum: reading.sum(), threshold: self.cfg.sun_sensor.threshold() })
            };
            match fix {
                Ok(yaw) => {
                    self.odom.pose.theta = yaw;
                    self.event(0, EventRecord::with_message(event::HEADING_FIX, format!("{yaw}")));
                }
                Err(e) => self.event(0, EventRecord::with_message(event::HEADING_FIX, format!("unavailable: {e}"))),
            }
        }
        self.emit(0, Payload::Pose(PoseRecord { truth: self.pose, odometry: self.odom.pose }));
        self.emit(0, Payload::Vss(self.vss.clone()));
    }

    fn apply_relay(&mut self, n: u64, rc: RelayCommand) {
        self.vss.relays.insert(rc.name.clone(), rc.on);
        self.vss.bus12_current = if self.vss.exhausted { 0.0 } else { self.cfg.vss.bus12_draw(&self.vss.relays) };
        self.event(n, EventRecord { name: event::RELAY.into(), relay: Some(rc), message: None });
    }

    fn apply_mode(&mut self, n: u64, mode: NavMode) {
        self.mode = mode;
        self.source = mode.to_string();
        self.lost_since = None;
        self.stopped = false;
        if mode == NavMode::Teleop {
            self.teleop.setpoint = Twist::ZERO;
            self.setpoint = Twist::ZERO;
        }
        self.event(n, EventRecord::with_message(event::MODE, mode.to_string()));
    }

    fn log_command_if_changed(&mut self, n: u64) {
        let rec = CommandRecord { v: self.setpoint.v, omega: self.setpoint.omega, source: self.source.clone() };
        let same = self.last_logged.as_ref().is_some_and(|l| {
            l.v.to_bits() == rec.v.to_bits() && l.omega.to_bits() == rec.omega.to_bits() && l.source == rec.source
        });
        if !same {
            self.last_logged = Some(rec.clone());
            self.emit(n, Payload::Command(rec));
        }
    }

    fn sense_lidar(&mut self, n: u64) {
        self.scan_step = Some(n);
        self.scan = (self.vss.relay(relay::LIDAR) && !self.vss.exhausted)
            .then(|| lidar_scan(&self.pose, &self.scene, &self.cfg.lidar, self.cfg.seed, n));
    }

    fn sense_thermal(&mut self, n: u64) {
        self.thermal_step = Some(n);
        self.thermal = (self.vss.relay(relay::THERMAL) && !self.vss.exhausted)
            .then(|| thermal_render(&self.pose, &self.scene, &self.scene.sun, &self.cfg.thermal, self.cfg.seed, n));
    }

    /// One corridor or path decision. `Ok(None)` means the path is done.
    fn navigate(&mut self, n: u64) -> Result<Option<Twist>> {
        match self.mode {
            NavMode::Thermal => {
                self.sense_thermal(n);
                let needed = self.thermal_nav.min_rows;
                let img = self.thermal.as_ref().ok_or(Error::NoPath { rows: 0, needed })?;
                let est = thermal_centerline(img, &self.thermal_nav)?;
                Ok(Some(corridor_steer(&est, &self.gains)))
            }
            NavMode::Lidar => {
                let needed = self.cfg.nav.lidar.min_points;
                self.sense_lidar(n);
                let scan = self.scan.as_ref().ok_or(Error::NoCorridor { left: 0, right: 0, needed })?;
                let est = lidar_corridor(scan, &self.cfg.nav.lidar)?;
                Ok(Some(corridor_steer(&est, &self.gains)))
            }
            NavMode::Waypoint => match waypoint_steer(&self.odom.pose, &self.waypoints, &self.waypoint_cfg) {
                WaypointCommand::Drive(t) => Ok(Some(t)),
                WaypointCommand::Done => Ok(None),
            },
            NavMode::Teleop => Ok(Some(self.teleop.setpoint)),
        }
    }

    /// Live decision at a control tick. Returns false when the run ended.
    fn control(&mut self, n: u64) -> bool {
        let t = n as f64 * DT;
        let corridor = matches!(self.mode, NavMode::Thermal | NavMode::Lidar);
        if corridor && self.odom.pose.x >= self.scene.tunnel_length - self.cfg.nav.row_end_m {
            if !self.row_end {
                self.row_end = true;
                self.lost_since = None;
                self.stopped = false;
                self.event(n, EventRecord::named(event::ROW_END));
            }
            let omega = (-self.gains.k_theta * self.odom.pose.theta).clamp(-self.gains.omega_max, self.gains.omega_max);
            self.setpoint = Twist::new(self.gains.v_ref * (1.0 - omega.abs() / self.gains.omega_max), omega);
            return true;
        }
        match self.navigate(n) {
            Ok(Some(twist)) => {
                if self.lost_since.take().is_some() {
                    self.stopped = false;
                    self.event(n, EventRecord::named(event::NAV_RECOVERED));
                }
                self.setpoint = twist;
            }
            Ok(None) => {
                self.setpoint = Twist::ZERO;
                self.event(n, EventRecord::with_message(event::COMPLETE, reason::PATH_DONE));
                self.outcome = Some(Outcome::Complete);
                return false;
            }
            Err(e) => match self.lost_since {
                None => {
                    self.lost_since = Some(t);
                    self.event(n, EventRecord::with_message(event::NAV_LOST, e.to_string()));
                }
                Some(since) if !self.stopped && t - since >= self.cfg.nav.lost_hold_s - 1e-9 => {
                    self.stopped = true;
                    self.setpoint = Twist::ZERO;
                    self.event(n, EventRecord::named(event::NAV_STOP));
                }
                Some(_) => {}
            },
        }
        true
    }

    /// Replayed inputs for step `n`. Returns false when the run ended.
    fn apply_script(&mut self, n: u64) -> bool {
        let Some(items) = self.script.as_mut().and_then(|s| s.remove(&n)) else { return true };
        for item in items {
            match item {
                ScriptItem::Setpoint(c) => {
                    self.setpoint = Twist::new(c.v, c.omega);
                    self.source = c.source.clone();
                    self.last_logged = Some(c.clone());
                    self.emit(n, Payload::Command(c));
                }
                ScriptItem::Relay(rc) => self.apply_relay(n, rc),
                ScriptItem::Mode(m) => {
                    self.mode = m;
                    self.event(n, EventRecord::with_message(event::MODE, m.to_string()));
                }
                ScriptItem::Passthrough(e) => {
                    let done = e.name == event::COMPLETE;
                    self.event(n, e);
                    if done {
                        self.setpoint = Twist::ZERO;
                        self.outcome = Some(Outcome::Complete);
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Advances one timestep and returns the records it produced.
    pub fn step(&mut self) -> Result<Vec<RunRecord>> {
        if self.outcome.is_some() {
            return Ok(self.take_records());
        }
        let n = self.step;
        let ctrl = period_steps(self.cfg.nav.control_period_s);
        let log = self.cfg.log;

        if self.script.is_some() {
            self.queue.clear();
            if !self.apply_script(n) {
                return Ok(self.take_records());
            }
        } else {
            while let Some(cmd) = self.queue.pop_front() {
                match cmd {
                    SimCommand::Relay(rc) => self.apply_relay(n, rc),
                    SimCommand::Mode(m) => self.apply_mode(n, m),
                    SimCommand::Teleop(input) => {
                        self.teleop = teleop_map(&input, &self.teleop, &self.teleop_cfg);
                        if self.mode == NavMode::Teleop {
                            self.setpoint = self.teleop.setpoint;
                        }
                    }
                }
            }
            if n % ctrl == 0 && !self.control(n) {
                return Ok(self.take_records());
            }
            self.log_command_if_changed(n);
        }

        // sensor frames: rendered for telemetry and for the log, from the
        // same (seed, step) substreams nav used
        let control_tick = n % ctrl == 0;
        let sensor_due = n % period_steps(log.sensor_period_s) == 0;
        let thermal_due = n % period_steps(log.thermal_period_s) == 0;
        if sensor_due && self.vss.relay(relay::SUN_SENSOR) && !self.vss.exhausted {
            let r = self.cfg.sun_sensor.observe(self.pose.theta, &self.scene.sun);
            self.emit(n, Payload::Solar(r));
        }
        if self.scan_step != Some(n) && (sensor_due || (self.render_all && control_tick)) {
            self.sense_lidar(n);
        }
        if sensor_due {
            if let Some(scan) = self.scan.clone() {
                self.emit(n, Payload::Lidar(scan));
            }
        }
        if self.thermal_step != Some(n) && (thermal_due || (self.render_all && control_tick)) {
            self.sense_thermal(n);
        }
        if thermal_due {
            if let Some(img) = self.thermal.as_ref() {
                let frame = ThermalFrame::from(img);
                self.emit(n, Payload::Thermal(frame));
            }
        }
        if sensor_due && self.vss.relay(relay::HT) && !self.vss.exhausted {
            let mut rng = rng::substream(self.cfg.seed, stream::HT, n);
            let r = ht_sample((self.vss.internal_temp, self.vss.internal_humidity), &self.cfg.ht, &mut rng);
            self.emit(n, Payload::Ht(r));
        }

        // drive chain: twist converter, bus frame, motors
        let p = self.cfg.robot;
        let powered = self.vss.relay(relay::DRIVERS) && !self.vss.exhausted;
        let wheels = if powered { twist_to_wheel_speeds(self.setpoint, &p) } else { WheelSpeeds::default() };
        let frame = encode_wheel_command(wheels, WHEEL_COMMAND_ID)?;
        let commanded = decode_wheel_command(&frame)?;

        let surface = match self.scene.surface_at(self.pose.x, self.pose.y) {
            Ok(s) => s,
            Err(e) => {
                self.event(n, EventRecord::with_message(event::OUT_OF_BOUNDS, e.to_string()));
                self.outcome = Some(Outcome::OutOfBounds);
                return Ok(self.take_records());
            }
        };
        let motors = step_motors(self.drive, commanded, &surface, &p, DT);
        self.drive = motors.state;
        let body = wheel_speeds_to_twist_chi(motors.mean, &p, surface.slip_widening(&p));
        self.pose = integrate_pose(self.pose, body, DT);
        self.odom = odometry_update(&self.odom, motors.ticks, &p, DT);
        let vs = vss_step(&self.vss, &[], motors.mechanical_power, &self.cfg.vss, DT)?;
        self.vss = vs.state;

        let m = n + 1;
        self.step = m;
        if m % period_steps(log.pose_period_s) == 0 {
            self.emit(m, Payload::Pose(PoseRecord { truth: self.pose, odometry: self.odom.pose }));
        }
        if m % period_steps(log.wheel_period_s) == 0 {
            self.emit(m, Payload::Wheel(WheelRecord { commanded, actual: motors.mean, ticks: motors.ticks }));
        }
        if m % period_steps(log.vss_period_s) == 0 || vs.power_exhausted {
            self.emit(m, Payload::Vss(self.vss.clone()));
        }
        if vs.power_exhausted {
            self.event(m, EventRecord::named(event::POWER_EXHAUSTED));
        }
        if self.pose.x >= self.scene.tunnel_length {
            self.event(m, EventRecord::with_message(event::COMPLETE, reason::TUNNEL_END));
            self.outcome = Some(Outcome::Complete);
        } else if m >= self.total_steps {
            self.event(m, EventRecord::named(event::TIMEOUT));
            self.outcome = Some(Outcome::Timeout);
        }
        if self.outcome.is_some() {
            // the run's last state, whatever the log periods
            self.emit(m, Payload::Pose(PoseRecord { truth: self.pose, odometry: self.odom.pose }));
            self.emit(m, Payload::Vss(self.vss.clone()));
        }
        Ok(self.take_records())
    }
}

/// Result of running a simulation to its end.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub metrics: RunMetrics,
    pub final_pose: Pose2D,
    pub steps: u64,
}

/// Steps `sim` to the end, handing every record to `sink` and scoring it.
pub fn run_to_end(sim: &mut Simulation, mut sink: impl FnMut(&RunRecord) -> Result<()>) -> Result<RunSummary> {
    let mut acc = sim.metrics();
    let mut feed = |recs: Vec<RunRecord>, acc: &mut MetricsAccumulator| -> Result<()> {
        for r in &recs {
            acc.push(r);
            sink(r)?;
        }
        Ok(())
    };
    feed(sim.take_records(), &mut acc)?;
    while !sim.is_finished() {
        let recs = sim.step()?;
        feed(recs, &mut acc)?;
    }
    Ok(RunSummary {
        outcome: sim.outcome().expect("finished"),
        metrics: acc.finish(),
        final_pose: sim.pose(),
        steps: sim.step_index(),
    })
}
