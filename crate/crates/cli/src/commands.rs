use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use anyhow::Context;
use tiba_core::config::ScenarioConfig;
use tiba_core::drivetrain::{mps_to_kmh, sizing_report, SizingReport, STANDARD_GRAVITY};
use tiba_core::metrics::RunMetrics;
use tiba_core::pipeline::runlog::{event, read_run_log, LogHeader, Payload, RunRecord};
use tiba_core::pipeline::RunLogWriter;
use tiba_core::sim::{Outcome, RunSummary, Simulation};
use tiba_core::simcore::Pose2D;
use tiba_core::world::SurfaceParams;
use tiba_core::Error;

use crate::service::Service;
use crate::wire::{thumbnail, PoseMsg, ServerMessage, VssMsg};

/// Telemetry publishing period, in sim steps (10 Hz).
pub const TELEMETRY_STEPS: u64 = 10;

pub fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig, Error> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

/// Sizing on the worst field surface (sand).
pub fn size(cfg: &ScenarioConfig) -> Result<SizingReport, Error> {
    sizing_report(&cfg.robot, &SurfaceParams::SAND, STANDARD_GRAVITY)
}

pub fn format_size(r: &SizingReport) -> String {
    let mut s = String::new();
    for (k, v, unit) in r.rows() {
        s += &format!("{k:<26} {v:>10.4} {unit}\n");
    }
    s += &format!("{:<26} {:>10.4} km/h\n", "max_linear_speed", mps_to_kmh(r.max_linear_speed));
    s += &format!("{:<26} {:>10}\n\n", "feasible", r.feasible);
    for (k, v, _) in r.rows() {
        s += &format!("{k}={v}\n");
    }
    s += &format!("max_linear_speed_kmh={}\nfeasible={}\n", mps_to_kmh(r.max_linear_speed), r.feasible);
    s
}

pub fn format_metrics(m: &RunMetrics) -> String {
    format!(
        "cross_track_rms={}\ncross_track_max={}\nstem_collisions={}\ndistance_traveled={}\ncompletion={}\nenergy_used={}\n",
        m.cross_track_rms, m.cross_track_max, m.stem_collisions, m.distance_traveled, m.completion, m.energy_used
    )
}

pub fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Complete => "complete",
        Outcome::Timeout => "timeout",
        Outcome::OutOfBounds => "out_of_bounds",
    }
}

pub struct Serve<'a> {
    pub service: &'a Service,
    /// Sim seconds per wall second.
    pub speed: f64,
}

/// Steps `sim` to the end. Every record is scored and, when `log` is set,
/// written; the scoring path is the same with or without a log.
pub fn run_sim(mut sim: Simulation, log: Option<&Path>, serve: Option<Serve>) -> anyhow::Result<RunSummary> {
    let mut writer = match log {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Some(RunLogWriter::new(BufWriter::new(f), &sim.header())?)
        }
        None => None,
    };
    if serve.is_some() {
        sim.set_render_all(true);
    }
    let mut acc = sim.metrics();
    let started = Instant::now();
    let t0 = sim.time();
    let mut records = sim.take_records();
    loop {
        for r in &records {
            acc.push(r);
            if let Some(w) = writer.as_mut() {
                w.append(r)?;
            }
            if let (Some(s), Payload::Event(e)) = (&serve, &r.payload) {
                s.service.publish(&ServerMessage::event(r.t, e));
            }
        }
        if let Some(s) = &serve {
            if sim.step_index() % TELEMETRY_STEPS == 0 || sim.is_finished() {
                for m in ServerMessage::frames(&sim.snapshot()) {
                    s.service.publish(&m);
                }
            }
        }
        if sim.is_finished() {
            break;
        }
        if let Some(s) = &serve {
            for c in s.service.drain_commands() {
                sim.push_command(c);
            }
            pace(started, sim.time() - t0, s.speed);
        }
        records = sim.step()?;
    }
    if let Some(w) = writer {
        w.finish()?.flush()?;
    }
    Ok(RunSummary {
        outcome: sim.outcome().expect("finished"),
        metrics: acc.finish(),
        final_pose: sim.pose(),
        steps: sim.step_index(),
    })
}

fn pace(started: Instant, sim_elapsed: f64, speed: f64) {
    if !(speed > 0.0) || !speed.is_finite() {
        return;
    }
    let due = Duration::from_secs_f64(sim_elapsed / speed);
    if let Some(wait) = due.checked_sub(started.elapsed()) {
        thread::sleep(wait);
    }
}

pub fn read_log(path: &Path) -> Result<(LogHeader, Vec<RunRecord>), Error> {
    let f = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    read_run_log(BufReader::new(f))
}

/// Final truth pose of a log.
pub fn final_pose(records: &[RunRecord]) -> Option<Pose2D> {
    records.iter().rev().find_map(|r| match &r.payload {
        Payload::Pose(p) => Some(p.truth),
        _ => None,
    })
}

pub struct ReplayCheck {
    pub summary: RunSummary,
    pub logged_pose: Option<Pose2D>,
    pub logged_metrics: RunMetrics,
}

impl ReplayCheck {
    /// Bitwise equality of the final pose and the metrics.
    pub fn identical(&self) -> bool {
        let same_pose = self.logged_pose.is_some_and(|p| {
            let q = self.summary.final_pose;
            p.x.to_bits() == q.x.to_bits() && p.y.to_bits() == q.y.to_bits() && p.theta.to_bits() == q.theta.to_bits()
        });
        same_pose && self.logged_metrics == self.summary.metrics
    }
}

pub fn replay(log: &Path, out: Option<&Path>) -> anyhow::Result<ReplayCheck> {
    let (header, records) = read_log(log)?;
    let logged_metrics = tiba_core::metrics::metrics_from_records(&header, &records)?;
    let sim = Simulation::replay(&header, &records)?;
    let summary = run_sim(sim, out, None)?;
    Ok(ReplayCheck { summary, logged_pose: final_pose(&records), logged_metrics })
}

/// Streams a recorded run to clients at `speed` times real time, without
/// simulating.
pub fn serve_replay(log: &Path, service: &Service, speed: f64) -> anyhow::Result<usize> {
    let (_, records) = read_log(log)?;
    let started = Instant::now();
    let t0 = records.first().map_or(0.0, |r| r.t);
    let mut last_cmd = (0.0, 0.0);
    let mut mode = tiba_core::nav::NavMode::Thermal;
    let mut sent = 0;
    for r in &records {
        pace(started, r.t - t0, speed);
        for c in service.drain_commands() {
            log::debug!("serve-replay ignores {c:?}");
        }
        let msg = match &r.payload {
            Payload::Command(c) => {
                last_cmd = (c.v, c.omega);
                None
            }
            Payload::Pose(p) if r.step % TELEMETRY_STEPS == 0 => Some(ServerMessage::Pose(PoseMsg {
                t: r.t,
                x: p.truth.x,
                y: p.truth.y,
                theta: p.truth.theta,
                odom_x: p.odometry.x,
                odom_y: p.odometry.y,
                odom_theta: p.odometry.theta,
                v: last_cmd.0,
                omega: last_cmd.1,
                mode,
            })),
            Payload::Lidar(s) => Some(ServerMessage::scan(r.t, s)),
            Payload::Thermal(f) => Some(ServerMessage::Thermal(thumbnail(r.t, &f.clone().into()))),
            Payload::Vss(v) if r.step % TELEMETRY_STEPS == 0 => Some(ServerMessage::Vss(VssMsg { t: r.t, state: v.clone() })),
            Payload::Event(e) => {
                if matches!(e.name.as_str(), event::START | event::MODE) {
                    if let Some(m) = e.message.as_deref().and_then(|m| m.parse().ok()) {
                        mode = m;
                    }
                }
                Some(ServerMessage::event(r.t, e))
            }
            _ => None,
        };
        if let Some(m) = msg {
            service.publish(&m);
            sent += 1;
        }
    }
    Ok(sent)
}

/// Exit status for a failed command: 2 for configuration problems, 1
/// otherwise.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidSpec(_) | Error::InvalidParams(_)) => 2,
        _ => 1,
    }
}
