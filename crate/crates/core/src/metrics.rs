//! Run scoring. The same accumulator is fed live during a run and from a
//! recorded log, so both paths give bit-identical numbers.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::BufRead;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::pipeline::runlog::{event, read_run_log, LogHeader, Payload, RunRecord};
use crate::simcore::Pose2D;
use crate::world::{generate_tunnel, RobotParams, Stem, TunnelScenario};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    /// m, against the tunnel centerline.
    pub cross_track_rms: f64,
    pub cross_track_max: f64,
    /// Distinct stems the body footprint touched.
    pub stem_collisions: usize,
    /// m
    pub distance_traveled: f64,
    pub completion: bool,
    /// Wh
    pub energy_used: f64,
}

/// True when the stem circle overlaps the body rectangle at `pose`.
pub fn body_hits_stem(pose: &Pose2D, params: &RobotParams, stem: &Stem) -> bool {
    let (bx, by) = pose.to_body(stem.x, stem.y);
    let hl = params.body_length / 2.0;
    let hw = params.body_width / 2.0;
    let dx = bx - bx.clamp(-hl, hl);
    let dy = by - by.clamp(-hw, hw);
    dx * dx + dy * dy < stem.radius * stem.radius
}

pub struct MetricsAccumulator {
    scene: TunnelScenario,
    params: RobotParams,
    capacity_wh: f64,
    soc0: f64,
    soc_last: f64,
    sum_sq: f64,
    samples: u64,
    max_abs: f64,
    distance: f64,
    last_pose: Option<Pose2D>,
    hit: BTreeSet<(u64, u64)>,
    completion: bool,
}

impl MetricsAccumulator {
    pub fn new(cfg: &ScenarioConfig, scene: TunnelScenario) -> Self {
        Self {
            scene,
            params: cfg.robot,
            capacity_wh: cfg.vss.capacity_wh(),
            soc0: cfg.vss.initial_soc,
            soc_last: cfg.vss.initial_soc,
            sum_sq: 0.0,
            samples: 0,
            max_abs: 0.0,
            distance: 0.0,
            last_pose: None,
            hit: BTreeSet::new(),
            completion: false,
        }
    }

    pub fn push(&mut self, rec: &RunRecord) {
        match &rec.payload {
            Payload::Pose(p) => self.pose(p.truth),
            Payload::Vss(v) => self.soc_last = v.state_of_charge,
            Payload::Event(e) if e.name == event::COMPLETE => self.completion = true,
            _ => {}
        }
    }

    fn pose(&mut self, pose: Pose2D) {
        let e = pose.y;
        self.sum_sq += e * e;
        self.samples += 1;
        self.max_abs = self.max_abs.max(e.abs());
        if let Some(prev) = self.last_pose {
            self.distance += (pose.x - prev.x).hypot(pose.y - prev.y);
        }
        self.last_pose = Some(pose);

        let reach = self.params.body_length.hypot(self.params.body_width) / 2.0 + self.scene.stem_radius;
        for s in self.scene.stems_in_x(pose.x - reach, pose.x + reach) {
            if body_hits_stem(&pose, &self.params, s) {
                self.hit.insert((s.x.to_bits(), s.y.to_bits()));
            }
        }
    }

    pub fn finish(&self) -> RunMetrics {
        let rms = if self.samples == 0 { 0.0 } else { (self.sum_sq / self.samples as f64).sqrt() };
        RunMetrics {
            cross_track_rms: rms,
            cross_track_max: self.max_abs,
            stem_collisions: self.hit.len(),
            distance_traveled: self.distance,
            completion: self.completion,
            energy_used: (self.soc0 - self.soc_last) * self.capacity_wh,
        }
    }
}

/// Scores parsed records. The scene is regenerated from the header's
/// config.
pub fn metrics_from_records(header: &LogHeader, records: &[RunRecord]) -> Result<RunMetrics> {
    let cfg = ScenarioConfig::from_json(&header.config)?;
    let scene = generate_tunnel(cfg.seed, &cfg.tunnel_spec())?;
    let mut acc = MetricsAccumulator::new(&cfg, scene);
    for r in records {
        acc.push(r);
    }
    Ok(acc.finish())
}

pub fn metrics_from_log(input: impl BufRead) -> Result<RunMetrics> {
    let (header, records) = read_run_log(input)?;
    metrics_from_records(&header, &records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::pipeline::runlog::{EventRecord, PoseRecord, RunLogWriter};
    use crate::world::HeightClass;

    fn header() -> LogHeader {
        LogHeader::new(0, ScenarioConfig::default().to_json())
    }

    fn pose_rec(step: u64, x: f64, y: f64) -> RunRecord {
        let p = Pose2D::new(x, y, 0.0);
        RunRecord { step, t: step as f64 * 0.01, payload: Payload::Pose(PoseRecord { truth: p, odometry: p }) }
    }

    fn log_bytes(records: &[RunRecord]) -> Vec<u8> {
        let mut w = RunLogWriter::new(Vec::new(), &header()).unwrap();
        for r in records {
            w.append(r).unwrap();
        }
        w.finish().unwrap()
    }

    #[test]
    fn centered_run_has_zero_cross_track() {
        let recs: Vec<_> = (0..200).map(|i| pose_rec(i, i as f64 * 0.01, 0.0)).collect();
        let m = metrics_from_log(log_bytes(&recs).as_slice()).unwrap();
        assert_eq!(m.cross_track_rms, 0.0);
        assert_eq!(m.cross_track_max, 0.0);
        assert_eq!(m.stem_collisions, 0);
        assert!((m.distance_traveled - 1.99).abs() < 1e-12);
        assert!(!m.completion);
    }

    #[test]
    fn alternating_offsets() {
        let recs: Vec<_> = (0..10).map(|i| pose_rec(i, 1.0, if i % 2 == 0 { 0.1 } else { -0.1 })).collect();
        let m = metrics_from_log(log_bytes(&recs).as_slice()).unwrap();
        let sq: f64 = recs.iter().map(|_| 0.01).sum();
        assert!((m.cross_track_rms - (sq / 10.0f64).sqrt()).abs() < 1e-15);
        assert!((m.cross_track_rms - 0.1).abs() < 1e-15);
        assert_eq!(m.cross_track_max, 0.1);
    }

    #[test]
    fn completion_from_event() {
        let recs = vec![pose_rec(0, 0.0, 0.0), RunRecord { step: 1, t: 0.01, payload: Payload::Event(EventRecord::named(event::COMPLETE)) }];
        assert!(metrics_from_log(log_bytes(&recs).as_slice()).unwrap().completion);
    }

    #[test]
    fn empty_log_is_config_error() {
        assert!(matches!(metrics_from_log(&b""[..]), Err(Error::Config(_))));
    }

    #[test]
    fn driving_along_a_row_hits_each_stem_once() {
        let cfg = ScenarioConfig { height_class: HeightClass::H1, ..Default::default() };
        let scene = generate_tunnel(cfg.seed, &cfg.tunnel_spec()).unwrap();
        let row_y = scene.stems_left.iter().map(|s| s.y).sum::<f64>() / scene.stems_left.len() as f64;
        let mut acc = MetricsAccumulator::new(&cfg, scene.clone());
        for i in 0..=1000 {
            acc.pose(Pose2D::new(10.0 + i as f64 * 0.01, row_y, 0.0));
        }
        // the 0.8 m body spans [9.6, 20.4] along the row, and every stem is
        // well within half the body width of the row line
        let expected = scene.stems_left.iter().filter(|s| s.x + s.radius > 9.6 && s.x - s.radius < 20.4).count();
        assert_eq!(acc.finish().stem_collisions, expected);
        assert!(expected > 0);
    }

    #[test]
    fn rectangle_circle_overlap() {
        let p = RobotParams::default();
        let pose = Pose2D::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        // rotated 90°: body spans |x| <= 0.5 (width), |y| <= 0.4 (length)
        let s = |x, y| Stem { x, y, radius: 0.02 };
        assert!(body_hits_stem(&pose, &p, &s(0.51, 0.0)));
        assert!(!body_hits_stem(&pose, &p, &s(0.53, 0.0)));
        assert!(body_hits_stem(&pose, &p, &s(0.0, 0.41)));
        assert!(!body_hits_stem(&pose, &p, &s(0.0, 0.43)));
        assert!(body_hits_stem(&pose, &p, &s(0.51, 0.41)));
        assert!(!body_hits_stem(&pose, &p, &s(0.52, 0.42)));
    }
}
