//! Path extraction from a thermal frame: threshold the path's temperature
//! band, collect the two path margins on each ground row, regress a line
//! through each margin and take their mean as the centerline.

use serde::{Deserialize, Serialize};

use super::{fit_line, CorridorEstimate};
use crate::error::{Error, Result};
use crate::sensors::{CameraModel, ThermalImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThermalBand {
    /// Threshold halfway between the bottom-center and side means.
    Adaptive,
    /// Path pixels lie in `[lo, hi]` °C; colder than `lo` once flipped.
    Fixed { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalNavConfig {
    /// Follows the thermal sensor's camera; not part of the nav settings.
    #[serde(skip)]
    pub camera: CameraModel,
    pub band: ThermalBand,
    pub min_rows: usize,
    /// Ground rows used, by forward distance, m.
    pub near_m: f64,
    pub far_m: f64,
    /// Forward distance at which the lateral offset is read, m.
    pub reference_m: f64,
    /// Heading is taken between `reference_m` and `reference_m + heading_span_m`.
    pub heading_span_m: f64,
    /// Rows whose path width deviates from the median by more than this
    /// fraction are dropped.
    pub width_tolerance: f64,
    /// Inlier band around a margin line, px.
    pub refit_px: f64,
    /// Gaps in a row's path run up to this wide are bridged, px.
    pub gap_px: usize,
}

impl Default for ThermalNavConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            band: ThermalBand::Adaptive,
            min_rows: 10,
            near_m: 1.5,
            far_m: 8.0,
            reference_m: 2.0,
            heading_span_m: 3.0,
            width_tolerance: 0.5,
            refit_px: 2.0,
            gap_px: 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct RowMargins {
    v: f64,
    left: Option<f64>,
    right: Option<f64>,
}

/// Longest run of `true` as `[start, end)`, bridging gaps of up to
/// `max_gap` pixels.
fn longest_run(mask: impl Iterator<Item = bool>, max_gap: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut current: Option<(usize, usize)> = None;
    let close = |run: (usize, usize), best: &mut Option<(usize, usize)>| {
        if best.is_none_or(|(a, b)| run.1 - run.0 > b - a) {
            *best = Some(run);
        }
    };
    for (i, m) in mask.enumerate() {
        if !m {
            continue;
        }
        current = match current {
            Some((s, e)) if i - e <= max_gap => Some((s, i + 1)),
            Some(run) => {
                close(run, &mut best);
                Some((i, i + 1))
            }
            None => Some((i, i + 1)),
        };
    }
    if let Some(run) = current {
        close(run, &mut best);
    }
    best
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Line fit on one margin. Foliage hanging into the path can only pull a
/// margin toward the center, so every line through two rows is scored by
/// the rows within `tol` of it minus four times the rows lying more than
/// `tol` outside it; the least-squares fit runs on the inliers of the best one.
/// `inward` is +1 for the left margin and -1 for the right.
fn envelope_fit(pts: &[(f64, f64)], inward: f64, tol: f64) -> Option<(f64, f64)> {
    let mut best: Option<(i64, (f64, f64))> = None;
    for (i, &(v1, u1)) in pts.iter().enumerate() {
        for &(v2, u2) in &pts[i + 1..] {
            if v1 == v2 {
                continue;
            }
            let b = (u2 - u1) / (v2 - v1);
            let a = u1 - b * v1;
            let mut score = 0i64;
            for &(v, u) in pts {
                let r = inward * (u - (a + b * v));
                if r.abs() <= tol {
                    score += 1;
                } else if r < 0.0 {
                    score -= 4;
                }
            }
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, (a, b)));
            }
        }
    }
    let (_, (a, b)) = best?;
    let (vs, us): (Vec<f64>, Vec<f64>) = pts.iter().copied().filter(|&(v, u)| (u - (a + b * v)).abs() <= tol).unzip();
    fit_line(&vs, &us)
}

pub fn thermal_centerline(img: &ThermalImage, cfg: &ThermalNavConfig) -> Result<CorridorEstimate> {
    let cam = &cfg.camera;
    if img.width != cam.width || img.height != cam.height {
        return Err(Error::InvalidParams(format!(
            "image is {}x{}, camera model is {}x{}",
            img.width, img.height, cam.width, cam.height
        )));
    }
    let bottom = img.bottom_center_mean();
    let sides = img.side_mean();
    let inverted = bottom < sides;
    let threshold = 0.5 * (bottom + sides);
    let band = cfg.band;
    let in_path = move |t: f32| -> bool {
        let t = t as f64;
        match (band, inverted) {
            (ThermalBand::Adaptive, false) => t > threshold,
            (ThermalBand::Adaptive, true) => t < threshold,
            (ThermalBand::Fixed { lo, hi }, false) => (lo..=hi).contains(&t),
            (ThermalBand::Fixed { lo, .. }, true) => t < lo,
        }
    };

    let center_u = cam.width as f64 / 2.0;
    let mut candidates = 0usize;
    let mut rows = Vec::new();
    for v in 0..img.height {
        let vc = v as f64 + 0.5;
        match cam.ground_point(center_u, vc) {
            Some((f, _)) if (cfg.near_m..=cfg.far_m).contains(&f) => {}
            _ => continue,
        }
        candidates += 1;
        let line = &img.temps[v * img.width..(v + 1) * img.width];
        let Some((start, end)) = longest_run(line.iter().map(|&t| in_path(t)), cfg.gap_px) else { continue };
        // a run cut by the frame edge has no margin on that side
        rows.push(RowMargins {
            v: vc,
            left: (start > 0).then_some(start as f64),
            right: (end < img.width).then_some(end as f64),
        });
    }

    // widths compared on the ground, where they do not shrink with distance
    let ground_width = |r: &RowMargins| Some((r.right? - r.left?) * cam.meters_per_column(r.v)?);
    let widths: Vec<f64> = rows.iter().filter_map(ground_width).collect();
    if !widths.is_empty() {
        let med = median(widths);
        rows.retain(|r| ground_width(r).is_none_or(|w| (w - med).abs() <= cfg.width_tolerance * med));
    }
    let both = rows.iter().filter(|r| r.left.is_some() && r.right.is_some()).count();
    if both < cfg.min_rows.max(2) {
        return Err(Error::NoPath { rows: both, needed: cfg.min_rows });
    }
    // each margin is fitted on its own, so a canopy intrusion on one side
    // does not cost the other side its row
    let no_fit = Error::NoPath { rows: both, needed: cfg.min_rows };
    let left: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.v, r.left?))).collect();
    let right: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.v, r.right?))).collect();
    let fit_l = envelope_fit(&left, 1.0, cfg.refit_px).ok_or(no_fit.clone())?;
    let fit_r = envelope_fit(&right, -1.0, cfg.refit_px).ok_or(no_fit)?;
    let eval = |(a, b): (f64, f64), v: f64| a + b * v;

    let mid = |v: f64| 0.5 * (eval(fit_l, v) + eval(fit_r, v));
    let project = |f_m: f64| -> Result<(f64, f64)> {
        let v = cam.row_for_forward(f_m);
        cam.ground_point(mid(v), v).ok_or(Error::InvalidParams(format!("reference distance {f_m} m is above the horizon")))
    };
    let (f1, l1) = project(cfg.reference_m)?;
    let (f2, l2) = project(cfg.reference_m + cfg.heading_span_m)?;
    let corridor_dir = (l2 - l1).atan2(f2 - f1);

    Ok(CorridorEstimate {
        lateral_offset: -l1,
        heading_error: -corridor_dir,
        confidence: (both as f64 / candidates as f64).clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::{thermal_render, ThermalConfig};
    use crate::simcore::Pose2D;
    use crate::world::{generate_tunnel, HeightClass, SunState, TunnelSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const W: usize = 160;
    const H: usize = 120;

    /// Warm ground strip 1.2 m wide seen from its centerline, on a cold
    /// background, shifted right by `shift` columns.
    fn trapezoid(shift: i64) -> ThermalImage {
        let cam = CameraModel::default();
        let mut temps = vec![25.0f32; W * H];
        for v in 0..H {
            let Some(mpc) = cam.meters_per_column(v as f64 + 0.5) else { continue };
            let half = ((0.6 / mpc).round() as i64).min(70);
            let lo = W as i64 / 2 - half + shift;
            let hi = W as i64 / 2 + half + shift;
            for u in lo.max(0)..hi.min(W as i64) {
                temps[v * W + u as usize] = 45.0;
            }
        }
        ThermalImage { width: W, height: H, temps }
    }

    #[test]
    fn longest_run_cases() {
        assert_eq!(longest_run([false, true, true, false, true].into_iter(), 0), Some((1, 3)));
        assert_eq!(longest_run([true, false, true, true].into_iter(), 0), Some((2, 4)));
        assert_eq!(longest_run([false, false].into_iter(), 0), None);
        assert_eq!(longest_run([true, false, true, true].into_iter(), 1), Some((0, 4)));
        assert_eq!(longest_run([true, true, false, false, true].into_iter(), 1), Some((0, 2)));
    }

    #[test]
    fn symmetric_trapezoid_is_centered() {
        let est = thermal_centerline(&trapezoid(0), &ThermalNavConfig::default()).unwrap();
        assert_abs_diff_eq!(est.lateral_offset, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.heading_error, 0.0, epsilon = 1e-12);
        assert_eq!(est.confidence, 1.0);
    }

    /// Independent normal-equation line fit over the shifted margin set.
    fn oracle_offset(img: &ThermalImage, cfg: &ThermalNavConfig) -> f64 {
        let cam = cfg.camera;
        let (mut n, mut sv, mut svv, mut sm, mut svm) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for v in 0..H {
            let vc = v as f64 + 0.5;
            let Some((f, _)) = cam.ground_point(W as f64 / 2.0, vc) else { continue };
            if f < cfg.near_m || f > cfg.far_m {
                continue;
            }
            let cols: Vec<usize> = (0..W).filter(|&u| img.at(u, v) > 35.0).collect();
            let mid = 0.5 * (cols[0] as f64 + (cols[cols.len() - 1] + 1) as f64);
            n += 1.0;
            sv += vc;
            svv += vc * vc;
            sm += mid;
            svm += vc * mid;
        }
        let b = (n * svm - sv * sm) / (n * svv - sv * sv);
        let a = (sm - b * sv) / n;
        let vr = cam.row_for_forward(cfg.reference_m);
        -cam.ground_point(a + b * vr, vr).unwrap().1
    }

    #[test]
    fn shifted_trapezoid_matches_least_squares_oracle() {
        let cfg = ThermalNavConfig::default();
        let base = thermal_centerline(&trapezoid(0), &cfg).unwrap();
        let vr = cfg.camera.row_for_forward(cfg.reference_m);
        let mpc = cfg.camera.meters_per_column(vr).unwrap();
        for k in [-7i64, -2, 3, 8] {
            let img = trapezoid(k);
            let est = thermal_centerline(&img, &cfg).unwrap();
            assert_abs_diff_eq!(est.lateral_offset, oracle_offset(&img, &cfg), epsilon = 1e-9);
            assert_abs_diff_eq!(est.lateral_offset - base.lateral_offset, k as f64 * mpc, epsilon = 1e-9);
        }
    }

    #[test]
    fn uniform_image_has_no_path() {
        let img = ThermalImage { width: W, height: H, temps: vec![30.0; W * H] };
        assert!(matches!(thermal_centerline(&img, &ThermalNavConfig::default()), Err(Error::NoPath { rows: 0, .. })));
    }

    #[test]
    fn wrong_image_size_rejected() {
        let img = ThermalImage { width: 10, height: 10, temps: vec![30.0; 100] };
        assert!(matches!(thermal_centerline(&img, &ThermalNavConfig::default()), Err(Error::InvalidParams(_))));
    }

    fn rendered(class: HeightClass, pose: Pose2D, sun: SunState) -> ThermalImage {
        let scene = generate_tunnel(11, &TunnelSpec { height_class: class, ..Default::default() }).unwrap();
        thermal_render(&pose, &scene, &sun, &ThermalConfig::default(), 11, 0)
    }

    #[test]
    fn rendered_offsets_and_headings() {
        let cfg = ThermalNavConfig::default();
        for class in [HeightClass::H1, HeightClass::H2, HeightClass::H3] {
            for (y, th) in [(0.0, 0.0), (0.2, 0.0), (-0.15, 0.0), (0.0, 0.1), (0.1, -0.08)] {
                let pose = Pose2D::new(20.0, y, th);
                let est = thermal_centerline(&rendered(class, pose, SunState::default()), &cfg).unwrap();
                // lateral of the centerline at the reference distance
                let truth = y + cfg.reference_m * th.tan();
                assert_abs_diff_eq!(est.lateral_offset, truth, epsilon = 0.04);
                assert_abs_diff_eq!(est.heading_error, th, epsilon = 0.02);
                assert!(est.confidence > 0.5, "{class:?} {y} {th}: {est:?}");
            }
        }
    }

    #[test]
    fn overcast_still_tracks() {
        let sun = SunState { cloud_factor: 0.0, ..Default::default() };
        for class in [HeightClass::H1, HeightClass::H3] {
            let est = thermal_centerline(&rendered(class, Pose2D::new(30.0, 0.1, 0.0), sun), &ThermalNavConfig::default()).unwrap();
            assert_abs_diff_eq!(est.lateral_offset, 0.1, epsilon = 0.05);
            assert!(est.confidence > 0.5, "{class:?}: {est:?}");
        }
    }

    #[test]
    fn fixed_band_on_short_plants() {
        let cfg = ThermalNavConfig { band: ThermalBand::Fixed { lo: 38.0, hi: 60.0 }, ..Default::default() };
        let est = thermal_centerline(&rendered(HeightClass::H1, Pose2D::new(20.0, -0.1, 0.0), SunState::default()), &cfg).unwrap();
        assert_abs_diff_eq!(est.lateral_offset, -0.1, epsilon = 0.04);
    }

    proptest! {
        #[test]
        fn affine_rescaling_keeps_estimate(scale in 0.2f64..8.0, shift in -40.0f64..40.0, y in -0.2f64..0.2) {
            let img = rendered(HeightClass::H2, Pose2D::new(25.0, y, 0.0), SunState::default());
            let cfg = ThermalNavConfig::default();
            let base = thermal_centerline(&img, &cfg).unwrap();
            let rescaled = ThermalImage {
                temps: img.temps.iter().map(|&t| (t as f64 * scale + shift) as f32).collect(),
                ..img
            };
            prop_assert_eq!(thermal_centerline(&rescaled, &cfg).unwrap(), base);
        }
    }
}
