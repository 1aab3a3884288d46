//! Ground-truth renderer: exact raycast projection of the floor grid through a
//! rotated pinhole camera, with detection noise, repeated detections and
//! clutter lines; trajectory generation; calibration of the slope-to-angle
//! constants.
//!
//! The renderer works from explicit 3D line segments and shares no code with
//! the grid-line model used by the localizer.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::filter::in_theta_gate;
use crate::geometry::{camera_rotation, intrinsics, line_through};
use crate::orientation::estimate_orientation;
use crate::pipeline::FrameInput;
use crate::types::{max_speed, Axis, CameraModel, DetectedLine, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TruePose {
    pub x: f64,
    pub y: f64,
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Camera as physically mounted: intrinsics plus the fixed tilt of the optical
/// axis relative to the body (toward `+Y_W` for roll, `+X_W` for pitch).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimCamera {
    pub intrinsics: CameraModel,
    pub mount_roll: f64,
    pub mount_pitch: f64,
}

impl Default for SimCamera {
    fn default() -> Self {
        Self {
            intrinsics: CameraModel::default(),
            mount_roll: 0.0,
            mount_pitch: 0.0,
        }
    }
}

impl SimCamera {
    /// Intrinsics with unit gains and zero offsets, as before calibration.
    pub fn uncalibrated(&self) -> CameraModel {
        CameraModel {
            eps_alpha: 1.0,
            eps_beta: 1.0,
            eps_c_alpha: 0.0,
            eps_c_beta: 0.0,
            ..self.intrinsics
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma_rho: f64,
    pub sigma_theta: f64,
    /// Extra detections of each visible grid line on top of the first one,
    /// drawn uniformly in `[duplicates_min, duplicates_max]`.
    pub duplicates_min: usize,
    pub duplicates_max: usize,
    /// Clutter lines per frame, drawn uniformly in `[outliers_min, outliers_max]`.
    pub outliers_min: usize,
    pub outliers_max: usize,
    /// Additional clutter as a fraction of all emitted lines.
    pub outlier_fraction: f64,
    /// Clutter is kept at least this far (normalized theta-rho distance) from
    /// the true curve of either grid-line family, and never fits in a strip
    /// this wide together with all of a family's lines.
    pub outlier_guard: f64,
    /// Minimum visible length in pixels for a grid line to be emitted. The
    /// default matches the Hough vote minimum of the detector.
    pub min_visible_px: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma_rho: 0.0,
            sigma_theta: 0.0,
            duplicates_min: 3,
            duplicates_max: 3,
            outliers_min: 0,
            outliers_max: 0,
            outlier_fraction: 0.0,
            outlier_guard: 0.2,
            min_visible_px: 80.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("noise.sigma_rho", self.sigma_rho),
            ("noise.sigma_theta", self.sigma_theta),
            ("noise.outlier_guard", self.outlier_guard),
            ("noise.min_visible_px", self.min_visible_px),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, "must be >= 0"));
            }
        }
        if !(0.0..0.95).contains(&self.outlier_fraction) {
            return Err(Error::config("noise.outlier_fraction", "must lie in [0, 0.95)"));
        }
        if self.duplicates_max < self.duplicates_min {
            return Err(Error::config("noise.duplicates_min/max", "need min <= max"));
        }
        if self.outliers_max < self.outliers_min {
            return Err(Error::config("noise.outliers_min/max", "need min <= max"));
        }
        Ok(())
    }
}

/// Where an emitted line came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineSource {
    /// Grid line `X_W = index * m_x` (latitudinal, `Axis::X`) or
    /// `Y_W = index * m_y` (longitudinal, `Axis::Y`).
    Grid { axis: Axis, index: i64 },
    Outlier,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibleLine {
    pub axis: Axis,
    pub index: i64,
    /// Exact image line (canonical form).
    pub line: DetectedLine,
    pub visible_px: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderTruth {
    pub pose: TruePose,
    pub visible: Vec<VisibleLine>,
    /// Source of each emitted line, parallel to `FrameInput::lines`.
    pub sources: Vec<LineSource>,
}

const MIN_DEPTH: f64 = 0.05;
const GRID_REACH: f64 = 30.0;

fn world_to_camera(pose: &TruePose, cam: &SimCamera) -> nalgebra::Matrix3<f64> {
    camera_rotation(pose.alpha + cam.mount_roll, pose.beta + cam.mount_pitch, pose.gamma).transpose()
}

/// Liang-Barsky clip of a 2D segment to `[0, w] x [0, h]`; returns the visible length.
fn clipped_length(a: (f64, f64), b: (f64, f64), w: f64, h: f64) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [(-dx, a.0), (dx, w - a.0), (-dy, a.1), (dy, h - a.1)] {
        if p == 0.0 {
            if q < 0.0 {
                return 0.0;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t1 <= t0 {
        0.0
    } else {
        (t1 - t0) * dx.hypot(dy)
    }
}

/// Exact projection of one infinite floor line (no visibility check).
fn project_floor_line(pose: &TruePose, cam: &SimCamera, axis: Axis, pos: f64) -> Option<DetectedLine> {
    let r = world_to_camera(pose, cam);
    let k = intrinsics(&cam.intrinsics);
    let c = Vector3::new(pose.x, pose.y, pose.h);
    let (p1, p2) = match axis {
        Axis::Y => (Vector3::new(pose.x - 1.0, pos, 0.0), Vector3::new(pose.x + 1.0, pos, 0.0)),
        Axis::X => (Vector3::new(pos, pose.y - 1.0, 0.0), Vector3::new(pos, pose.y + 1.0, 0.0)),
    };
    let a = k * (r * (p1 - c));
    let b = k * (r * (p2 - c));
    line_through(&a, &b).map(|l| DetectedLine::canonical(l.rho, l.theta))
}

/// Grid lines whose in-front-of-camera part crosses the image for at least
/// `min_px` pixels, with their exact image lines.
pub fn visible_grid_lines(pose: &TruePose, cam: &SimCamera, grid: &GridSpec, min_px: f64) -> Vec<VisibleLine> {
    let r = world_to_camera(pose, cam);
    let k = intrinsics(&cam.intrinsics);
    let c = Vector3::new(pose.x, pose.y, pose.h);
    let (w, hgt) = (cam.intrinsics.width as f64, cam.intrinsics.height as f64);
    let mut out = Vec::new();
    for axis in [Axis::X, Axis::Y] {
        let m = grid.cell(axis);
        let center = match axis {
            Axis::X => pose.x,
            Axis::Y => pose.y,
        };
        let lo = ((center - GRID_REACH) / m).floor() as i64;
        let hi = ((center + GRID_REACH) / m).ceil() as i64;
        for index in lo..=hi {
            let pos = index as f64 * m;
            let (p1, p2) = match axis {
                Axis::Y => (
                    Vector3::new(pose.x - GRID_REACH, pos, 0.0),
                    Vector3::new(pose.x + GRID_REACH, pos, 0.0),
                ),
                Axis::X => (
                    Vector3::new(pos, pose.y - GRID_REACH, 0.0),
                    Vector3::new(pos, pose.y + GRID_REACH, 0.0),
                ),
            };
            let (mut a, mut b) = (r * (p1 - c), r * (p2 - c));
            // Keep the part in front of the camera.
            if a.z < MIN_DEPTH && b.z < MIN_DEPTH {
                continue;
            }
            if a.z < MIN_DEPTH {
                a = a + (b - a) * ((MIN_DEPTH - a.z) / (b.z - a.z));
            } else if b.z < MIN_DEPTH {
                b = b + (a - b) * ((MIN_DEPTH - b.z) / (a.z - b.z));
            }
            let (pa, pb) = (k * a, k * b);
            let len = clipped_length(
                (pa.x / pa.z, pa.y / pa.z),
                (pb.x / pb.z, pb.y / pb.z),
                w,
                hgt,
            );
            if len < min_px.max(1e-9) {
                continue;
            }
            if let Some(l) = line_through(&pa, &pb) {
                out.push(VisibleLine {
                    axis,
                    index,
                    line: DetectedLine::canonical(l.rho, l.theta),
                    visible_px: len,
                });
            }
        }
    }
    out
}

/// Samples of each family's curve in the (theta, rho/diag) plane.
fn family_curves(pose: &TruePose, cam: &SimCamera, grid: &GridSpec) -> Vec<(f64, f64)> {
    let diag = cam.intrinsics.diagonal();
    let mut pts = Vec::new();
    for axis in [Axis::X, Axis::Y] {
        let m = grid.cell(axis);
        let center = match axis {
            Axis::X => pose.x,
            Axis::Y => pose.y,
        };
        let step = m / 20.0;
        let n = (GRID_REACH / step) as i64;
        for k in -n..=n {
            if let Some(l) = project_floor_line(pose, cam, axis, center + k as f64 * step) {
                pts.push((l.theta, l.rho / diag));
            }
        }
    }
    pts
}

/// Normalized (theta, rho) points of each family's visible, gated lines.
fn family_points(visible: &[VisibleLine], diag: f64) -> Vec<Vec<(f64, f64)>> {
    [Axis::X, Axis::Y]
        .iter()
        .map(|&axis| {
            visible
                .iter()
                .filter(|v| v.axis == axis && in_theta_gate(v.line.theta))
                .map(|v| (v.line.theta, v.line.rho / diag))
                .collect::<Vec<_>>()
        })
        .filter(|v| v.len() >= 2)
        .collect()
}

/// Width of the narrowest strip holding `pts` and `extra`. A consensus band
/// of half-width d can take in the extra point alongside the whole family
/// exactly when this is at most 2d.
fn strip_width_with(pts: &[(f64, f64)], extra: (f64, f64)) -> f64 {
    let mut all = pts.to_vec();
    all.push(extra);
    let mut best = f64::INFINITY;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let (dx, dy) = (all[j].0 - all[i].0, all[j].1 - all[i].1);
            let len = dx.hypot(dy);
            if len < 1e-12 {
                continue;
            }
            let (nx, ny) = (-dy / len, dx / len);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in &all {
                let v = nx * p.0 + ny * p.1;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            best = best.min(hi - lo);
        }
    }
    best
}

fn crosses_image(l: &DetectedLine, w: f64, h: f64) -> bool {
    let d = [
        l.distance(0.0, 0.0),
        l.distance(w, 0.0),
        l.distance(0.0, h),
        l.distance(w, h),
    ];
    d.iter().any(|v| *v > 0.0) && d.iter().any(|v| *v < 0.0)
}

/// Renders one frame. Grid detections come first in emission order, then the
/// whole list is shuffled with the frame's generator.
pub fn render_frame(
    frame_index: u64,
    pose: &TruePose,
    cam: &SimCamera,
    grid: &GridSpec,
    noise: &NoiseSpec,
) -> Result<(FrameInput, RenderTruth)> {
    if !(pose.h > 0.0) {
        return Err(Error::InvalidInput("pose height must be > 0".into()));
    }
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed ^ frame_index.wrapping_mul(0xA24B_AED4_963E_E407));
    let visible = visible_grid_lines(pose, cam, grid, noise.min_visible_px);
    let n_rho = Normal::new(0.0, noise.sigma_rho.max(0.0)).expect("finite sigma");
    let n_theta = Normal::new(0.0, noise.sigma_theta.max(0.0)).expect("finite sigma");

    let mut emitted: Vec<(DetectedLine, LineSource)> = Vec::new();
    for v in &visible {
        let copies = 1 + rng.gen_range(noise.duplicates_min..=noise.duplicates_max);
        for _ in 0..copies {
            let (dr, dt) = if noise.sigma_rho > 0.0 || noise.sigma_theta > 0.0 {
                (n_rho.sample(&mut rng), n_theta.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            emitted.push((
                DetectedLine::canonical(v.line.rho + dr, v.line.theta + dt),
                LineSource::Grid { axis: v.axis, index: v.index },
            ));
        }
    }

    let mut n_out = if noise.outliers_max > 0 {
        rng.gen_range(noise.outliers_min..=noise.outliers_max)
    } else {
        0
    };
    if noise.outlier_fraction > 0.0 {
        let f = noise.outlier_fraction;
        n_out += (emitted.len() as f64 * f / (1.0 - f)).round() as usize;
    }
    if n_out > 0 {
        let (curves, families) = if noise.outlier_guard > 0.0 {
            (family_curves(pose, cam, grid), family_points(&visible, cam.intrinsics.diagonal()))
        } else {
            (Vec::new(), Vec::new())
        };
        let diag = cam.intrinsics.diagonal();
        let (w, h) = (cam.intrinsics.width as f64, cam.intrinsics.height as f64);
        let g2 = noise.outlier_guard * noise.outlier_guard;
        for _ in 0..n_out {
            for _attempt in 0..1000 {
                let l = DetectedLine::new(rng.gen_range(0.0..diag), rng.gen_range(-PI..PI));
                if !crosses_image(&l, w, h) {
                    continue;
                }
                let (t, r) = (l.theta, l.rho / diag);
                if curves.iter().any(|&(ct, cr)| (ct - t).powi(2) + (cr - r).powi(2) < g2)
                    || families.iter().any(|fam| strip_width_with(fam, (t, r)) <= noise.outlier_guard)
                {
                    continue;
                }
                emitted.push((l, LineSource::Outlier));
                break;
            }
        }
    }
    emitted.shuffle(&mut rng);
    let (lines, sources) = emitted.into_iter().unzip();
    Ok((
        FrameInput {
            frame_index,
            lines,
            timestamp: None,
        },
        RenderTruth {
            pose: *pose,
            visible,
            sources,
        },
    ))
}

/// Attitude and height profile of generated trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    pub nominal_height: f64,
    pub height_amplitude: f64,
    /// Path length over which the height completes one oscillation.
    pub height_period: f64,
    /// Tilt = atan(gain * a / g) per axis; the (roll, pitch) vector is
    /// clamped to a norm of `max_tilt_deg`.
    pub tilt_gain: f64,
    pub max_tilt_deg: f64,
    /// Half width of the acceleration smoothing window, in seconds.
    pub smoothing_s: f64,
    /// Expected attitude spikes per second.
    pub spike_rate: f64,
    pub spike_deg: f64,
    pub yaw_deg: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            nominal_height: 2.0,
            height_amplitude: 0.1,
            height_period: 7.0,
            tilt_gain: 1.0,
            max_tilt_deg: 10.0,
            smoothing_s: 0.5,
            spike_rate: 0.0,
            spike_deg: 35.0,
            yaw_deg: 0.0,
        }
    }
}

pub fn path_length(waypoints: &[[f64; 2]]) -> f64 {
    waypoints
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .sum()
}

/// Random waypoints inside `[margin, arena - margin]^2` whose polyline has
/// exactly `total_length` meters (the last leg is shortened).
pub fn random_waypoints(total_length: f64, arena: f64, margin: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    if !(total_length > 0.0) || !(arena > 2.0 * margin) {
        return Err(Error::InvalidInput("path length and arena must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| [rng.gen_range(margin..arena - margin), rng.gen_range(margin..arena - margin)];
    let mut pts = vec![draw(&mut rng)];
    let mut len = 0.0;
    while len < total_length {
        let last = *pts.last().expect("nonempty");
        let next = draw(&mut rng);
        let d = (next[0] - last[0]).hypot(next[1] - last[1]);
        if d < 0.5 {
            continue;
        }
        if len + d >= total_length {
            let t = (total_length - len) / d;
            pts.push([last[0] + t * (next[0] - last[0]), last[1] + t * (next[1] - last[1])]);
            len = total_length;
        } else {
            pts.push(next);
            len += d;
        }
    }
    Ok(pts)
}

/// Constant-speed sampling of a waypoint polyline at `fps`, with attitude
/// from the smoothed acceleration. Rejects speeds above the tracker limit
/// for `eps_s` unless `force` is set.
#[allow(clippy::too_many_arguments)]
pub fn gen_trajectory(
    waypoints: &[[f64; 2]],
    speed: f64,
    fps: f64,
    grid: &GridSpec,
    eps_s: u32,
    force: bool,
    spec: &TrajectorySpec,
    seed: u64,
) -> Result<Vec<TruePose>> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidInput("need at least two waypoints".into()));
    }
    if !(speed > 0.0 && fps > 0.0) {
        return Err(Error::InvalidInput("speed and fps must be > 0".into()));
    }
    let limit = max_speed(grid, fps, eps_s)?;
    if speed > limit * (1.0 + 1e-12) && !force {
        return Err(Error::Overspeed { speed, limit });
    }
    let total = path_length(waypoints);
    let n = (total / speed * fps + 1e-9).floor() as usize + 1;
    let ds = speed / fps;

    // Positions along the polyline.
    let mut xy = Vec::with_capacity(n);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..n {
        let s = (k as f64 * ds).min(total);
        loop {
            let a = waypoints[seg];
            let b = waypoints[seg + 1];
            let l = (b[0] - a[0]).hypot(b[1] - a[1]);
            if s <= seg_start + l || seg + 2 == waypoints.len() {
                let t = if l > 0.0 { ((s - seg_start) / l).clamp(0.0, 1.0) } else { 0.0 };
                xy.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                break;
            }
            seg_start += l;
            seg += 1;
        }
    }

    // Acceleration by second differences, then a moving average.
    let mut acc = vec![[0.0; 2]; n];
    for k in 1..n.saturating_sub(1) {
        for d in 0..2 {
            acc[k][d] = (xy[k + 1][d] - 2.0 * xy[k][d] + xy[k - 1][d]) * fps * fps;
        }
    }
    let half = (spec.smoothing_s * fps).round() as usize;
    let mut prefix = vec![[0.0; 2]; n + 1];
    for k in 0..n {
        prefix[k + 1] = [prefix[k][0] + acc[k][0], prefix[k][1] + acc[k][1]];
    }
    let max_tilt = spec.max_tilt_deg.to_radians();
    // The tilt vector is clamped as a whole: a diagonal acceleration does not
    // reach the bound on both axes at once.
    let tilt = |ax: f64, ay: f64| {
        let roll = (spec.tilt_gain * ay / 9.81).atan();
        let pitch = (spec.tilt_gain * ax / 9.81).atan();
        let norm = roll.hypot(pitch);
        if norm > max_tilt {
            (roll * max_tilt / norm, pitch * max_tilt / norm)
        } else {
            (roll, pitch)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spikes = vec![(0.0, 0.0); n];
    if spec.spike_rate > 0.0 {
        let p = spec.spike_rate / fps;
        let width = 5usize;
        for k in 0..n {
            if rng.gen_bool(p.min(1.0)) {
                let amp = spec.spike_deg.to_radians() * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let on_roll = rng.gen_bool(0.5);
                for d in 0..=2 * width {
                    let idx = k + d;
                    if idx >= n {
                        break;
                    }
                    let w = 0.5 * (1.0 - (PI * d as f64 / width as f64).cos());
                    if on_roll {
                        spikes[idx].0 = amp * w;
                    } else {
                        spikes[idx].1 = amp * w;
                    }
                }
            }
        }
    }

    let mut poses = Vec::with_capacity(n);
    for k in 0..n {
        let lo = k.saturating_sub(half);
        let hi = (k + half + 1).min(n);
        let cnt = (hi - lo) as f64;
        let ax = (prefix[hi][0] - prefix[lo][0]) / cnt;
        let ay = (prefix[hi][1] - prefix[lo][1]) / cnt;
        let s = k as f64 * ds;
        let (roll, pitch) = tilt(ax, ay);
        poses.push(TruePose {
            x: xy[k][0],
            y: xy[k][1],
            h: spec.nominal_height + spec.height_amplitude * (2.0 * PI * s / spec.height_period).sin(),
            alpha: roll + spikes[k].0,
            beta: pitch + spikes[k].1,
            gamma: spec.yaw_deg.to_radians(),
        });
    }
    Ok(poses)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub eps_alpha: f64,
    pub eps_beta: f64,
    pub eps_c_alpha: f64,
    pub eps_c_beta: f64,
    /// Residual standard deviation of the angle regressions (radians).
    pub residual_sd_alpha: f64,
    pub residual_sd_beta: f64,
}

impl Calibration {
    pub fn apply(&self, cam: &CameraModel) -> CameraModel {
        CameraModel {
            eps_alpha: self.eps_alpha,
            eps_beta: self.eps_beta,
            eps_c_alpha: self.eps_c_alpha,
            eps_c_beta: self.eps_c_beta,
            ..*cam
        }
    }
}

/// Least-squares `y = a x + b`, with the residual SD (n - 2 denominator).
fn regress(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 1e-18) {
        return Err(Error::Degenerate("calibration sweep has no angle spread"));
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let ss: f64 = x.iter().zip(y).map(|(u, v)| (v - a * u - b).powi(2)).sum();
    let sd = if x.len() > 2 { (ss / (n - 2.0)).sqrt() } else { 0.0 };
    Ok((a, b, sd))
}

/// Fits the slope-to-angle gains and offsets from noiseless renders at the
/// sweep attitudes (camera at a fixed interior position).
pub fn calibrate_constants(cam: &SimCamera, grid: &GridSpec, sweep: &[(f64, f64)], h: f64) -> Result<Calibration> {
    let distinct = |f: fn(&(f64, f64)) -> f64| {
        let mut v: Vec<f64> = sweep.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        v.len()
    };
    if distinct(|p| p.0) < 2 || distinct(|p| p.1) < 2 {
        return Err(Error::Degenerate("calibration sweep needs distinct roll and pitch angles"));
    }
    let model = cam.uncalibrated();
    let (mut am, mut av, mut bm, mut bv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &(alpha, beta) in sweep {
        let pose = TruePose {
            x: 0.37 * grid.m_x,
            y: 0.61 * grid.m_y,
            h,
            alpha,
            beta,
            gamma: 0.0,
        };
        let vis = visible_grid_lines(&pose, cam, grid, 20.0);
        let pick = |axis: Axis| -> Vec<DetectedLine> {
            vis.iter().filter(|v| v.axis == axis).map(|v| v.line).collect()
        };
        let est = estimate_orientation(&pick(Axis::X), &pick(Axis::Y), &model);
        am.push(est.m_lat.atan());
        av.push(alpha);
        bm.push(est.m_long.atan());
        bv.push(beta);
    }
    let (ea, ca, sa) = regress(&am, &av)?;
    let (eb, cb, sb) = regress(&bm, &bv)?;
    Ok(Calibration {
        eps_alpha: ea,
        eps_beta: eb,
        eps_c_alpha: ca,
        eps_c_beta: cb,
        residual_sd_alpha: sa,
        residual_sd_beta: sb,
    })
}

/// Symmetric roll/pitch sweep over `[-max_deg, max_deg]` in `steps` values per
/// axis, crossed.
pub fn default_sweep(max_deg: f64, steps: usize) -> Vec<(f64, f64)> {
    let vals: Vec<f64> = (0..steps)
        .map(|k| (-max_deg + 2.0 * max_deg * k as f64 / (steps - 1) as f64).to_radians())
        .collect();
    let mut out = Vec::new();
    for &a in &vals {
        for &b in &vals {
            out.push((a, b));
        }
    }
    out
}
