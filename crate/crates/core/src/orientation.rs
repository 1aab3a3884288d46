//! Roll and pitch from the rho-theta trend of each parallel set, rotation
//! compensation of the line sets and integer labeling.
//!
//! For a family of parallel floor lines, the normal angle offset `t` of each
//! line from the family's nominal angle and its center-relative distance
//! `rho_c` satisfy `sin t = k * rho_c / f + c * cos t` exactly under a pinhole
//! camera, where `k` is the tangent of the camera tilt about the family's
//! direction. The fitted `k` is the slope used for roll and pitch.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix2, Vector2};

use crate::cluster::ClusteredSet;
use crate::geometry::{camera_rotation, rotation_homography, transfer_line};
use crate::types::{Axis, CameraModel, DetectedLine, LabeledLine};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OrientationEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub m_lat: f64,
    pub m_long: f64,
    /// The latitudinal slope could not be fitted and was taken as 0.
    pub low_confidence_lat: bool,
    pub low_confidence_long: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    pub lat: Vec<LabeledLine>,
    pub long: Vec<LabeledLine>,
}

/// Least-squares slope of one set around nominal normal angle `theta0`.
/// `None` for fewer than two lines or a singular fit.
pub fn fit_slope(lines: &[DetectedLine], theta0: f64, cam: &CameraModel) -> Option<f64> {
    if lines.len() < 2 {
        return None;
    }
    let mut ata = Matrix2::zeros();
    let mut aty = Vector2::zeros();
    for l in lines {
        let (s, c) = l.theta.sin_cos();
        let rho_c = l.rho - cam.cx * c - cam.cy * s;
        let (st, ct) = (l.theta - theta0).sin_cos();
        let row = Vector2::new(rho_c / cam.f, ct);
        ata += row * row.transpose();
        aty += row * st;
    }
    let scale = ata.m11.abs().max(ata.m22.abs());
    if !(ata.determinant().abs() > 1e-12 * scale * scale) {
        return None;
    }
    let sol = ata.lu().solve(&aty)?;
    sol.x.is_finite().then_some(sol.x)
}

fn zero_theta_spread(lines: &[DetectedLine]) -> bool {
    let n = lines.len() as f64;
    let mean = lines.iter().map(|l| l.theta).sum::<f64>() / n;
    lines.iter().all(|l| (l.theta - mean).abs() < 1e-15)
}

/// Roll from the latitudinal set, pitch from the longitudinal set, mapped
/// through the calibration gains and offsets.
pub fn estimate_orientation(
    lat: &[DetectedLine],
    long: &[DetectedLine],
    cam: &CameraModel,
) -> OrientationEstimate {
    let k_long = fit_slope(long, 0.0, cam);
    let k_lat = fit_slope(lat, FRAC_PI_2, cam);
    let m_long = k_long.map_or(0.0, |k| -k);
    // The latitudinal trend is foreshortened by the pitch tilt.
    let m_lat = k_lat.map_or(0.0, |k| k / m_long.atan().cos());
    OrientationEstimate {
        alpha: m_lat.atan() * cam.eps_alpha + cam.eps_c_alpha,
        beta: m_long.atan() * cam.eps_beta + cam.eps_c_beta,
        m_lat,
        m_long,
        low_confidence_lat: k_lat.is_none() || zero_theta_spread(lat),
        low_confidence_long: k_long.is_none() || zero_theta_spread(long),
    }
}

/// Signed center distance of a line, positive toward the world axis the set
/// localizes. Longitudinal lines are measured along the center row,
/// latitudinal ones along the center column.
pub fn signed_offset(line: &DetectedLine, axis: Axis, cam: &CameraModel) -> f64 {
    let (s, c) = line.theta.sin_cos();
    match axis {
        Axis::Y => cam.cx - (line.rho - cam.cy * s) / c,
        Axis::X => cam.cy - (line.rho - cam.cx * c) / s,
    }
}

/// Integer labels for offsets sorted ascending: label 0 goes to the largest
/// non-positive offset, labels grow with the offset.
pub fn assign_labels(sorted_offsets: &[f64]) -> Vec<i32> {
    let n_neg = sorted_offsets.iter().filter(|&&d| d <= 0.0).count() as i32;
    (0..sorted_offsets.len() as i32).map(|k| k + 1 - n_neg).collect()
}

fn correct_set(lines: &[DetectedLine], axis: Axis, est: &OrientationEstimate, cam: &CameraModel) -> Vec<LabeledLine> {
    let r_cam = camera_rotation(est.alpha - cam.eps_c_alpha, est.beta - cam.eps_c_beta, 0.0);
    // Virtual camera keeping only the mounting tilt this axis's model expects.
    let r_virtual = match axis {
        Axis::Y => camera_rotation(cam.mount_tilt(Axis::Y), 0.0, 0.0),
        Axis::X => camera_rotation(0.0, cam.mount_tilt(Axis::X), 0.0),
    };
    let h = rotation_homography(cam, &r_cam, &r_virtual);
    let mut out: Vec<LabeledLine> = lines
        .iter()
        .filter_map(|l| transfer_line(l, &h))
        .filter_map(|l| {
            let offset = signed_offset(&l, axis, cam);
            offset.is_finite().then_some(LabeledLine {
                rho_c: l.rho,
                theta_c: l.theta,
                label: 0,
                offset,
            })
        })
        .collect();
    out.sort_by(|a, b| a.offset.total_cmp(&b.offset));
    let offsets: Vec<f64> = out.iter().map(|l| l.offset).collect();
    for (l, lab) in out.iter_mut().zip(assign_labels(&offsets)) {
        l.label = lab;
    }
    out
}

/// Removes the estimated camera rotation from both sets and labels them.
pub fn drift_correct(
    lat: &ClusteredSet,
    long: &ClusteredSet,
    est: &OrientationEstimate,
    cam: &CameraModel,
) -> LabeledSet {
    LabeledSet {
        lat: correct_set(&lat.as_detected(), Axis::X, est, cam),
        long: correct_set(&long.as_detected(), Axis::Y, est, cam),
    }
}
