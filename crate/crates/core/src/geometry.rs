//! Camera rotations, intrinsics and projective line transfer.
//!
//! `camera_rotation` returns `R_wc`, mapping camera-frame vectors to world-frame
//! vectors. Camera axes: `x_c` along image columns, `y_c` along image rows, `z_c`
//! along the optical axis. A level camera looks down with `x_c = -Y_W`,
//! `y_c = -X_W`, `z_c = -Z_W`.

use nalgebra::{Matrix3, Vector3};

use crate::types::{CameraModel, DetectedLine};

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Orientation of a level, yaw-aligned, downward-looking camera.
pub fn level_camera() -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0)
}

/// Camera-to-world rotation for optical-axis tilts toward `+Y_W` (`roll_tilt`)
/// and `+X_W` (`pitch_tilt`) and a yaw about `Z_W`.
pub fn camera_rotation(roll_tilt: f64, pitch_tilt: f64, yaw: f64) -> Matrix3<f64> {
    rot_z(yaw) * rot_x(roll_tilt) * rot_y(-pitch_tilt) * level_camera()
}

pub fn intrinsics(cam: &CameraModel) -> Matrix3<f64> {
    Matrix3::new(cam.f, 0.0, cam.cx, 0.0, cam.f, cam.cy, 0.0, 0.0, 1.0)
}

pub fn intrinsics_inv(cam: &CameraModel) -> Matrix3<f64> {
    let fi = 1.0 / cam.f;
    Matrix3::new(fi, 0.0, -cam.cx * fi, 0.0, fi, -cam.cy * fi, 0.0, 0.0, 1.0)
}

/// Pixel-to-pixel homography between two cameras sharing a center:
/// `x_to ~ K R_toᵀ R_from K⁻¹ x_from`.
pub fn rotation_homography(
    cam: &CameraModel,
    r_from: &Matrix3<f64>,
    r_to: &Matrix3<f64>,
) -> Matrix3<f64> {
    intrinsics(cam) * r_to.transpose() * r_from * intrinsics_inv(cam)
}

/// Maps a line through a point homography `h` (lines transform by `h⁻ᵀ`).
/// The returned normal angle stays on the same branch as the input, so `rho`
/// may become negative.
pub fn transfer_line(line: &DetectedLine, h: &Matrix3<f64>) -> Option<DetectedLine> {
    let inv = h.try_inverse()?;
    let [a, b, c] = line.homogeneous();
    let l = inv.transpose() * Vector3::new(a, b, c);
    let n = l.x.hypot(l.y);
    if !(n.is_finite() && n > 0.0) {
        return None;
    }
    let (mut ca, mut sa, mut rho) = (l.x / n, l.y / n, -l.z / n);
    let (s0, c0) = line.theta.sin_cos();
    if ca * c0 + sa * s0 < 0.0 {
        ca = -ca;
        sa = -sa;
        rho = -rho;
    }
    let theta = line.theta + (sa * c0 - ca * s0).atan2(ca * c0 + sa * s0);
    Some(DetectedLine::new(rho, theta))
}

/// Line through two homogeneous image points, in `(rho, theta)` form with no
/// sign normalization.
pub fn line_through(p: &Vector3<f64>, q: &Vector3<f64>) -> Option<DetectedLine> {
    let l = p.cross(q);
    let n = l.x.hypot(l.y);
    if !(n.is_finite() && n > 1e-300) {
        return None;
    }
    Some(DetectedLine::new(-l.z / n, l.y.atan2(l.x)))
}
