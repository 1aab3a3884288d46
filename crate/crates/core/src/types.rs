//! Shared domain types, coordinate conventions and configuration.
//!
//! Conventions used throughout the crate:
//!
//! * Image frame: origin at the top-left pixel, `X_I` to the right, `Y_I` down.
//! * World frame: right-handed, `X_W` forward, `Y_W` left, `Z_W` up. For a level,
//!   yaw-aligned camera `Y_W = -X_I` and `X_W = -Y_I`.
//! * Roll `alpha` is a right-handed rotation about `X_W`: positive roll tilts the
//!   optical axis toward `+Y_W`. Pitch `beta` is defined so that positive pitch
//!   tilts the optical axis toward `+X_W`.
//! * Angles are radians internally; degrees only appear in reports and CSV output.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A line in Hough space: `rho` is the distance from the image origin along the
/// normal, `theta` the angle of that normal with `X_I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedLine {
    pub rho: f64,
    pub theta: f64,
}

impl DetectedLine {
    pub fn new(rho: f64, theta: f64) -> Self {
        Self { rho, theta }
    }

    /// Builds the canonical raw representation: `rho >= 0`, `theta` in `[-pi, pi)`.
    pub fn canonical(rho: f64, theta: f64) -> Self {
        let (mut rho, mut theta) = (rho, theta);
        if rho < 0.0 {
            rho = -rho;
            theta += PI;
        }
        Self {
            rho,
            theta: wrap_angle(theta),
        }
    }

    pub fn is_raw_valid(&self) -> bool {
        self.rho.is_finite() && self.rho >= 0.0 && (-PI..PI).contains(&self.theta)
    }

    /// Homogeneous coefficients `(a, b, c)` with `a x + b y + c = 0`.
    pub fn homogeneous(&self) -> [f64; 3] {
        let (s, c) = self.theta.sin_cos();
        [c, s, -self.rho]
    }

    /// Signed distance of a point from the line.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        x * c + y * s - self.rho
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        -PI
    } else {
        t
    }
}

/// Drift-corrected line with its integer grid label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledLine {
    pub rho_c: f64,
    pub theta_c: f64,
    pub label: i32,
    /// Signed distance in pixels from the image center, positive toward the
    /// positive world axis this line localizes (`+Y_W` for longitudinal lines,
    /// `+X_W` for latitudinal ones).
    pub offset: f64,
}

/// Which world axis a 1D localization problem refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Position along `X_W`, observed through latitudinal lines.
    X,
    /// Position along `Y_W`, observed through longitudinal lines.
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    /// Focal length in pixels.
    pub f: f64,
    pub width: u32,
    pub height: u32,
    pub cx: f64,
    pub cy: f64,
    /// Roll offset of the orientation calibration (radians).
    pub eps_c_alpha: f64,
    /// Pitch offset of the orientation calibration (radians).
    pub eps_c_beta: f64,
    pub eps_alpha: f64,
    pub eps_beta: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self::new(280.0, 640, 480)
    }
}

impl CameraModel {
    /// Ideal camera with the principal point at the image center and unit gains.
    pub fn new(f: f64, width: u32, height: u32) -> Self {
        Self {
            f,
            width,
            height,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            eps_c_alpha: 0.0,
            eps_c_beta: 0.0,
            eps_alpha: 1.0,
            eps_beta: 1.0,
        }
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    /// Physical mounting tilt toward `+Y_W` seen by the grid model; the
    /// calibrated roll offset is its negative.
    pub fn mount_tilt(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Y => -self.eps_c_alpha,
            Axis::X => -self.eps_c_beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f.is_finite() && self.f > 0.0) {
            return Err(Error::config("camera.f", "must be > 0"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("camera.width/height", "must be > 0"));
        }
        if !(0.0..=self.width as f64).contains(&self.cx) {
            return Err(Error::config("camera.cx", "must lie in [0, width]"));
        }
        if !(0.0..=self.height as f64).contains(&self.cy) {
            return Err(Error::config("camera.cy", "must lie in [0, height]"));
        }
        for (name, v) in [
            ("camera.eps_c_alpha", self.eps_c_alpha),
            ("camera.eps_c_beta", self.eps_c_beta),
            ("camera.eps_alpha", self.eps_alpha),
            ("camera.eps_beta", self.eps_beta),
        ] {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        Ok(())
    }
}

/// Unit-cell size of the floor grid, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub m_x: f64,
    pub m_y: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { m_x: 1.0, m_y: 1.0 }
    }
}

impl GridSpec {
    pub fn cell(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.m_x,
            Axis::Y => self.m_y,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_x.is_finite() && self.m_x > 0.0) {
            return Err(Error::config("grid.m_x", "must be > 0"));
        }
        if !(self.m_y.is_finite() && self.m_y > 0.0) {
            return Err(Error::config("grid.m_y", "must be > 0"));
        }
        Ok(())
    }
}

/// Which points the roll/pitch slopes are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationSource {
    /// Raw consensus inliers of each parallel set.
    #[default]
    Inliers,
    /// Cluster means.
    Clusters,
}

/// Thresholds and constants of the pipeline. The first six fields default to
/// the published values; the rest are implementation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ransac_width_d: f64,
    pub ransac_min_inliers_t: usize,
    pub kde_bandwidth_b: f64,
    pub cluster_threshold_fraction: f64,
    pub energy_ratio_eps_e: f64,
    pub speed_factor_eps_s: u32,

    pub ransac_iterations: usize,
    pub ransac_early_exit_ratio: f64,
    /// Largest change of theta (radians) per image diagonal of rho along a
    /// consensus model.
    pub ransac_max_theta_rate: f64,
    /// Rescale `kde_bandwidth_b` by `diagonal / 800` for other resolutions.
    pub kde_scale_with_resolution: bool,
    pub kde_grid_step: f64,
    pub orientation_source: OrientationSource,
    /// Lower bound applied to the previous accepted cost inside the energy gate.
    pub energy_floor: f64,
    pub nominal_height: f64,
    pub min_height: f64,
    pub max_height: f64,
    pub solver_max_iter: usize,
    pub solver_tol: f64,
    pub max_consecutive_drops: usize,
    /// Base seed of the per-frame consensus sampling.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ransac_width_d: 0.1,
            ransac_min_inliers_t: 10,
            kde_bandwidth_b: 20.0,
            cluster_threshold_fraction: 0.25,
            energy_ratio_eps_e: 1.0e2,
            speed_factor_eps_s: 3,
            ransac_iterations: 200,
            ransac_early_exit_ratio: 0.8,
            ransac_max_theta_rate: 1.0,
            kde_scale_with_resolution: true,
            kde_grid_step: 1.0,
            orientation_source: OrientationSource::Inliers,
            energy_floor: 0.5,
            nominal_height: 2.0,
            min_height: 0.05,
            max_height: 50.0,
            solver_max_iter: 50,
            solver_tol: 1e-10,
            max_consecutive_drops: 15,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// KDE bandwidth for the given camera resolution.
    pub fn bandwidth_for(&self, cam: &CameraModel) -> f64 {
        if self.kde_scale_with_resolution {
            self.kde_bandwidth_b * cam.diagonal() / 800.0
        } else {
            self.kde_bandwidth_b
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pipeline.ransac_width_d", self.ransac_width_d),
            ("pipeline.kde_bandwidth_b", self.kde_bandwidth_b),
            (
                "pipeline.cluster_threshold_fraction",
                self.cluster_threshold_fraction,
            ),
            ("pipeline.energy_ratio_eps_e", self.energy_ratio_eps_e),
            ("pipeline.ransac_early_exit_ratio", self.ransac_early_exit_ratio),
            ("pipeline.ransac_max_theta_rate", self.ransac_max_theta_rate),
            ("pipeline.kde_grid_step", self.kde_grid_step),
            ("pipeline.energy_floor", self.energy_floor),
            ("pipeline.nominal_height", self.nominal_height),
            ("pipeline.min_height", self.min_height),
            ("pipeline.solver_tol", self.solver_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        if self.ransac_min_inliers_t == 0 {
            return Err(Error::config("pipeline.ransac_min_inliers_t", "must be > 0"));
        }
        if self.speed_factor_eps_s < 3 {
            return Err(Error::config("pipeline.speed_factor_eps_s", "must be >= 3"));
        }
        if self.ransac_iterations == 0 {
            return Err(Error::config("pipeline.ransac_iterations", "must be > 0"));
        }
        if self.solver_max_iter == 0 {
            return Err(Error::config("pipeline.solver_max_iter", "must be > 0"));
        }
        if !(self.max_height > self.min_height) {
            return Err(Error::config("pipeline.max_height", "must exceed min_height"));
        }
        if !(self.min_height..=self.max_height).contains(&self.nominal_height) {
            return Err(Error::config(
                "pipeline.nominal_height",
                "must lie in [min_height, max_height]",
            ));
        }
        Ok(())
    }
}

/// Per-frame 5-DoF output.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseEstimate {
    /// Integrated position along `X_W` (meters).
    pub x: f64,
    /// Integrated position along `Y_W` (meters).
    pub y: f64,
    pub o_x: f64,
    pub o_y: f64,
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
    pub final_cost_x: f64,
    pub final_cost_y: f64,
    pub accepted: bool,
}

/// Maximum speed for which consecutive frames stay within one cell:
/// `min(m_x, m_y) * fps / eps_s`.
pub fn max_speed(grid: &GridSpec, fps: f64, eps_s: u32) -> Result<f64> {
    if eps_s < 3 {
        return Err(Error::config("speed_factor_eps_s", "must be >= 3"));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::config("fps", "must be > 0"));
    }
    Ok(grid.m_x.min(grid.m_y) * fps / eps_s as f64)
}

/// Image axis a world axis maps to for a level, yaw-aligned camera, with the
/// sign of the mapping (`Y_W = -X_I`, `X_W = -Y_I`).
pub fn world_to_image_axis(axis: Axis) -> (ImageAxis, f64) {
    match axis {
        Axis::Y => (ImageAxis::X, -1.0),
        Axis::X => (ImageAxis::Y, -1.0),
    }
}

/// Inverse of [`world_to_image_axis`].
pub fn image_to_world_axis(axis: ImageAxis) -> (Axis, f64) {
    match axis {
        ImageAxis::X => (Axis::Y, -1.0),
        ImageAxis::Y => (Axis::X, -1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageAxis {
    X,
    Y,
}
