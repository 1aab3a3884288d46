//! Per-axis sub-cell localization, energy-gate acceptance and axis fusion.

use crate::error::{Error, Result};
use crate::grid_model::{residuals_unwrapped, wrap_offset};
use crate::solver::{solve, Bounds, SolverOptions};
use crate::types::{Axis, CameraModel, GridSpec, LabeledLine, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisResult {
    pub o: f64,
    pub h: f64,
    pub final_cost: f64,
    pub accepted: bool,
    pub converged: bool,
    pub n_lines: usize,
    pub iterations: usize,
    /// Only one line was visible, so `h` was pinned rather than estimated.
    pub degraded: bool,
}

/// Energy gate: the final cost must stay below `eps_e` times the last accepted
/// cost, the latter floored at `floor`.
pub fn energy_gate(cost: f64, prev_cost: Option<f64>, eps_e: f64, floor: f64) -> bool {
    match prev_cost {
        None => true,
        Some(prev) => cost < prev.max(floor) * eps_e,
    }
}

/// Solves one axis for `(o, h)`.
///
/// `prev_cost` is the final cost of the last accepted solve on this axis and
/// `h_guess` the starting height. The offset is initialized from the line
/// nearest the image center at `h_guess`.
pub fn localize_axis(
    lines: &[LabeledLine],
    axis: Axis,
    cam: &CameraModel,
    grid: &GridSpec,
    prev_cost: Option<f64>,
    h_guess: f64,
    cfg: &PipelineConfig,
) -> Result<AxisResult> {
    if lines.is_empty() {
        return Err(Error::Empty("labeled lines"));
    }
    let m = grid.cell(axis);
    let eps_c = cam.mount_tilt(axis);
    let f = cam.f;
    let h0 = h_guess.clamp(cfg.min_height, cfg.max_height);
    let degraded = lines.len() == 1;

    let anchor = lines
        .iter()
        .min_by(|a, b| a.offset.abs().total_cmp(&b.offset.abs()))
        .expect("nonempty");
    let s_anchor = h0 * ((anchor.offset / f).atan() + eps_c).tan();
    let bounds = axis_bounds(m, eps_c, cfg, degraded.then_some(h0));
    let q0 = m * anchor.label as f64 - s_anchor;
    let mut residuals = axis_residuals(lines, m, f, eps_c);
    let opts = SolverOptions {
        max_iter: cfg.solver_max_iter,
        tol: cfg.solver_tol,
        ..Default::default()
    };
    let sol = solve(&mut residuals, [q0, h0], &bounds, &opts)?;
    let accepted = sol.converged
        && energy_gate(sol.final_cost, prev_cost, cfg.energy_ratio_eps_e, cfg.energy_floor);
    Ok(AxisResult {
        o: wrap_offset(sol.params[0], m),
        h: sol.params[1],
        final_cost: sol.final_cost,
        accepted,
        converged: sol.converged,
        n_lines: lines.len(),
        iterations: sol.iterations,
        degraded,
    })
}

/// Box for the unwrapped offset `q` and height `h`. `pinned_h` fixes the height.
pub fn axis_bounds(m: f64, eps_c: f64, cfg: &PipelineConfig, pinned_h: Option<f64>) -> Bounds {
    let tilt_reach = cfg.max_height * eps_c.tan().abs();
    Bounds {
        lower: [-m - tilt_reach, pinned_h.unwrap_or(cfg.min_height)],
        upper: [2.0 * m + tilt_reach, pinned_h.unwrap_or(cfg.max_height)],
    }
}

/// Residual problem of one axis in `(q, h)`. A point where any line falls
/// behind the horizon is an error, so the solver never trades lines for cost.
pub fn axis_residuals(
    lines: &[LabeledLine],
    m: f64,
    f: f64,
    eps_c: f64,
) -> impl FnMut(&[f64; 2], &mut Vec<f64>, &mut Vec<[f64; 2]>) -> Result<()> + '_ {
    move |p, r, j| {
        if residuals_unwrapped(lines, p[0], p[1], m, f, eps_c, r, j) < lines.len() {
            Err(Error::Singular("grid line at the horizon"))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedPose {
    /// `None` when that axis was rejected.
    pub o_x: Option<f64>,
    pub o_y: Option<f64>,
    pub h: f64,
    pub accepted: bool,
}

/// Combines the two axes. Height is the line-count weighted mean over the
/// accepted, non-degraded axes. `None` when neither axis was accepted.
pub fn fuse_axes(x: Option<&AxisResult>, y: Option<&AxisResult>) -> Option<FusedPose> {
    let x = x.filter(|r| r.accepted);
    let y = y.filter(|r| r.accepted);
    if x.is_none() && y.is_none() {
        return None;
    }
    let mut wsum = 0.0;
    let mut hsum = 0.0;
    for r in [x, y].into_iter().flatten() {
        if !r.degraded {
            wsum += r.n_lines as f64;
            hsum += r.n_lines as f64 * r.h;
        }
    }
    let h = if wsum > 0.0 {
        hsum / wsum
    } else {
        x.or(y).map(|r| r.h).expect("one axis accepted")
    };
    Some(FusedPose {
        o_x: x.map(|r| r.o),
        o_y: y.map(|r| r.o),
        h,
        accepted: x.is_some() && y.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_model::{model_rho, AxisModelParams};
    use approx::assert_relative_eq;

    fn synth(o: f64, h: f64, eps: f64, labels: std::ops::RangeInclusive<i32>) -> Vec<LabeledLine> {
        let p = AxisModelParams { o, h, m: 1.0, f: 280.0, eps_c: eps };
        labels
            .map(|j| LabeledLine { rho_c: 0.0, theta_c: 0.0, label: j, offset: model_rho(j, &p).unwrap() })
            .collect()
    }

    #[test]
    fn gate_threshold_arithmetic() {
        assert!(energy_gate(49.0, Some(0.5), 100.0, 0.5));
        assert!(!energy_gate(51.0, Some(0.5), 100.0, 0.5));
        assert!(energy_gate(1e9, None, 100.0, 0.5));
    }

    #[test]
    fn recovers_noiseless_axis() {
        let cfg = PipelineConfig::default();
        let cam = CameraModel::default();
        let lines = synth(0.42, 2.0, 0.0, -2..=3);
        let r = localize_axis(&lines, Axis::Y, &cam, &GridSpec::default(), None, 1.5, &cfg).unwrap();
        assert!(r.accepted && r.converged);
        assert!((r.o - 0.42).abs() < 1e-6 && (r.h - 2.0).abs() < 1e-6, "{r:?}");
        assert_eq!(r.n_lines, 6);
    }

    #[test]
    fn recovers_with_mounting_tilt() {
        let cfg = PipelineConfig::default();
        // Calibrated offset -0.1 means the camera is mounted tilted by +0.1.
        let cam = CameraModel { eps_c_alpha: -0.1, ..Default::default() };
        for &o in &[0.05, 0.5, 0.85, 0.95] {
            let lines = synth(o, 1.8, 0.1, -2..=3);
            let r = localize_axis(&lines, Axis::Y, &cam, &GridSpec::default(), None, 2.0, &cfg).unwrap();
            assert!((r.o - o).abs() < 1e-6 && (r.h - 1.8).abs() < 1e-6, "o={o}: {r:?}");
        }
    }

    #[test]
    fn corrupted_axis_rejected() {
        let cfg = PipelineConfig::default();
        let cam = CameraModel::default();
        let mut lines = synth(0.3, 2.0, 0.0, -2..=2);
        for (k, l) in lines.iter_mut().enumerate() {
            l.offset += if k % 2 == 0 { 40.0 } else { -40.0 };
        }
        let r = localize_axis(&lines, Axis::X, &cam, &GridSpec::default(), Some(1.0), 2.0, &cfg).unwrap();
        assert!(r.converged && !r.accepted, "{r:?}");
    }

    #[test]
    fn single_line_pins_height() {
        let cfg = PipelineConfig::default();
        let cam = CameraModel::default();
        let lines = synth(0.3, 2.0, 0.0, 0..=0);
        let r = localize_axis(&lines, Axis::X, &cam, &GridSpec::default(), None, 2.0, &cfg).unwrap();
        assert!(r.degraded);
        assert_eq!(r.h, 2.0);
        assert_relative_eq!(r.o, 0.3, epsilon = 1e-9);
        assert!(localize_axis(&[], Axis::X, &cam, &GridSpec::default(), None, 2.0, &cfg).is_err());
    }

    #[test]
    fn fusion_examples() {
        let a = |h, n| AxisResult { h, n_lines: n, accepted: true, o: 0.1, ..Default::default() };
        let f = fuse_axes(Some(&a(2.0, 4)), Some(&a(2.0, 6))).unwrap();
        assert_relative_eq!(f.h, 2.0);
        let f = fuse_axes(Some(&a(2.0, 4)), Some(&a(2.2, 6))).unwrap();
        assert_relative_eq!(f.h, 2.12, epsilon = 1e-12);
        assert!(f.accepted);
        let rejected = AxisResult { accepted: false, ..a(9.0, 3) };
        let f = fuse_axes(Some(&rejected), Some(&a(2.2, 6))).unwrap();
        assert!(!f.accepted && f.o_x.is_none() && f.o_y == Some(0.1));
        assert_relative_eq!(f.h, 2.2);
        assert!(fuse_axes(Some(&rejected), None).is_none());
    }
}
