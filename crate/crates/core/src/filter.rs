//! Theta gate and two-pass consensus split of detected lines into the two
//! parallel grid-line sets.
//!
//! A family of parallel floor lines seen through a pinhole camera traces a
//! nearly straight curve in the (theta, rho) plane. When the camera is level
//! that curve is vertical (all lines share theta), so models are kept in
//! normal form rather than as `rho = m * theta + b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::types::{DetectedLine, PipelineConfig};

/// A straight line in the `(theta, rho / diag)` plane:
/// `n_theta * theta + n_rho * rho / diag = c` with `(n_theta, n_rho)` unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModelRT {
    pub n_theta: f64,
    pub n_rho: f64,
    pub c: f64,
    pub diag: f64,
}

impl LinearModelRT {
    /// Model through two points; `None` when they coincide.
    pub fn through(a: &DetectedLine, b: &DetectedLine, diag: f64) -> Option<Self> {
        let (dt, dr) = (b.theta - a.theta, (b.rho - a.rho) / diag);
        let len = dt.hypot(dr);
        if !(len > 1e-12) {
            return None;
        }
        let (n_theta, n_rho) = (-dr / len, dt / len);
        Some(Self {
            n_theta,
            n_rho,
            c: n_theta * a.theta + n_rho * a.rho / diag,
            diag,
        })
    }

    /// Orthogonal-regression fit through a set of points.
    pub fn fit(points: &[DetectedLine], diag: f64) -> Option<Self> {
        if points.len() < 2 {
            return None;
        }
        let n = points.len() as f64;
        let mt = points.iter().map(|p| p.theta).sum::<f64>() / n;
        let mr = points.iter().map(|p| p.rho / diag).sum::<f64>() / n;
        let (mut stt, mut srr, mut str_) = (0.0, 0.0, 0.0);
        for p in points {
            let (a, b) = (p.theta - mt, p.rho / diag - mr);
            stt += a * a;
            srr += b * b;
            str_ += a * b;
        }
        if stt + srr <= 1e-24 {
            return None;
        }
        // Direction of largest spread; the normal is perpendicular to it.
        let phi = 0.5 * (2.0 * str_).atan2(stt - srr);
        let (n_theta, n_rho) = (-phi.sin(), phi.cos());
        Some(Self {
            n_theta,
            n_rho,
            c: n_theta * mt + n_rho * mr,
            diag,
        })
    }

    /// Signed distance of a point in the normalized plane.
    #[inline]
    pub fn residual(&self, p: &DetectedLine) -> f64 {
        self.n_theta * p.theta + self.n_rho * p.rho / self.diag - self.c
    }

    /// `d rho / d theta` in pixels per radian; `None` for a vertical model
    /// (all lines sharing one theta).
    pub fn slope(&self) -> Option<f64> {
        if self.n_rho.abs() < 1e-12 {
            None
        } else {
            Some(-self.diag * self.n_theta / self.n_rho)
        }
    }

    /// `|d theta / d(rho / diag)|`: how fast the normal angle changes along
    /// the model. Infinite for a model of constant rho.
    pub fn theta_rate(&self) -> f64 {
        if self.n_theta == 0.0 {
            f64::INFINITY
        } else {
            (self.n_rho / self.n_theta).abs()
        }
    }

    pub fn intercept(&self) -> Option<f64> {
        if self.n_rho.abs() < 1e-12 {
            None
        } else {
            Some(self.diag * self.c / self.n_rho)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub long_lines: Vec<DetectedLine>,
    pub lat_lines: Vec<DetectedLine>,
    pub outliers: Vec<DetectedLine>,
    pub model_long: LinearModelRT,
    pub model_lat: LinearModelRT,
    /// Lines removed by the theta gate (not part of the partition).
    pub gated_out: Vec<DetectedLine>,
}

pub fn in_theta_gate(theta: f64) -> bool {
    (-PI / 4.0..3.0 * PI / 4.0).contains(&theta)
}

/// Keeps lines with `-pi/4 <= theta < 3pi/4`.
pub fn theta_gate(lines: &[DetectedLine]) -> Vec<DetectedLine> {
    lines.iter().copied().filter(|l| in_theta_gate(l.theta)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub d: f64,
    pub t: usize,
    pub iterations: usize,
    pub early_exit_ratio: f64,
    /// Models whose `theta_rate` exceeds this cannot describe one family of
    /// parallel floor lines and are never selected.
    pub max_theta_rate: f64,
    pub diag: f64,
}

impl RansacParams {
    pub fn from_config(cfg: &PipelineConfig, diag: f64) -> Self {
        Self {
            d: cfg.ransac_width_d,
            t: cfg.ransac_min_inliers_t,
            iterations: cfg.ransac_iterations,
            early_exit_ratio: cfg.ransac_early_exit_ratio,
            max_theta_rate: cfg.ransac_max_theta_rate,
            diag,
        }
    }
}

fn score(model: &LinearModelRT, points: &[DetectedLine], d: f64) -> (usize, f64) {
    let mut n = 0;
    let mut sse = 0.0;
    for p in points {
        let r = model.residual(p);
        if r.abs() <= d {
            n += 1;
            sse += r * r;
        }
    }
    (n, sse)
}

fn inlier_indices(model: &LinearModelRT, points: &[DetectedLine], d: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| model.residual(&points[i]).abs() <= d)
        .collect()
}

/// Two-point consensus line fit in the normalized (theta, rho) plane.
///
/// Every pair is tried when there are no more pairs than `iterations`;
/// otherwise `iterations` pairs are drawn from a seeded generator. The best
/// model has the most inliers, then the smallest inlier sum of squared
/// residuals, then the earliest sample. It is re-fitted on its consensus set.
/// Models steeper in theta than `max_theta_rate` are skipped: a band of
/// nearly constant rho collects lines of both families at any theta.
/// Returns the model and the indices of its inliers.
pub fn ransac_line_rt(
    points: &[DetectedLine],
    p: &RansacParams,
    seed: u64,
) -> Result<(LinearModelRT, Vec<usize>)> {
    let n = points.len();
    let no_consensus = |found| Error::NoConsensus {
        found,
        required: p.t,
    };
    if n < 2 {
        return Err(no_consensus(n));
    }
    let mut best: Option<(LinearModelRT, usize, f64)> = None;
    let mut consider = |m: LinearModelRT| -> bool {
        if m.theta_rate() > p.max_theta_rate {
            return false;
        }
        let (cnt, sse) = score(&m, points, p.d);
        let better = match &best {
            None => true,
            Some((_, bc, bs)) => cnt > *bc || (cnt == *bc && sse < *bs),
        };
        if better {
            best = Some((m, cnt, sse));
        }
        cnt as f64 > p.early_exit_ratio * n as f64
    };
    let pairs = n * (n - 1) / 2;
    if pairs <= p.iterations {
        'outer: for i in 0..n {
            for j in i + 1..n {
                if let Some(m) = LinearModelRT::through(&points[i], &points[j], p.diag) {
                    if consider(m) {
                        break 'outer;
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..p.iterations {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            if let Some(m) = LinearModelRT::through(&points[i], &points[j], p.diag) {
                if consider(m) {
                    break;
                }
            }
        }
    }
    let (model, count, _) = best.ok_or(Error::NoConsensus {
        found: 0,
        required: p.t,
    })?;
    if count < p.t {
        return Err(no_consensus(count));
    }
    let mut inliers = inlier_indices(&model, points, p.d);
    let mut model = model;
    let members: Vec<DetectedLine> = inliers.iter().map(|&i| points[i]).collect();
    if let Some(refit) = LinearModelRT::fit(&members, p.diag).filter(|m| m.theta_rate() <= p.max_theta_rate) {
        let again = inlier_indices(&refit, points, p.d);
        if again.len() >= inliers.len() {
            model = refit;
            inliers = again;
        }
    }
    Ok((model, inliers))
}

fn mean_theta(lines: &[DetectedLine]) -> f64 {
    lines.iter().map(|l| l.theta).sum::<f64>() / lines.len() as f64
}

/// Theta gate, then consensus twice without replacement. The set whose mean
/// theta is nearer 0 becomes the longitudinal set.
pub fn filter_grid_lines(
    lines: &[DetectedLine],
    cfg: &PipelineConfig,
    diag: f64,
    seed: u64,
) -> Result<FilterResult> {
    let (gated, gated_out): (Vec<DetectedLine>, Vec<DetectedLine>) =
        lines.iter().partition(|l| in_theta_gate(l.theta));
    let params = RansacParams::from_config(cfg, diag);

    let (model_a, idx_a) = ransac_line_rt(&gated, &params, seed)?;
    let mut taken = vec![false; gated.len()];
    for &i in &idx_a {
        taken[i] = true;
    }
    let rest: Vec<usize> = (0..gated.len()).filter(|&i| !taken[i]).collect();
    let rest_pts: Vec<DetectedLine> = rest.iter().map(|&i| gated[i]).collect();
    let (model_b, idx_b_local) =
        ransac_line_rt(&rest_pts, &params, seed ^ 0x9E37_79B9_7F4A_7C15)?;
    for &k in &idx_b_local {
        taken[rest[k]] = true;
    }

    let set_a: Vec<DetectedLine> = idx_a.iter().map(|&i| gated[i]).collect();
    let set_b: Vec<DetectedLine> = idx_b_local.iter().map(|&k| rest_pts[k]).collect();
    let outliers: Vec<DetectedLine> = (0..gated.len())
        .filter(|&i| !taken[i])
        .map(|i| gated[i])
        .collect();

    let a_is_long = mean_theta(&set_a).abs() <= mean_theta(&set_b).abs();
    let (long_lines, lat_lines, model_long, model_lat) = if a_is_long {
        (set_a, set_b, model_a, model_b)
    } else {
        (set_b, set_a, model_b, model_a)
    };
    Ok(FilterResult {
        long_lines,
        lat_lines,
        outliers,
        model_long,
        model_lat,
        gated_out,
    })
}
