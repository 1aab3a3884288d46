//! Projection of the floor grid lines of one axis into signed pixel distances
//! from the image center, for a camera at sub-cell offset `o` and height `h`
//! whose optical axis is tilted by `eps_c` toward the positive world axis.

use crate::error::{Error, Result};
use crate::types::LabeledLine;

/// Lines whose ray is this close to parallel with the image plane are dropped.
const MIN_COS_DELTA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisModelParams {
    pub o: f64,
    pub h: f64,
    pub m: f64,
    pub f: f64,
    /// Tilt of the optical axis toward the positive world axis (radians).
    pub eps_c: f64,
}

/// Floor distance from the camera foot to where the optical axis meets the floor.
pub fn principal_offset(h: f64, eps_c: f64) -> Result<f64> {
    if eps_c.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::Singular("tilt must be below 90 degrees"));
    }
    Ok(h * eps_c.tan())
}

/// `g(c) = c cos(phi) f / (cos(delta) h)` with `phi = atan(c / h)` and
/// `delta = phi - eps_c`.
pub fn project_ground_distance(c: f64, h: f64, f: f64, eps_c: f64) -> Result<f64> {
    let phi = (c / h).atan();
    let cos_delta = (phi - eps_c).cos();
    if cos_delta < MIN_COS_DELTA {
        return Err(Error::Singular("grid line at the horizon"));
    }
    Ok(c * phi.cos() * f / (cos_delta * h))
}

/// Floor index of the line carrying image label `j`. Label 0 is the nearest
/// line at or behind the optical axis's floor point, so
/// `i = j + floor((s_p + o) / m) - 1`.
pub fn label_to_index(j: i32, o: f64, m: f64, s_p: f64) -> i64 {
    j as i64 + ((s_p + o) / m).floor() as i64 - 1
}

/// Floor distance (toward the positive axis) of the line with index `i`.
pub fn line_distance(i: i64, o: f64, m: f64) -> f64 {
    m * (i + 1) as f64 - o
}

/// Signed pixel distance from the image center of the line with label `j`.
pub fn model_rho(j: i32, p: &AxisModelParams) -> Result<f64> {
    let s_p = principal_offset(p.h, p.eps_c)?;
    let i = label_to_index(j, p.o, p.m, s_p);
    let s = line_distance(i, p.o, p.m);
    let g = project_ground_distance(s, p.h, p.f, p.eps_c)? - project_ground_distance(s_p, p.h, p.f, p.eps_c)?;
    // The difference above is foreshortened by cos(eps_c) relative to the
    // pinhole image distance.
    Ok(g / p.eps_c.cos())
}

/// Pinhole image distance of a floor line at distance `s` and its partial
/// derivatives with respect to `s` and `h`. `None` near the horizon.
#[inline]
pub fn project_with_derivatives(s: f64, h: f64, f: f64, eps_c: f64) -> Option<(f64, f64, f64)> {
    let delta = (s / h).atan() - eps_c;
    let cd = delta.cos();
    if cd < MIN_COS_DELTA {
        return None;
    }
    let sec2 = 1.0 / (cd * cd);
    let q = h * h + s * s;
    Some((f * delta.tan(), f * sec2 * h / q, -f * sec2 * s / q))
}

/// Residuals `r_j = offset_j - rho_mod_j` and their derivatives with respect
/// to `(o, h)`. Lines at the projection singularity get a zero residual and a
/// zero Jacobian row; the returned count is the number of lines used.
pub fn residuals_and_jacobian(
    lines: &[LabeledLine],
    p: &AxisModelParams,
) -> Result<(Vec<f64>, Vec<[f64; 2]>, usize)> {
    if lines.is_empty() {
        return Err(Error::Empty("labeled lines"));
    }
    let s_p = principal_offset(p.h, p.eps_c)?;
    let shift = ((s_p + p.o) / p.m).floor() as i64 - 1;
    let mut r = Vec::with_capacity(lines.len());
    let mut jac = Vec::with_capacity(lines.len());
    let mut used = 0;
    for l in lines {
        let s = line_distance(l.label as i64 + shift, p.o, p.m);
        match project_with_derivatives(s, p.h, p.f, p.eps_c) {
            Some((rho, d_ds, d_dh)) => {
                r.push(l.offset - rho);
                // ds/do = -1.
                jac.push([d_ds, -d_dh]);
                used += 1;
            }
            None => {
                r.push(0.0);
                jac.push([0.0, 0.0]);
            }
        }
    }
    if used == 0 {
        return Err(Error::Singular("every line is at the horizon"));
    }
    Ok((r, jac, used))
}

/// Same residuals in the unwrapped parametrization used by the solver:
/// the line with label `j` lies at floor distance `m j - q`. For
/// `q = ((o + s_p) mod m) - s_p` this equals [`residuals_and_jacobian`], but it
/// is smooth in `q` across cell boundaries.
pub fn residuals_unwrapped(
    lines: &[LabeledLine],
    q: f64,
    h: f64,
    m: f64,
    f: f64,
    eps_c: f64,
    r: &mut Vec<f64>,
    jac: &mut Vec<[f64; 2]>,
) -> usize {
    r.clear();
    jac.clear();
    let mut used = 0;
    for l in lines {
        let s = m * l.label as f64 - q;
        match project_with_derivatives(s, h, f, eps_c) {
            Some((rho, d_ds, d_dh)) => {
                r.push(l.offset - rho);
                jac.push([d_ds, -d_dh]);
                used += 1;
            }
            None => {
                r.push(0.0);
                jac.push([0.0, 0.0]);
            }
        }
    }
    used
}

/// Unwrapped offset `q` for a sub-cell offset `o`.
pub fn unwrap_offset(o: f64, h: f64, m: f64, eps_c: f64) -> f64 {
    let s_p = h * eps_c.tan();
    (o + s_p).rem_euclid(m) - s_p
}

/// Sub-cell offset in `[0, m)` for an unwrapped offset `q`.
pub fn wrap_offset(q: f64, m: f64) -> f64 {
    let o = q.rem_euclid(m);
    if o >= m {
        0.0
    } else {
        o
    }
}
