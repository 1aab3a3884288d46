//! Bounded Levenberg-Marquardt for two-parameter least-squares problems.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Residuals and Jacobian rows at a parameter vector.
pub trait Residuals {
    fn eval(&mut self, p: &[f64; 2], r: &mut Vec<f64>, jac: &mut Vec<[f64; 2]>) -> Result<()>;
}

impl<F> Residuals for F
where
    F: FnMut(&[f64; 2], &mut Vec<f64>, &mut Vec<[f64; 2]>) -> Result<()>,
{
    fn eval(&mut self, p: &[f64; 2], r: &mut Vec<f64>, jac: &mut Vec<[f64; 2]>) -> Result<()> {
        self(p, r, jac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Bounds {
    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.lower[0], self.upper[0]),
            p[1].clamp(self.lower[1], self.upper[1]),
        ]
    }

    pub fn contains(&self, p: &[f64; 2]) -> bool {
        (0..2).all(|i| p[i] >= self.lower[i] && p[i] <= self.upper[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlsSolution {
    pub params: [f64; 2],
    /// `0.5 * sum r^2`.
    pub final_cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub evaluations: usize,
    /// Cost at the start and after every accepted step.
    pub cost_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub lambda0: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-10,
            lambda0: 1e-3,
        }
    }
}

const LAMBDA_MAX: f64 = 1e10;

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn normal_equations(r: &[f64], jac: &[[f64; 2]]) -> (Matrix2<f64>, Vector2<f64>) {
    let mut a = Matrix2::zeros();
    let mut g = Vector2::zeros();
    for (ri, ji) in r.iter().zip(jac) {
        let j = Vector2::new(ji[0], ji[1]);
        a += j * j.transpose();
        g += j * *ri;
    }
    (a, g)
}

/// Largest gradient component that is free to move inside the box.
fn projected_gradient_norm(p: &[f64; 2], g: &Vector2<f64>, b: &Bounds) -> f64 {
    (0..2)
        .map(|i| {
            let blocked = (p[i] <= b.lower[i] && g[i] > 0.0) || (p[i] >= b.upper[i] && g[i] < 0.0);
            if blocked || b.lower[i] == b.upper[i] {
                0.0
            } else {
                g[i].abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Levenberg-Marquardt with Marquardt diagonal scaling; every trial point is
/// projected onto the box. Parameters with equal bounds stay fixed.
///
/// Converges when the relative cost decrease of an accepted step is below
/// `tol`, the projected gradient max-norm is below `tol`, the projected step
/// vanishes, or the damping exceeds its ceiling without finding a decrease
/// (a stationary point at working precision). The best parameters seen are
/// always returned.
pub fn solve<R: Residuals>(
    problem: &mut R,
    initial: [f64; 2],
    bounds: &Bounds,
    opts: &SolverOptions,
) -> Result<NlsSolution> {
    for i in 0..2 {
        if !(bounds.lower[i] <= bounds.upper[i]) {
            return Err(Error::InvalidInput("solver bounds are inverted".into()));
        }
    }
    let fixed = [bounds.lower[0] == bounds.upper[0], bounds.lower[1] == bounds.upper[1]];
    let mut p = bounds.clamp(initial);
    let (mut r, mut jac) = (Vec::new(), Vec::new());
    problem.eval(&p, &mut r, &mut jac)?;
    if r.iter().any(|v| !v.is_finite()) || jac.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut cost = cost_of(&r);
    let initial_cost = cost;
    let mut lambda = opts.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    let mut evaluations = 1;
    let mut cost_history = vec![cost];
    let (mut r_try, mut j_try) = (Vec::new(), Vec::new());

    while iterations < opts.max_iter {
        if cost == 0.0 {
            converged = true;
            break;
        }
        let (mut a, mut g) = normal_equations(&r, &jac);
        for i in 0..2 {
            if fixed[i] {
                g[i] = 0.0;
                for k in 0..2 {
                    a[(i, k)] = 0.0;
                    a[(k, i)] = 0.0;
                }
                a[(i, i)] = 1.0;
            }
        }
        if projected_gradient_norm(&p, &g, bounds) < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let diag_floor = 1e-12 * a[(0, 0)].max(a[(1, 1)]).max(1e-300);
        let mut accepted = false;
        loop {
            let mut damped = a;
            for i in 0..2 {
                damped[(i, i)] += lambda * a[(i, i)].max(diag_floor);
            }
            let step = damped.lu().solve(&(-g));
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                lambda *= 10.0;
                if lambda > LAMBDA_MAX {
                    break;
                }
                continue;
            };
            let mut trial = [p[0] + step[0], p[1] + step[1]];
            for i in 0..2 {
                if fixed[i] {
                    trial[i] = p[i];
                }
            }
            let trial = bounds.clamp(trial);
            let moved = (0..2).any(|i| (trial[i] - p[i]).abs() > 1e-15 * (1.0 + p[i].abs()));
            if !moved {
                converged = true;
                break;
            }
            evaluations += 1;
            let ok = problem.eval(&trial, &mut r_try, &mut j_try).is_ok()
                && r_try.iter().all(|v| v.is_finite());
            let trial_cost = if ok { cost_of(&r_try) } else { f64::INFINITY };
            if trial_cost < cost {
                let rel = (cost - trial_cost) / cost;
                p = trial;
                cost = trial_cost;
                cost_history.push(cost);
                std::mem::swap(&mut r, &mut r_try);
                std::mem::swap(&mut jac, &mut j_try);
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if rel < opts.tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                converged = true;
                break;
            }
        }
        if converged || !accepted {
            break;
        }
    }
    Ok(NlsSolution {
        params: p,
        final_cost: cost,
        initial_cost,
        iterations,
        converged,
        evaluations,
        cost_history,
    })
}
