//! Gaussian kernel density clustering on rho, merging repeated detections of
//! one physical line into a single mean line.

use crate::error::{Error, Result};
use crate::types::DetectedLine;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterMean {
    pub rho: f64,
    pub theta: f64,
    pub members: usize,
}

/// Cluster means sorted strictly descending by `rho`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusteredSet {
    pub lines: Vec<ClusterMean>,
}

impl ClusteredSet {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn as_detected(&self) -> Vec<DetectedLine> {
        self.lines
            .iter()
            .map(|c| DetectedLine::new(c.rho, c.theta))
            .collect()
    }
}

#[inline]
fn kernel(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// `1 / (n b) * sum K((query - rho_i) / b)` with `K` the standard normal density.
pub fn kde_density(samples: &[f64], b: f64, query: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("kde samples"));
    }
    if !(b > 0.0) {
        return Err(Error::InvalidInput("kde bandwidth must be > 0".into()));
    }
    Ok(density_unchecked(samples, b, query))
}

fn density_unchecked(samples: &[f64], b: f64, query: f64) -> f64 {
    let s: f64 = samples.iter().map(|&r| kernel((query - r) / b)).sum();
    s / (samples.len() as f64 * b)
}

/// Density on the regular query grid `[min - 3b, max + 3b]` used for cutting.
pub fn density_profile(samples: &[f64], b: f64, step: f64) -> (f64, Vec<f64>) {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * b;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * b;
    let n = ((hi - lo) / step).ceil() as usize + 1;
    let dens = (0..n)
        .map(|k| density_unchecked(samples, b, lo + k as f64 * step))
        .collect();
    (lo, dens)
}

/// Clusters lines by rho. The density is cut at grid points that are local
/// minima (not above either neighbor) and below `fraction * max density`;
/// runs of adjacent cut points count as one boundary.
pub fn cluster_rho(lines: &[DetectedLine], b: f64, fraction: f64, step: f64) -> Result<ClusteredSet> {
    if lines.is_empty() {
        return Err(Error::Empty("lines to cluster"));
    }
    if !(b > 0.0 && step > 0.0) {
        return Err(Error::InvalidInput("bandwidth and grid step must be > 0".into()));
    }
    let samples: Vec<f64> = lines.iter().map(|l| l.rho).collect();
    let (lo, dens) = density_profile(&samples, b, step);
    let max = dens.iter().copied().fold(0.0, f64::max);
    let eps_c = fraction * max;

    let mut boundaries = Vec::new();
    let mut prev_cut = false;
    for k in 1..dens.len().saturating_sub(1) {
        let cut = dens[k] <= dens[k - 1] && dens[k] <= dens[k + 1] && dens[k] < eps_c;
        if cut && !prev_cut {
            boundaries.push(lo + k as f64 * step);
        }
        prev_cut = cut;
    }

    let mut acc = vec![(0.0, 0.0, 0usize); boundaries.len() + 1];
    for l in lines {
        let bin = boundaries.partition_point(|&q| q <= l.rho);
        let a = &mut acc[bin];
        a.0 += l.rho;
        a.1 += l.theta;
        a.2 += 1;
    }
    let mut out: Vec<ClusterMean> = acc
        .into_iter()
        .filter(|a| a.2 > 0)
        .map(|(r, t, n)| ClusterMean {
            rho: r / n as f64,
            theta: t / n as f64,
            members: n,
        })
        .collect();
    out.reverse();
    Ok(ClusteredSet { lines: out })
}
