//! Error statistics of an estimated trajectory against ground truth: mean,
//! RMSE and sample SD per state, and the Pearson correlation of the errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Report order of the states.
pub const STATE_NAMES: [&str; 5] = ["X", "Y", "Z", "Pitch", "Roll"];

/// One pose in report units: meters and degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateSample {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl StateSample {
    pub fn as_array(&self) -> [f64; 5] {
        [self.x, self.y, self.z, self.pitch_deg, self.roll_deg]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStats {
    pub state: String,
    pub mean: f64,
    pub rmse: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub n_frames: usize,
    pub states: Vec<StateStats>,
    /// Pearson correlation of the error series, rows and columns in
    /// [`STATE_NAMES`] order.
    pub correlation: [[f64; 5]; 5],
    /// States whose error series has zero variance; their off-diagonal
    /// correlations are reported as 0.
    pub zero_variance: [bool; 5],
}

/// Running mean and co-moments (Welford).
#[derive(Debug, Clone, Default)]
struct Moments {
    n: f64,
    mean: [f64; 5],
    sum_sq: [f64; 5],
    co: [[f64; 5]; 5],
}

impl Moments {
    fn push(&mut self, e: &[f64; 5]) {
        self.n += 1.0;
        let mut delta = [0.0; 5];
        for i in 0..5 {
            delta[i] = e[i] - self.mean[i];
            self.mean[i] += delta[i] / self.n;
            self.sum_sq[i] += e[i] * e[i];
        }
        for i in 0..5 {
            for j in 0..5 {
                self.co[i][j] += delta[i] * (e[j] - self.mean[j]);
            }
        }
    }
}

/// Errors are `estimate - truth`; the series are aligned by position.
pub fn compute_report(estimates: &[StateSample], truth: &[StateSample]) -> Result<ErrorReport> {
    if estimates.len() != truth.len() {
        return Err(Error::Misaligned {
            trajectory: estimates.len(),
            truth: truth.len(),
        });
    }
    if estimates.len() < 2 {
        return Err(Error::InvalidInput("need at least two frames".into()));
    }
    let mut m = Moments::default();
    for (e, t) in estimates.iter().zip(truth) {
        let (a, b) = (e.as_array(), t.as_array());
        let err: [f64; 5] = std::array::from_fn(|i| a[i] - b[i]);
        if err.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite pose value".into()));
        }
        m.push(&err);
    }
    let n = m.n;
    let zero_variance: [bool; 5] = std::array::from_fn(|i| m.co[i][i] <= 0.0);
    let mut correlation = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            correlation[i][j] = if i == j {
                1.0
            } else if zero_variance[i] || zero_variance[j] {
                0.0
            } else {
                (m.co[i][j] / (m.co[i][i] * m.co[j][j]).sqrt()).clamp(-1.0, 1.0)
            };
        }
    }
    // Average the two halves so the matrix is exactly symmetric.
    for i in 0..5 {
        for j in i + 1..5 {
            let v = 0.5 * (correlation[i][j] + correlation[j][i]);
            correlation[i][j] = v;
            correlation[j][i] = v;
        }
    }
    let states = (0..5)
        .map(|i| StateStats {
            state: STATE_NAMES[i].to_string(),
            mean: m.mean[i],
            rmse: (m.sum_sq[i] / n).sqrt(),
            sd: (m.co[i][i].max(0.0) / (n - 1.0)).sqrt(),
        })
        .collect();
    Ok(ErrorReport {
        n_frames: estimates.len(),
        states,
        correlation,
        zero_variance,
    })
}
