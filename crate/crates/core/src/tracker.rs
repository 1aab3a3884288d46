//! Winner-take-all integration of sub-cell offsets into a grid position.

use serde::{Deserialize, Serialize};

/// Position candidate closest to `p_prev` among the three cell hypotheses
/// `p_base - m`, `p_base`, `p_base + m` with `p_base = p_prev + o_new - o_prev`.
/// Exact ties go to `p_base`.
pub fn integrate_axis(p_prev: f64, o_prev: f64, o_new: f64, m: f64) -> f64 {
    let base = p_prev + o_new - o_prev;
    let mut best = base;
    let mut best_d = (p_prev - base).powi(2);
    for cand in [base - m, base + m] {
        let d = (p_prev - cand).powi(2);
        if d < best_d {
            best = cand;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisTrack {
    pub p: f64,
    pub o: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackerState {
    /// `None` until the first accepted offset on that axis.
    pub x: Option<AxisTrack>,
    pub y: Option<AxisTrack>,
    pub frame_index: u64,
}

impl TrackerState {
    pub fn p_x(&self) -> f64 {
        self.x.map_or(0.0, |a| a.p)
    }

    pub fn p_y(&self) -> f64 {
        self.y.map_or(0.0, |a| a.p)
    }

    /// Current cell index `floor(p / m)` of an axis.
    pub fn cell(p: f64, m: f64) -> i64 {
        (p / m).floor() as i64
    }
}

fn step(track: Option<AxisTrack>, o_new: Option<f64>, m: f64) -> Option<AxisTrack> {
    match (track, o_new) {
        (_, None) => track,
        (None, Some(o)) => Some(AxisTrack { p: o, o }),
        (Some(t), Some(o)) => Some(AxisTrack {
            p: integrate_axis(t.p, t.o, o, m),
            o,
        }),
    }
}

/// Applies one frame's accepted offsets (`None` for a rejected axis).
pub fn update(state: &TrackerState, o_x: Option<f64>, o_y: Option<f64>, m_x: f64, m_y: f64) -> TrackerState {
    TrackerState {
        x: step(state.x, o_x, m_x),
        y: step(state.y, o_y, m_y),
        frame_index: state.frame_index + 1,
    }
}
