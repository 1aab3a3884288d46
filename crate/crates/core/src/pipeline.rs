//! Per-frame orchestration: filter, cluster, orientation, rotation
//! compensation and labeling, per-axis solve, fusion and tracking.

use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::cluster::cluster_rho;
use crate::error::Result;
use crate::filter::filter_grid_lines;
use crate::orientation::{drift_correct, estimate_orientation, OrientationEstimate};
use crate::subcell::{fuse_axes, localize_axis, AxisResult};
use crate::tracker::{self, TrackerState};
use crate::types::{
    Axis, CameraModel, DetectedLine, GridSpec, OrientationSource, PipelineConfig, PoseEstimate,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInput {
    pub frame_index: u64,
    pub lines: Vec<DetectedLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameStatus {
    Accepted,
    Partial,
    Dropped,
}

impl FrameStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameStatus::Accepted => "accepted",
            FrameStatus::Partial => "partial",
            FrameStatus::Dropped => "dropped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub n_input: usize,
    pub n_gated_out: usize,
    pub n_long: usize,
    pub n_lat: usize,
    pub n_outliers: usize,
    pub n_clusters_long: usize,
    pub n_clusters_lat: usize,
    pub cost_x: Option<f64>,
    pub cost_y: Option<f64>,
    pub iterations_x: Option<usize>,
    pub iterations_y: Option<usize>,
    pub accepted_x: bool,
    pub accepted_y: bool,
    pub low_confidence_orientation: bool,
    pub drop_reason: Option<String>,
}

/// Wall-clock time per stage in microseconds. Kept apart from the
/// deterministic diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub filter_us: f64,
    pub cluster_us: f64,
    pub orientation_us: f64,
    pub solve_us: f64,
    pub total_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameOutput {
    pub frame_index: u64,
    pub pose: PoseEstimate,
    pub status: FrameStatus,
    /// Set once `max_consecutive_drops` frames in a row were dropped.
    pub lost: bool,
    pub diagnostics: StageDiagnostics,
    #[serde(skip)]
    pub timings: StageTimings,
}

/// Everything the pipeline carries from one frame to the next.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineState {
    pub tracker: TrackerState,
    pub last_pose: PoseEstimate,
    pub prev_cost_x: Option<f64>,
    pub prev_cost_y: Option<f64>,
    pub last_h: Option<f64>,
    pub consecutive_drops: usize,
}

/// Seed of the consensus sampling for one frame.
pub fn frame_seed(base: u64, frame_index: u64) -> u64 {
    let mut z = base ^ frame_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct Pipeline {
    pub cam: CameraModel,
    pub grid: GridSpec,
    pub cfg: PipelineConfig,
    pub state: PipelineState,
}

struct Solved {
    est: OrientationEstimate,
    x: Option<AxisResult>,
    y: Option<AxisResult>,
}

impl Pipeline {
    pub fn new(cam: CameraModel, grid: GridSpec, cfg: PipelineConfig) -> Result<Self> {
        cam.validate()?;
        grid.validate()?;
        cfg.validate()?;
        Ok(Self {
            cam,
            grid,
            cfg,
            state: PipelineState::default(),
        })
    }

    fn run_stages(&self, input: &FrameInput, diag: &mut StageDiagnostics, t: &mut StageTimings) -> std::result::Result<Solved, String> {
        let clock = Instant::now();
        let seed = frame_seed(self.cfg.seed, input.frame_index);
        let filtered = filter_grid_lines(&input.lines, &self.cfg, self.cam.diagonal(), seed)
            .map_err(|e| format!("filter: {e}"))?;
        diag.n_gated_out = filtered.gated_out.len();
        diag.n_long = filtered.long_lines.len();
        diag.n_lat = filtered.lat_lines.len();
        diag.n_outliers = filtered.outliers.len();
        t.filter_us = clock.elapsed().as_secs_f64() * 1e6;

        let clock = Instant::now();
        let b = self.cfg.bandwidth_for(&self.cam);
        let frac = self.cfg.cluster_threshold_fraction;
        let step = self.cfg.kde_grid_step;
        let long = cluster_rho(&filtered.long_lines, b, frac, step).map_err(|e| format!("cluster: {e}"))?;
        let lat = cluster_rho(&filtered.lat_lines, b, frac, step).map_err(|e| format!("cluster: {e}"))?;
        diag.n_clusters_long = long.len();
        diag.n_clusters_lat = lat.len();
        t.cluster_us = clock.elapsed().as_secs_f64() * 1e6;

        let clock = Instant::now();
        let est = match self.cfg.orientation_source {
            OrientationSource::Inliers => {
                estimate_orientation(&filtered.lat_lines, &filtered.long_lines, &self.cam)
            }
            OrientationSource::Clusters => {
                estimate_orientation(&lat.as_detected(), &long.as_detected(), &self.cam)
            }
        };
        diag.low_confidence_orientation = est.low_confidence_lat || est.low_confidence_long;
        let labeled = drift_correct(&lat, &long, &est, &self.cam);
        t.orientation_us = clock.elapsed().as_secs_f64() * 1e6;

        let clock = Instant::now();
        let h_guess = self.state.last_h.unwrap_or(self.cfg.nominal_height);
        let solve = |lines, axis, prev| {
            localize_axis(lines, axis, &self.cam, &self.grid, prev, h_guess, &self.cfg).ok()
        };
        let x = solve(&labeled.lat, Axis::X, self.state.prev_cost_x);
        let y = solve(&labeled.long, Axis::Y, self.state.prev_cost_y);
        t.solve_us = clock.elapsed().as_secs_f64() * 1e6;
        for (r, cost, it, acc) in [
            (&x, &mut diag.cost_x, &mut diag.iterations_x, &mut diag.accepted_x),
            (&y, &mut diag.cost_y, &mut diag.iterations_y, &mut diag.accepted_y),
        ] {
            if let Some(r) = r {
                *cost = Some(r.final_cost);
                *it = Some(r.iterations);
                *acc = r.accepted;
            }
        }
        Ok(Solved { est, x, y })
    }

    pub fn process_frame(&mut self, input: &FrameInput) -> FrameOutput {
        let start = Instant::now();
        let mut diag = StageDiagnostics {
            n_input: input.lines.len(),
            ..Default::default()
        };
        let mut timings = StageTimings::default();
        let outcome = self
            .run_stages(input, &mut diag, &mut timings)
            .and_then(|s| match fuse_axes(s.x.as_ref(), s.y.as_ref()) {
                Some(f) => Ok((s, f)),
                None => Err("both axes rejected".to_string()),
            });

        let status;
        match outcome {
            Err(reason) => {
                diag.drop_reason = Some(reason);
                self.state.consecutive_drops += 1;
                status = FrameStatus::Dropped;
            }
            Ok((s, fused)) => {
                let st = &mut self.state;
                st.tracker = tracker::update(&st.tracker, fused.o_x, fused.o_y, self.grid.m_x, self.grid.m_y);
                if let Some(x) = s.x.filter(|r| r.accepted) {
                    st.prev_cost_x = Some(x.final_cost);
                }
                if let Some(y) = s.y.filter(|r| r.accepted) {
                    st.prev_cost_y = Some(y.final_cost);
                }
                st.last_h = Some(fused.h);
                st.consecutive_drops = 0;
                let prev = st.last_pose;
                st.last_pose = PoseEstimate {
                    x: st.tracker.p_x(),
                    y: st.tracker.p_y(),
                    o_x: fused.o_x.unwrap_or(prev.o_x),
                    o_y: fused.o_y.unwrap_or(prev.o_y),
                    h: fused.h,
                    alpha: s.est.alpha,
                    beta: s.est.beta,
                    final_cost_x: s.x.map_or(f64::NAN, |r| r.final_cost),
                    final_cost_y: s.y.map_or(f64::NAN, |r| r.final_cost),
                    accepted: fused.accepted,
                };
                status = if fused.accepted {
                    FrameStatus::Accepted
                } else {
                    FrameStatus::Partial
                };
            }
        }
        let mut pose = self.state.last_pose;
        if status == FrameStatus::Dropped {
            pose.accepted = false;
        }
        timings.total_us = start.elapsed().as_secs_f64() * 1e6;
        FrameOutput {
            frame_index: input.frame_index,
            pose,
            status,
            lost: self.state.consecutive_drops >= self.cfg.max_consecutive_drops,
            diagnostics: diag,
            timings,
        }
    }

    pub fn run(&mut self, frames: &[FrameInput]) -> Vec<FrameOutput> {
        frames.iter().map(|f| self.process_frame(f)).collect()
    }
}
