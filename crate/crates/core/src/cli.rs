//! Command implementations behind the `mlog` binary: configuration, presets
//! and the simulate, detect, localize and eval commands.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::detect::{detect_lines, DetectConfig, GrayImage};
use crate::error::{Error, Result};
use crate::io::{read_line_stream, read_trajectory, write_line_stream, write_trajectory, TrajectoryRecord};
use crate::metrics::{compute_report, ErrorReport};
use crate::pipeline::{frame_seed, FrameInput, FrameOutput, FrameStatus, Pipeline, StageTimings};
use crate::simulator::{
    calibrate_constants, default_sweep, gen_trajectory, random_waypoints, render_frame,
    Calibration, NoiseSpec, SimCamera, TrajectorySpec, TruePose,
};
use crate::types::{CameraModel, GridSpec, PipelineConfig};

/// Generator streams derived from the top-level seed.
const STREAM_WAYPOINTS: u64 = 1;
const STREAM_TRAJECTORY: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_PIPELINE: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub fps: f64,
    /// Total length of the random waypoint path, ignored when `waypoints` is set.
    pub path_length: f64,
    pub arena: f64,
    pub margin: f64,
    pub waypoints: Option<Vec<[f64; 2]>>,
    /// Flight speed in m/s. When absent the speed is `min(m_x, m_y) * fps / speed_factor`.
    pub speed: Option<f64>,
    pub speed_factor: u32,
    pub trajectory: TrajectorySpec,
    pub noise: NoiseSpec,
    pub mount_roll_deg: f64,
    pub mount_pitch_deg: f64,
    /// Fit the slope-to-angle constants and write them into the resolved config.
    pub calibrate: bool,
    pub calibration_max_deg: f64,
    pub calibration_steps: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            fps: 30.0,
            path_length: 60.0,
            arena: 10.0,
            margin: 0.5,
            waypoints: None,
            speed: None,
            speed_factor: 3,
            trajectory: TrajectorySpec::default(),
            noise: NoiseSpec::default(),
            mount_roll_deg: 0.0,
            mount_pitch_deg: 0.0,
            calibrate: true,
            calibration_max_deg: 10.0,
            calibration_steps: 5,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("simulation.fps", self.fps),
            ("simulation.path_length", self.path_length),
            ("simulation.arena", self.arena),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        if !(self.margin >= 0.0 && self.arena > 2.0 * self.margin) {
            return Err(Error::config("simulation.margin", "must be >= 0 and below arena / 2"));
        }
        if let Some(v) = self.speed {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config("simulation.speed", "must be > 0"));
            }
        }
        if self.speed_factor == 0 {
            return Err(Error::config("simulation.speed_factor", "must be >= 1"));
        }
        if let Some(w) = &self.waypoints {
            if w.len() < 2 || w.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::config("simulation.waypoints", "need at least two finite points"));
            }
        }
        if self.calibrate && self.calibration_steps < 2 {
            return Err(Error::config("simulation.calibration_steps", "must be >= 2"));
        }
        self.noise.validate()
    }

    pub fn speed_for(&self, grid: &GridSpec) -> f64 {
        self.speed
            .unwrap_or(grid.m_x.min(grid.m_y) * self.fps / self.speed_factor as f64)
    }
}

/// Top-level JSON configuration. Every section is optional.
///
/// `seed` drives every generator; the nested `noise.seed` and
/// `pipeline.seed` are derived from it and overwritten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub camera: CameraModel,
    pub grid: GridSpec,
    pub pipeline: PipelineConfig,
    pub simulation: SimulationConfig,
    pub detect: DetectConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            camera: CameraModel::default(),
            grid: GridSpec::default(),
            pipeline: PipelineConfig::default(),
            simulation: SimulationConfig::default(),
            detect: DetectConfig::default(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.grid.validate()?;
        self.pipeline.validate()?;
        self.simulation.validate()
    }

    /// Parses JSON; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Applies the seed override and derives the nested seeds.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.simulation.noise.seed = frame_seed(self.seed, STREAM_NOISE);
        self.pipeline.seed = frame_seed(self.seed, STREAM_PIPELINE);
        self
    }
}

pub const PRESET_NAMES: [&str; 5] = ["default", "paper-trial-1", "paper-trial-2", "paper-trial-3", "overspeed"];

/// Moderate detector noise used by the trial presets.
pub fn moderate_noise() -> NoiseSpec {
    NoiseSpec {
        sigma_rho: 1.0,
        sigma_theta: 0.005,
        outlier_fraction: 0.1,
        ..Default::default()
    }
}

pub fn preset(name: &str) -> Result<Config> {
    let mut cfg = Config::default();
    let trial = |cfg: &mut Config, length: f64| {
        cfg.simulation.path_length = length;
        cfg.simulation.noise = moderate_noise();
        cfg.simulation.trajectory.spike_rate = 0.02;
    };
    match name {
        "default" => {}
        "paper-trial-1" => trial(&mut cfg, 264.60),
        "paper-trial-2" => trial(&mut cfg, 639.34),
        "paper-trial-3" => trial(&mut cfg, 1020.73),
        "overspeed" => cfg.simulation.speed_factor = 2,
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset {other:?}; known: {}", PRESET_NAMES.join(", ")),
            ))
        }
    }
    Ok(cfg)
}

/// Creates `dir` and refuses to overwrite any of `files` unless `force`.
pub fn prepare_output(dir: &Path, files: &[&str], force: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let paths: Vec<PathBuf> = files.iter().map(|f| dir.join(f)).collect();
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(Error::InvalidInput(format!(
                "{} already exists (use --force to overwrite)",
                p.display()
            )));
        }
    }
    Ok(paths)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub struct Simulation {
    pub frames: Vec<FrameInput>,
    pub truth: Vec<TruePose>,
    pub calibration: Option<Calibration>,
    /// Config to feed to `localize`: calibrated camera constants filled in.
    pub resolved: Config,
}

/// Generates the trajectory, renders every frame and calibrates the camera.
pub fn simulate(cfg: &Config, force: bool) -> Result<Simulation> {
    cfg.validate()?;
    let sim = &cfg.simulation;
    let waypoints = match &sim.waypoints {
        Some(w) => w.clone(),
        None => random_waypoints(sim.path_length, sim.arena, sim.margin, frame_seed(cfg.seed, STREAM_WAYPOINTS))?,
    };
    let truth = gen_trajectory(
        &waypoints,
        sim.speed_for(&cfg.grid),
        sim.fps,
        &cfg.grid,
        cfg.pipeline.speed_factor_eps_s,
        force,
        &sim.trajectory,
        frame_seed(cfg.seed, STREAM_TRAJECTORY),
    )?;
    let sim_cam = SimCamera {
        intrinsics: cfg.camera,
        mount_roll: sim.mount_roll_deg.to_radians(),
        mount_pitch: sim.mount_pitch_deg.to_radians(),
    };
    let mut frames = Vec::with_capacity(truth.len());
    for (k, pose) in truth.iter().enumerate() {
        let (mut frame, _) = render_frame(k as u64, pose, &sim_cam, &cfg.grid, &sim.noise)?;
        frame.timestamp = Some(k as f64 / sim.fps);
        frames.push(frame);
    }
    let mut resolved = cfg.clone();
    let calibration = if sim.calibrate {
        let sweep = default_sweep(sim.calibration_max_deg, sim.calibration_steps);
        let c = calibrate_constants(&sim_cam, &cfg.grid, &sweep, sim.trajectory.nominal_height)?;
        resolved.camera = c.apply(&sim_cam.uncalibrated());
        Some(c)
    } else {
        None
    };
    Ok(Simulation {
        frames,
        truth,
        calibration,
        resolved,
    })
}

pub const SIMULATE_FILES: [&str; 4] = ["lines.jsonl", "truth.csv", "config.json", "calibration.json"];

pub fn cmd_simulate(cfg: &Config, out: &Path, force: bool) -> Result<Simulation> {
    let paths = prepare_output(out, &SIMULATE_FILES, force)?;
    let s = simulate(cfg, force)?;
    let mut w = BufWriter::new(File::create(&paths[0])?);
    write_line_stream(&mut w, &s.frames)?;
    w.flush()?;
    let rows: Vec<TrajectoryRecord> = s
        .truth
        .iter()
        .enumerate()
        .map(|(k, p)| TrajectoryRecord::from_truth(k as u64, p))
        .collect();
    write_trajectory(BufWriter::new(File::create(&paths[1])?), &rows)?;
    write_json(&paths[2], &s.resolved)?;
    write_json(&paths[3], &s.calibration)?;
    Ok(s)
}

pub const DETECT_FILES: [&str; 1] = ["lines.jsonl"];

/// Runs line detection on each PGM image; frame `k` is the `k`-th image.
pub fn cmd_detect(cfg: &Config, images: &[PathBuf], out: &Path, force: bool) -> Result<Vec<FrameInput>> {
    let paths = prepare_output(out, &DETECT_FILES, force)?;
    let mut frames = Vec::with_capacity(images.len());
    for (k, path) in images.iter().enumerate() {
        let img = GrayImage::from_pgm(&std::fs::read(path)?)?;
        frames.push(FrameInput {
            frame_index: k as u64,
            lines: detect_lines(&img, &cfg.detect)?,
            timestamp: None,
        });
    }
    let mut w = BufWriter::new(File::create(&paths[0])?);
    write_line_stream(&mut w, &frames)?;
    w.flush()?;
    Ok(frames)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p99: f64,
    pub max: f64,
}

/// Nearest-rank percentiles; zeros for an empty series.
pub fn percentiles(values: &[f64]) -> Percentiles {
    if values.is_empty() {
        return Percentiles::default();
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
    Percentiles {
        p50: rank(0.5),
        p99: rank(0.99),
        max: v[v.len() - 1],
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingSummary {
    pub n_frames: usize,
    pub filter_us: Percentiles,
    pub cluster_us: Percentiles,
    pub orientation_us: Percentiles,
    pub solve_us: Percentiles,
    pub total_us: Percentiles,
    pub frames: Vec<StageTimings>,
}

impl TimingSummary {
    pub fn from_outputs(outputs: &[FrameOutput]) -> Self {
        let stage = |f: fn(&StageTimings) -> f64| percentiles(&outputs.iter().map(|o| f(&o.timings)).collect::<Vec<_>>());
        Self {
            n_frames: outputs.len(),
            filter_us: stage(|t| t.filter_us),
            cluster_us: stage(|t| t.cluster_us),
            orientation_us: stage(|t| t.orientation_us),
            solve_us: stage(|t| t.solve_us),
            total_us: stage(|t| t.total_us),
            frames: outputs.iter().map(|o| o.timings).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalizeSummary {
    pub n_frames: usize,
    pub accepted: usize,
    pub partial: usize,
    pub dropped: usize,
    pub lost_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub summary: LocalizeSummary,
    pub frames: Vec<FrameOutput>,
}

pub fn localize(cfg: &Config, frames: &[FrameInput]) -> Result<Vec<FrameOutput>> {
    let mut p = Pipeline::new(cfg.camera, cfg.grid, cfg.pipeline)?;
    Ok(p.run(frames))
}

pub fn summarize(outputs: &[FrameOutput]) -> LocalizeSummary {
    let count = |s: FrameStatus| outputs.iter().filter(|o| o.status == s).count();
    LocalizeSummary {
        n_frames: outputs.len(),
        accepted: count(FrameStatus::Accepted),
        partial: count(FrameStatus::Partial),
        dropped: count(FrameStatus::Dropped),
        lost_frames: outputs.iter().filter(|o| o.lost).count(),
    }
}

/// `diagnostics.json` is deterministic; wall-clock timings go to `timings.json`.
pub const LOCALIZE_FILES: [&str; 3] = ["trajectory.csv", "diagnostics.json", "timings.json"];

pub fn cmd_localize(cfg: &Config, lines: &Path, out: &Path, force: bool) -> Result<Vec<FrameOutput>> {
    let paths = prepare_output(out, &LOCALIZE_FILES, force)?;
    let frames = read_line_stream(BufReader::new(File::open(lines)?))?;
    let outputs = localize(cfg, &frames)?;
    let rows: Vec<TrajectoryRecord> = outputs.iter().map(TrajectoryRecord::from_output).collect();
    write_trajectory(BufWriter::new(File::create(&paths[0])?), &rows)?;
    write_json(
        &paths[1],
        &Diagnostics {
            summary: summarize(&outputs),
            frames: outputs.clone(),
        },
    )?;
    write_json(&paths[2], &TimingSummary::from_outputs(&outputs))?;
    Ok(outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// First frame with an estimate; earlier frames are excluded.
    pub anchor_frame: u64,
    /// Whole cells added to the estimate so that it starts in the true cell.
    pub cell_shift_x: i64,
    pub cell_shift_y: i64,
    pub skipped_frames: usize,
    pub dropped_frames: usize,
    pub report: ErrorReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedRow {
    pub frame: u64,
    pub truth_x: f64,
    pub truth_y: f64,
    pub truth_z: f64,
    pub truth_roll_deg: f64,
    pub truth_pitch_deg: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub est_z: f64,
    pub est_roll_deg: f64,
    pub est_pitch_deg: f64,
    pub status: String,
}

/// Aligns estimates with truth by frame index. The tracker reports position
/// relative to its first cell, so the estimate is shifted by the whole number
/// of cells that puts it nearest the truth at the first non-dropped frame.
pub fn evaluate(est: &[TrajectoryRecord], truth: &[TrajectoryRecord], grid: &GridSpec) -> Result<(EvalReport, Vec<AlignedRow>)> {
    if est.len() != truth.len() {
        return Err(Error::Misaligned {
            trajectory: est.len(),
            truth: truth.len(),
        });
    }
    if let Some((e, t)) = est.iter().zip(truth).find(|(e, t)| e.frame != t.frame) {
        return Err(Error::InvalidInput(format!(
            "frame index mismatch: trajectory frame {} against truth frame {}",
            e.frame, t.frame
        )));
    }
    let dropped = FrameStatus::Dropped.as_str();
    let start = est
        .iter()
        .position(|e| e.status != dropped)
        .ok_or(Error::Empty("non-dropped frames"))?;
    let cells = |d: f64, m: f64| (d / m).round() as i64;
    let sx = cells(truth[start].x - est[start].x, grid.m_x);
    let sy = cells(truth[start].y - est[start].y, grid.m_y);
    let rows: Vec<AlignedRow> = est[start..]
        .iter()
        .zip(&truth[start..])
        .map(|(e, t)| AlignedRow {
            frame: e.frame,
            truth_x: t.x,
            truth_y: t.y,
            truth_z: t.z,
            truth_roll_deg: t.roll_deg,
            truth_pitch_deg: t.pitch_deg,
            est_x: e.x + sx as f64 * grid.m_x,
            est_y: e.y + sy as f64 * grid.m_y,
            est_z: e.z,
            est_roll_deg: e.roll_deg,
            est_pitch_deg: e.pitch_deg,
            status: e.status.clone(),
        })
        .collect();
    let shifted: Vec<_> = rows
        .iter()
        .map(|r| crate::metrics::StateSample {
            x: r.est_x,
            y: r.est_y,
            z: r.est_z,
            pitch_deg: r.est_pitch_deg,
            roll_deg: r.est_roll_deg,
        })
        .collect();
    let truth_samples: Vec<_> = truth[start..].iter().map(TrajectoryRecord::sample).collect();
    let report = compute_report(&shifted, &truth_samples)?;
    Ok((
        EvalReport {
            anchor_frame: est[start].frame,
            cell_shift_x: sx,
            cell_shift_y: sy,
            skipped_frames: start,
            dropped_frames: est.iter().filter(|e| e.status == dropped).count(),
            report,
        },
        rows,
    ))
}

pub const EVAL_FILES: [&str; 2] = ["report.json", "aligned.csv"];

pub fn cmd_eval(cfg: &Config, trajectory: &Path, truth: &Path, out: &Path, force: bool) -> Result<EvalReport> {
    let est = read_trajectory(BufReader::new(File::open(trajectory)?))?;
    let tru = read_trajectory(BufReader::new(File::open(truth)?))?;
    let (report, rows) = evaluate(&est, &tru, &cfg.grid)?;
    let paths = prepare_output(out, &EVAL_FILES, force)?;
    write_json(&paths[0], &report)?;
    let mut csv = csv::Writer::from_writer(BufWriter::new(File::create(&paths[1])?));
    for r in &rows {
        csv.serialize(r).map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    csv.flush()?;
    Ok(report)
}
