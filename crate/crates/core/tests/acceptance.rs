//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the output.

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mlog::cli::{self, moderate_noise, Config};
use mlog::cluster::{cluster_rho, density_profile, kde_density};
use mlog::filter::{filter_grid_lines, in_theta_gate};
use mlog::grid_model::{model_rho, residuals_unwrapped, AxisModelParams};
use mlog::io::TrajectoryRecord;
use mlog::metrics::compute_report;
use mlog::pipeline::{FrameOutput, FrameStatus, Pipeline};
use mlog::simulator::{render_frame, visible_grid_lines, LineSource, NoiseSpec, SimCamera, TruePose};
use mlog::solver::{solve, Bounds, SolverOptions};
use mlog::subcell::localize_axis;
use mlog::{Axis, CameraModel, DetectedLine, GridSpec, LabeledLine, PipelineConfig};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Trial {
    outputs: Vec<FrameOutput>,
    truth: Vec<TrajectoryRecord>,
    estimates: Vec<TrajectoryRecord>,
    seconds: f64,
}

/// Simulates and localizes one configured flight.
fn run_trial(cfg: &Config, force: bool) -> Trial {
    let start = Instant::now();
    let sim = cli::simulate(cfg, force).expect("simulate");
    let outputs = cli::localize(&sim.resolved, &sim.frames).expect("localize");
    let truth = sim
        .truth
        .iter()
        .enumerate()
        .map(|(k, p)| TrajectoryRecord::from_truth(k as u64, p))
        .collect();
    let estimates = outputs.iter().map(TrajectoryRecord::from_output).collect();
    Trial {
        outputs,
        truth,
        estimates,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn trial_config(path_length: f64, speed_factor: u32, noise: NoiseSpec, seed: u64) -> Config {
    let mut cfg = Config::default();
    cfg.simulation.path_length = path_length;
    cfg.simulation.speed_factor = speed_factor;
    cfg.simulation.noise = noise;
    cfg.with_seed(Some(seed))
}

fn count(outputs: &[FrameOutput], s: FrameStatus) -> usize {
    outputs.iter().filter(|o| o.status == s).count()
}

/// Frames whose aligned estimate sits in a different cell than the truth.
fn cell_errors(rows: &[cli::AlignedRow], grid: &GridSpec) -> usize {
    let cell = |v: f64, m: f64| (v / m).floor() as i64;
    rows.iter()
        .filter(|r| cell(r.est_x, grid.m_x) != cell(r.truth_x, grid.m_x) && (r.est_x - r.truth_x).abs() > 0.5 * grid.m_x
            || cell(r.est_y, grid.m_y) != cell(r.truth_y, grid.m_y) && (r.est_y - r.truth_y).abs() > 0.5 * grid.m_y)
        .count()
}

fn random_pose(rng: &mut ChaCha8Rng, max_tilt_deg: f64) -> TruePose {
    let r = max_tilt_deg.to_radians() * rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    TruePose {
        x: rng.gen_range(0.0..10.0),
        y: rng.gen_range(0.0..10.0),
        h: rng.gen_range(1.5..2.5),
        alpha: r * phi.cos(),
        beta: r * phi.sin(),
        gamma: rng.gen_range(-2.0f64..2.0).to_radians(),
    }
}

fn c1_model_oracle() -> Outcome {
    let start = Instant::now();
    let cam = CameraModel::default();
    let grid = GridSpec::default();
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for k in 0..10 {
        let o = 0.1 * k as f64;
        for h in [0.5, 1.0, 2.0, 5.0] {
            for eps_c in [0.0, 0.1, 0.3] {
                for axis in [Axis::X, Axis::Y] {
                    let (mount_roll, mount_pitch, pose) = match axis {
                        Axis::Y => (eps_c, 0.0, TruePose { x: 3.37, y: 4.0 + o, h, ..Default::default() }),
                        Axis::X => (0.0, eps_c, TruePose { x: 4.0 + o, y: 3.37, h, ..Default::default() }),
                    };
                    let sc = SimCamera { intrinsics: cam, mount_roll, mount_pitch };
                    let params = AxisModelParams { o, h, m: grid.cell(axis), f: cam.f, eps_c };
                    let shift = ((h * eps_c.tan() + o) / params.m).floor() as i64 - 1;
                    for v in visible_grid_lines(&pose, &sc, &grid, 1.0).iter().filter(|v| v.axis == axis) {
                        let j = (v.index - 5 - shift) as i32;
                        let rendered = mlog::orientation::signed_offset(&v.line, axis, &cam);
                        let model = model_rho(j, &params).map_err(|e| e.to_string())?;
                        worst = worst.max((rendered - model).abs());
                        compared += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-6 && secs < 1.0 && compared > 240,
        format!("max |model - raycast| = {worst:.2e} px over {compared} lines in {secs:.3} s (need < 1e-6 px, < 1 s)"),
    )
}

fn c2_noiseless_closed_loop() -> Outcome {
    let mut cfg = trial_config(499.0 / 3.0, 3, NoiseSpec::default(), 11);
    cfg.simulation.mount_roll_deg = 1.0;
    cfg.simulation.mount_pitch_deg = -0.5;
    let t = run_trial(&cfg, false);
    let (_, rows) = cli::evaluate(&t.estimates, &t.truth, &cfg.grid).map_err(|e| e.to_string())?;
    let mut worst = [0.0f64; 5];
    for r in &rows {
        let d = [
            (r.est_x - r.truth_x).abs(),
            (r.est_y - r.truth_y).abs(),
            (r.est_z - r.truth_z).abs(),
            (r.est_roll_deg - r.truth_roll_deg).abs(),
            (r.est_pitch_deg - r.truth_pitch_deg).abs(),
        ];
        for i in 0..5 {
            worst[i] = worst[i].max(d[i]);
        }
    }
    let dropped = count(&t.outputs, FrameStatus::Dropped);
    let ok = t.outputs.len() == 500
        && rows.len() == 500
        && worst[..3].iter().all(|v| *v < 1e-3)
        && worst[3..].iter().all(|v| *v < 0.1)
        && dropped == 0
        && t.seconds < 10.0;
    check(
        ok,
        format!(
            "{} frames, max |dx| {:.1e} |dy| {:.1e} |dh| {:.1e} m, |droll| {:.3} |dpitch| {:.3} deg, {dropped} dropped, {:.2} s",
            t.outputs.len(),
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            worst[4],
            t.seconds
        ),
    )
}

fn noisy_spec() -> NoiseSpec {
    NoiseSpec {
        sigma_rho: 2.0,
        sigma_theta: 0.01,
        duplicates_min: 2,
        duplicates_max: 4,
        outlier_fraction: 0.2,
        ..Default::default()
    }
}

/// Flight speed of the noisy loop. The criterion leaves speed open; at
/// eps_s = 5 a single dropped frame still keeps the gap between accepted
/// frames (0.4 m) under half a cell, which the tracker needs without a
/// velocity estimate.
const NOISY_SPEED_FACTOR: u32 = 5;

fn sd_line(t: &Trial, grid: &GridSpec) -> Result<(Vec<f64>, String), String> {
    let (r, rows) = cli::evaluate(&t.estimates, &t.truth, grid).map_err(|e| e.to_string())?;
    let sd: Vec<f64> = r.report.states.iter().map(|s| s.sd).collect();
    let text = format!(
        "SD X {:.3} Y {:.3} Z {:.3} m, pitch {:.3} roll {:.3} deg over {} frames ({} dropped, {} off-cell)",
        sd[0],
        sd[1],
        sd[2],
        sd[3],
        sd[4],
        r.report.n_frames,
        r.dropped_frames,
        cell_errors(&rows, grid)
    );
    Ok((sd, text))
}

fn c3_noisy_closed_loop(t: &Trial, grid: &GridSpec) -> Outcome {
    let (sd, text) = sd_line(t, grid)?;
    let limits = [0.30, 0.30, 0.35, 2.5, 2.5];
    let ok = sd.iter().zip(limits).all(|(s, l)| *s <= l);
    let reference = run_trial(&trial_config(264.60, 3, noisy_spec(), 5), false);
    let (_, ref_text) = sd_line(&reference, grid)?;
    check(
        ok,
        format!(
            "eps_s = {NOISY_SPEED_FACTOR}: {text}; limits 0.30/0.30/0.35 m, 2.5 deg. Reference at v_max (eps_s = 3, not judged): {ref_text}"
        ),
    )
}

const LONG_PATH: f64 = 1020.73;

fn c4_long_run() -> Outcome {
    let noisy_cfg = trial_config(LONG_PATH, 3, moderate_noise(), 21);
    let noisy = run_trial(&noisy_cfg, false);
    let (_, rows) = cli::evaluate(&noisy.estimates, &noisy.truth, &noisy_cfg.grid).map_err(|e| e.to_string())?;
    let last = rows.last().ok_or("no rows")?;
    let final_err = (last.est_x - last.truth_x).hypot(last.est_y - last.truth_y);

    let clean_cfg = trial_config(LONG_PATH, 3, NoiseSpec::default(), 21);
    let clean = run_trial(&clean_cfg, false);
    let (_, clean_rows) = cli::evaluate(&clean.estimates, &clean.truth, &clean_cfg.grid).map_err(|e| e.to_string())?;
    let cl = clean_rows.last().ok_or("no rows")?;
    let cells = |v: f64, m: f64| (v / m).floor() as i64;
    let net_x = cells(cl.est_x, clean_cfg.grid.m_x) - cells(cl.truth_x, clean_cfg.grid.m_x);
    let net_y = cells(cl.est_y, clean_cfg.grid.m_y) - cells(cl.truth_y, clean_cfg.grid.m_y);
    let secs = noisy.seconds + clean.seconds;
    check(
        final_err < 1.0 && net_x == 0 && net_y == 0 && secs < 180.0,
        format!(
            "{} frames; moderate noise final error {final_err:.3} m ({} dropped); noiseless net cell error ({net_x}, {net_y}); {secs:.1} s",
            noisy.outputs.len(),
            count(&noisy.outputs, FrameStatus::Dropped)
        ),
    )
}

fn c5_overspeed() -> Outcome {
    let cfg = trial_config(LONG_PATH, 2, moderate_noise(), 21);
    if cli::simulate(&cfg, false).is_ok() {
        return Err("overspeed trajectory generated without force".into());
    }
    let t = run_trial(&cfg, true);
    let (_, rows) = cli::evaluate(&t.estimates, &t.truth, &cfg.grid).map_err(|e| e.to_string())?;
    let bad = cell_errors(&rows, &cfg.grid);
    check(
        bad > 0,
        format!("eps_s = 2: {bad} of {} frames in the wrong cell (expected > 0); guard refuses without force", rows.len()),
    )
}

/// Recall and precision of the two-set partition on rendered frames, plus
/// the number of frames skipped because a family has fewer than `t`
/// detections, where consensus is impossible by construction.
fn ransac_scores(noise: &NoiseSpec, frames: u64, seed: u64) -> (f64, f64, usize) {
    let cfg = PipelineConfig::default();
    let sc = SimCamera::default();
    let grid = GridSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tp, mut fn_, mut fp, mut skipped) = (0usize, 0usize, 0usize, 0usize);
    for k in 0..frames {
        let pose = random_pose(&mut rng, 10.0);
        let noise = NoiseSpec { seed: seed ^ k, ..*noise };
        let (frame, truth) = render_frame(k, &pose, &sc, &grid, &noise).expect("render");
        let family = |axis: Axis| {
            frame
                .lines
                .iter()
                .zip(&truth.sources)
                .filter(|(l, s)| in_theta_gate(l.theta) && matches!(s, LineSource::Grid { axis: a, .. } if *a == axis))
                .count()
        };
        let (n_lat, n_long) = (family(Axis::X), family(Axis::Y));
        if n_lat.min(n_long) < cfg.ransac_min_inliers_t {
            skipped += 1;
            continue;
        }
        let key = |l: &DetectedLine| (l.rho.to_bits(), l.theta.to_bits());
        let source: HashMap<_, _> = frame.lines.iter().zip(&truth.sources).map(|(l, s)| (key(l), *s)).collect();
        let Ok(res) = filter_grid_lines(&frame.lines, &cfg, sc.intrinsics.diagonal(), k) else {
            fn_ += n_lat + n_long;
            continue;
        };
        let mut hits = 0;
        for (set, axis) in [(&res.long_lines, Axis::Y), (&res.lat_lines, Axis::X)] {
            for l in set.iter() {
                match source[&key(l)] {
                    LineSource::Grid { axis: a, .. } if a == axis => hits += 1,
                    _ => fp += 1,
                }
            }
        }
        tp += hits;
        fn_ += n_lat + n_long - hits;
    }
    (tp as f64 / (tp + fn_) as f64, tp as f64 / (tp + fp).max(1) as f64, skipped)
}

fn c6_ransac() -> Outcome {
    let mut clean_recall: f64 = 1.0;
    let mut clean_precision: f64 = 1.0;
    let mut clean_skipped = 0;
    for (k, frac) in [0.0, 0.1, 0.2, 0.3].into_iter().enumerate() {
        let noise = NoiseSpec { outlier_fraction: frac, ..Default::default() };
        let (r, p, s) = ransac_scores(&noise, 250, 100 + k as u64);
        clean_recall = clean_recall.min(r);
        clean_precision = clean_precision.min(p);
        clean_skipped += s;
    }
    let jitter = NoiseSpec { sigma_rho: 2.0, outlier_fraction: 0.3, ..Default::default() };
    let (jr, jp, js) = ransac_scores(&jitter, 1000, 7);
    check(
        clean_recall == 1.0 && clean_precision == 1.0 && jr >= 0.95,
        format!(
            "noiseless, 1000 frames at 0-30% outliers: recall {:.4}% precision {:.4}% ({clean_skipped} frames with a family below t skipped); 2 px jitter with 30% outliers: recall {:.2}% precision {:.2}% ({js} skipped)",
            100.0 * clean_recall,
            100.0 * clean_precision,
            100.0 * jr,
            100.0 * jp
        ),
    )
}

fn c7_kde() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(1..60);
        let samples: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..800.0)).collect();
        let b = rng.gen_range(1.0..40.0);
        let direct = |q: f64| {
            samples.iter().map(|s| (-(q - s).powi(2) / (2.0 * b * b)).exp()).sum::<f64>()
                / (n as f64 * b * (2.0 * std::f64::consts::PI).sqrt())
        };
        for _ in 0..20 {
            let q = rng.gen_range(-50.0..850.0);
            worst = worst.max((kde_density(&samples, b, q).unwrap() - direct(q)).abs());
        }
        let (lo, dens) = density_profile(&samples, b, 0.5);
        for (k, d) in dens.iter().enumerate().step_by(97) {
            worst = worst.max((d - direct(lo + 0.5 * k as f64)).abs());
        }
    }

    let cfg = PipelineConfig::default();
    let sc = SimCamera::default();
    let grid = GridSpec::default();
    let b = cfg.bandwidth_for(&sc.intrinsics);
    let (mut matched, mut total) = (0, 0);
    for k in 0..1000u64 {
        let pose = random_pose(&mut rng, 10.0);
        let noise = NoiseSpec { seed: k, ..Default::default() };
        let (frame, truth) = render_frame(k, &pose, &sc, &grid, &noise).expect("render");
        for axis in [Axis::X, Axis::Y] {
            let mut lines = Vec::new();
            let mut indices = BTreeSet::new();
            for (l, s) in frame.lines.iter().zip(&truth.sources) {
                if let LineSource::Grid { axis: a, index } = s {
                    if *a == axis && in_theta_gate(l.theta) {
                        lines.push(*l);
                        indices.insert(*index);
                    }
                }
            }
            if lines.is_empty() {
                continue;
            }
            total += 1;
            if cluster_rho(&lines, b, cfg.cluster_threshold_fraction, cfg.kde_grid_step).is_ok_and(|c| c.len() == indices.len()) {
                matched += 1;
            }
        }
    }
    let rate = matched as f64 / total as f64;
    check(
        worst < 1e-9 && rate >= 0.99,
        format!("max density error {worst:.2e}; cluster count = visible lines on {matched}/{total} line sets ({:.2}%)", 100.0 * rate),
    )
}

fn c8_jacobian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = 280.0;
    let mut worst: f64 = 0.0;
    let mut points = 0;
    while points < 10_000 {
        let m = rng.gen_range(0.5..2.0);
        let q = rng.gen_range(-m..2.0 * m);
        let h = rng.gen_range(0.5..5.0);
        let eps_c = rng.gen_range(-0.3..0.3);
        let lines: Vec<LabeledLine> = (-3..=3)
            .map(|j| LabeledLine { rho_c: 0.0, theta_c: 0.0, label: j, offset: rng.gen_range(-300.0..300.0) })
            .collect();
        // Valid points keep every line well inside the field of view.
        let valid = lines.iter().all(|l| ((m * l.label as f64 - q) / h).atan() - eps_c < 1.2 && ((m * l.label as f64 - q) / h).atan() - eps_c > -1.2);
        if !valid {
            continue;
        }
        points += 1;
        let eval = |q: f64, h: f64| {
            let (mut r, mut j) = (Vec::new(), Vec::new());
            residuals_unwrapped(&lines, q, h, m, f, eps_c, &mut r, &mut j);
            (r, j)
        };
        let (_, jac) = eval(q, h);
        let step = 1e-6;
        let (rqp, _) = eval(q + step, h);
        let (rqm, _) = eval(q - step, h);
        let (rhp, _) = eval(q, h + step);
        let (rhm, _) = eval(q, h - step);
        for k in 0..lines.len() {
            let fd = [(rqp[k] - rqm[k]) / (2.0 * step), (rhp[k] - rhm[k]) / (2.0 * step)];
            let num = (jac[k][0] - fd[0]).hypot(jac[k][1] - fd[1]);
            let den = jac[k][0].hypot(jac[k][1]);
            worst = worst.max(num / den);
        }
    }
    check(worst < 1e-5, format!("max row-relative error {worst:.2e} over {points} points (need < 1e-5)"))
}

fn c9_solver() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (f, m) = (280.0, 1.0);
    let (mut worst_err, mut worst_iter, mut increases, mut failures) = (0.0f64, 0usize, 0usize, 0usize);
    let trials = 2000;
    for _ in 0..trials {
        let o = rng.gen_range(0.0..m);
        let h = rng.gen_range(1.0..3.0);
        let eps_c: f64 = rng.gen_range(-0.1..0.1);
        let p = AxisModelParams { o, h, m, f, eps_c };
        let lines: Vec<LabeledLine> = (-2..=3)
            .map(|j| LabeledLine { rho_c: 0.0, theta_c: 0.0, label: j, offset: model_rho(j, &p).unwrap() })
            .collect();
        let s_p = h * eps_c.tan();
        let q_true = (o + s_p).rem_euclid(m) - s_p;
        let bounds = mlog::subcell::axis_bounds(m, eps_c, &cfg, None);
        // Start anywhere in the box where every line is in front of the camera.
        let mut res = mlog::subcell::axis_residuals(&lines, m, f, eps_c);
        let start = loop {
            let s = [rng.gen_range(bounds.lower[0]..bounds.upper[0]), rng.gen_range(cfg.min_height..cfg.max_height)];
            if res(&s, &mut Vec::new(), &mut Vec::new()).is_ok() {
                break s;
            }
        };
        let opts = SolverOptions { max_iter: 30, tol: 1e-14, ..Default::default() };
        match solve(&mut res, start, &bounds, &opts) {
            Ok(sol) => {
                let err = (sol.params[0] - q_true).abs().max((sol.params[1] - h).abs());
                worst_err = worst_err.max(err);
                worst_iter = worst_iter.max(sol.iterations);
                increases += sol.cost_history.windows(2).filter(|w| w[1] > w[0]).count();
            }
            Err(_) => failures += 1,
        }
    }
    check(
        worst_err < 1e-6 && worst_iter <= 30 && increases == 0 && failures == 0,
        format!("{trials} solves: max |error| {worst_err:.2e}, max iterations {worst_iter}, cost increases {increases}, failures {failures}"),
    )
}

fn c10_energy_gate() -> Outcome {
    // Clean stream: no axis may be rejected.
    let cfg = trial_config(100.0, 3, NoiseSpec::default(), 31);
    let t = run_trial(&cfg, false);
    let false_rejections = t
        .outputs
        .iter()
        .filter(|o| !(o.diagnostics.accepted_x && o.diagnostics.accepted_y))
        .count();

    // Corruption: alternating pixel offsets on an otherwise exact axis.
    let pc = PipelineConfig::default();
    let cam = CameraModel::default();
    let grid = GridSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut injected, mut rejected, mut skipped) = (0, 0, 0);
    for _ in 0..2000 {
        let o = rng.gen_range(0.0..1.0);
        let h = rng.gen_range(1.5..2.5);
        let p = AxisModelParams { o, h, m: 1.0, f: cam.f, eps_c: 0.0 };
        let clean: Vec<LabeledLine> = (-2..=2)
            .map(|j| LabeledLine { rho_c: 0.0, theta_c: 0.0, label: j, offset: model_rho(j, &p).unwrap() })
            .collect();
        let base = localize_axis(&clean, Axis::X, &cam, &grid, None, 2.0, &pc).map_err(|e| e.to_string())?;
        let reference = base.final_cost.max(pc.energy_floor) * pc.energy_ratio_eps_e;
        let delta = rng.gen_range(20.0..60.0);
        let corrupt: Vec<LabeledLine> = clean
            .iter()
            .enumerate()
            .map(|(k, l)| LabeledLine { offset: l.offset + if k % 2 == 0 { delta } else { -delta }, ..*l })
            .collect();
        // Residual floor of the corrupted axis: best of a dense start grid.
        let floor = (0..=12)
            .flat_map(|a| (0..=6).map(move |b| (a, b)))
            .filter_map(|(a, b)| {
                let h0 = pc.min_height + (pc.max_height - pc.min_height) * b as f64 / 6.0;
                let mut res = |x: &[f64; 2], r: &mut Vec<f64>, j: &mut Vec<[f64; 2]>| -> mlog::Result<()> {
                    residuals_unwrapped(&corrupt, x[0], x[1], 1.0, cam.f, 0.0, r, j);
                    Ok(())
                };
                let bounds = Bounds { lower: [-1.0, pc.min_height], upper: [2.0, pc.max_height] };
                solve(&mut res, [-1.0 + 0.25 * a as f64, h0], &bounds, &SolverOptions::default()).ok().map(|s| s.final_cost)
            })
            .fold(f64::INFINITY, f64::min);
        if floor < reference {
            skipped += 1;
            continue;
        }
        injected += 1;
        let r = localize_axis(&corrupt, Axis::X, &cam, &grid, Some(base.final_cost), 2.0, &pc).map_err(|e| e.to_string())?;
        if !r.accepted {
            rejected += 1;
        }
    }
    check(
        false_rejections == 0 && injected > 0 && rejected == injected,
        format!(
            "clean stream: {false_rejections} of {} frames with a rejected axis; corrupted: {rejected}/{injected} rejected ({skipped} draws below the inflation threshold skipped)",
            t.outputs.len()
        ),
    )
}

fn c11_metrics(t: &Trial, grid: &GridSpec) -> Outcome {
    let (_, rows) = cli::evaluate(&t.estimates, &t.truth, grid).map_err(|e| e.to_string())?;
    let est: Vec<_> = rows
        .iter()
        .map(|r| mlog::metrics::StateSample { x: r.est_x, y: r.est_y, z: r.est_z, pitch_deg: r.est_pitch_deg, roll_deg: r.est_roll_deg })
        .collect();
    let tru: Vec<_> = rows
        .iter()
        .map(|r| mlog::metrics::StateSample { x: r.truth_x, y: r.truth_y, z: r.truth_z, pitch_deg: r.truth_pitch_deg, roll_deg: r.truth_roll_deg })
        .collect();
    let report = compute_report(&est, &tru).map_err(|e| e.to_string())?;
    let n = est.len() as f64;
    let err: Vec<[f64; 5]> = est
        .iter()
        .zip(&tru)
        .map(|(a, b)| {
            let (a, b) = (a.as_array(), b.as_array());
            std::array::from_fn(|i| a[i] - b[i])
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut mean = [0.0; 5];
    for i in 0..5 {
        mean[i] = err.iter().map(|e| e[i]).sum::<f64>() / n;
        let rmse = (err.iter().map(|e| e[i] * e[i]).sum::<f64>() / n).sqrt();
        let var = err.iter().map(|e| (e[i] - mean[i]).powi(2)).sum::<f64>();
        let s = &report.states[i];
        worst = worst.max((s.mean - mean[i]).abs()).max((s.rmse - rmse).abs()).max((s.sd - (var / (n - 1.0)).sqrt()).abs());
    }
    let mut symmetric = true;
    for i in 0..5 {
        let vi = err.iter().map(|e| (e[i] - mean[i]).powi(2)).sum::<f64>();
        for j in 0..5 {
            let vj = err.iter().map(|e| (e[j] - mean[j]).powi(2)).sum::<f64>();
            let cov = err.iter().map(|e| (e[i] - mean[i]) * (e[j] - mean[j])).sum::<f64>();
            let expect = if i == j { 1.0 } else { cov / (vi * vj).sqrt() };
            worst = worst.max((report.correlation[i][j] - expect).abs());
            symmetric &= report.correlation[i][j] == report.correlation[j][i];
        }
        symmetric &= report.correlation[i][i] == 1.0;
    }
    check(
        worst < 1e-12 && symmetric,
        format!("max deviation from two-pass oracle {worst:.2e} over {} frames; symmetric with unit diagonal: {symmetric}", est.len()),
    )
}

fn c12_throughput() -> Outcome {
    let sc = SimCamera::default();
    let grid = GridSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut pipe = Pipeline::new(sc.intrinsics, grid, PipelineConfig::default()).map_err(|e| e.to_string())?;
    let mut times = Vec::new();
    let mut max_lines = 0;
    for k in 0..600u64 {
        let pose = random_pose(&mut rng, 10.0);
        let noise = NoiseSpec { sigma_rho: 1.0, sigma_theta: 0.005, outliers_min: 170, outliers_max: 170, seed: k, ..Default::default() };
        let (mut frame, _) = render_frame(k, &pose, &sc, &grid, &noise).expect("render");
        frame.lines.truncate(200);
        max_lines = max_lines.max(frame.lines.len());
        let start = Instant::now();
        pipe.process_frame(&frame);
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let p = cli::percentiles(&times);
    check(
        p.p99 <= 33.0,
        format!("{} frames of up to {max_lines} lines: p50 {:.3} ms, p99 {:.3} ms, max {:.3} ms (need <= 33 ms)", times.len(), p.p50, p.p99, p.max),
    )
}

fn c13_determinism() -> Outcome {
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let cfg = cli::preset("paper-trial-1").map_err(|e| e.to_string())?.with_seed(Some(42));
    for d in &dirs {
        let out = d.path();
        cli::cmd_simulate(&cfg, out, false).map_err(|e| e.to_string())?;
        let resolved = Config::load(&out.join("config.json")).map_err(|e| e.to_string())?;
        cli::cmd_localize(&resolved, &out.join("lines.jsonl"), out, false).map_err(|e| e.to_string())?;
        cli::cmd_eval(&resolved, &out.join("trajectory.csv"), &out.join("truth.csv"), out, false).map_err(|e| e.to_string())?;
    }
    let files: Vec<&str> = cli::SIMULATE_FILES
        .iter()
        .chain(&cli::LOCALIZE_FILES)
        .chain(&cli::EVAL_FILES)
        .copied()
        .filter(|f| *f != "timings.json")
        .collect();
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap_or_default();
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| read(dirs[0].path(), f) != read(dirs[1].path(), f))
        .collect();
    check(
        differing.is_empty(),
        format!("{} output files compared byte for byte (wall-clock timings.json excluded); differing: {differing:?}", files.len()),
    )
}

fn main() {
    let grid = GridSpec::default();
    let noisy = std::cell::OnceCell::new();
    let noisy_trial = || noisy.get_or_init(|| run_trial(&trial_config(264.60, NOISY_SPEED_FACTOR, noisy_spec(), 5), false));

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 model-raycast equivalence", Box::new(c1_model_oracle)),
        ("2 noiseless closed loop", Box::new(c2_noiseless_closed_loop)),
        ("3 noisy closed loop", Box::new(|| c3_noisy_closed_loop(noisy_trial(), &grid))),
        ("4 long-run drift", Box::new(c4_long_run)),
        ("5 overspeed ambiguity", Box::new(c5_overspeed)),
        ("6 consensus recall and precision", Box::new(c6_ransac)),
        ("7 density clustering", Box::new(c7_kde)),
        ("8 analytic jacobian", Box::new(c8_jacobian)),
        ("9 bounded solver", Box::new(c9_solver)),
        ("10 energy gate", Box::new(c10_energy_gate)),
        ("11 metrics oracle", Box::new(|| c11_metrics(noisy_trial(), &grid))),
        ("12 throughput", Box::new(c12_throughput)),
        ("13 determinism", Box::new(c13_determinism)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in &criteria {
        let number = name.split(' ').next().unwrap_or_default();
        let selected = |f: &String| if f.parse::<u32>().is_ok() { f == number } else { name.contains(f.as_str()) };
        if !filter.is_empty() && !filter.iter().any(selected) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {name}: {d} [{secs:.2} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {name}: {d} [{secs:.2} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
