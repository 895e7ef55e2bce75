//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.
//!
//! Run with `cargo test -p spectratact-validation --test acceptance`.

use clap::Parser;
use spectratact_cli::Cli;
use spectratact::calibration::{
    estimate_resolution, fit_force_from_model, fit_position, fit_position_from_model, force_knot_schedule,
    PositionCalibration, RatioChannels,
};
use spectratact::contact::PerturbationState;
use spectratact::decoder::{decode_force, decode_joint_angle, decode_position, noise_for_position_sigma, DecodeError, JointEncoderModel};
use spectratact::fivebar::{
    deviation_map, in_working_region, inverse_kinematics, forward_kinematics, DeviationMethod, FiveBarConfig,
    GridSpec, TerminalPose,
};
use spectratact::sensor::{rng_for, simulate_reading, sweep, ChannelReading, NoiseModel, SensorConfig, Stimulus};
use spectratact::spectral::{default_grid, ChannelBank};
use spectratact::stats::{linear_fit, std_dev};
use spectratact::twin::{generate_path, track, EncoderChannel, PathSpec, TrackNoise};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn narrowband() -> SensorConfig {
    let g = default_grid();
    SensorConfig {
        bank: ChannelBank::single_wavelength(&g, &[("B", 450.0), ("G", 550.0), ("R", 650.0)]).unwrap(),
        ..SensorConfig::default()
    }
}

fn ratio(cfg: &SensorConfig) -> RatioChannels {
    RatioChannels::default_for(&cfg.channel_names()).unwrap()
}

fn positions_86() -> Vec<f64> {
    (0..86).map(|i| i as f64).collect()
}

fn fit_sweep(cfg: &SensorConfig, noise: Option<&NoiseModel>, seed: u64) -> Option<PositionCalibration> {
    let table = sweep(cfg, &positions_86(), &[2.0], noise, seed).unwrap();
    let samples: Vec<(f64, ChannelReading)> =
        table.rows.into_iter().map(|r| (r.stimulus.position_mm, r.reading)).collect();
    fit_position(&samples, &ratio(cfg)).ok()
}

fn linearity() -> Outcome {
    let cfg = narrowband();
    let clean = fit_sweep(&cfg, None, 0).unwrap();
    let clean_ok = (clean.r_squared - 1.0).abs() <= 1e-9;
    let mut hits = 0;
    let mut unusable = 0;
    let mut worst = f64::INFINITY;
    let mut median = Vec::new();
    for seed in 0..100 {
        let noise = NoiseModel::snr_db(20.0, seed);
        // A non-positive channel sample leaves the log-ratio undefined; the run counts as a miss.
        let Some(fit) = fit_sweep(&cfg, Some(&noise), seed) else {
            unusable += 1;
            continue;
        };
        let r2 = fit.r_squared;
        if r2 > 0.996 {
            hits += 1;
        }
        worst = worst.min(r2);
        median.push(r2);
    }
    median.sort_by(f64::total_cmp);
    let mid = median.get(median.len() / 2).copied().unwrap_or(f64::NAN);
    Outcome {
        pass: clean_ok && hits >= 95,
        detail: format!(
            "noise-free R²-1 = {:.1e}; 20 dB: {hits}/100 runs with R² > 0.996, {unusable} with non-positive samples (median {:.4}, min {:.4})",
            clean.r_squared - 1.0,
            mid,
            worst
        ),
    }
}

fn slope_oracle() -> Outcome {
    // Closed-form dye curve written out here, independent of the library's evaluator.
    let k = |wl: f64| 0.040 - (0.040 - 0.004) / (1.0 + (-(wl - 560.0) / 25.0f64).exp());
    let expected = k(650.0) - k(450.0);
    let fitted = fit_sweep(&narrowband(), None, 0).unwrap().slope;
    let rel = (fitted - expected).abs() / expected.abs();
    Outcome { pass: rel <= 1e-9, detail: format!("slope {fitted:.12} vs k_R - k_B = {expected:.12}, rel err {rel:.1e}") }
}

fn resolution_estimator() -> Outcome {
    let cfg = SensorConfig::default();
    let poscal = fit_position_from_model(&cfg, &ratio(&cfg), 2.0, 86).unwrap();
    let forces = force_knot_schedule(cfg.coupling.f_threshold_n, cfg.coupling.saturation_force_n(), 21);
    let fc = fit_force_from_model(&cfg, &poscal, 42.5, &forces).unwrap();
    let noise = NoiseModel::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for x in [10.0, 42.5, 75.0] {
        let op = Stimulus::new(x, 2.0);
        let est = estimate_resolution(&cfg, &poscal, &fc, &noise, &op).unwrap().spatial_resolution_mm;
        let decoded: Vec<f64> = (0..1000)
            .map(|i| {
                let r = simulate_reading(&cfg, &op, Some(&noise), &mut rng_for(11, i)).unwrap();
                decode_position(&r, &poscal).unwrap().raw_position_mm
            })
            .collect();
        let mc = std_dev(&decoded);
        let ratio = mc / est;
        pass &= (ratio - 1.0).abs() < 0.2;
        parts.push(format!("x={x}: est {est:.4} mm, MC {mc:.4} mm ({ratio:.3})"));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn force_decoupling() -> Outcome {
    let cfg = SensorConfig::default();
    let poscal = fit_position_from_model(&cfg, &ratio(&cfg), 2.0, 86).unwrap();
    let thr = cfg.coupling.f_threshold_n;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let x = 85.0 * i as f64 / 19.0;
        let decoded: Vec<f64> = (1..=20)
            .map(|j| {
                let f = thr + 0.5 * j as f64;
                let r = simulate_reading(&cfg, &Stimulus::new(x, f), None, &mut rng_for(0, 0)).unwrap();
                decode_position(&r, &poscal).unwrap().position_mm
            })
            .collect();
        let spread = decoded.iter().cloned().fold(f64::MIN, f64::max) - decoded.iter().cloned().fold(f64::MAX, f64::min);
        worst = worst.max(spread);
    }
    Outcome { pass: worst < 1e-9, detail: format!("max spread across forces {worst:.2e} mm over 20x20 grid") }
}

fn force_round_trip() -> Outcome {
    let cfg = SensorConfig::default();
    let poscal = fit_position_from_model(&cfg, &ratio(&cfg), 2.0, 86).unwrap();
    let law = cfg.coupling;
    let forces = force_knot_schedule(law.f_threshold_n, law.saturation_force_n(), 21);
    let fc = fit_force_from_model(&cfg, &poscal, 42.5, &forces).unwrap();
    let knots = fc.knots_force_n().to_vec();
    let mut worst = 0.0f64;
    for x in [5.0, 42.5, 80.0] {
        for w in knots.windows(2) {
            for k in 1..10 {
                let f = w[0] + (w[1] - w[0]) * k as f64 / 10.0;
                let r = simulate_reading(&cfg, &Stimulus::new(x, f), None, &mut rng_for(0, 0)).unwrap();
                let xh = decode_position(&r, &poscal).unwrap().position_mm;
                let fh = decode_force(&r, xh, &fc, &cfg).unwrap();
                worst = worst.max((fh - f).abs() / f);
            }
        }
    }
    let thr = law.f_threshold_n;
    let mut dead_ok = true;
    for f in [0.0, 0.25 * thr, 0.5 * thr, thr] {
        let r = simulate_reading(&cfg, &Stimulus::new(42.5, f), None, &mut rng_for(0, 0)).unwrap();
        dead_ok &= decode_force(&r, 42.5, &fc, &cfg) == Err(DecodeError::BelowThreshold);
    }
    for f in [thr * (1.0 + 1e-6), thr * 1.01] {
        let r = simulate_reading(&cfg, &Stimulus::new(42.5, f), None, &mut rng_for(0, 0)).unwrap();
        dead_ok &= decode_force(&r, 42.5, &fc, &cfg).is_ok();
    }
    Outcome {
        pass: worst < 0.01 && dead_ok && knots.len() == 21,
        detail: format!(
            "{} knots, worst between-knot rel err {:.3}%; dead-zone error iff F <= threshold: {dead_ok}",
            knots.len(),
            100.0 * worst
        ),
    }
}

fn robustness() -> Outcome {
    let cfg = narrowband();
    let poscal = fit_position_from_model(&cfg, &ratio(&cfg), 2.0, 86).unwrap();
    let mut identical = true;
    for x in [0.0, 12.3, 42.5, 77.7, 85.0] {
        let decode_at = |bend: f64| {
            let c = cfg.with_perturbation(PerturbationState::new(0.0, bend).unwrap());
            let r = simulate_reading(&c, &Stimulus::new(x, 2.0), None, &mut rng_for(0, 0)).unwrap();
            decode_position(&r, &poscal).unwrap().position_mm.to_bits()
        };
        let base = decode_at(0.0);
        identical &= [45.0, 90.0, 135.0, 180.0].iter().all(|b| decode_at(*b) == base);
    }
    let strained = cfg.with_perturbation(PerturbationState::new(0.25, 0.0).unwrap());
    let refit = fit_position_from_model(&strained, &ratio(&strained), 2.0, 107).unwrap();
    let mut worst = 0.0f64;
    for i in 0..=50 {
        let x = strained.effective_length_mm() * i as f64 / 50.0;
        let r = simulate_reading(&strained, &Stimulus::new(x, 2.0), None, &mut rng_for(0, 0)).unwrap();
        worst = worst.max((decode_position(&r, &refit).unwrap().position_mm - x).abs());
    }
    Outcome {
        pass: identical && worst < 1e-6,
        detail: format!("bend 0..180° byte-identical: {identical}; 25% strain refit max error {worst:.2e} mm"),
    }
}

fn kinematics() -> Outcome {
    let c = FiveBarConfig::default();
    // Dyadic spacing keeps d - x exact, so mirror symmetry can be checked bit for bit.
    let spec = GridSpec { x_min: 40.0 - 24.5 * 4.0, x_max: 40.0 + 24.5 * 4.0, nx: 50, y_min: 2.0, y_max: 198.0, ny: 50 };
    let mut cells = 0;
    let (mut pose_err, mut angle_err) = (0.0f64, 0.0f64);
    let mut mirror = true;
    for p in spec.poses() {
        if !in_working_region(&c, &p, 1e-3) {
            continue;
        }
        cells += 1;
        let a = inverse_kinematics(&c, &p).unwrap();
        let q = forward_kinematics(&c, &a).unwrap();
        pose_err = pose_err.max(q.distance(&p) / c.l);
        let b = inverse_kinematics(&c, &q).unwrap();
        angle_err = angle_err.max((b.theta1 - a.theta1).abs()).max((b.theta2 - a.theta2).abs());
        let m = inverse_kinematics(&c, &TerminalPose::new(c.d - p.x, p.y)).unwrap();
        mirror &= m.theta1 == a.theta2 && m.theta2 == a.theta1;
    }
    Outcome {
        pass: cells > 500 && pose_err < 1e-9 && angle_err < 1e-9 && mirror,
        detail: format!(
            "{cells} interior cells of 50x50: FK∘IK {pose_err:.1e} (rel), IK∘FK {angle_err:.1e} rad, mirror exact: {mirror}"
        ),
    }
}

fn encoder_linearity() -> Outcome {
    let cfg = SensorConfig::default();
    let poscal = fit_position_from_model(&cfg, &ratio(&cfg), 2.0, 86).unwrap();
    let enc = JointEncoderModel::default();
    let reference = Stimulus::new(enc.offset_mm, 2.0);
    let angles: Vec<f64> = (0..=100).map(|i| -100.0 + 2.0 * i as f64).collect();
    let mut hits = 0;
    let mut worst = f64::INFINITY;
    let mut sigma_obs = Vec::new();
    for seed in 0..100 {
        let noise = noise_for_position_sigma(&cfg, &poscal, &reference, 0.04 * enc.arc_gain_mm_per_deg, seed).unwrap();
        let decoded: Vec<f64> = angles
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let stim = Stimulus::new(enc.position_for_angle(*a), 2.0);
                let r = simulate_reading(&cfg, &stim, Some(&noise), &mut rng_for(seed, i as u64)).unwrap();
                decode_joint_angle(&r, &enc, &poscal).unwrap()
            })
            .collect();
        let r2 = linear_fit(&angles, &decoded).unwrap().r_squared;
        if r2 > 0.999 {
            hits += 1;
        }
        worst = worst.min(r2);
        let r = simulate_reading(&cfg, &reference, Some(&noise), &mut rng_for(seed, 1000)).unwrap();
        sigma_obs.push(decode_joint_angle(&r, &enc, &poscal).unwrap());
    }
    Outcome {
        pass: hits >= 95,
        detail: format!(
            "{hits}/100 seeds with R² > 0.999 (min {worst:.7}); observed 1σ at offset {:.4}°",
            std_dev(&sigma_obs)
        ),
    }
}

fn twin_tracking() -> Outcome {
    let c = FiveBarConfig::default();
    let g = default_grid();
    let sensor = SensorConfig {
        bank: ChannelBank::single_wavelength(&g, &[("B", 450.0), ("G", 550.0), ("R", 650.0)]).unwrap(),
        ..SensorConfig::default()
    };
    let e = EncoderChannel::calibrated(sensor, JointEncoderModel::default(), 2.0, 86).unwrap();
    let path = generate_path(&c, &PathSpec::default()).unwrap();
    let clean = track(&c, [&e, &e], &path, None, 0).unwrap().report;

    let noise = TrackNoise::AngleEquivalent { sigma_deg: 0.04 };
    let seeds = 50;
    let mut sum_sq = vec![0.0; path.len()];
    let mut counts = vec![0usize; path.len()];
    let mut single_run_max = 0.0f64;
    for seed in 0..seeds {
        let r = track(&c, [&e, &e], &path, Some(&noise), seed).unwrap();
        single_run_max = single_run_max.max(r.report.max_error_mm);
        for (i, s) in r.samples.iter().enumerate() {
            if let Some(err) = s.error_mm {
                sum_sq[i] += err * err;
                counts[i] += 1;
            }
        }
    }
    let spec = GridSpec { x_min: 25.0, x_max: 55.0, nx: 31, y_min: 115.0, y_max: 165.0, ny: 51 };
    let map = deviation_map(&c, 0.04, &spec, 0, DeviationMethod::Jacobian).unwrap();
    let (mut worst_ratio, mut obs_max, mut pred_max) = (1.0f64, 0.0f64, 0.0f64);
    let mut missing = 0;
    for (i, s) in path.iter().enumerate() {
        let ix = (s.pose.x - spec.x_min).round() as usize;
        let iy = (s.pose.y - spec.y_min).round() as usize;
        let Some(pred) = *map.get(ix, iy) else {
            missing += 1;
            continue;
        };
        let obs = (sum_sq[i] / counts[i] as f64).sqrt();
        let ratio = obs / pred;
        if (ratio.ln()).abs() > worst_ratio.ln().abs() {
            worst_ratio = ratio;
        }
        obs_max = obs_max.max(obs);
        pred_max = pred_max.max(pred);
    }
    let max_ratio = obs_max / pred_max;
    let within = |r: f64| (0.5..=2.0).contains(&r);
    Outcome {
        pass: clean.max_error_mm < 1e-6 && clean.dropped == 0 && missing == 0 && within(max_ratio) && within(worst_ratio),
        detail: format!(
            "noise-free max {:.1e} mm; 0.04°: observed max 1σ {obs_max:.4} mm vs map {pred_max:.4} mm ({max_ratio:.3}), worst cell ratio {worst_ratio:.3} over {} seeds (largest single-run error {single_run_max:.3} mm)",
            clean.max_error_mm, seeds
        ),
    }
}

/// Runs one CLI invocation in-process on a rayon pool of the given size.
fn run_cli(args: &[String], threads: usize) -> Result<(), String> {
    let cli = Cli::try_parse_from(std::iter::once("spectratact".to_string()).chain(args.iter().cloned()))
        .map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    pool.install(|| spectratact_cli::run(cli)).map_err(|e| format!("exit {}: {e}", e.exit_code()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(
        root.join("config.json"),
        r#"{"seed": 7, "noise": {"mode": "snr_db", "value": 35},
            "sweep": {"forces_n": [0.05, 0.5, 1, 2, 3, 4, 5, 6]},
            "twin": {"noise": {"kind": "angle_equivalent", "sigma_deg": 0.04}, "path": {"shape": "S", "center": {"x": 40, "y": 140}, "scale_mm": 40, "n_samples": 120}},
            "design": {"lengths_mm": [30, 85], "concentrations": [1, 2]}}"#,
    )
    .unwrap();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("simulate", vec!["simulate"]),
        ("calibrate", vec!["calibrate", "--samples", "run/sweep.csv"]),
        ("decode", vec!["decode", "--readings", "run/sweep.csv", "--calibration", "run/calibration.json"]),
        ("track", vec!["track"]),
        ("sweep-design", vec!["sweep-design"]),
        ("workspace", vec!["workspace"]),
    ];
    let abs = |rel: &str| root.join(rel).display().to_string();
    let mut failures = Vec::new();
    let mut checked = 0;
    for (name, args) in &commands {
        let mut full = vec!["--config".to_string(), abs("config.json"), "--out".into(), abs("run")];
        full.extend(args.iter().map(|a| if a.starts_with("run/") { abs(a) } else { a.to_string() }));
        if let Err(e) = run_cli(&full, 1) {
            failures.push(format!("{name} failed: {e}"));
            continue;
        }
        let manifest = root.join("run").join(format!("{name}.manifest.json"));
        if let Err(e) = run_cli(&["replay".into(), manifest.display().to_string(), "--out".into(), abs("again")], 4) {
            failures.push(format!("{name}: {e}"));
            continue;
        }
        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
        for f in m["outputs"].as_array().unwrap() {
            let p = f["path"].as_str().unwrap();
            let a = std::fs::read(root.join("run").join(p)).unwrap();
            let b = std::fs::read(root.join("again").join(p)).unwrap();
            checked += 1;
            if a != b {
                failures.push(format!("{name}: {p} differs"));
            }
        }
    }
    Outcome {
        pass: failures.is_empty() && checked >= 8,
        detail: if failures.is_empty() {
            format!("{} commands replayed on 1 vs 4 threads, {checked} output files byte-identical", commands.len())
        } else {
            failures.join("; ")
        },
    }
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("linearity", linearity),
        ("slope oracle", slope_oracle),
        ("resolution estimator", resolution_estimator),
        ("force decoupling", force_decoupling),
        ("force round trip", force_round_trip),
        ("robustness models", robustness),
        ("kinematics", kinematics),
        ("encoder linearity", encoder_linearity),
        ("twin tracking", twin_tracking),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = std::time::Instant::now();
        let outcome = check();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.2}s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
