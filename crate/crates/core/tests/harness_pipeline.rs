use std::fs;

use softblend::controller::{BlendConfig, PidConfig, RigidInverseModel, ZeroModel};
use softblend::gp::{Hyperparameters, TrainedGP};
use softblend::harness::io::{load_dataset, load_log, load_model, save_dataset, save_log, save_model};
use softblend::harness::{
    generate_excitation, recompose, run_stiffness_probe, run_tracking, train_model, CollectSettings, CollectionInfo,
    EstimatedModelKind, ExcitationKind, ExcitationProfile, ExperimentSetup, ProbeSettings, RecordedDataset,
    ReferenceSpec,
};
use softblend::sim::RobotConfig;
use softblend::Error;

fn short_collection(robot: RobotConfig, model: EstimatedModelKind) -> CollectionInfo {
    CollectionInfo {
        robot,
        excitation: ExcitationProfile {
            duration: 30.0,
            ..Default::default()
        },
        settings: CollectSettings {
            samples: 40,
            estimated_model: model,
            ..Default::default()
        },
    }
}

fn single_link_no_gravity() -> RobotConfig {
    RobotConfig {
        segments: 1,
        gravity: 0.0,
        ..Default::default()
    }
}

#[test]
fn chirp_energy_stays_in_band() {
    let profile = ExcitationProfile {
        kind: ExcitationKind::Chirp,
        offset: 0.0,
        amplitude: 1.0,
        band_low: 0.1,
        band_high: 1.0,
        duration: 60.0,
        ..Default::default()
    };
    let rate = 50.0;
    let x = generate_excitation(&profile, rate).unwrap();
    let n = x.len();
    let (mut inside, mut total) = (0.0, 0.0);
    // naive DFT over the non-negative frequencies
    for k in 0..=n / 2 {
        let w = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            let (s, c) = (w * j as f64).sin_cos();
            re += v * c;
            im -= v * s;
        }
        let power = re * re + im * im;
        let f = k as f64 * rate / n as f64;
        total += power;
        if (0.1..=1.0).contains(&f) {
            inside += power;
        }
    }
    assert!(inside / total >= 0.95, "in-band fraction {}", inside / total);
}

#[test]
fn excitation_is_deterministic_and_bounded() {
    for kind in [ExcitationKind::Multisine, ExcitationKind::Chirp, ExcitationKind::RampHold] {
        let profile = ExcitationProfile {
            kind,
            duration: 20.0,
            ..Default::default()
        };
        let a = generate_excitation(&profile, 1000.0).unwrap();
        assert_eq!(a, generate_excitation(&profile, 1000.0).unwrap());
        assert_eq!(a.len(), 20_000);
        assert!(a.iter().all(|v| (v - profile.offset).abs() <= profile.amplitude + 1e-12));
    }
    let zero = ExcitationProfile {
        amplitude: 0.0,
        offset: 0.0,
        ..Default::default()
    };
    assert!(generate_excitation(&zero, 1000.0).unwrap().iter().all(|v| *v == 0.0));
    let too_fast = ExcitationProfile {
        band_high: 600.0,
        ..Default::default()
    };
    assert!(matches!(generate_excitation(&too_fast, 1000.0), Err(Error::InvalidArgument(_))));
}

#[test]
fn zero_prior_targets_are_raw_forces() {
    let data = short_collection(RobotConfig::default(), EstimatedModelKind::Zero).collect().unwrap();
    let rec = &data.recording;
    assert_eq!(rec.dataset.len(), 40);
    assert_eq!(rec.forces, *rec.dataset.targets());
    assert!(rec.dataset.inputs().row(2).iter().all(|y| *y > 0.0));
    assert!(rec.time.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn recorded_forces_replay_the_excitation() {
    let info = short_collection(RobotConfig::default(), EstimatedModelKind::Zero);
    let data = info.collect().unwrap();
    let dt = info.settings.dt;
    let series = generate_excitation(&info.excitation, 1.0 / dt).unwrap();
    for (j, t) in data.recording.time.iter().enumerate() {
        assert!(*t >= info.settings.warmup);
        let k = (t / dt).round() as usize;
        assert_eq!(data.recording.forces[(j, 0)], series[k]);
    }
}

#[test]
fn exact_prior_leaves_no_residual() {
    let data = short_collection(RobotConfig { segments: 1, ..Default::default() }, EstimatedModelKind::RigidInverse)
        .collect()
        .unwrap();
    let worst = data.recording.dataset.targets().abs().max();
    assert!(worst < 1e-6, "largest residual {worst}");
}

#[test]
fn collection_rejects_zero_duration() {
    let mut info = short_collection(RobotConfig::default(), EstimatedModelKind::Zero);
    info.excitation.duration = 0.0;
    match info.collect() {
        Err(Error::Config(msg)) => assert!(msg.contains("excitation.duration"), "{msg}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

fn assert_same_dataset(a: &RecordedDataset, b: &RecordedDataset) {
    assert_eq!(a.fingerprint, b.fingerprint);
    assert_eq!(a.info, b.info);
    assert_eq!(a.recording.time, b.recording.time);
    assert_eq!(a.recording.forces, b.recording.forces);
    assert_eq!(a.recording.dataset, b.recording.dataset);
}

#[test]
fn dataset_round_trip_and_failure_modes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let data = short_collection(RobotConfig::default(), EstimatedModelKind::Zero).collect().unwrap();
    save_dataset(&data, &path).unwrap();
    let back = load_dataset(&path, Some(&data.fingerprint)).unwrap();
    assert_same_dataset(&data, &back);

    let text = fs::read_to_string(&path).unwrap();

    let truncated = dir.path().join("truncated.csv");
    let keep: Vec<&str> = text.lines().collect();
    fs::write(&truncated, keep[..keep.len() - 3].join("\n") + "\n").unwrap();
    assert!(matches!(load_dataset(&truncated, None), Err(Error::MalformedFile { .. })));
    fs::write(&truncated, &text[..text.len() - 7]).unwrap();
    assert!(matches!(load_dataset(&truncated, None), Err(Error::MalformedFile { .. })));

    let versioned = dir.path().join("v99.csv");
    fs::write(&versioned, text.replace("# format_version=1", "# format_version=99")).unwrap();
    assert!(matches!(load_dataset(&versioned, None), Err(Error::VersionMismatch { found: 99, .. })));

    assert!(matches!(load_dataset(&path, Some("deadbeef")), Err(Error::FingerprintMismatch { .. })));
    let tampered = dir.path().join("tampered.csv");
    fs::write(&tampered, text.replace("\"seed\":7", "\"seed\":8")).unwrap();
    assert!(matches!(load_dataset(&tampered, None), Err(Error::FingerprintMismatch { .. })));

    assert!(matches!(load_dataset(&dir.path().join("missing.csv"), None), Err(Error::Io { .. })));
}

#[test]
fn model_round_trip_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let data = short_collection(RobotConfig::default(), EstimatedModelKind::Zero).collect().unwrap();
    let model = train_model(&data, 2, 3).unwrap();
    save_model(&model, &path).unwrap();
    let back = load_model(&path, Some(&data.fingerprint)).unwrap();
    assert_eq!(back.gp.hyperparameters(), model.gp.hyperparameters());
    assert_eq!(back.gp.dataset(), model.gp.dataset());
    assert_eq!(back.log_likelihood, model.log_likelihood);
    for k in 0..100 {
        let t = k as f64 * 0.37;
        let q = [t.sin(), 0.5 * (1.3 * t).cos(), 0.3 + 0.3 * (0.7 * t).sin()];
        let (m1, v1) = model.gp.predict(&q).unwrap();
        let (m2, v2) = back.gp.predict(&q).unwrap();
        assert!((m1 - m2).abs().max() <= 1e-12);
        assert!((v1 - v2).abs().max() <= 1e-12);
    }

    let text = fs::read_to_string(&path).unwrap();
    let v2 = dir.path().join("v2.json");
    fs::write(&v2, text.replacen("\"format_version\": 1", "\"format_version\": 2", 1)).unwrap();
    assert!(matches!(load_model(&v2, None), Err(Error::VersionMismatch { found: 2, .. })));
    let cut = dir.path().join("cut.json");
    fs::write(&cut, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_model(&cut, None), Err(Error::MalformedFile { .. })));
    assert!(matches!(load_model(&path, Some("0000")), Err(Error::FingerprintMismatch { .. })));
}

#[test]
fn single_point_dataset_trains() {
    let mut info = short_collection(RobotConfig::default(), EstimatedModelKind::Zero);
    info.settings.samples = 1;
    let data = info.collect().unwrap();
    assert_eq!(data.recording.dataset.len(), 1);
    let model = train_model(&data, 2, 0).unwrap();
    assert!(model.log_likelihood.is_finite());
}

#[test]
fn equilibrium_hold_has_no_tracking_error() {
    let robot = single_link_no_gravity();
    let data = short_collection(robot.clone(), EstimatedModelKind::RigidInverse).collect().unwrap();
    let model = train_model(&data, 1, 0).unwrap();
    let h = RigidInverseModel { robot: robot.clone() };
    let setup = ExperimentSetup {
        robot: &robot,
        gp: &model.gp,
        model: &h,
        pid: PidConfig::default(),
        blend: BlendConfig::relative_to_noise(model.gp.hyperparameters().noise_variance[0]).unwrap(),
        dt: 1e-3,
    };
    let reference = ReferenceSpec {
        offset: 0.0,
        amplitude: 0.0,
        frequency: 0.2,
    };
    let run = run_tracking(&setup, &reference, 5.0, None).unwrap();
    assert!(run.metrics.rms_error < 1e-9, "rms {}", run.metrics.rms_error);
}

fn toy_gp(sf2: f64) -> TrainedGP {
    let inputs: Vec<Vec<f64>> = (0..15).map(|k| vec![0.0, 0.0, 0.05 + 0.04 * k as f64]).collect();
    let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![2.0 * x[2]; 3]).collect();
    let data = softblend::gp::Dataset::from_rows(&inputs, &targets).unwrap();
    TrainedGP::fit(data, Hyperparameters::new(sf2, vec![10.0, 10.0, 0.2], vec![1e-4; 3]).unwrap()).unwrap()
}

#[test]
fn log_recomposes_and_round_trips() {
    let robot = RobotConfig::default();
    let gp = toy_gp(1.0);
    let h = ZeroModel { dof: 3 };
    let setup = ExperimentSetup {
        robot: &robot,
        gp: &gp,
        model: &h,
        pid: PidConfig::default(),
        blend: BlendConfig::relative_to_noise(1e-4).unwrap(),
        dt: 1e-3,
    };
    let run = run_tracking(&setup, &ReferenceSpec::default(), 2.0, None).unwrap();
    assert_eq!(run.log.rows.len(), 2000);
    for row in &run.log.rows {
        assert_eq!(recompose(row), row.p_applied);
        assert!((0.0..=1.0).contains(&row.alpha));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    save_log(&run.log, &path).unwrap();
    assert_eq!(load_log(&path).unwrap(), run.log);
}

#[test]
fn in_region_reference_is_gated_less_than_its_mirror() {
    let robot = RobotConfig::default();
    let gp = toy_gp(1.0);
    let h = ZeroModel { dof: 3 };
    let setup = ExperimentSetup {
        robot: &robot,
        gp: &gp,
        model: &h,
        pid: PidConfig::default(),
        blend: BlendConfig::relative_to_noise(1e-4).unwrap(),
        dt: 1e-3,
    };
    let reference = ReferenceSpec::default();
    let inside = run_tracking(&setup, &reference, 3.0, None).unwrap().metrics.mean_alpha;
    let outside = run_tracking(&setup, &reference.mirrored(), 3.0, None).unwrap().metrics.mean_alpha;
    assert!(inside < outside, "{inside} vs {outside}");
}

#[test]
fn zero_probe_torque_gives_zero_deflection() {
    let robot = RobotConfig::default();
    let gp = toy_gp(1.0);
    let h = ZeroModel { dof: 3 };
    let setup = ExperimentSetup {
        robot: &robot,
        gp: &gp,
        model: &h,
        pid: PidConfig::default(),
        blend: BlendConfig::relative_to_noise(1e-4).unwrap(),
        dt: 1e-3,
    };
    let probe = ProbeSettings {
        torque: 0.0,
        settle: 0.5,
        window: 0.5,
        ..Default::default()
    };
    let report = run_stiffness_probe(&setup, &probe).unwrap();
    assert!(report.in_region.peak_deflection < 1e-9);
    assert!(report.out_region.peak_deflection < 1e-9);
    assert_eq!(report.compliance_ratio, None);
}

#[test]
fn tracking_divergence_keeps_partial_log() {
    let robot = RobotConfig::default();
    let gp = toy_gp(1.0);
    let h = ZeroModel { dof: 3 };
    let setup = ExperimentSetup {
        robot: &robot,
        gp: &gp,
        model: &h,
        pid: PidConfig {
            kp: 1e9,
            output_limit: 1e12,
            ..Default::default()
        },
        blend: BlendConfig::new(1.0, 1000.0).unwrap(),
        dt: 1e-2,
    };
    let err = run_tracking(&setup, &ReferenceSpec::default(), 5.0, None).unwrap_err();
    assert!(matches!(err.error, Error::Divergence { .. } | Error::SingularConfiguration { .. }));
    assert!(!err.partial.rows.is_empty());
}

#[test]
fn recorded_inputs_replay_through_the_simulator() {
    use nalgebra::DVector;
    use softblend::sim::{forward_dynamics, output_map, step, RobotState};

    let info = short_collection(RobotConfig::default(), EstimatedModelKind::Zero);
    let data = info.collect().unwrap();
    let (robot, dt, warmup) = (&info.robot, info.settings.dt, info.settings.warmup);
    let series = generate_excitation(&info.excitation, 1.0 / dt).unwrap();
    let mut wanted = data.recording.time.iter().map(|t| (t / dt).round() as usize).peekable();
    let mut state = RobotState::rest(robot);
    let mut column = 0;
    for (k, raw) in series.iter().enumerate() {
        let t = k as f64 * dt;
        let fade = if t < warmup { 0.5 - 0.5 * (std::f64::consts::PI * t / warmup).cos() } else { 1.0 };
        let p = DVector::from_element(robot.dof(), raw * fade);
        if wanted.peek() == Some(&k) {
            wanted.next();
            let x = data.recording.dataset.inputs().column(column);
            let qdd = forward_dynamics(&state, &p, None, robot).unwrap();
            assert!((x[0] - qdd.sum()).abs() <= 1e-9);
            assert!((x[1] - state.q_dot.sum()).abs() <= 1e-9);
            assert!((x[2] - output_map(&state.q, robot)[0]).abs() <= 1e-9);
            column += 1;
        }
        state = step(&state, &p, None, dt, robot).unwrap();
    }
    assert_eq!(column, data.recording.dataset.len());
}
