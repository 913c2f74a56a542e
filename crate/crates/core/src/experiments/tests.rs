use super::*;

fn cfg(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

fn config_error(json: &str) -> String {
    match ExperimentConfig::from_json(json) {
        Err(Error::Config(msg)) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn significant_digit_formatting() {
    let cases = [
        (0.0, "0"),
        (1.0, "1"),
        (0.5, "0.5"),
        (0.972, "0.972"),
        (-2.25, "-2.25"),
        (0.123456789012345, "0.123456789012"),
        (0.99999999999999, "1"),
        (1e-5, "1e-05"),
        (0.000123, "0.000123"),
        (123456789012345.0, "1.23456789012e+14"),
        (100.0, "100"),
    ];
    for (x, want) in cases {
        assert_eq!(format_sig(x, 12), want, "{x}");
    }
}

#[test]
fn parses_full_and_minimal_configs() {
    let c = cfg(r#"{"experiment": "amplitude_damping", "grid": [0.1, 0.2],
        "codes": ["rep3Z", {"label": "vgqec3", "blocks": 2}],
        "recovery": ["standard", "sdp"],
        "optimizer": {"kind": "SPSA", "restarts": 3},
        "noise": {"model": "amplitude_damping"}, "output": "x.csv", "seed": 11}"#);
    assert_eq!(c.codes[1].blocks, Some(2));
    assert_eq!(c.optimizer.kind, OptimizerKind::Spsa);
    assert_eq!(c.optimizer.max_evals, OptimizerConfig::default().max_evals);
    assert_eq!(c.seed(), 11);
    assert_eq!(c.recovery_modes(), vec![RecoveryMode::Standard, RecoveryMode::Sdp]);

    let m = cfg(r#"{"experiment": "interpolation", "grid": [0.5], "recovery": "petz"}"#);
    assert_eq!(m.recovery_modes(), vec![RecoveryMode::Petz]);
    assert_eq!(m.codes().iter().map(|c| c.label.as_str()).collect::<Vec<_>>(), ["rep5X", "513", "vgqec"]);
    assert_eq!(m.noise().unwrap().model, NoiseModel::Interpolation);
    assert_eq!(m.seed(), OptimizerConfig::default().seed);

    let t = cfg(r#"{"experiment": "thermal", "grid": [1.0]}"#);
    assert_eq!(t.noise().unwrap().t1, TABLE1_T1.to_vec());
    assert_eq!(t.noise().unwrap().t2, TABLE1_T2.to_vec());
}

#[test]
fn config_errors_name_the_key() {
    assert!(config_error(r#"{"experiment": "thermal", "grid": [1.0], "optimiser": {}}"#).contains("optimiser"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": [1.0], "optimizer": {"kind": "BFGS"}}"#)
        .contains("optimizer.kind"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": [1.0], "optimizer": {"restarts": -1}}"#)
        .contains("optimizer.restarts"));
    assert!(config_error(r#"{"experiment": "thermal"}"#).contains("grid"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": [2.0, 1.0]}"#).contains("grid"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": []}"#).contains("grid"));
    assert!(config_error(r#"{"experiment": "nonsense", "grid": [1.0]}"#).contains("experiment"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": [1.0], "codes": ["steane"]}"#).contains("codes[0]"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": [1.0], "codes": [{"label": "513", "colour": 1}]}"#)
        .contains("codes[0]"));
    assert!(config_error(r#"{"experiment": "kl_check", "grid": [0.0], "codes": ["vgqec"]}"#).contains("codes[0]"));
    assert!(config_error(r#"{"experiment": "kl_check", "grid": [0.0], "codes": [{"label": "k5", "alpha": [1]}]}"#)
        .contains("alpha"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": [1.0], "noise": {"model": "bit_flip"}}"#)
        .contains("noise.model"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": [1.0], "noise": {"model": "thermal", "t1": [1.0]}}"#)
        .contains("noise.t2"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": [1.0], "recovery": "optimal"}"#).contains("recovery"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": [1.0], "codes": [{"label": "biconvex", "start": "rep3Z"}]}"#)
        .contains("codes[0].start"));
    assert!(config_error(r#"{"experiment": "thermal", "grid": [1.0], "codes": [{"label": "513", "start": "513"}]}"#)
        .contains("codes[0].start"));
    assert!(!config_error("{not json").is_empty());
}

#[test]
fn thread_cap_parsing() {
    assert_eq!(parse_thread_cap(None).unwrap(), None);
    assert_eq!(parse_thread_cap(Some("3")).unwrap(), Some(3));
    assert!(parse_thread_cap(Some("0")).is_err());
    assert!(parse_thread_cap(Some("many")).is_err());
}

#[test]
fn shipped_configs_match_desk_defaults() {
    let files = [
        (ExperimentKind::Interpolation, include_str!("../../../../configs/interpolation.json")),
        (ExperimentKind::AmplitudeDamping, include_str!("../../../../configs/amplitude_damping.json")),
        (ExperimentKind::Thermal, include_str!("../../../../configs/thermal.json")),
        (ExperimentKind::VerifyCode, include_str!("../../../../configs/verify_code.json")),
        (ExperimentKind::KlCheck, include_str!("../../../../configs/kl_check.json")),
    ];
    for (kind, text) in files {
        let file = cfg(text);
        let desk = ExperimentConfig::desk(kind);
        assert_eq!(file.experiment, kind);
        assert_eq!(file.grid, desk.grid, "{kind}");
        assert_eq!(file.optimizer, desk.optimizer, "{kind}");
        assert_eq!(file.seed(), desk.seed(), "{kind}");
        assert_eq!(file.recovery_modes(), desk.recovery_modes(), "{kind}");
        assert_eq!(file.noise(), desk.noise(), "{kind}");
        let labels = |c: &ExperimentConfig| c.codes().into_iter().map(|e| e.label).collect::<Vec<_>>();
        assert_eq!(labels(&file), labels(&desk), "{kind}");
        let starts = |c: &ExperimentConfig| c.codes().into_iter().map(|e| e.start).collect::<Vec<_>>();
        assert_eq!(starts(&file), starts(&desk), "{kind}");
        for entry in file.codes() {
            assert!(entry.blocks.map_or(true, |b| b == 1));
            assert!(entry.restarts.map_or(true, |r| r == 5) && entry.iterations.map_or(true, |i| i == 300));
        }
    }
}

#[test]
fn fixed_code_sweep_matches_closed_forms() {
    let c = cfg(r#"{"experiment": "optimal_recovery", "grid": [0.05, 0.1],
        "codes": ["rep3Z", "unprotected"], "recovery": ["standard", "sdp", "petz"],
        "noise": {"model": "bit_flip"}, "seed": 4}"#);
    let report = run(&c).unwrap();
    assert_eq!(report.rows.len(), 2 * 4);
    for &p in &c.grid {
        let closed = 1.0 - 3.0 * p * p + 2.0 * p * p * p;
        for rec in ["standard", "sdp"] {
            let row = report.row(p, "rep3Z", rec).unwrap();
            assert!((row.channel_fidelity - closed).abs() <= 1e-8, "{rec} at {p}");
            assert!((row.avg_fidelity - (2.0 * closed + 1.0) / 3.0).abs() <= 1e-8);
            assert_eq!(row.seed, 4);
        }
        assert!(report.row(p, "rep3Z", "petz").unwrap().channel_fidelity <= closed + 1e-8);
        assert!((report.row(p, "unprotected", "none").unwrap().channel_fidelity - (1.0 - p)).abs() <= 1e-12);
    }
    let keys: Vec<_> = report.rows.iter().map(|r| (r.param, r.code.clone(), r.recovery.clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    assert_eq!(keys, sorted);
    let csv = report.csv();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), 9);
    assert_eq!(csv, run(&c).unwrap().csv());
    let svg = report.svg().unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
}

#[test]
fn damping_and_thermal_baselines() {
    let c = cfg(r#"{"experiment": "amplitude_damping", "grid": [0.2], "codes": ["unprotected", "rep3Z"],
        "recovery": "standard"}"#);
    let report = run(&c).unwrap();
    let g: f64 = 0.2;
    let want = (1.0 + (1.0 - g).sqrt()).powi(2) / 4.0;
    assert!((report.row(0.2, "unprotected", "none").unwrap().channel_fidelity - want).abs() <= 1e-12);
    assert!(report.row(0.2, "rep3Z", "standard").unwrap().channel_fidelity < want);

    let c = cfg(r#"{"experiment": "thermal", "grid": [2.5], "codes": ["Q0"]}"#);
    let report = run(&c).unwrap();
    let t: f64 = 2.5;
    let want = (1.0 + 2.0 * (-t / TABLE1_T2[0]).exp() + (-t / TABLE1_T1[0]).exp()) / 4.0;
    assert!((report.row(2.5, "Q0", "none").unwrap().channel_fidelity - want).abs() <= 1e-12);
}

#[test]
fn kl_check_experiment() {
    let report = run(&cfg(include_str!("../../../../configs/kl_check.json"))).unwrap();
    assert_eq!(report.kl_rows.len(), 1);
    let row = &report.kl_rows[0];
    assert_eq!(row.errors, 16);
    assert!(row.residual <= 1e-10 && row.lambda_offdiag <= 1e-10);
    assert!(report.csv().starts_with(KL_HEADER));
    assert!(report.svg().is_none());
    // Amplitude damping is not exactly correctable by the repetition code.
    let ad = run(&cfg(r#"{"experiment": "kl_check", "grid": [0.1], "codes": ["rep3Z"],
        "noise": {"model": "amplitude_damping"}}"#))
    .unwrap();
    assert!(ad.kl_rows[0].residual > 1e-3);
}

#[test]
fn verify_code_reports_codewords_and_ordering() {
    let c = cfg(r#"{"experiment": "verify_code", "grid": [0.0, 0.1]}"#);
    let report = run(&c).unwrap();
    let at = |p, code| report.row(p, code, "sdp").unwrap().channel_fidelity;
    assert!((at(0.0, "discovered3") - 1.0).abs() <= 1e-8);
    assert!(at(0.1, "discovered3") > at(0.1, "rep3Z"));
    let text = report.summary();
    assert!(text.contains("discovered3 codewords"));
    assert!(text.contains("isometry deviation"));
    assert!(text.contains("KL residual"));
}

#[test]
fn trained_codes_in_a_small_sweep() {
    let c = cfg(r#"{"experiment": "amplitude_damping", "grid": [0.2],
        "codes": ["rep3Z", {"label": "vgqec3", "restarts": 2}, {"label": "biconvex", "qubits": 3, "restarts": 2, "iterations": 4}],
        "recovery": "standard",
        "optimizer": {"kind": "LBFGS_FD", "restarts": 1, "max_evals": 1500, "seed": 3}}"#);
    let report = run(&c).unwrap();
    let base = report.row(0.2, "rep3Z", "standard").unwrap();
    let trained = report.row(0.2, "vgqec3", "variational").unwrap();
    assert!(trained.channel_fidelity >= base.channel_fidelity - 1e-12);
    assert_eq!(trained.restarts, 2);
    assert!(trained.evaluations <= 2 * 1500);
    let bi = report.row(0.2, "biconvex", "sdp").unwrap();
    assert_eq!(bi.evaluations, 2 * 2 * 4);
    assert_eq!(report.traces.len(), 1);
    assert_eq!(report.traces[0].trace.len(), 8);
    assert!(report.traces[0].trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!((report.traces[0].trace.last().unwrap() - bi.channel_fidelity).abs() <= 1e-6);
    assert_eq!(report.csv(), run(&c).unwrap().csv());
}

#[test]
fn codeword_table() {
    let csv = codeword_csv(&CodeEntry::new("rep3Z")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "basis,re0,im0,re1,im1");
    assert_eq!(lines.len(), 9);
    assert_eq!(lines[1], "000,1,0,0,0");
    assert_eq!(lines[8], "111,0,0,1,0");
    assert!(codeword_csv(&CodeEntry::new("vgqec")).is_err());
}
