//! CLI behavior: per-command examples, exit codes, and report shapes.

mod common;

use std::fs;

use common::*;
use gmk_core::metrics::extract_motion_beats;
use gmk_core::motion::{default_smooth_window, load_pose_sequence, Manifest};

fn parse_stdout(out: &std::process::Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn parse_file(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).expect("report is JSON")
}

#[test]
fn analyze_static_pose_reports_static_regions() {
    let fx = Fixture::new();
    let rows: Vec<Vec<f64>> = (0..90).map(|_| vec![0.1, -0.2, 0.0, 0.0, 0.0, 0.3]).collect();
    write_csv(&fx.path("poses.csv"), &rows);
    write_manifest(&fx.path("manifest.json"), 30.0, &WAVY_CHANNELS);
    write_words(
        &fx.path("words.jsonl"),
        &[("a", 0.0, 0.9), ("b", 1.0, 1.9), ("c", 2.0, 2.9)],
    );
    let out = run_ok(gmk()
        .arg("analyze")
        .arg("--poses")
        .arg(fx.path("poses.csv"))
        .arg("--manifest")
        .arg(fx.path("manifest.json"))
        .arg("--words")
        .arg(fx.path("words.jsonl")));
    let report = parse_stdout(&out);
    let windows = report["windows"].as_array().unwrap();
    assert!(!windows.is_empty());
    for window in windows {
        for region in window["regions"].as_array().unwrap() {
            assert_eq!(region["summary"]["magnitude"], "static");
            assert_eq!(region["summary"]["tier"], "very_slight");
        }
    }
}

#[test]
fn analyze_missing_manifest_exits_2_and_names_the_file() {
    let fx = Fixture::new();
    write_csv(&fx.path("poses.csv"), &wavy_rows(30));
    write_words(&fx.path("words.jsonl"), &[("a", 0.0, 0.5)]);
    let out = gmk()
        .arg("analyze")
        .arg("--poses")
        .arg(fx.path("poses.csv"))
        .arg("--manifest")
        .arg(fx.path("missing.json"))
        .arg("--words")
        .arg(fx.path("words.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_eq!(err["error"]["kind"], "input");
    assert!(
        err["error"]["message"]
            .as_str()
            .unwrap()
            .contains("missing.json"),
        "message should name the file: {err}"
    );
}

#[test]
fn invalid_config_exits_3() {
    let fx = Fixture::new();
    let config = fx.file("bad.json", r#"{"thresholds": {"eps_static": -1.0}}"#);
    let out = gmk()
        .arg("windows")
        .arg("--words")
        .arg(fx.path("words.jsonl"))
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn rank_deficient_codec_exits_4() {
    let fx = Fixture::new();
    // constant poses: covariance rank 0
    let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).collect();
    write_csv(&fx.path("poses.csv"), &rows);
    write_manifest(&fx.path("manifest.json"), 30.0, &WAVY_CHANNELS);
    let config = fx.file(
        "config.json",
        r#"{"tokenizer": {"n": 2, "d": 1, "k": 4, "iters": 5, "ema_decay": 0.5, "dead_threshold": 0.01}}"#,
    );
    let out = gmk()
        .arg("train-codebook")
        .arg("--poses")
        .arg(fx.path("poses.csv"))
        .arg("--manifest")
        .arg(fx.path("manifest.json"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(fx.path("cb.bin"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "numerical");
}

#[test]
fn train_codebook_reduces_k_and_logs_monotone_error() {
    let fx = Fixture::new();
    write_csv(&fx.path("poses.csv"), &wavy_rows(40));
    write_manifest(&fx.path("manifest.json"), 30.0, &WAVY_CHANNELS);
    // K = 64 exceeds the 40 available frames
    let config = fx.file(
        "config.json",
        r#"{"seed": 5, "tokenizer": {"n": 2, "d": 1, "k": 64, "iters": 10, "ema_decay": 0.8, "dead_threshold": 0.01}}"#,
    );
    let out = run_ok(gmk()
        .arg("train-codebook")
        .arg("--poses")
        .arg(fx.path("poses.csv"))
        .arg("--manifest")
        .arg(fx.path("manifest.json"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(fx.path("cb.bin")));
    let report = parse_stdout(&out);
    assert_eq!(report["k_reduced"], true);
    assert_eq!(report["k"], 40);
    assert_eq!(report["k_requested"], 64);

    // reduction is recorded in the codebook file header
    let bytes = fs::read(fx.path("cb.bin")).unwrap();
    let header_end = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header: serde_json::Value = serde_json::from_slice(&bytes[..header_end]).unwrap();
    assert_eq!(header["k"], 40);
    assert_eq!(header["k_requested"], 64);

    // per-iteration log errors never increase
    let log = fs::read_to_string(fx.path("cb.bin.log.csv")).unwrap();
    let errs: Vec<f64> = log
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errs.len(), 10);
    for pair in errs.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12);
    }
}

fn evaluate_fixture() -> (Fixture, std::path::PathBuf) {
    let fx = Fixture::new();
    write_csv(&fx.path("real.csv"), &wavy_rows(120));
    write_manifest(&fx.path("manifest.json"), 30.0, &WAVY_CHANNELS);
    let config = fx.file(
        "config.json",
        r#"{"seed": 9, "tokenizer": {"n": 2, "d": 1, "k": 16, "iters": 15, "ema_decay": 0.9, "dead_threshold": 0.01}}"#,
    );
    (fx, config)
}

#[test]
fn evaluate_self_comparison_is_near_zero_fgd_and_unit_bc() {
    let (fx, config) = evaluate_fixture();

    // audio beats = the clip's own motion beats
    let manifest = Manifest::load(&fx.path("manifest.json")).unwrap();
    let seq = load_pose_sequence(&fx.path("real.csv"), manifest.fps, manifest.channels.clone())
        .unwrap();
    let upper: Vec<usize> = (0..seq.channel_count()).collect();
    let beats = extract_motion_beats(&seq, &upper[..2], default_smooth_window(30.0)).unwrap();
    // the CLI uses every non-leg channel; recompute with the same subset
    let cli_subset: Vec<usize> = (0..6).collect();
    let beats_cli = extract_motion_beats(&seq, &cli_subset, default_smooth_window(30.0)).unwrap();
    assert!(!beats.is_empty());
    fx.file(
        "beats.json",
        &serde_json::to_string(&beats_cli.times()).unwrap(),
    );

    let out = run_ok(gmk()
        .arg("evaluate")
        .arg("--real")
        .arg(fx.path("real.csv"))
        .arg("--generated")
        .arg(fx.path("real.csv"))
        .arg("--manifest")
        .arg(fx.path("manifest.json"))
        .arg("--audio-beats")
        .arg(fx.path("beats.json"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(fx.path("eval.json")));
    drop(out);
    let report = parse_file(&fx.path("eval.json"));
    assert!(report["fgd"].as_f64().unwrap() <= 1e-9);
    assert!((report["bc"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
    assert!(report["l1_diversity"].is_null(), "one clip has no diversity");
}

#[test]
fn evaluate_mean_shift_matches_closed_form_fgd() {
    let (fx, config) = evaluate_fixture();
    let offset = 0.5;
    let shifted: Vec<Vec<f64>> = wavy_rows(120)
        .into_iter()
        .map(|row| row.into_iter().map(|v| v + offset).collect())
        .collect();
    write_csv(&fx.path("gen.csv"), &shifted);

    let out = run_ok(gmk()
        .arg("evaluate")
        .arg("--real")
        .arg(fx.path("real.csv"))
        .arg("--generated")
        .arg(fx.path("gen.csv"))
        .arg("--manifest")
        .arg(fx.path("manifest.json"))
        .arg("--config")
        .arg(&config));
    let report = parse_stdout(&out);
    let expected = 6.0 * offset * offset; // C channels, covariance unchanged
    let got = report["fgd"].as_f64().unwrap();
    assert!(
        (got - expected).abs() < 1e-9,
        "FGD {got} vs closed form {expected}"
    );
}

#[test]
fn evaluate_recall_with_single_candidate_is_100() {
    let (fx, config) = evaluate_fixture();
    fx.file("q.csv", "0.25,0.5,1.0\n");
    fx.file("t.csv", "0.5,1.0,2.0\n");
    let single_k = fx.file(
        "k1.json",
        r#"{"seed": 9, "metrics": {"bc_sigma": 0.1, "batch_size": 128, "k_list": [1]}}"#,
    );
    drop(config);
    let out = run_ok(gmk()
        .arg("evaluate")
        .arg("--real")
        .arg(fx.path("real.csv"))
        .arg("--generated")
        .arg(fx.path("real.csv"))
        .arg("--manifest")
        .arg(fx.path("manifest.json"))
        .arg("--queries")
        .arg(fx.path("q.csv"))
        .arg("--targets")
        .arg(fx.path("t.csv"))
        .arg("--config")
        .arg(&single_k));
    let report = parse_stdout(&out);
    assert_eq!(report["recall"]["global"]["r1"], 100.0);
    assert_eq!(report["recall"]["per_batch"]["r1"], 100.0);
}

#[test]
fn evaluate_rfgd_via_codebook_round_trip() {
    let (fx, config) = evaluate_fixture();
    run_ok(gmk()
        .arg("train-codebook")
        .arg("--poses")
        .arg(fx.path("real.csv"))
        .arg("--manifest")
        .arg(fx.path("manifest.json"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(fx.path("cb.bin")));
    let out = run_ok(gmk()
        .arg("evaluate")
        .arg("--real")
        .arg(fx.path("real.csv"))
        .arg("--generated")
        .arg(fx.path("real.csv"))
        .arg("--manifest")
        .arg(fx.path("manifest.json"))
        .arg("--codebook")
        .arg(fx.path("cb.bin"))
        .arg("--codec")
        .arg(fx.path("cb.bin.codec.json"))
        .arg("--config")
        .arg(&config));
    let report = parse_stdout(&out);
    assert!(report["rfgd"].as_f64().unwrap() >= 0.0);
    assert!(report["l1_error"].as_f64().unwrap() >= 0.0);
    let utility = report["codebook_utility"].as_f64().unwrap();
    assert!(utility > 0.0 && utility <= 100.0);
}

#[test]
fn tokenize_round_trip_writes_index_csv() {
    let (fx, config) = evaluate_fixture();
    run_ok(gmk()
        .arg("train-codebook")
        .arg("--poses")
        .arg(fx.path("real.csv"))
        .arg("--manifest")
        .arg(fx.path("manifest.json"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(fx.path("cb.bin")));
    let out = run_ok(gmk()
        .arg("tokenize")
        .arg("--poses")
        .arg(fx.path("real.csv"))
        .arg("--manifest")
        .arg(fx.path("manifest.json"))
        .arg("--codec")
        .arg(fx.path("cb.bin.codec.json"))
        .arg("--codebook")
        .arg(fx.path("cb.bin"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(fx.path("tokens.csv")));
    let report = parse_stdout(&out);
    assert_eq!(report["rows"], 120);
    let tokens = fs::read_to_string(fx.path("tokens.csv")).unwrap();
    assert_eq!(tokens.lines().count(), 120);
    for line in tokens.lines() {
        let codes: Vec<usize> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(codes.len(), 2);
        assert!(codes.iter().all(|&c| c < 16));
    }
}

#[test]
fn stats_reports_distribution_and_cooccurrence() {
    let fx = Fixture::new();
    let lines = [
        r#"{"id":"u1","words":[{"word":"a","start":0.0,"end":0.4},{"word":"b","start":0.4,"end":0.9}],"functions":["Deixis","Negation"],"split":"train"}"#,
        r#"{"id":"u2","words":[{"word":"a","start":0.0,"end":0.4}],"functions":["Deixis"],"split":"train"}"#,
        r#"{"id":"u3","words":[{"word":"a","start":0.0,"end":0.4},{"word":"b","start":0.5,"end":0.9},{"word":"c","start":1.0,"end":1.4}],"functions":["Deixis","Emphasis","Negation"],"split":"val"}"#,
        r#"{"id":"u4","words":[{"word":"a","start":0.0,"end":0.4}],"functions":["Deixis"],"split":"test"}"#,
    ];
    let ann = fx.file("ann.jsonl", &lines.join("\n"));
    let out = run_ok(gmk()
        .arg("stats")
        .arg("--annotations")
        .arg(&ann)
        .arg("--cooccur-csv")
        .arg(fx.path("co.csv")));
    let report = parse_stdout(&out);
    assert_eq!(report["record_count"], 4);
    assert_eq!(report["split_counts"]["train"], 2);
    assert_eq!(report["split_counts"]["val"], 1);
    assert_eq!(report["split_counts"]["test"], 1);

    // Deixis in 4 records, Negation in 2 of them: P(Negation | Deixis) = 0.5
    let labels: Vec<String> = report["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let dx = labels.iter().position(|l| l == "Deixis").unwrap();
    let ng = labels.iter().position(|l| l == "Negation").unwrap();
    let p = report["cooccurrence"]["matrix"][dx][ng].as_f64().unwrap();
    assert_eq!(p, 0.5);

    // shares sum to one
    let shares: f64 = report["distribution"]["occurrence_share"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((shares - 1.0).abs() < 1e-12);

    // heatmap CSV has a header plus 16 rows
    let csv = fs::read_to_string(fx.path("co.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
}

#[test]
fn stats_rejects_unknown_function_label() {
    let fx = Fixture::new();
    let ann = fx.file(
        "ann.jsonl",
        r#"{"id":"u1","functions":["Sarcasm"],"split":"train"}"#,
    );
    let out = gmk().arg("stats").arg("--annotations").arg(&ann).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("Sarcasm"));
}

#[test]
fn windows_command_segments_words() {
    let fx = Fixture::new();
    write_words(
        &fx.path("words.jsonl"),
        &[("a", 0.0, 0.5), ("b", 0.5, 1.0), ("c", 1.0, 1.5)],
    );
    let out = run_ok(gmk().arg("windows").arg("--words").arg(fx.path("words.jsonl")));
    let report = parse_stdout(&out);
    assert_eq!(report["n_windows"], 1);
    assert_eq!(report["windows"][0]["start"], 0.0);
    assert_eq!(report["windows"][0]["end"], 1.5);
}
