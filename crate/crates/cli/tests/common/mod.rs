//! Shared fixtures for the CLI integration and acceptance tests.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn gmk() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gmk"))
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn gmk");
    assert!(
        out.status.success(),
        "gmk failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write_csv(path: &Path, rows: &[Vec<f64>]) {
    let mut text = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.9}")).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    fs::write(path, text).expect("write csv");
}

pub fn write_manifest(path: &Path, fps: f64, channels: &[(&str, &str, &str)]) {
    let chans: Vec<serde_json::Value> = channels
        .iter()
        .map(|(joint, kind, region)| {
            serde_json::json!({"joint": joint, "kind": kind, "region": region})
        })
        .collect();
    let manifest = serde_json::json!({"fps": fps, "channels": chans});
    fs::write(path, serde_json::to_string_pretty(&manifest).unwrap()).expect("write manifest");
}

pub fn write_words(path: &Path, words: &[(&str, f64, f64)]) {
    let mut text = String::new();
    for (w, s, e) in words {
        text.push_str(
            &serde_json::json!({"word": w, "start": s, "end": e}).to_string(),
        );
        text.push('\n');
    }
    fs::write(path, text).expect("write words");
}

/// A deterministic multi-channel motion with genuine speed minima: two angle
/// channels tracing offset sinusoids plus a drifting positional hand.
pub fn wavy_rows(frames: usize) -> Vec<Vec<f64>> {
    (0..frames)
        .map(|t| {
            let x = t as f64;
            vec![
                0.6 * (x / 5.0).sin(),
                0.4 * (x / 7.0 + 1.0).cos(),
                0.01 * x,
                0.0,
                0.0,
                0.3 + 0.05 * (x / 4.0).sin(),
            ]
        })
        .collect()
}

pub const WAVY_CHANNELS: [(&str, &str, &str); 6] = [
    ("head", "angle", "head"),
    ("elbow_l", "angle", "arms_shoulders"),
    ("root", "position_x", "torso"),
    ("root", "position_y", "torso"),
    ("root", "position_z", "torso"),
    ("hand_l", "position_x", "hands_fingers"),
];

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().expect("tempdir"),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, contents).expect("write fixture file");
        p
    }
}
