//! Generate a small synthetic dataset for trying out the `gmk` pipelines.
//!
//! ```text
//! cargo run -p gmk-cli --example demo_data -- demo/
//! ```
//!
//! Writes pose CSVs, a manifest, word timings, audio beats, embeddings, and
//! an annotation corpus into the given directory.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn write_poses(path: &Path, frames: usize, seed: u64, offset: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: f64 = rng.random_range(0.0..3.0);
    let mut text = String::new();
    for t in 0..frames {
        let x = t as f64;
        let row = [
            0.6 * ((x / 5.0) + phase).sin() + offset,
            0.4 * ((x / 7.0) - phase).cos() + offset,
            0.02 * x,
            0.001 * x,
            0.0,
            0.3 + 0.05 * (x / 4.0 + phase).sin() + 0.02 * x,
            -0.1 + 0.04 * (x / 6.0).cos(),
            0.9 + 0.001 * x,
        ];
        let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    fs::write(path, text).expect("write poses");
}

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "demo".to_string());
    let dir = Path::new(&dir);
    fs::create_dir_all(dir).expect("create output directory");

    let manifest = serde_json::json!({
        "fps": 30.0,
        "channels": [
            {"joint": "head", "kind": "angle", "region": "head"},
            {"joint": "elbow_l", "kind": "angle", "region": "arms_shoulders"},
            {"joint": "root", "kind": "position_x", "region": "torso"},
            {"joint": "root", "kind": "position_y", "region": "torso"},
            {"joint": "root", "kind": "position_z", "region": "torso"},
            {"joint": "hand_l", "kind": "position_x", "region": "hands_fingers"},
            {"joint": "hand_l", "kind": "position_y", "region": "hands_fingers"},
            {"joint": "hand_l", "kind": "position_z", "region": "hands_fingers"},
        ]
    });
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap(),
    )
    .expect("write manifest");

    write_poses(&dir.join("real.csv"), 240, 1, 0.0);
    write_poses(&dir.join("gen_a.csv"), 240, 2, 0.0);
    write_poses(&dir.join("gen_b.csv"), 240, 3, 0.05);

    let words = [
        ("i", 0.0, 0.2),
        ("think", 0.2, 0.6),
        ("this", 0.7, 1.0),
        ("one", 1.0, 1.3),
        ("is", 1.4, 1.6),
        ("much", 1.9, 2.3),
        ("better", 2.3, 2.9),
        ("than", 3.0, 3.3),
        ("the", 3.3, 3.5),
        ("previous", 3.6, 4.3),
        ("one", 4.3, 4.6),
    ];
    let mut jsonl = String::new();
    for (w, s, e) in words {
        jsonl.push_str(&serde_json::json!({"word": w, "start": s, "end": e}).to_string());
        jsonl.push('\n');
    }
    fs::write(dir.join("words.jsonl"), jsonl).expect("write words");

    let beats: Vec<f64> = (1..16).map(|i| i as f64 * 0.5).collect();
    fs::write(
        dir.join("beats.json"),
        serde_json::to_string(&beats).unwrap(),
    )
    .expect("write beats");

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut q = String::new();
    let mut t = String::new();
    for _ in 0..64 {
        let row: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let noisy: Vec<f64> = row.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
        q.push_str(&row.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(","));
        q.push('\n');
        t.push_str(&noisy.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(","));
        t.push('\n');
    }
    fs::write(dir.join("queries.csv"), q).expect("write queries");
    fs::write(dir.join("targets.csv"), t).expect("write targets");

    let functions = [
        vec!["Deixis", "Emphasis"],
        vec!["Mental State"],
        vec!["Deixis", "Negation", "Emphasis"],
        vec!["Process", "Quantification"],
        vec!["Deixis"],
        vec!["Comparison", "Emphasis", "Valence"],
    ];
    let splits = ["train", "train", "train", "val", "test", "test"];
    let mut ann = String::new();
    for (i, (fns, split)) in functions.iter().zip(splits).enumerate() {
        let n_words = fns.len() + 2;
        let words: Vec<serde_json::Value> = (0..n_words)
            .map(|j| {
                let start = j as f64 * 0.45;
                serde_json::json!({"word": format!("w{j}"), "start": start, "end": start + 0.4})
            })
            .collect();
        ann.push_str(
            &serde_json::json!({
                "id": format!("u{i}"),
                "transcript": "synthetic utterance",
                "words": words,
                "functions": fns,
                "intention": "demo annotation",
                "mappings": [[fns[0], "demo gesture"]],
                "split": split,
            })
            .to_string(),
        );
        ann.push('\n');
    }
    fs::write(dir.join("annotations.jsonl"), ann).expect("write annotations");

    let config = serde_json::json!({
        "seed": 7,
        "tokenizer": {"n": 2, "d": 2, "k": 32, "iters": 25, "ema_decay": 0.9, "dead_threshold": 0.01}
    });
    fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(&config).unwrap(),
    )
    .expect("write config");

    println!("demo data written to {}", dir.display());
}
