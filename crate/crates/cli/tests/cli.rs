use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn navgen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navgen"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run navgen")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = navgen(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn dataset(dir: &Path, seed: &str) {
    ok(dir, &["--seed", seed, "gen-scenes", "--count", "40", "--out", "scenes.json"]);
    ok(
        dir,
        &["--seed", seed, "gen-instructions", "--scenes", "scenes.json", "--out", "instructions.jsonl", "--vocab", "vocab.txt"],
    );
}

#[test]
fn enumerate_counts() {
    let dir = tempfile::tempdir().unwrap();
    let v: Value = serde_json::from_slice(&ok(dir.path(), &["enumerate"]).stdout).unwrap();
    assert_eq!(v["complex_instructions"], 9216);
    assert_eq!(v["object_types"], 48);
    assert_eq!(v["simple_programs"], 108);
}

#[test]
fn generated_data_validates() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), "4");
    let lines = fs::read_to_string(dir.path().join("instructions.jsonl")).unwrap();
    assert!(lines.lines().count() > 300);
    let vocab = fs::read_to_string(dir.path().join("vocab.txt")).unwrap();
    assert_eq!(vocab.lines().next(), Some("<unk>"));
    assert_eq!(vocab.lines().count(), 27);
    let out = ok(dir.path(), &["validate", "--scenes", "scenes.json", "--instructions", "instructions.jsonl"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));
}

#[test]
fn validate_names_a_corrupted_record() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), "5");
    let path = dir.path().join("instructions.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut record: Value = serde_json::from_str(&lines[6]).unwrap();
    let scenes: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("scenes.json")).unwrap()).unwrap();
    let n = scenes["scenes"][record["scene_id"].as_u64().unwrap() as usize]["objects"]
        .as_array()
        .unwrap()
        .len() as u64;
    record["target_id"] = json!((record["target_id"].as_u64().unwrap() + 1) % n);
    lines[6] = record.to_string();
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let out = navgen(dir.path(), &["validate", "--scenes", "scenes.json", "--instructions", "instructions.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("instructions.jsonl:7: record 6"), "{stderr}");
    assert_eq!(stderr.matches(": record ").count(), 1, "{stderr}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(navgen(dir.path(), &["rollout"]).status.code(), Some(2));
    assert_eq!(navgen(dir.path(), &["--seed", "-3", "enumerate"]).status.code(), Some(2));
    assert_eq!(navgen(dir.path(), &["--lexicon", "klingon", "enumerate"]).status.code(), Some(2));
    assert_eq!(navgen(dir.path(), &["gen-scenes", "--count", "3"]).status.code(), Some(2));
    assert_eq!(navgen(dir.path(), &["gen-instructions", "--out", "x.jsonl"]).status.code(), Some(2));
    let max = u64::MAX.to_string();
    ok(dir.path(), &["--seed", &max, "enumerate"]);
}

#[test]
fn rollout_reports() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), "6");
    let common = ["rollout", "--scenes", "scenes.json", "--instructions", "instructions.jsonl", "-n", "50"];
    let noop: Value = serde_json::from_slice(&ok(dir.path(), &[&common[..], &["--policy", "noop"]].concat()).stdout).unwrap();
    assert_eq!(noop["accuracy"], 0.0);
    assert_eq!(noop["timeouts"], noop["episodes"]);

    let args = [&common[..], &["--kind", "simple", "--reward", "dense", "--episodes-out", "eps.jsonl"]].concat();
    let report: Value = serde_json::from_slice(&ok(dir.path(), &args).stdout).unwrap();
    assert_eq!(report["episodes"], 50);
    assert_eq!(report["complex_accuracy"], Value::Null);
    assert_eq!(report["reached_wrong"], 0);
    let eps = fs::read_to_string(dir.path().join("eps.jsonl")).unwrap();
    assert_eq!(eps.lines().count(), 50);
}

#[test]
fn curriculum_from_stage_file() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), "7");
    let stages = json!([
        {"n_objects": 3, "complex_proportion": 0.0, "episode_budget": 20},
        {"n_objects": 5, "complex_proportion": 1.0, "episode_budget": 10}
    ]);
    fs::write(dir.path().join("stages.json"), stages.to_string()).unwrap();
    let out = ok(
        dir.path(),
        &["curriculum", "--scenes", "scenes.json", "--instructions", "instructions.jsonl", "--stages", "stages.json", "--out", "report.json"],
    );
    assert!(out.stdout.is_empty());
    let reports: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(reports[0]["episodes"], 20);
    assert_eq!(reports[0]["complex_episodes"], 0);
    assert_eq!(reports[1]["complex_episodes"], 10);

    let default = ok(
        dir.path(),
        &["curriculum", "--scenes", "scenes.json", "--instructions", "instructions.jsonl", "--budget", "5"],
    );
    let reports: Value = serde_json::from_slice(&default.stdout).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 5);
}

#[test]
fn clevr_import_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let obj = |color: &str, shape: &str, size: &str, x: f64, y: f64| {
        json!({"color": color, "shape": shape, "size": size, "material": "metal", "3d_coords": [x, y, 0.7]})
    };
    let scenes: Vec<Value> = (0..6)
        .map(|i| {
            let dx = i as f64 * 0.1;
            json!({"image_index": i, "objects": [
                obj("red", "cube", "large", -2.0 + dx, 1.0),
                obj("blue", "sphere", "small", 1.5, -0.5 - dx),
                obj("yellow", "cylinder", "large", 0.3, 2.5),
            ]})
        })
        .collect();
    fs::write(dir.path().join("clevr.json"), json!({"info": {"split": "val"}, "scenes": scenes}).to_string()).unwrap();

    ok(
        dir.path(),
        &["--seed", "2", "gen-scenes", "--clevr", "clevr.json", "--select", "random", "--limit", "4", "--out", "scenes.json"],
    );
    let written: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("scenes.json")).unwrap()).unwrap();
    assert_eq!(written["scenes"].as_array().unwrap().len(), 4);
    assert_eq!(written["info"], Value::Null);
    ok(dir.path(), &["--lexicon", "scene", "gen-instructions", "--scenes", "scenes.json", "--out", "i.jsonl"]);
    ok(dir.path(), &["--lexicon", "scene", "validate", "--scenes", "scenes.json", "--instructions", "i.jsonl"]);
    // text written with scene nouns does not parse under the env lexicon
    let out = navgen(dir.path(), &["validate", "--scenes", "scenes.json", "--instructions", "i.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}
