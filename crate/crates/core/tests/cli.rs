use std::io::Cursor;
use std::path::Path;

use clap::Parser;
use textgrid::app::{run, Cli};

const TINY: &str = r#"
seed = 3
total_steps = 120
[env]
num_distractors = 2
task_families = ["go_to"]
action_space = "restricted"
[policy]
dims = { embed = 6, hidden = 7, pair_buckets = 31, max_prefix = 3 }
[ppo]
num_envs = 2
steps_per_env = 30
batch_size = 30
epochs = 1
[bc]
dataset_size = 60
batch_size = 20
[eval]
episodes = 6
seeds = [1, 2]
"#;

fn textgrid(dir: &Path, args: &[&str], stdin: &str) -> Result<String, String> {
    let config = dir.join("tiny.toml");
    if !config.exists() {
        std::fs::write(&config, TINY).unwrap();
    }
    let run_dir = dir.join("run");
    let mut argv = vec![
        "textgrid".to_string(),
        "--config".into(),
        config.display().to_string(),
        "--run-dir".into(),
        run_dir.display().to_string(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    let cli = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    run(cli, &mut Cursor::new(stdin.as_bytes().to_vec()), &mut out).map_err(|e| e.to_string())?;
    Ok(String::from_utf8(out).unwrap())
}

#[test]
fn train_resume_eval_trace_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = textgrid(d, &["train-ppo"], "").unwrap();
    assert!(out.contains("update     2"), "{out}");
    assert!(d.join("run/checkpoint.bin").exists());
    assert!(d.join("run/config.toml").exists());
    let out = textgrid(d, &["train-ppo", "--resume", "--total-steps", "240"], "").unwrap();
    assert!(out.contains("training from update 2"), "{out}");
    let metrics = std::fs::read_to_string(d.join("run/metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 4);

    let trace = d.join("trace.jsonl");
    let traced = textgrid(d, &["eval", "--trace", trace.to_str().unwrap()], "").unwrap();
    let plain = textgrid(d, &["eval"], "").unwrap();
    assert_eq!(traced, plain);
    let replay = textgrid(d, &["replay", "--trace", trace.to_str().unwrap()], "").unwrap();
    assert_eq!(replay.lines().count(), 12, "{replay}");
    assert!(replay.lines().all(|l| l.contains("reproduced")));

    // a tampered trace is caught
    let text = std::fs::read_to_string(&trace).unwrap();
    let tampered = text.replacen("\"success\":false", "\"success\":true", 1);
    assert_ne!(tampered, text);
    std::fs::write(&trace, tampered).unwrap();
    assert!(textgrid(d, &["replay", "--trace", trace.to_str().unwrap()], "").is_err());
}

#[test]
fn bot_eval_per_task() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY.replace("\"restricted\"", "\"canonical\"")).unwrap();
    let out = textgrid(dir.path(), &["eval", "--policy", "bot", "--task", "pick_up", "--episodes", "5"], "").unwrap();
    assert!(out.starts_with("bot: success rate 1.000"), "{out}");
    assert!(out.contains("pick_up"));
    assert!(textgrid(dir.path(), &["eval", "--policy", "bot", "--task", "fly"], "").is_err());
}

#[test]
fn collect_then_behavior_cloning_then_probe() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("tiny.toml"), TINY.replace("\"restricted\"", "\"canonical\"")).unwrap();
    let data = d.join("bc.jsonl");
    textgrid(d, &["collect", "--policy", "bot", "--n", "60", "--out", data.to_str().unwrap()], "").unwrap();
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 60);
    let model = d.join("bc.bin");
    let out = textgrid(
        d,
        &["train-bc", "--dataset", data.to_str().unwrap(), "--out", model.to_str().unwrap()],
        "",
    )
    .unwrap();
    assert!(out.contains("60 records, 3 steps"), "{out}");
    let probes = textgrid(d, &["probe", "--checkpoint", model.to_str().unwrap()], "").unwrap();
    assert_eq!(probes.lines().count(), 11);
    let gen = textgrid(
        d,
        &["generalize", "--policy", "checkpoint", "--checkpoint", model.to_str().unwrap(), "--variants", "no_change,invented"],
        "",
    )
    .unwrap();
    assert!(gen.contains("no_change") && gen.contains("invented"), "{gen}");
}

#[test]
fn play_reads_one_key_per_action() {
    let dir = tempfile::tempdir().unwrap();
    let out = textgrid(dir.path(), &["play", "--no-render", "--env-seed", "4"], "0 1\n2x q").unwrap();
    assert!(out.contains("Action 1: go forward"), "{out}");
    assert!(out.contains("unknown key 'x'"));
    assert!(out.trim_end().ends_with("quit"));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), "[ppo]\nclip_eps = 3.0\n").unwrap();
    let err = textgrid(dir.path(), &["eval", "--policy", "random"], "").unwrap_err();
    assert!(err.contains("clip"), "{err}");
    assert!(textgrid(dir.path(), &["train-ppo", "--bogus"], "").is_err());
}
