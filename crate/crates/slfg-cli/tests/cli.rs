//! Integration tests driving the compiled `slfg` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use slfg_core::fixture::{build_fixture, Fixture};

const SLFG_ENV_VARS: &[&str] = &[
    "SLFG_CONFIG",
    "SLFG_INTERVAL",
    "SLFG_GROUP_SIZE",
    "SLFG_THRESHOLD",
    "SLFG_STRATEGY",
    "SLFG_MAX_FRAMES",
    "SLFG_TOPN_N",
    "SLFG_INDEX_ROOT",
    "SLFG_FRAMES_ROOT",
    "SLFG_JOBS",
    "SLFG_MOCK_FIXTURES",
];

fn slfg(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_slfg"));
    for var in SLFG_ENV_VARS {
        cmd.env_remove(var);
    }
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn slfg")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        stdout_of(out),
        stderr_of(out)
    );
}

struct Env {
    _tmp: tempfile::TempDir,
    fixture: Fixture,
    frames_root: PathBuf,
    index_root: PathBuf,
    mock_file: PathBuf,
}

fn fixture_env() -> Env {
    let tmp = tempfile::tempdir().unwrap();
    let frames_root = tmp.path().join("frames");
    let index_root = tmp.path().join("index");
    let fixture = build_fixture(&frames_root, "clip01").unwrap();
    let mock_file = tmp.path().join("mock_fixtures.json");
    fixture.write_mock_file(&mock_file).unwrap();
    Env {
        _tmp: tmp,
        fixture,
        frames_root,
        index_root,
        mock_file,
    }
}

fn base_args(env: &Env) -> Vec<String> {
    vec![
        "--mock".to_string(),
        "--mock-fixtures".to_string(),
        env.mock_file.display().to_string(),
        "--frames-root".to_string(),
        env.frames_root.display().to_string(),
        "--index-root".to_string(),
        env.index_root.display().to_string(),
    ]
}

fn run_in(env: &Env, extra: &[&str]) -> Output {
    let mut args = base_args(env);
    args.extend(extra.iter().map(|s| s.to_string()));
    let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
    slfg(&arg_refs, &[])
}

#[test]
fn flag_env_file_default_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let config_file = tmp.path().join("slfg.toml");
    std::fs::write(
        &config_file,
        "[sampling]\ninterval_ms = 5000\n\n[selection]\nmax_frames = 24\n",
    )
    .unwrap();
    let cfg = config_file.display().to_string();

    // default
    let out = slfg(&["index", "x", "--dry-run"], &[]);
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(text.contains("interval_ms = 10000"), "{text}");
    assert!(text.contains("max_frames = 64"), "{text}");

    // file overrides default
    let out = slfg(&["--config", &cfg, "index", "x", "--dry-run"], &[]);
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(text.contains("interval_ms = 5000"), "{text}");
    assert!(text.contains("max_frames = 24"), "{text}");

    // env overrides file
    let out = slfg(
        &["--config", &cfg, "index", "x", "--dry-run"],
        &[("SLFG_INTERVAL", "7"), ("SLFG_MAX_FRAMES", "48")],
    );
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(text.contains("interval_ms = 7000"), "{text}");
    assert!(text.contains("max_frames = 48"), "{text}");

    // flag overrides env and file
    let out = slfg(
        &[
            "--config",
            &cfg,
            "--interval",
            "9",
            "--max-frames",
            "32",
            "index",
            "x",
            "--dry-run",
        ],
        &[("SLFG_INTERVAL", "7"), ("SLFG_MAX_FRAMES", "48")],
    );
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(text.contains("interval_ms = 9000"), "{text}");
    assert!(text.contains("max_frames = 32"), "{text}");
}

#[test]
fn config_errors_surface_before_any_model_call() {
    let out = slfg(&["--threshold", "1.5", "index", "x"], &[]);
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("threshold"));
}

#[test]
fn ingest_synthesizes_manifest_from_a_preextracted_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let pre = tmp.path().join("pre");
    std::fs::create_dir_all(&pre).unwrap();
    for i in 0..4u64 {
        std::fs::write(
            pre.join(format!("frame_{:08}.jpg", i * 10_000)),
            [0xFF, 0xD8],
        )
        .unwrap();
    }
    let out_dir = tmp.path().join("out");
    let out = slfg(
        &[
            "ingest",
            pre.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--video-id",
            "pre",
        ],
        &[],
    );
    assert_success(&out);
    assert!(out_dir.join("manifest.json").is_file());
    assert!(out_dir.join("frame_00030000.jpg").is_file());
    let text = stdout_of(&out);
    assert!(text.contains("frames:          4"), "{text}");
}

#[test]
fn ingest_from_video_reports_the_missing_tool() {
    if slfg_core::frames::tool_on_path("ffmpeg") {
        return; // covered by live-extraction environments
    }
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("clip.mp4");
    std::fs::write(&video, b"not a video").unwrap();
    let out = slfg(
        &["ingest", video.to_str().unwrap(), "--video-id", "clip"],
        &[],
    );
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("ffmpeg"));
}

#[test]
fn index_builds_then_hits_the_cache() {
    let env = fixture_env();
    let out = run_in(&env, &["index", "clip01"]);
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(text.contains("source:   built"), "{text}");
    assert!(text.contains("groups:   12"), "{text}");
    assert!(text.contains("describe=12"), "{text}");

    let out = run_in(&env, &["index", "clip01"]);
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(text.contains("source:   cache"), "{text}");
    assert!(text.contains("describe=0"), "{text}");
}

#[test]
fn ask_prints_answer_and_provenance() {
    let env = fixture_env();
    let q = &env.fixture.questions[7]; // single-evidence question for group 7
    let question = q.record.question.clone();
    let options: Vec<String> = q
        .record
        .options
        .iter()
        .map(|o| format!("{}={}", o.label, o.text))
        .collect();

    let mut args: Vec<&str> = vec!["ask", "clip01", "--question", &question];
    for o in &options {
        args.push("--option");
        args.push(o);
    }
    let out = run_in(&env, &args);
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(
        text.contains(&format!("choice:          {}", q.record.answer)),
        "{text}"
    );
    assert!(text.contains("selected groups: [7]"), "{text}");
    assert!(text.contains("frames sent:     64"), "{text}");
    assert!(text.contains("frame span:"), "{text}");
}

#[test]
fn ask_dry_run_makes_no_answer_calls() {
    let env = fixture_env();
    let q = &env.fixture.questions[3];
    let question = q.record.question.clone();
    let out = run_in(&env, &["--dry-run", "ask", "clip01", "--question", &question]);
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(text.contains("dry run"), "{text}");
    assert!(text.contains("answer=0"), "{text}");
    assert!(text.contains("rank"), "score table expected: {text}");
}

#[test]
fn eval_writes_reports() {
    let env = fixture_env();
    let dataset = env._tmp.path().join("dataset.jsonl");
    env.fixture.write_dataset(&dataset).unwrap();
    let out_dir = env._tmp.path().join("reports");

    let out = run_in(
        &env,
        &[
            "eval",
            dataset.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
    );
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(text.contains("accuracy:   1.0000"), "{text}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["accuracy"], 1.0);
    assert_eq!(report["total"], 20);
    let report_txt = std::fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(report_txt.contains("per video"));
}

#[test]
fn eval_dry_run_plans_without_answer_calls() {
    let env = fixture_env();
    let dataset = env._tmp.path().join("dataset.jsonl");
    env.fixture.write_dataset(&dataset).unwrap();

    let out = run_in(&env, &["--dry-run", "eval", dataset.to_str().unwrap()]);
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(text.contains("answer=0"), "{text}");
    assert!(text.contains("record  19"), "{text}");
}

#[test]
fn inspect_shows_groups_and_score_table() {
    let env = fixture_env();
    let q = &env.fixture.questions[4];
    let question = q.record.question.clone();
    let out = run_in(&env, &["inspect", "clip01", "--question", &question]);
    assert_success(&out);
    let text = stdout_of(&out);
    assert!(text.contains("12 groups"), "{text}");
    assert!(text.contains("group   0 [    0s,   160s)  16 frames"), "{text}");
    assert!(text.contains("scene 4.0:"), "{text}");
    // the score table ranks the planted group first
    let rank_line = text
        .lines()
        .find(|l| l.trim_start().starts_with("1 "))
        .unwrap_or_default();
    assert!(rank_line.contains(" 4 "), "rank line: {rank_line}");
}

#[test]
fn unknown_video_fails_with_one_line_cause() {
    let env = fixture_env();
    let out = run_in(&env, &["index", "no-such-video"]);
    assert!(!out.status.success());
    let err = stderr_of(&out);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("manifest"), "{err}");
}
