use std::path::Path;
use std::process::{Command, Output};

use copuf::InstanceDescriptor;

fn copuf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copuf"))
        .args(args)
        .current_dir(dir)
        .env("COPUF_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = copuf(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn gen_writes_named_loop_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let stdout = ok(p, &["gen", "--arch", "ff", "--n", "64", "--loops", "Loop_B", "--seed", "7"]);
    assert!(stdout.contains("loops = \"15→25,30\""), "{stdout}");
    let first = std::fs::read(p.join("loop-b-s7.toml")).unwrap();
    ok(p, &["gen", "--arch", "ff", "--n", "64", "--loops", "Loop_B", "--seed", "7"]);
    assert_eq!(std::fs::read(p.join("loop-b-s7.toml")).unwrap(), first);
}

#[test]
fn gen_oax_has_six_members() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["gen", "--arch", "oax-ff", "--xyz", "2,3,1", "--loops", "Loop_A", "-o", "oax.toml"]);
    let d = InstanceDescriptor::load(p.join("oax.toml")).unwrap();
    let copuf::PufInstance::OaxFf(inst) = d.build().unwrap() else {
        panic!("not an OAX instance")
    };
    assert_eq!(inst.members().count(), 6);
    assert_eq!(inst.xyz(), (2, 3, 1));
}

#[test]
fn unknown_loop_id_names_valid_ids() {
    let dir = tempfile::tempdir().unwrap();
    let out = copuf(dir.path(), &["gen", "--arch", "ff", "--loops", "Loop_Z"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("Loop_A") && err.contains("Loop_G"), "{err}");
    let out = copuf(dir.path(), &["gen", "--arch", "muxpuf"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn metrics_noise_free_and_repeats_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["gen", "--arch", "apuf", "--seed", "1", "-o", "a.toml"]);
    let out = ok(
        p,
        &["metrics", "--instance", "a.toml", "--sigma", "0", "--challenges", "500", "--repeats", "7"],
    );
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["ber"]["ber"], 0.0);
    assert_eq!(v["ber"]["repeats"], 7);
    let reports = std::fs::read_to_string(p.join("reports.jsonl")).unwrap();
    assert_eq!(reports.lines().count(), 1);
    assert!(reports.contains("\"kind\":\"metrics\""));
}

#[test]
fn config_file_sits_below_flags() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("c.toml"), "[metrics]\nrepeats = 3\nchallenges = 200\n").unwrap();
    ok(p, &["gen", "--arch", "apuf", "-o", "a.toml"]);
    let from_file = ok(p, &["--config", "c.toml", "metrics", "--instance", "a.toml"]);
    let v: serde_json::Value = serde_json::from_str(from_file.trim()).unwrap();
    assert_eq!(v["ber"]["repeats"], 3);
    let from_flag = ok(p, &["--config", "c.toml", "metrics", "--instance", "a.toml", "--repeats", "5"]);
    let v: serde_json::Value = serde_json::from_str(from_flag.trim()).unwrap();
    assert_eq!(v["ber"]["repeats"], 5);
    assert_eq!(v["ber"]["challenges"], 200);

    std::fs::write(p.join("bad.toml"), "repeatz = 3\n").unwrap();
    let out = copuf(p, &["--config", "bad.toml", "metrics", "--instance", "a.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn crps_are_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["gen", "--arch", "xor-ff", "--loops", "Loop_A", "--z", "2", "--seed", "4", "-o", "x.toml"]);
    let run = |out: &str, threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_copuf"))
            .args(["crps", "--instance", "x.toml", "--count", "9000", "--seed", "11", "-o", out])
            .current_dir(p)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(p.join(out)).unwrap()
    };
    let a = run("a.crp", "1");
    let b = run("b.crp", "1");
    let c = run("c.crp", "4");
    assert_eq!(a, b);
    assert_eq!(a, c);
    ok(
        p,
        &["crps", "--instance", "x.toml", "--count", "300", "-o", "s.crp", "--csv", "s.csv"],
    );
    let csv = std::fs::read_to_string(p.join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 301);
}

fn small_ff_datasets(p: &Path) {
    ok(p, &["gen", "--arch", "ff", "--loops", "Loop_B", "--seed", "2", "-o", "ff.toml"]);
    for (name, count, seed) in [("tr.crp", "3000", "1"), ("va.crp", "500", "2"), ("te.crp", "500", "3")] {
        ok(
            p,
            &["crps", "--instance", "ff.toml", "--count", count, "--sigma", "0", "--seed", seed, "-o", name],
        );
    }
}

#[test]
fn attack_auto_l_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_ff_datasets(p);
    let out = ok(
        p,
        &[
            "attack", "--train", "tr.crp", "--val", "va.crp", "--test", "te.crp", "--instance", "ff.toml", "--l",
            "auto", "--epochs", "4",
        ],
    );
    assert!(out.contains("hidden [4, 8, 4]"), "{out}");
    let rerun = ok(p, &["rerun", "reports.jsonl"]);
    assert!(rerun.contains("reproduced exactly"), "{rerun}");

    let out = ok(
        p,
        &[
            "attack", "--train", "tr.crp", "--test", "te.crp", "--arch", "ff", "--loops", "Loop_B", "--l", "2",
            "--epochs", "2",
        ],
    );
    assert!(out.contains("hidden [2, 4, 2]"), "{out}");
}

#[test]
fn attack_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_ff_datasets(p);
    let missing = copuf(
        p,
        &["attack", "--train", "tr.crp", "--test", "nope.crp", "--instance", "ff.toml"],
    );
    assert_eq!(missing.status.code(), Some(3));
    assert!(stderr(&missing).contains("nope.crp"));

    let bad_l = copuf(
        p,
        &["attack", "--train", "tr.crp", "--test", "te.crp", "--instance", "ff.toml", "--l", "zero"],
    );
    assert_eq!(bad_l.status.code(), Some(2));

    let diverged = copuf(
        p,
        &[
            "attack", "--train", "tr.crp", "--test", "te.crp", "--instance", "ff.toml", "--epochs", "2", "--lr",
            "1.7e308",
        ],
    );
    assert_eq!(diverged.status.code(), Some(4), "{}", stderr(&diverged));

    std::fs::write(p.join("junk.crp"), b"COPUFCRP\x01\x00").unwrap();
    let junk = copuf(
        p,
        &["attack", "--train", "junk.crp", "--test", "te.crp", "--instance", "ff.toml"],
    );
    assert_eq!(junk.status.code(), Some(3));
}

#[test]
fn reproduce_dry_run_lists_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = ok(p, &["reproduce", "table9", "--dry-run"]);
    for id in ["loop-b", "loop-c", "loop-e", "loop-f", "loop-g", "loop-d", "m64"] {
        assert!(out.lines().any(|l| l.starts_with(id) && l.contains("plan:")), "{id}\n{out}");
    }
    let out = ok(p, &["reproduce", "table2", "--sigma", "0.02", "--dry-run"]);
    assert_eq!(out.lines().filter(|l| l.contains("sigma=0.02")).count(), 5);
    assert!(!p.join("reports.jsonl").exists());

    let out = copuf(p, &["reproduce", "table9", "--rows", "loop-z"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_runs_and_reruns_a_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = ok(p, &["reproduce", "table9", "--rows", "loop-b", "--epochs", "2", "--seed", "3"]);
    assert!(out.contains("published 0.955"), "{out}");
    assert!(ok(p, &["rerun", "reports.jsonl"]).contains("reproduced exactly"));

    let out = ok(
        p,
        &["reproduce", "table4", "--rows", "loop-b", "--challenges", "300", "--repeats", "3"],
    );
    assert!(out.contains("published 0.405"), "{out}");
    assert!(ok(p, &["rerun", "reports.jsonl"]).contains("reproduced exactly"));
}
