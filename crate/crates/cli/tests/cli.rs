use std::path::Path;
use std::process::{Command, Output};

fn srlift(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srlift"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run srlift")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path) {
    let o = srlift(
        dir,
        &[
            "synth-data",
            "--seed",
            "2",
            "--out",
            "d.txt",
            "--subjects",
            "3",
            "--frames",
            "24",
            "--cameras",
            "1",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

fn train_run(dir: &Path, out: &str) {
    let o = srlift(
        dir,
        &[
            "train", "--data", "d.txt", "--model", "sr", "--width", "24", "--layers", "4",
            "--epochs", "2", "--batch", "16", "--seed", "5", "--out", out,
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn param_count_of_default_fc() {
    let d = tempfile::tempdir().unwrap();
    let o = srlift(
        d.path(),
        &[
            "param-count",
            "--model",
            "fc",
            "--joints",
            "17",
            "--width",
            "1024",
            "--layers",
            "8",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "6400051");
}

#[test]
fn unknown_flag_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = srlift(d.path(), &["param-count", "--model", "fc", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn missing_seed_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    let o = srlift(d.path(), &["synth-data", "--out", "d.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
    assert!(!d.path().join("d.txt").exists());
}

#[test]
fn invalid_config_names_the_invariant() {
    let d = tempfile::tempdir().unwrap();
    let o = srlift(d.path(), &["param-count", "--model", "sfs", "--link", "7"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("L_link"), "{}", stderr(&o));
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("c.cfg"),
        "# model\nmodel = fc\njoints = 17\nwidth = 512\nlayers = 8\n",
    )
    .unwrap();
    let o = srlift(
        d.path(),
        &["param-count", "--config", "c.cfg", "--width", "1024"],
    );
    assert_eq!(stdout(&o).trim(), "6400051", "{}", stderr(&o));
    std::fs::write(d.path().join("bad.cfg"), "colour = blue\n").unwrap();
    let o = srlift(d.path(), &["param-count", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_eval_report_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p);
    assert!(p.join("d.txt.manifest.json").exists());
    train_run(p, "run");
    for f in ["last.ckpt", "train_log.tsv", "manifest.json"] {
        assert!(p.join("run").join(f).exists(), "{f}");
    }
    let o = srlift(
        p,
        &[
            "eval",
            "--ckpt",
            "run/last.ckpt",
            "--data",
            "d.txt",
            "--flip-test",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = srlift(
        p,
        &[
            "eval",
            "--ckpt",
            "run/last.ckpt",
            "--data",
            "d.txt",
            "--protocol",
            "rare-pose",
            "--rare",
            "20",
            "--out",
            "rare.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = |f: &str| std::fs::read_to_string(p.join(f)).unwrap().lines().count() - 1;
    let o = srlift(
        p,
        &["report", "--runs", "run", "rare.csv", "--out", "all.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows("all.csv"), rows("run/report.csv") + rows("rare.csv"));
}

#[test]
fn normalization_mismatch_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p);
    train_run(p, "run");
    let o = srlift(
        p,
        &[
            "eval",
            "--ckpt",
            "run/last.ckpt",
            "--data",
            "d.txt",
            "--normalization",
            "pixel",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mismatch"));
}

#[test]
fn rank_rare_full_percentage_lists_every_pose() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p);
    let o = srlift(
        p,
        &[
            "rank-rare",
            "--data",
            "d.txt",
            "--sigma",
            "100",
            "--R",
            "100",
            "--out",
            "r.tsv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(p.join("r.tsv")).unwrap();
    assert_eq!(text.lines().count() - 1, 3 * 4 * 24);
}

#[test]
fn replaying_the_manifest_reproduces_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p);
    train_run(p, "run");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("run/manifest.json")).unwrap())
            .unwrap();
    let mut argv: Vec<String> = manifest["argv"]
        .as_array()
        .unwrap()
        .iter()
        .skip(1)
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let out = argv.iter().position(|a| a == "--out").unwrap();
    argv[out + 1] = "replay".into();
    let args: Vec<&str> = argv.iter().map(String::as_str).collect();
    let o = srlift(p, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |f: &str| std::fs::read(p.join(f)).unwrap();
    assert_eq!(read("run/last.ckpt"), read("replay/last.ckpt"));
}
