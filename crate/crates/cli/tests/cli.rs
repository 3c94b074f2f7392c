use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fcfb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcfb"))
        .args(args)
        .current_dir(dir)
        .env_remove("FCFB_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const DESIGN: &str = "seed = 4\n[design]\nnumerology = { prbs = 4 }\noverlap = 0.5\ntbw = 2\nas_db = 20.0\n";

fn setup(files: &[(&str, &str)]) -> TempDir {
    let d = TempDir::new().unwrap();
    for (name, body) in files {
        fs::write(d.path().join(name), body).unwrap();
    }
    d
}

#[test]
fn design_reruns_are_byte_identical() {
    let d = setup(&[("run.toml", DESIGN)]);
    for out in ["a", "b"] {
        let o = fcfb(d.path(), &["design", "-c", "run.toml", "-o", out, "--threads", "1"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["mask.txt", "design.csv", "manifest.json"] {
        let a = fs::read(d.path().join("a").join(f)).unwrap();
        let b = fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let mask = fs::read_to_string(d.path().join("a/mask.txt")).unwrap();
    assert!(mask.starts_with("fcfb-mask 1\nn 1024\nl 128\nls 64\n"));
}

#[test]
fn designed_mask_feeds_analysis() {
    let d = setup(&[("run.toml", DESIGN)]);
    assert!(fcfb(d.path(), &["design", "-c", "run.toml", "-o", "d"]).status.success());
    let o = fcfb(d.path(), &["analyze", "-c", "run.toml", "-o", "a", "--mask", "d/mask.txt"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let evm = fs::read_to_string(d.path().join("a/evm_subcarriers.csv")).unwrap();
    let mut lines = evm.lines();
    assert!(lines.next().unwrap().starts_with("# run "));
    assert_eq!(lines.next().unwrap(), "center,subcarrier,offset,evm_from_db,evm_into_db");
    assert_eq!(lines.count(), 48);
    let sblr = fs::read_to_string(d.path().join("a/sblr.csv")).unwrap();
    assert_eq!(sblr.lines().count(), 2 + 11);
}

#[test]
fn invalid_value_exits_2_naming_the_constraint() {
    let bad = DESIGN.replace("overlap = 0.5", "overlap = 1.5");
    let d = setup(&[("run.toml", &bad)]);
    let o = fcfb(d.path(), &["design", "-c", "run.toml", "-o", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("overlap factor 1.5 outside [0, 1)"), "{}", stderr(&o));
    assert!(!d.path().join("out").exists());
}

#[test]
fn unknown_field_exits_2() {
    let d = setup(&[("run.toml", &format!("{DESIGN}stopband = 3\n"))]);
    let o = fcfb(d.path(), &["design", "-c", "run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field `stopband`"), "{}", stderr(&o));
}

#[test]
fn empty_subband_list_exits_2() {
    let d = setup(&[
        ("a.toml", &format!("{DESIGN}[analyze]\ncenters = []\n")),
        ("l.toml", "[link]\ntarget = { subbands = [] }\n"),
    ]);
    let o = fcfb(d.path(), &["analyze", "-c", "a.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty subband list"));
    let o = fcfb(d.path(), &["linksim", "-c", "l.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty subband list"));
}

#[test]
fn mismatched_mask_file_is_rejected() {
    let d = setup(&[("run.toml", DESIGN), ("wide.toml", &DESIGN.replace("tbw = 2", "tbw = 3"))]);
    assert!(fcfb(d.path(), &["design", "-c", "run.toml", "-o", "d"]).status.success());
    let o = fcfb(d.path(), &["analyze", "-c", "wide.toml", "--mask", "d/mask.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tbw = 2"), "{}", stderr(&o));
}

#[test]
fn complexity_table_layout() {
    let d = setup(&[]);
    let o = fcfb(d.path(), &["complexity", "-o", "c", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("c/complexity.json")).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["config"].as_str().unwrap()).collect();
    assert_eq!(names, ["1 PRB", "1 PRB", "4 PRB", "4 PRB", "50 PRB", "50 PRB", "12x4 PRB", "12x4 PRB"]);
    assert_eq!(rows[0]["overlap"], 0.5);
    assert_eq!(rows[1]["overlap"], 0.25);
    assert_eq!(rows[2]["f_ofdm_muls"], 284.75);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("c/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["outputs"][0], "complexity.json");
    assert_eq!(m["run_id"], v["run_id"]);
}

#[test]
fn includes_merge_and_the_including_file_wins() {
    let d = setup(&[
        ("base.toml", "[complexity]\noverlaps = [0.5, 0.25]\ngroups = [{ count = 1, prbs = 4 }]\n"),
        ("run.toml", "include = [\"base.toml\"]\n[complexity]\noverlaps = [0.75]\n"),
        ("loop_a.toml", "include = [\"loop_b.toml\"]\n"),
        ("loop_b.toml", "include = [\"loop_a.toml\"]\n"),
    ]);
    let o = fcfb(d.path(), &["complexity", "-c", "run.toml", "-o", "c"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = fs::read_to_string(d.path().join("c/complexity.csv")).unwrap();
    let rows: Vec<&str> = t.lines().skip(2).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("4 PRB,0.75,"));
    let o = fcfb(d.path(), &["complexity", "-c", "loop_a.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("include cycle"));
}

#[test]
fn seed_flag_overrides_and_changes_the_run_id() {
    let cfg = "seed = 1\n[link]\n[[link.target.subbands]]\nnumerology = { prbs = 1 }\n[link.channel]\nsnr_db = 10.0\n";
    let d = setup(&[("run.toml", cfg)]);
    let id = |out: &str, extra: &[&str]| {
        let mut args = vec!["linksim", "-c", "run.toml", "-o", out];
        args.extend_from_slice(extra);
        let o = fcfb(d.path(), &args);
        assert!(o.status.success(), "{}", stderr(&o));
        let m: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join(out).join("manifest.json")).unwrap()).unwrap();
        (m["run_id"].as_str().unwrap().to_string(), fs::read_to_string(d.path().join(out).join("summary.csv")).unwrap())
    };
    let (a, sa) = id("a", &[]);
    let (b, sb) = id("b", &["--seed", "1"]);
    let (c, sc) = id("c", &["--seed", "2"]);
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert_ne!(a, c);
    assert_ne!(sa.lines().nth(2), sc.lines().nth(2));
}

#[test]
fn missing_section_and_zero_threads_exit_2() {
    let d = setup(&[("run.toml", DESIGN)]);
    assert_eq!(fcfb(d.path(), &["psd", "-c", "run.toml"]).status.code(), Some(2));
    assert_eq!(fcfb(d.path(), &["design", "-c", "run.toml", "--threads", "0"]).status.code(), Some(2));
    assert_eq!(fcfb(d.path(), &["design", "-c", "absent.toml"]).status.code(), Some(2));
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let d = setup(&[]);
    for (cmd, file) in [
        ("design", "design_4prb.toml"),
        ("analyze", "design_4prb.toml"),
        ("psd", "psd_dl.toml"),
        ("linksim", "link_fc.toml"),
        ("linksim", "link_uplink.toml"),
        ("complexity", "complexity.toml"),
    ] {
        let cfg = root.join(file);
        let out = d.path().join(format!("{cmd}_{file}"));
        let o = fcfb(d.path(), &[cmd, "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
        assert!(o.status.success(), "{cmd} {file}: {}", stderr(&o));
        assert!(out.join("manifest.json").exists());
    }
}
