use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn coarsekit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coarsekit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("COARSEKIT_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn amplify_verbatim_prints_power_and_control() {
    let dir = tempfile::tempdir().unwrap();
    let o = coarsekit(&["onl", "amplify", "--c", "0.5", "--target", "0.25", "--mode", "verbatim"], dir.path());
    assert_eq!(code(&o), 0);
    let lines: Vec<_> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines, ["n=2", "g(k)=k+f(2k)"]);
}

#[test]
fn cyclic_twelve_radius() {
    let dir = tempfile::tempdir().unwrap();
    let o = coarsekit(&["cover", "radius", "--source", "z", "--target", "cyclic:12"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "3");
}

#[test]
fn tree_is_zero_hyperbolic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("tree.json"),
        r#"{"points":7,"edges":[[0,1],[0,2],[1,3],[1,4],[2,5],[2,6]],"basepoint":0}"#,
    )
    .unwrap();
    let o = coarsekit(&["space", "delta", "--input", "tree.json"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "0");
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&coarsekit(&["frobnicate"], p)), 2);
    assert_eq!(code(&coarsekit(&["onl", "amplify", "--c", "1.5", "--target", "0.25"], p)), 2);
    assert_eq!(code(&coarsekit(&["sc", "pieces", "--input", "missing.txt"], p)), 3);
    fs::write(p.join("bad.json"), "{not json").unwrap();
    assert_eq!(code(&coarsekit(&["space", "girth", "--input", "bad.json"], p)), 3);
    fs::write(p.join("split.json"), r#"{"points":2,"edges":[],"basepoint":0}"#).unwrap();
    assert_eq!(code(&coarsekit(&["space", "girth", "--input", "split.json"], p)), 4);
}

#[test]
fn ensemble_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = coarsekit(&["onl", "estimate", "--space", "cycle:12", "--radius", "2", "--c", "0.5"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("amp.toml"),
        "command = \"onl amplify\"\nout = \"from_config\"\n\n[params]\nc = 0.5\ntarget = 0.25\nmode = \"verbatim\"\n",
    )
    .unwrap();
    let o = coarsekit(&["--config", "amp.toml"], p);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("g(k)=k+f(2k)"));
    assert!(p.join("from_config/report.json").exists());

    let o = coarsekit(&["--config", "amp.toml", "onl", "amplify", "--mode", "root", "--out", "flags"], p);
    assert_eq!(code(&o), 0);
    assert!(!stdout(&o).contains("k+f(2k)"));
    let report = fs::read_to_string(p.join("flags/report.json")).unwrap();
    assert!(report.contains("\"mode\": \"root\""), "{report}");

    fs::write(p.join("bad.toml"), "command = \"onl floor\"\ncolour = 3\n").unwrap();
    assert_eq!(code(&coarsekit(&["--config", "bad.toml"], p)), 2);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_coarsekit"))
        .args(["onl", "floor", "--degree", "4"])
        .current_dir(dir.path())
        .env("COARSEKIT_OUT", "env_out")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("env_out/report.json").exists());
}

#[test]
fn report_fields_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for out in ["a", "b"] {
        let o = coarsekit(
            &["onl", "estimate", "--space", "cycle:24", "--radius", "2", "--c", "0.5", "--seed", "11", "--out", out],
            p,
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["report.json", "certificate.json"] {
        let a = fs::read(p.join("a").join(name)).unwrap();
        let b = fs::read(p.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(p.join("a/report.json")).unwrap()).unwrap();
    assert_eq!(report["tool"], "coarsekit");
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["seed"], 11);
    assert_eq!(report["command"], "onl estimate");
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert!(report["results"]["certificate"].is_object());
}

#[test]
fn different_parameters_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    coarsekit(&["onl", "floor", "--degree", "4", "--out", "d4"], p);
    coarsekit(&["onl", "floor", "--degree", "6", "--out", "d6"], p);
    let hash = |d: &str| {
        let v: serde_json::Value = serde_json::from_slice(&fs::read(p.join(d).join("report.json")).unwrap()).unwrap();
        v["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash("d4"), hash("d6"));
}

#[test]
fn norm_profile_table() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = coarsekit(
        &["lift", "profile", "--targets", "cyclic:6,cyclic:10,cyclic:14", "--seed", "3", "--out", "o"],
        p,
    );
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(p.join("o/profile.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("m,r_m,norm_lift,norm_base,ratio"));
    assert_eq!(csv.lines().count(), 4);
    let dat = fs::read_to_string(p.join("o/profile.dat")).unwrap();
    assert!(dat.starts_with('#'));
}

#[test]
fn schedule_writes_stage_array() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = coarsekit(&["sc", "schedule", "--powers", "30", "--r0", "4", "--eps0", "0.2", "--out", "s"], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stages: serde_json::Value = serde_json::from_slice(&fs::read(p.join("s/stages.json")).unwrap()).unwrap();
    let arr = stages.as_array().unwrap();
    assert!(arr.len() >= 3);
    for (i, st) in arr.iter().enumerate() {
        assert_eq!(st["stage"], i);
    }
}

#[test]
fn graph_schedule_reports_shortfall() {
    let dir = tempfile::tempdir().unwrap();
    let o = coarsekit(&["sc", "graphs", "--cycle-powers", "2,3,4,5", "--eps0", "0.2"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("shortfall"));
}

#[test]
fn presentation_commands() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("surface.txt"), "# genus two\nabABcdCD\n").unwrap();
    let o = coarsekit(&["sc", "condition", "--input", "surface.txt", "--metric", "0.2"], p);
    assert_eq!(stdout(&o).lines().next(), Some("holds"));
    let o = coarsekit(&["sc", "condition", "--input", "surface.txt", "--metric", "0.1"], p);
    assert_eq!(stdout(&o).lines().next(), Some("fails"));
    let o = coarsekit(&["sc", "pieces", "--input", "surface.txt", "--out", "pc"], p);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(p.join("pc/pieces.csv")).unwrap();
    assert_eq!(csv, "relator,word,length,max_piece\n0,abABcdCD,8,1\n");
}

#[test]
fn relators_from_square() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("sq.json"),
        r#"{"vertices":4,"edges":[{"from":0,"to":1,"label":"a"},{"from":1,"to":2,"label":"b"},{"from":2,"to":3,"label":"a"},{"from":3,"to":0,"label":"b"}]}"#,
    )
    .unwrap();
    let o = coarsekit(&["sc", "relators", "--graph", "sq.json"], p);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1);
    assert_eq!(stdout(&o).trim().len(), 4);
}

#[test]
fn lacunary_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = coarsekit(&["onl", "lacunary", "--sweep", "6", "--out", "l"], p);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("verdict Increasing"));
    let csv = fs::read_to_string(p.join("l/lacunary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(fs::read_to_string(p.join("l/lacunary.dat")).unwrap().starts_with("# m delta r R R_alt"));
}

#[test]
fn unwritable_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("blocker"), "").unwrap();
    let o = coarsekit(&["onl", "floor", "--degree", "4", "--out", "blocker/sub"], p);
    assert_eq!(code(&o), 2);
}
