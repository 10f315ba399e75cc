use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mallnav::layers::load_fused_map;
use mallnav::narrate::describe_position;
use mallnav::pipeline::MapSettings;
use mallnav::raster::Point;
use mallnav::route::{build_walk_graph, Pose};

fn mallnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mallnav")).args(args).output().expect("binary runs")
}

fn mallnav_stdin(args: &[&str], input: &str) -> Output {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_mallnav"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "status {:?}\nstderr: {}", out.status, String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generates a fixture and fuses it; returns (fixture dir, fused map path).
fn fused(root: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let dir = root.join(format!("f{seed}"));
    ok(&mallnav(&["fixture", "--seed", &seed.to_string(), "--out", s(&dir)]));
    ok(&mallnav(&["fuse", "--config", s(&dir.join("config.json"))]));
    let map = dir.join("out/fused_map.json");
    assert!(map.is_file());
    (dir, map)
}

#[test]
fn fixture_is_byte_identical_across_runs() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for d in [&a, &b] {
        ok(&mallnav(&["fixture", "--seed", "7", "--n-stores", "12", "--out", s(d)]));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn fuse_then_eval_reaches_ninety_percent() {
    let t = tempfile::tempdir().unwrap();
    let (dir, _) = fused(t.path(), 2);
    let out = ok(&mallnav(&[
        "eval",
        "--config",
        s(&dir.join("config.json")),
        "--truth",
        s(&dir.join("truth.json")),
        "--json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["overlap"]["overlap_percent"].as_f64().unwrap() >= 90.0, "{out}");
    assert_eq!(v["parking"]["precision"], 1.0);
    assert_eq!(v["parking"]["recall"], 1.0);
    let text = ok(&mallnav(&["eval", "--config", s(&dir.join("config.json"))]));
    assert!(text.starts_with("overlap "), "{text}");
}

#[test]
fn extract_and_register_write_artifacts() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().join("f");
    ok(&mallnav(&["fixture", "--seed", "4", "--n-stores", "6", "--out", s(&dir)]));
    let out = t.path().join("o");
    let cfg = dir.join("config.json");
    let msg = ok(&mallnav(&["extract", "--config", s(&cfg), "--out", s(&out)]));
    assert!(msg.starts_with("6 map stores, 1 parking lots"), "{msg}");
    for f in ["features.json", "roads_mask.png", "parking_mask.png", "walkways_mask.png", "labels_mask.png"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    ok(&mallnav(&["register", "--config", s(&cfg), "--out", s(&out)]));
    let reg: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("registration.json")).unwrap()).unwrap();
    assert_eq!(reg["summary"]["target_points"], 6);
    assert!(out.join("overlay.png").is_file());
}

#[test]
fn walk_where_matches_describe_and_library() {
    let t = tempfile::tempdir().unwrap();
    let (_, map_path) = fused(t.path(), 1);
    let pose = ["--x", "40", "--y", "61.5", "--heading", "90"];
    let mut args = vec!["describe", "--map", s(&map_path)];
    args.extend(pose);
    let described = ok(&mallnav(&args));

    let map = load_fused_map(&map_path).unwrap();
    let st = MapSettings::from_map(&map);
    let g = build_walk_graph(&map, st.grid_step).unwrap();
    let lib = describe_position(&map, &g, Pose::new(Point::new(40.0, 61.5), 90.0), &st.narration).unwrap().text();
    assert_eq!(described, lib);

    let mut args = vec!["walk", "--map", s(&map_path)];
    args.extend(pose);
    let walked = ok(&mallnav_stdin(&args, "where\nquit\n"));
    assert_eq!(walked, lib);
}

#[test]
fn walk_script_and_saved_tags() {
    let t = tempfile::tempdir().unwrap();
    let (_, map_path) = fused(t.path(), 3);
    let script = t.path().join("script.txt");
    fs::write(&script, "turn left\nstep 10\ntag Loose paving here\npoi 2\ndest 2\nfly\n").unwrap();
    let saved = t.path().join("tagged.json");
    let out = ok(&mallnav(&[
        "walk",
        "--map",
        s(&map_path),
        "--x",
        "40",
        "--y",
        "61.5",
        "--heading",
        "90",
        "--script",
        s(&script),
        "--save",
        s(&saved),
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(&lines[..3], ["Facing North.", "Walked 10 feet North.", "Note saved."]);
    assert!(out.contains("will be on your"), "{out}");
    assert!(out.trim_end().ends_with("error: unknown command \"fly\"; try help"), "{out}");
    let tagged = load_fused_map(&saved).unwrap();
    assert_eq!(tagged.tags.len(), 1);
    assert_eq!(tagged.tags[0].text, "Loose paving here");
}

#[test]
fn route_json_and_text_agree() {
    let t = tempfile::tempdir().unwrap();
    let (_, map_path) = fused(t.path(), 5);
    let text = ok(&mallnav(&["route", "--map", s(&map_path), "--from", "1", "--to", "12"]));
    let json = ok(&mallnav(&["route", "--map", s(&map_path), "--from", "1", "--to", "12", "--json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let sentences: Vec<String> =
        v["utterance"]["sentences"].as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string() + "\n").collect();
    assert_eq!(sentences.concat(), text);
    assert_eq!(v["route"]["contains_parking"], false);
    let steps = ok(&mallnav(&["route", "--map", s(&map_path), "--from", "1", "--to", "12", "--unit", "steps"]));
    assert!(steps.contains(" steps"), "{steps}");
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    // usage
    assert_eq!(mallnav(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mallnav(&["describe", "--map", "m.json"]).status.code(), Some(2));
    // input
    let missing = mallnav(&["fuse", "--config", s(&t.path().join("nope.json"))]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: "));
    let (dir, map_path) = fused(t.path(), 1);
    let unknown = mallnav(&["route", "--map", s(&map_path), "--from", "1", "--to", "Nowhere Store"]);
    assert_eq!(unknown.status.code(), Some(3));
    assert_eq!(String::from_utf8_lossy(&unknown.stderr), "error: unknown store Nowhere Store\n");
    let bad_weight = mallnav(&["route", "--map", s(&map_path), "--from", "1", "--to", "2", "--parking", "0.5"]);
    assert_eq!(bad_weight.status.code(), Some(3));
    // pipeline: a seed color found nowhere leaves nothing to register
    let cfg_path = dir.join("config.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["seed_colors"] = serde_json::json!([{"reference": [1, 2, 3], "tolerance": 0}]);
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let failed = mallnav(&["fuse", "--config", s(&cfg_path)]);
    assert_eq!(failed.status.code(), Some(4), "{}", String::from_utf8_lossy(&failed.stderr));
}
