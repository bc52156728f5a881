use std::path::Path;
use std::process::{Command, Output};

fn rainbow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rainbow")).args(args).env("RAINBOW_THREADS", "1").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Header entries and data rows of a CSV with `# key = value` comments.
fn parse(csv: &str) -> (Vec<(String, String)>, Vec<String>, Vec<Vec<String>>) {
    let mut header = Vec::new();
    let mut lines = csv.lines();
    let mut columns = Vec::new();
    for line in lines.by_ref() {
        if let Some(kv) = line.strip_prefix("# ") {
            let (k, v) = kv.split_once(" = ").expect("key = value");
            header.push((k.to_string(), v.to_string()));
        } else {
            columns = line.split(',').map(String::from).collect();
            break;
        }
    }
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, columns, rows)
}

fn header_value<'a>(h: &'a [(String, String)], key: &str) -> &'a str {
    &h.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no {key} in header")).1
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn verify_eig_ten_by_two() {
    let o = rainbow(&["verify-eig", "--lx", "10", "--ly", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, columns, rows) = parse(&stdout(&o));
    assert_eq!(header[0].0, "version");
    assert_eq!(header_value(&header, "lx"), "10");
    let r = columns.iter().position(|c| c == "residual").unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert!(row[r].parse::<f64>().unwrap() < 1e-10);
    }
}

#[test]
fn teleport_without_measurement_or_evolution() {
    let o = rainbow(&["teleport", "--lx", "4", "--ly", "1", "--e-pairs", "0", "--t-max", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, columns, rows) = parse(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let get = |name: &str| rows[0][columns.iter().position(|c| c == name).unwrap()].parse::<f64>().unwrap();
    assert!((get("P") - 1.0).abs() < 1e-12);
    assert!((get("F") - 0.5).abs() < 1e-12);
}

#[test]
fn missing_lx_is_a_config_error() {
    let o = rainbow(&["verify-eig", "--ly", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lx"));
}

#[test]
fn unknown_flag_prints_usage() {
    let o = rainbow(&["verify-eig", "--lx", "4", "--ly", "2", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).to_lowercase().contains("usage"));
}

#[test]
fn unknown_subcommand_is_rejected() {
    assert_eq!(rainbow(&["simulate"]).status.code(), Some(2));
}

#[test]
fn flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "lx = 4\nly = 2\njx = 1.0\n");
    let o = rainbow(&["verify-eig", "--config", &cfg, "--jx", "2.0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, _, _) = parse(&stdout(&o));
    assert_eq!(header_value(&header, "jx"), "2");
    assert_eq!(header_value(&header, "lx"), "4");
}

#[test]
fn empty_file_gives_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "");
    let o = rainbow(&["engineer-iterate", "--config", &cfg, "--lx", "4", "--ly", "1", "--steps", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, _, rows) = parse(&stdout(&o));
    assert_eq!(header_value(&header, "jx"), "1");
    assert_eq!(header_value(&header, "jy"), "1.2");
    assert_eq!(header_value(&header, "T"), "0.4");
    assert_eq!(rows.len(), 3);
}

#[test]
fn duplicate_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "dup.toml", "lx = 4\nly = 2\nlx = 6\n");
    let o = rainbow(&["verify-eig", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn malformed_file_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "lx = 4\nly 2\n");
    let o = rainbow(&["verify-eig", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn invalid_geometry_is_a_config_error() {
    assert_eq!(rainbow(&["verify-eig", "--lx", "3", "--ly", "2"]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_one() {
    let o = rainbow(&["verify-eig", "--lx", "4", "--ly", "2", "--residual-tol", "0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    let out = dir.path().join("run.csv");
    for _ in 0..2 {
        let o = rainbow(&[
            "trajectories", "--lx", "2", "--ly", "3", "--n-traj", "16", "--seed", "5", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let csv = std::fs::read(&out).unwrap();
        let json = std::fs::read(out.with_extension("json")).unwrap();
        outputs.push((csv, json));
        std::fs::remove_file(&out).unwrap();
    }
    assert_eq!(outputs[0], outputs[1]);
    let (_, columns, rows) = parse(std::str::from_utf8(&outputs[0].0).unwrap());
    assert_eq!(columns, ["traj_id", "n_tot", "n_c", "converged"]);
    assert_eq!(rows.len(), 16);

    let o = rainbow(&["trajectories", "--lx", "2", "--ly", "3", "--n-traj", "16", "--seed", "6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(std::fs::read(&out).unwrap(), outputs[0].0);
}

#[test]
fn summary_json_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("s.json");
    let o = rainbow(&["trajectories", "--lx", "2", "--ly", "3", "--n-traj", "8", "--summary", summary.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&summary).unwrap()).unwrap();
    assert_eq!(v["n_traj"], 8);
    assert!(v["config"].is_object() || v["config"].is_array());
    assert!(v["n_converged"].as_u64().unwrap() <= 8);
}

#[test]
fn gap_sweep_output() {
    let o = rainbow(&["engineer-gap", "--lx", "4", "--ly", "1", "--t-steps", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, columns, rows) = parse(&stdout(&o));
    assert_eq!(columns[..2], ["T", "gap"]);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], "0.05");
    assert_eq!(rows[2][0], "1");
    for r in &rows {
        assert!(r[1].parse::<f64>().unwrap() > 0.0);
    }
}
