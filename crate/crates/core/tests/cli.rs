use std::io::Write;
use std::path::Path;

use hotelling_rao::cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};
use hotelling_rao::stats::{compute_statistics, SufficientStats};
use hotelling_rao::streams::{standard_normal_matrix, substream};

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn invoke(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["hotelling-rao"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::File::create(&path).unwrap().write_all(contents.as_bytes()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn stats_on_the_unit_square() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_file(dir.path(), "square.csv", "x,y\n0,0\n1,0\n0,1\n1,1\n");
    let o = invoke(&["stats", &file, "--p1", "1", "--json"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let v: serde_json::Value = serde_json::from_str(o.stdout.trim()).unwrap();
    assert_eq!(v["n"], 4);
    assert_eq!(v["xbar"], serde_json::json!([0.5, 0.5]));
    for (key, want) in [("t2", 6.0), ("u", 3.0), ("m", 3.0), ("w", 0.75)] {
        assert!((v[key].as_f64().unwrap() - want).abs() < 1e-12, "{key}: {}", v[key]);
    }
    let human = invoke(&["stats", &file, "--p1", "1"]);
    assert!(human.stdout.contains("T2    6\n") && human.stdout.contains("W     0.75\n"));
}

#[test]
fn stats_matches_library_on_random_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = standard_normal_matrix(&mut substream(8, 0, 0), 50, 3);
    let mut csv = String::new();
    for row in data.row_iter() {
        let fields: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }
    let file = write_file(dir.path(), "random.csv", &csv);
    let o = invoke(&["stats", &file, "--p1", "2", "--tsv"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let lines: Vec<&str> = o.stdout.lines().collect();
    let header: Vec<&str> = lines[0].split('\t').collect();
    let values: Vec<&str> = lines[1].split('\t').collect();
    let get = |k: &str| values[header.iter().position(|h| *h == k).unwrap()].parse::<f64>().unwrap();
    let t = compute_statistics(&SufficientStats::from_data(&data, 2).unwrap()).unwrap();
    assert_eq!((get("t2"), get("u"), get("w"), get("m")), (t.t2, t.u, t.w, t.m));
}

#[test]
fn stats_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_file(dir.path(), "empty.csv", "");
    assert_eq!(invoke(&["stats", &empty, "--p1", "1"]).code, EXIT_USAGE);
    let garbage = write_file(dir.path(), "garbage.csv", "1,2\n3,abc\n");
    assert_eq!(invoke(&["stats", &garbage, "--p1", "1"]).code, EXIT_USAGE);
    let short = write_file(dir.path(), "short.csv", "1,2\n3,5\n");
    let o = invoke(&["stats", &short, "--p1", "1"]);
    assert_eq!(o.code, EXIT_DATA);
    assert!(o.stderr.contains("singular"), "{}", o.stderr);
    let one = write_file(dir.path(), "one.csv", "a,b\n1,2\n");
    let o = invoke(&["stats", &one, "--p1", "1"]);
    assert_eq!(o.code, EXIT_DATA);
    assert!(o.stderr.contains("too few rows"), "{}", o.stderr);
    let ok = write_file(dir.path(), "ok.csv", "0,0\n1,0\n0,1\n1,1\n");
    assert_eq!(invoke(&["stats", &ok, "--p1", "2"]).code, EXIT_USAGE);
    assert_eq!(invoke(&["stats", "/nonexistent/file.csv", "--p1", "1"]).code, EXIT_USAGE);
}

#[test]
fn verify_penrose_passes() {
    let o = invoke(&["verify", "--lemma", "L2_PENROSE", "--trials", "1000", "--seed", "42"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let v: serde_json::Value = serde_json::from_str(o.stdout.trim()).unwrap();
    assert_eq!(v["verdict"], "PASS");
    assert_eq!(v["trials"], 1000);
}

#[test]
fn verify_w_region_reports_canonical_witness() {
    let o = invoke(&["verify", "--lemma", "W_REGION_NONCONVEX", "--trials", "100"]);
    assert_eq!(o.code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(o.stdout.trim()).unwrap();
    assert_eq!(v["verdict"], "WITNESS_FOUND");
    assert_eq!(v["witness"]["canonical"]["w"][2], 2.0);
}

#[test]
fn verify_exit_codes() {
    assert_eq!(invoke(&["verify", "--trials", "0"]).code, EXIT_USAGE);
    assert_eq!(invoke(&["verify", "--lemma", "NOPE"]).code, EXIT_USAGE);
    assert_eq!(invoke(&["verify", "--split", "3", "--dim", "3"]).code, EXIT_USAGE);
    let o = invoke(&["verify", "--lemma", "L1_BPLUS_CONVEX", "--trials", "20"]);
    assert_eq!(o.code, EXIT_VERIFY);
    assert!(o.stdout.contains("\"verdict\":\"FAIL\""));
}

#[test]
fn power_size_only_run() {
    let o = invoke(&["power", "--reps", "2000", "--seed", "5"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let rows: Vec<&str> = o.stdout.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let power: f64 = row.split('\t').nth(7).unwrap().parse().unwrap();
        assert!((power - 0.05).abs() < 0.02, "{row}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&o.stderr).unwrap();
    assert_eq!(manifest["command"], "power");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn power_matches_golden_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.tsv");
    let manifest = dir.path().join("manifest.json");
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/power_small.json");
    let o = invoke(&[
        "power",
        "--config",
        config,
        "--out",
        out.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stdout.is_empty() && o.stderr.is_empty());
    let golden = include_str!("data/power_small.tsv");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), golden);

    // The same logical config given as flags hashes identically.
    let flags = invoke(&["power", "--n", "20", "--p", "3", "--p1", "1", "--alpha", "0.05", "--reps", "1000", "--seed", "17", "--theta-grid", "0,0,0;0.5,0,0;0.3,0.3,0"]);
    assert_eq!(flags.stdout, golden);
    let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_str(&flags.stderr).unwrap();
    assert_eq!(a["config_hash"], b["config_hash"]);
}

#[test]
fn power_config_errors() {
    let o = invoke(&["power", "--config", "x.json", "--n", "10"]);
    assert_eq!(o.code, EXIT_USAGE);
    assert!(o.stderr.contains("cannot be used with"));
    assert_eq!(invoke(&["power", "--n", "3"]).code, EXIT_USAGE);
    assert_eq!(invoke(&["power", "--theta-grid", "0,0"]).code, EXIT_USAGE);
    assert_eq!(invoke(&["power", "--alpha", "1.5"]).code, EXIT_USAGE);
    assert_eq!(invoke(&["power", "--config", "/nonexistent.json"]).code, EXIT_USAGE);
    let dir = tempfile::tempdir().unwrap();
    let bad = write_file(dir.path(), "bad.json", r#"{"n": 20, "p": 3}"#);
    assert_eq!(invoke(&["power", "--config", &bad]).code, EXIT_USAGE);
}

#[test]
fn geometry_t2_is_bounded() {
    let o = invoke(&["geometry", "--region", "t2", "--directions", "100"]);
    assert_eq!(o.code, EXIT_OK);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines.len(), 101);
    assert!(lines[..100].iter().all(|l| !l.contains("\"inf\"")));
    let summary: serde_json::Value = serde_json::from_str(lines[100]).unwrap();
    assert_eq!(summary["any_infinite"], false);
}

#[test]
fn geometry_u_reports_infinite_on_null_subspace() {
    let o = invoke(&["geometry", "--region", "u", "--directions", "10", "--null-directions", "5"]);
    assert_eq!(o.code, EXIT_OK);
    let summary: serde_json::Value = serde_json::from_str(o.stdout.lines().last().unwrap()).unwrap();
    assert_eq!(summary["any_infinite"], true);
    assert_eq!(summary["infinite"], 5);
}

#[test]
fn geometry_rejects_bad_flags() {
    assert_eq!(invoke(&["geometry", "--k", "0"]).code, EXIT_USAGE);
    assert_eq!(invoke(&["geometry", "--k", "-1"]).code, EXIT_USAGE);
    assert_eq!(invoke(&["geometry", "--region", "w"]).code, EXIT_USAGE);
    assert_eq!(invoke(&["geometry", "--split", "4"]).code, EXIT_USAGE);
}

#[test]
fn help_and_unknown_commands() {
    assert_eq!(invoke(&["--help"]).code, EXIT_OK);
    assert_eq!(invoke(&[]).code, EXIT_USAGE);
    assert_eq!(invoke(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(invoke(&["--threads", "0", "geometry"]).code, EXIT_USAGE);
}

#[test]
fn identical_invocations_give_identical_output() {
    for args in [
        vec!["verify", "--trials", "50", "--seed", "3"],
        vec!["geometry", "--region", "u", "--directions", "20", "--null-directions", "3", "--seed", "9"],
        vec!["power", "--reps", "300", "--theta-grid", "0,0,0;0.4,0.1,0"],
    ] {
        let outputs: Vec<String> = ["1", "2", "5"]
            .iter()
            .map(|t| {
                let mut a = vec!["--threads", t];
                a.extend(&args);
                invoke(&a).stdout
            })
            .collect();
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hotelling-rao");
    let status = std::process::Command::new(bin).args(["geometry", "--k", "0"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    let ok = std::process::Command::new(bin).args(["geometry", "--directions", "2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8(ok.stdout).unwrap().lines().count(), 3);
}
