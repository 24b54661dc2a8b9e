use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fcsd_core::desk;
use fcsd_core::horizon::HorizonConfig;
use fcsd_core::io;
use serde_json::Value;

fn fcsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcsd"))
        .args(args)
        .env("COLUMNS", "100")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(o));
    serde_json::from_str(stdout(o).trim()).expect("one JSON line")
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares against `tests/golden/<name>`; set `UPDATE_GOLDEN=1` to rewrite.
fn assert_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden_dir()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(actual, expected, "{name} differs from its golden file");
}

const SUBCOMMANDS: [&str; 7] = ["solve", "roll", "cha", "simulate-freq", "check-convexity", "quantile", "verify"];

#[test]
fn help_text_is_pinned() {
    let o = fcsd(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert_golden("help.txt", &stdout(&o));
    for sub in SUBCOMMANDS {
        let o = fcsd(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert_golden(&format!("help_{sub}.txt"), &stdout(&o));
    }
}

#[test]
fn every_flag_is_documented() {
    for sub in SUBCOMMANDS {
        let text = stdout(&fcsd(&[sub, "--help"]));
        for line in text.lines().filter(|l| l.trim_start().starts_with("--")) {
            let parts: Vec<&str> = line.trim().splitn(2, "  ").collect();
            assert!(
                parts.len() == 2 && !parts[1].trim().is_empty(),
                "{sub}: undocumented flag `{}`",
                line.trim()
            );
        }
    }
}

#[test]
fn unknown_flag_prints_usage_and_exits_1() {
    let o = fcsd(&["cha", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage:"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn missing_case_file_exits_1() {
    let o = fcsd(&["cha", "--case", "/nonexistent/case.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not found"));
}

#[test]
fn malformed_case_reports_position_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = io::case_to_string(&desk::case24()).unwrap().replacen("\"p_base\"", "\"p_bsae\"", 1);
    fs::write(&path, text).unwrap();
    let o = fcsd(&["cha", "--case", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("case.p_bsae") && err.contains("line"), "{err}");
}

#[test]
fn empty_nadir_region_exits_2() {
    let o = fcsd(&["solve", "--kappa", "0.6", "--samples", "1000"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

#[test]
fn quantile_matches_standard_normal() {
    let v = json(&fcsd(&[
        "quantile",
        "--weights",
        "1",
        "--means",
        "0",
        "--variances",
        "1",
        "--alpha",
        "0.05",
        "--json-summary",
    ]));
    let q = v["quantiles"][0]["quantile"].as_f64().unwrap();
    assert!((q + 1.6448536).abs() < 1e-6, "{q}");
}

#[test]
fn quantile_rejects_bad_level() {
    let o = fcsd(&["quantile", "--weights", "1", "--means", "0", "--variances", "1", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn convexity_check_reports_zero_violations() {
    let v = json(&fcsd(&["check-convexity", "--samples", "5000", "--seed", "7", "--json-summary"]));
    assert_eq!(v["report"]["n_violations"], 0);
    assert_eq!(v["report"]["n_samples"], 5000);
}

#[test]
fn cha_is_conservative_and_deterministic() {
    let args = ["cha", "--samples", "10000,20000", "--seed", "11", "--json-summary"];
    let a = json(&fcsd(&args));
    let b = json(&fcsd(&args));
    for c in a["columns"].as_array().unwrap() {
        assert_eq!(c["false_safe"], 0);
        assert!(c["hyperplanes"].as_u64().unwrap() <= 12);
    }
    let strip = |v: &Value| {
        v["columns"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| (c["hyperplanes"].clone(), c["error_pct"].clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn cha_table_has_table_shape() {
    let o = fcsd(&["cha", "--samples", "10000,20000,50000"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for label in ["Initial samples", "Hyperplanes", "Time (s)", "Classification error (%)"] {
        let line = text.lines().find(|l| l.starts_with(label)).expect(label);
        assert_eq!(line[label.len()..].split_whitespace().count(), 3, "{line}");
    }
}

#[test]
fn simulate_agrees_with_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let v = json(&fcsd(&[
        "simulate-freq",
        "--h",
        "8",
        "--d",
        "4",
        "--out",
        csv.to_str().unwrap(),
        "--json-summary",
    ]));
    let an = v["analytic"]["delta_f_max"].as_f64().unwrap();
    let sim = v["simulated"]["delta_f_max"].as_f64().unwrap();
    assert!((an - sim).abs() < 1e-3, "{an} vs {sim}");
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next(), Some("time_s,deviation_hz,rate_hz_per_s"));
}

#[test]
fn solve_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let v = json(&fcsd(&["solve", "--solve-index", "18", "--samples", "5000", "--out", out, "--json-summary"]));
    assert_eq!(v["linear_violations"], 0);
    assert_eq!(v["frequency_failures"], 0);

    let sol = dir.path().join("solution.json");
    let o = fcsd(&["verify", "--solution", sol.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    // Push one generator over its rating.
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(&sol).unwrap()).unwrap();
    doc["solution"]["periods"][3]["p"][0] = Value::from(1e4);
    let bad = dir.path().join("tampered.json");
    fs::write(&bad, doc.to_string()).unwrap();
    let o = fcsd(&["verify", "--solution", bad.to_str().unwrap(), "--json-summary"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["linear_violations"].as_u64().unwrap() >= 1);
}

/// Two solve instants of the bundled day, for quick end-to-end runs.
fn short_scenario(dir: &Path) -> PathBuf {
    let case = desk::case24();
    let mut sc = desk::day1(&case, &HorizonConfig::default()).unwrap();
    sc.solves.truncate(2);
    let path = dir.join("short.json");
    io::save_scenario(&sc, &path).unwrap();
    path
}

fn read_dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn roll_writes_tables_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sc = short_scenario(dir.path());
    let run = |out: &str| {
        let o = fcsd(&[
            "roll",
            "--scenario",
            sc.to_str().unwrap(),
            "--samples",
            "5000",
            "--out",
            dir.path().join(out).to_str().unwrap(),
            "--json-summary",
        ]);
        json(&o)
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a["config_hash"], b["config_hash"]);

    let fa = read_dir_files(&dir.path().join("a"));
    let fb = read_dir_files(&dir.path().join("b"));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        ["allocation.csv", "committed.csv", "frequency.csv", "metadata.json", "reserves.csv", "summary.csv"]
    );
    assert_eq!(fa, fb, "outputs differ between identical runs");

    let mut headers = String::new();
    for (name, bytes) in &fa {
        if name.ends_with(".csv") {
            let text = String::from_utf8(bytes.clone()).unwrap();
            headers.push_str(&format!("{name}: {}\n", text.lines().next().unwrap()));
        }
    }
    assert_golden("csv_headers.txt", &headers);

    let summary = String::from_utf8(fa[5].1.clone()).unwrap();
    let mut rdr = csv::Reader::from_reader(summary.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["mode", "fuel_cost", "res_reserve_cost", "ess_reserve_cost", "curtailment_pct"]
    );
    let modes: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(modes, ["fixed", "online"]);

    let meta: Value = serde_json::from_slice(&fa[3].1).unwrap();
    assert_eq!(meta["config_hash"], a["config_hash"]);
    assert_eq!(meta["seed"], 2023);
}

#[test]
fn seed_flag_changes_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let sc = short_scenario(dir.path());
    let run = |seed: &str, out: &str| {
        json(&fcsd(&[
            "roll",
            "--mode",
            "online",
            "--scenario",
            sc.to_str().unwrap(),
            "--samples",
            "2000",
            "--seed",
            seed,
            "--out",
            dir.path().join(out).to_str().unwrap(),
            "--json-summary",
        ]))
    };
    let a = run("1", "a");
    let b = run("2", "b");
    assert_ne!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["seed"], 1);
}

#[test]
fn threads_flag_is_accepted() {
    let v = json(&fcsd(&["--threads", "2", "check-convexity", "--samples", "500", "--json-summary"]));
    assert_eq!(v["report"]["n_violations"], 0);
    let o = fcsd(&["--threads", "0", "check-convexity"]);
    assert_eq!(o.status.code(), Some(1));
}
