use std::ffi::OsString;
use std::path::Path;
use std::process::Command;

use redsim_cli::commands::{FIG4_COLUMNS, INDICATOR_COLUMNS, SIM_COLUMNS, URN_COLUMNS};

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn redsim(args: &[&str]) -> Run {
    let mut argv: Vec<OsString> = vec!["redsim".into()];
    argv.extend(args.iter().map(OsString::from));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = redsim_cli::run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

/// Parses a CSV with `#` header comments into its header and records.
fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn read_file(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn design_listing_has_seven_blocks() {
    let run = redsim(&["design", "--r", "3"]);
    assert_eq!(run.code, 0);
    assert_eq!(run.out, "0 1 3\n1 2 4\n2 3 5\n3 4 6\n0 4 5\n1 5 6\n0 2 6\n");
}

#[test]
fn design_json_and_csv() {
    let run = redsim(&["design", "--r", "4", "--json"]);
    let doc: serde_json::Value = serde_json::from_str(&run.out).unwrap();
    assert_eq!(doc["n"], 13);
    assert_eq!(doc["blocks"].as_array().unwrap().len(), 13);
    assert_eq!(doc["difference_set"], serde_json::json!([0, 1, 3, 9]));
    let (header, rows) = read_csv(&redsim(&["design", "--r", "4", "--csv"]).out);
    assert_eq!(
        header,
        ["block", "point_1", "point_2", "point_3", "point_4"]
    );
    assert_eq!(rows[0], ["0", "0", "1", "3", "9"]);
}

#[test]
fn exit_codes() {
    assert_eq!(redsim(&["design", "--r", "7"]).code, 2);
    assert_eq!(redsim(&["design", "--r", "1"]).code, 4);
    assert_eq!(
        redsim(&["indicators", "--policy", "rr", "--r", "2", "--n", "6"]).code,
        4
    );
    let bad = redsim(&["frobnicate"]);
    assert_eq!(bad.code, 1);
    assert!(bad.err.contains("Usage"));
    assert_eq!(
        redsim(&["urns", "--policy", "random", "--r", "3", "--bogus"]).code,
        1
    );
    let help = redsim(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.out.contains("simulate"));
    let underrun = redsim(&[
        "simulate",
        "--policy",
        "random",
        "--n",
        "1",
        "--r",
        "1",
        "--mu1",
        "1",
        "--lambda",
        "0.5",
        "--horizon",
        "5",
    ]);
    assert_eq!(underrun.code, 3, "{}", underrun.err);
}

#[test]
fn indicators_row_for_bibd() {
    let run = redsim(&["indicators", "--policy", "bibd", "--r", "3"]);
    assert_eq!(run.code, 0);
    let row = run
        .out
        .lines()
        .find(|l| l.trim_start().starts_with("bibd"))
        .unwrap();
    assert!(row.contains("0.7778") && row.contains("0.4667"), "{row}");

    let (header, rows) =
        read_csv(&redsim(&["indicators", "--policy", "all", "--r", "3", "--csv"]).out);
    assert_eq!(header, INDICATOR_COLUMNS);
    let rof = column(&header, "rof");
    for row in &rows {
        let v: f64 = row[rof].parse().unwrap();
        assert!((v - 7.0 / 9.0).abs() < 1e-15);
    }
}

#[test]
fn urns_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("urns.csv");
    let run = redsim(&[
        "urns",
        "--policy",
        "all",
        "--n",
        "7",
        "--r",
        "3",
        "--T",
        "70",
        "--reps",
        "20",
        "--seed",
        "5",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "{}", run.err);
    let text = read_file(&path);
    assert!(text.starts_with("# command=urns\n"));
    assert!(text.contains("# seed=5\n"));
    let (header, rows) = read_csv(&text);
    assert_eq!(header, URN_COLUMNS);
    assert_eq!(rows.len(), 3);
    let lbf = column(&header, "lbf_emp");
    assert_eq!(rows[1][lbf], "1");
    assert_eq!(rows[2][lbf], "1");
    for row in &rows {
        for cell in &row[1..] {
            assert!(cell.parse::<f64>().is_ok(), "{cell:?}");
        }
    }
}

#[test]
fn sweep_preset_writes_full_grid_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let run = redsim(&[
            "sweep",
            "--preset",
            "fig5",
            "--seed",
            "1",
            "--jobs",
            "500",
            "--warmup",
            "50",
            "--reps",
            "2",
            "--csv",
            path.to_str().unwrap(),
        ]);
        assert_eq!(run.code, 0, "{}", run.err);
    }
    let text = read_file(&a);
    assert_eq!(text.as_bytes(), read_file(&b).as_bytes());
    let (header, rows) = read_csv(&text);
    assert_eq!(header, SIM_COLUMNS);
    assert_eq!(rows.len(), 3 * 16);
    let policy = column(&header, "policy");
    let names: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[policy].as_str()).collect();
    assert_eq!(
        names.into_iter().collect::<Vec<_>>(),
        ["bibd", "random", "round-robin"]
    );
}

#[test]
fn sweep_explicit_lambdas_and_jsonl() {
    let run = redsim(&[
        "sweep",
        "--n",
        "7",
        "--r",
        "3",
        "--mu1",
        "1",
        "--policy",
        "bibd",
        "--lambdas",
        "1,2",
        "--jobs",
        "200",
        "--warmup",
        "0",
        "--reps",
        "2",
        "--format",
        "jsonl",
    ]);
    assert_eq!(run.code, 0, "{}", run.err);
    let lines: Vec<serde_json::Value> = run
        .out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["config"]["lambdas"], "1,2");
    assert_eq!(lines[2]["lambda"], 2.0);
    assert_eq!(lines[1]["policy"], "bibd");
}

#[test]
fn unstable_load_warns() {
    let run = redsim(&[
        "simulate", "--policy", "rr", "--n", "2", "--r", "1", "--mu1", "1", "--lambda", "2.5",
        "--jobs", "100", "--warmup", "0", "--reps", "1",
    ]);
    assert_eq!(run.code, 0);
    assert!(run.err.contains("warning: rho = 1.2500"), "{}", run.err);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# urn defaults\npolicy=round-robin\nr=3\nT=14\nreps=2\nseed=77\ncsv=true\n",
    )
    .unwrap();
    let run = redsim(&["urns", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.code, 0, "{}", run.err);
    assert!(run.out.contains("# seed=77\n"));
    let run = redsim(&["urns", "--config", cfg.to_str().unwrap(), "--seed", "3"]);
    assert!(run.out.contains("# seed=3\n"));
    let (_, rows) = read_csv(&run.out);
    assert_eq!(rows[0][0], "round-robin");
    assert_eq!(
        redsim(&["urns", "--config", "/nonexistent/run.cfg"]).code,
        1
    );
}

#[test]
fn seed_from_environment_has_lowest_priority() {
    let bin = env!("CARGO_BIN_EXE_redsim");
    let args = [
        "urns", "--policy", "random", "--r", "2", "--T", "5", "--reps", "1", "--csv",
    ];
    let out = Command::new(bin)
        .args(args)
        .env("REDSIM_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("# seed=9\n"));
    let out = Command::new(bin)
        .args(args)
        .args(["--seed", "4"])
        .env("REDSIM_SEED", "9")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains("# seed=4\n"));
    let out = Command::new(bin)
        .args(["design", "--r", "7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analytic_and_urn_figures() {
    let dir = tempfile::tempdir().unwrap();
    let run = redsim(&[
        "figures",
        "--preset",
        "fig2,fig3,fig4",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--n-list",
        "7,21",
        "--urn-reps",
        "20",
    ]);
    assert_eq!(run.code, 0, "{}", run.err);
    assert_eq!(run.out.lines().count(), 3);

    let (header, rows) = read_csv(&read_file(&dir.path().join("fig4.csv")));
    assert_eq!(header, FIG4_COLUMNS);
    let r3 = rows.iter().find(|r| r[0] == "3").unwrap();
    let get = |name: &str| r3[column(&header, name)].parse::<f64>().unwrap();
    assert_eq!(get("lbf_bibd"), 1.0);
    assert!((get("rdf_bibd") - 7.0 / 15.0).abs() < 1e-15);
    assert!((get("rdf_rr") - 7.0 / 19.0).abs() < 1e-15);
    assert!((get("rof_random") - 7.0 / 9.0).abs() < 1e-15);

    let (header, rows) = read_csv(&read_file(&dir.path().join("fig2.csv")));
    let full = rows.iter().find(|r| r[0] == "21" && r[1] == "21").unwrap();
    assert_eq!(full[column(&header, "mean_min")], "50");
    assert_eq!(full[column(&header, "mean_max")], "50");
    assert_eq!(rows.len(), 7 + 21);

    let (header, rows) = read_csv(&read_file(&dir.path().join("fig3.csv")));
    let cell = rows.iter().find(|r| r[0] == "21" && r[1] == "5").unwrap();
    let lbf: f64 = cell[column(&header, "lbf_analytic")].parse().unwrap();
    assert!((lbf - 0.2314).abs() < 1e-3);
}

#[test]
fn queueing_figure_has_two_panels() {
    let dir = tempfile::tempdir().unwrap();
    let run = redsim(&[
        "figures",
        "--preset",
        "fig8",
        "--q",
        "15",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--jobs",
        "300",
        "--warmup",
        "30",
        "--reps",
        "2",
    ]);
    assert_eq!(run.code, 0, "{}", run.err);
    for panel in ["low", "high"] {
        let text = read_file(&dir.path().join(format!("fig8_{panel}.csv")));
        assert!(text.contains(&format!("# panel={panel}\n")));
        let (header, rows) = read_csv(&text);
        assert_eq!(header, SIM_COLUMNS);
        assert_eq!(rows.len(), 24);
        assert!(rows.iter().all(|r| r[column(&header, "q")] == "15"));
    }
    assert_eq!(redsim(&["figures", "--preset", "fig9"]).code, 1);
}
