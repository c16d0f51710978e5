use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use tinyarq_cli::run::{COMPARE_COLUMNS, SWEEP_COLUMNS};
use tinyarq_cli::{run_ccdf, run_compare, run_sweep, CliError, SweepSpec};

fn spec(out: &Path, entries: &[(&str, &str)]) -> SweepSpec {
    let mut map: BTreeMap<String, String> = entries
        .iter()
        .map(|&(k, v)| (k.to_string(), v.to_string()))
        .collect();
    map.insert("out".into(), out.display().to_string());
    SweepSpec::from_map(&map).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn tinyarq(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tinyarq"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn analytic_row_for_reference_point() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(
        dir.path(),
        &[
            ("protocol", "uncoded"),
            ("eps", "0.2"),
            ("k", "5"),
            ("T", "8"),
            ("no-sim", "true"),
        ],
    );
    run_sweep(&s).unwrap();
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(header, SWEEP_COLUMNS);
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(&row[..5], ["uncoded", "0.2", "memoryless", "5", "8"]);
    assert_eq!(row[5], "0.798977306");
    assert_eq!(row[8], "6.65");
    assert_eq!(row[11], "10.4725");
    assert!(row[6].is_empty() && row[15].is_empty() && row[16].is_empty());
}

#[test]
fn error_free_rows_are_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(
        dir.path(),
        &[("eps", "0,0.2"), ("r", "memoryless,0.3"), ("units", "2000")],
    );
    let report = run_sweep(&s).unwrap();
    let (_, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 16);
    for row in rows.iter().filter(|r| r[1] == "0") {
        let rtt = if row[0] == "cf" || row[0] == "coded" {
            "6"
        } else {
            "5"
        };
        assert_eq!(row[5], "1");
        assert_eq!(row[6], "1");
        assert_eq!(row[8], rtt);
        assert_eq!(row[9], rtt);
        assert!(row[15].is_empty(), "no tail to fit on an error-free link");
    }
    assert_eq!(report.rows.len(), 16);
}

#[test]
fn same_configuration_same_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let entries = [
        ("eps", "0.3,0.5"),
        ("r", "0.3"),
        ("units", "5000"),
        ("seed", "11"),
        ("plots", "true"),
        ("ccdf", "true"),
    ];
    let ra = run_sweep(&spec(a.path(), &entries)).unwrap();
    let rb = run_sweep(&spec(b.path(), &entries)).unwrap();
    assert_eq!(ra.outputs.csv.len(), rb.outputs.csv.len());
    for (pa, pb) in ra
        .outputs
        .csv
        .iter()
        .chain(&ra.outputs.svg)
        .zip(rb.outputs.csv.iter().chain(&rb.outputs.svg))
    {
        assert_eq!(pa.file_name(), pb.file_name());
        assert_eq!(
            fs::read(pa).unwrap(),
            fs::read(pb).unwrap(),
            "{}",
            pa.display()
        );
    }
    assert!(!ra.outputs.svg.is_empty());
}

#[test]
fn analysis_columns_do_not_depend_on_simulation() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let entries = [
        ("eps", "0.1,0.4"),
        ("r", "memoryless,0.1"),
        ("units", "3000"),
    ];
    run_sweep(&spec(a.path(), &entries)).unwrap();
    let mut no_sim = entries.to_vec();
    no_sim.push(("no-sim", "true"));
    run_sweep(&spec(b.path(), &no_sim)).unwrap();
    let (_, with) = read_csv(&a.path().join("sweep.csv"));
    let (_, without) = read_csv(&b.path().join("sweep.csv"));
    let analytic = [0, 1, 2, 3, 4, 5, 8, 11, 13];
    for (x, y) in with.iter().zip(&without) {
        for &i in &analytic {
            assert_eq!(x[i], y[i]);
        }
    }
}

#[test]
fn ccdf_bound_dominates_the_tail() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(
        dir.path(),
        &[("protocol", "uncoded"), ("eps", "0.5"), ("units", "50000")],
    );
    let report = run_ccdf(&s).unwrap();
    let (header, rows) = read_csv(&report.outputs.csv[0]);
    assert_eq!(header, ["d", "ccdf", "gaussian_bound"]);
    for row in &rows {
        let p: f64 = row[1].parse().unwrap();
        let bound: f64 = row[2].parse().unwrap();
        let d: u64 = row[0].parse().unwrap();
        if d > 5 {
            assert!(bound >= p * (1.0 - 1e-8), "d={d}");
        }
    }
    assert!(fs::read_to_string(&report.outputs.svg[0])
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn ccdf_without_tail_omits_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(
        dir.path(),
        &[("protocol", "coded"), ("eps", "0"), ("units", "2000")],
    );
    let report = run_ccdf(&s).unwrap();
    let (header, rows) = read_csv(&report.outputs.csv[0]);
    assert_eq!(header, ["d", "ccdf"]);
    assert_eq!(rows, vec![vec!["6".to_string(), "0".to_string()]]);
    assert_eq!(report.outputs.warnings.len(), 1);
}

#[test]
fn ccdf_needs_a_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), &[("protocol", "uncoded"), ("eps", "0.1,0.2")]);
    assert!(matches!(run_ccdf(&s), Err(CliError::Config(_))));
}

#[test]
fn comparison_report() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(
        dir.path(),
        &[
            ("protocol", "uncoded,coded"),
            ("eps", "0.001,0.3,0.5"),
            ("r", "0.1"),
            ("k", "10"),
            ("T", "30"),
            ("no-sim", "true"),
        ],
    );
    let report = run_compare(&s).unwrap();
    let (header, rows) = read_csv(&dir.path().join("compare.csv"));
    assert_eq!(header, COMPARE_COLUMNS);
    assert_eq!(rows.len(), 3);
    assert!(report.rows[0].gain_analytic().abs() < 0.01);
    let (best, idx) = report.max_gain;
    assert!(report.rows.iter().all(|r| r.gain_analytic() <= best));
    assert_eq!(report.rows[idx].gain_analytic(), best);
    assert!(report.summary.contains("analytic"));
    assert!(rows.iter().all(|r| r[7].is_empty() && r[9].is_empty()));
}

#[test]
fn comparison_needs_both_protocols() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(
        dir.path(),
        &[("protocol", "uncoded,cf"), ("no-sim", "true")],
    );
    assert!(matches!(run_compare(&s), Err(CliError::Config(_))));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let ok = tinyarq(&[
        "sweep",
        "--protocol",
        "uncoded",
        "--eps",
        "0.2",
        "--no-sim",
        "--out",
        &out,
    ]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(dir.path().join("sweep.csv").exists());
    let bad_t = tinyarq(&["sweep", "--k", "5", "--T", "4", "--no-sim", "--out", &out]);
    assert_eq!(bad_t.status.code(), Some(2));
    let bad_eps = tinyarq(&["sweep", "--eps", "0.3,0.2", "--no-sim", "--out", &out]);
    assert_eq!(bad_eps.status.code(), Some(2));
    let bad_units = tinyarq(&["sweep", "--units", "10", "--out", &out]);
    assert_eq!(bad_units.status.code(), Some(2));
    let truncated = tinyarq(&[
        "sweep",
        "--protocol",
        "harq",
        "--alpha",
        "800",
        "--no-sim",
        "--out",
        &out,
    ]);
    assert_eq!(
        truncated.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&truncated.stderr)
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("o");
    fs::write(
        &cfg,
        format!(
            "# reference point\nprotocol = uncoded\neps = 0.2, 0.4\nk = 5\nT = 8\nno-sim = true\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let run = tinyarq(&["sweep", "--config", cfg.to_str().unwrap(), "--eps", "0.2"]);
    assert_eq!(run.status.code(), Some(0));
    let (_, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][5], "0.798977306");
    fs::write(&cfg, "bogus = 1\n").unwrap();
    let bad = tinyarq(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}
