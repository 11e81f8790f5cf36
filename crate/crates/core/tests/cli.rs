use std::path::Path;
use std::process::Command;

const TINY: &str = r#"{
  "trials": 2,
  "seed": 3,
  "n_t": 4,
  "users": 2,
  "layers": 2,
  "elements": 9,
  "ao_max_iterations": 4,
  "n_grid": [4, 9],
  "layers_grid": [1, 2],
  "total_elements": 8,
  "k_grid": [1, 2],
  "pmax_dbm_grid": [20, 40],
  "bits_grid": [1, 3],
  "convergence_layers": [1, 2],
  "complexity_k_grid": [2]
}"#;

fn run(dir: &Path, args: &[&str]) {
    let cfg = dir.join("tiny.json");
    std::fs::write(&cfg, TINY).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_sim-ee"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success(), "{args:?}");
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

const RESULT_HEADER: &str =
    "scheme,sweep_var,sweep_value,trial,ee_bits_per_joule,sumrate_bps,tx_power_w,iters_outer,iters_inner,counters";

#[test]
fn sweeps_write_results_and_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["sweep-n", "sweep-layers", "sweep-k", "sweep-pmax", "quantization"] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        run(tmp.path(), &[cmd, "--out", a.to_str().unwrap()]);
        run(tmp.path(), &[cmd, "--out", b.to_str().unwrap()]);
        for file in ["results.csv", "aggregate.csv"] {
            let text = read(&a.join(file));
            assert_eq!(text.lines().next().unwrap(), RESULT_HEADER, "{cmd}/{file}");
            assert_eq!(text, read(&b.join(file)), "{cmd}/{file} differs between runs");
        }
        let meta: serde_json::Value = serde_json::from_str(&read(&a.join("metadata.json"))).unwrap();
        assert_eq!(meta["command"], cmd);
        assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn sweep_rows_cover_every_scheme_point_and_trial() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("n");
    run(tmp.path(), &["sweep-n", "--out", out.to_str().unwrap()]);
    let mut rdr = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5 * 2 * 2);
    for r in &rows {
        let ee: f64 = r[4].parse().unwrap();
        let power: f64 = r[6].parse().unwrap();
        assert!(ee > 0.0 && ee.is_finite());
        assert!(power > 0.0 && power <= 10.0 * (1.0 + 1e-9));
    }
    let mut agg = csv::Reader::from_path(out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.records().count(), 5 * 2);
}

#[test]
fn convergence_and_complexity_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    run(tmp.path(), &["convergence", "--out", out.to_str().unwrap()]);
    for l in [1, 2] {
        let text = read(&out.join(format!("convergence_L{l}.csv")));
        assert_eq!(text.lines().next().unwrap(), "scheme,layers,trial,iteration,ee_bits_per_joule,sumrate_bps,tx_power_w");
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut last = std::collections::HashMap::new();
        for r in rdr.records() {
            let r = r.unwrap();
            let key = (r[0].to_string(), r[2].to_string());
            let ee: f64 = r[4].parse().unwrap();
            if let Some(prev) = last.insert(key, ee) {
                assert!(ee >= prev * (1.0 - 1e-12), "EE decreased along a trajectory");
            }
        }
    }
    let out = tmp.path().join("t");
    run(tmp.path(), &["complexity-table", "--out", out.to_str().unwrap()]);
    let text = read(&out.join("complexity_table.csv"));
    assert_eq!(text.lines().next().unwrap(), "users,i_u,i_phi_dpc,c_dpc,i_x,i_phi_lin,c_lin");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn bad_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"trials": 0}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sim-ee"))
        .args(["sweep-n", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}
