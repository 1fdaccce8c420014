use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn facets(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facets"))
        .args(args)
        .env_remove("FACETS_OUT")
        .env_remove("FACETS_WORKERS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

/// Runs `facets <command> --config <config> --out <tmp>/<tag>` and asserts success.
fn run_ok(tmp: &TempDir, command: &str, config: &Value, tag: &str, extra: &[&str]) -> PathBuf {
    let cfg = write_config(tmp.path(), &format!("{tag}.json"), config);
    let out = tmp.path().join(tag);
    let mut args = vec![command, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = facets(&args);
    assert_eq!(code(&o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Rows of a CSV as maps from header to field.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn euclidean_first_threshold_is_closed_form() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"norm": {"family": "euclidean"}, "facets": 16384, "phase": {"sigma": 1.0, "l_max": 4}});
    let out = run_ok(&tmp, "phase", &cfg, "run", &[]);
    let (h, rows) = read_csv(&out.join("thresholds.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][column(&h, "ell")], "1");
    let v1: f64 = rows[0][column(&h, "v_star")].parse().unwrap();
    assert!((v1 - (2.0 + std::f64::consts::FRAC_PI_2)).abs() < 1e-6, "v*_1 = {v1}");
    // no model, so no bulk-excess column values
    assert!(rows.iter().all(|r| r[column(&h, "A_ell")].is_empty()));
    let branches = fs::read_to_string(out.join("branches.dat")).unwrap();
    assert!(branches.contains("# ell=1 kind=type2") && branches.contains("# ell=4 kind=type2"));
}

#[test]
fn stiff_problems_have_no_type1_layers() {
    let tmp = TempDir::new().unwrap();
    // w = pi <= 2 sigma
    for (i, sigma) in [1.6, 2.0, 5.0].into_iter().enumerate() {
        let cfg = json!({"norm": {"family": "euclidean"}, "facets": 256, "phase": {"sigma": sigma, "l_max": 6}});
        let out = run_ok(&tmp, "phase", &cfg, &format!("s{i}"), &[]);
        let (h, rows) = read_csv(&out.join("thresholds.csv"));
        let k = column(&h, "k_star");
        assert!(rows.iter().all(|r| r[k] == "0"), "sigma = {sigma}");
        assert!(rows.iter().all(|r| r[column(&h, "v_tilde")].is_empty()));
    }
    let cfg = json!({"norm": {"family": "euclidean"}, "facets": 256, "phase": {"sigma": 0.5, "l_max": 6}});
    let out = run_ok(&tmp, "phase", &cfg, "soft", &[]);
    let (h, rows) = read_csv(&out.join("thresholds.csv"));
    assert!(rows[0][column(&h, "k_star")] != "0");
}

#[test]
fn empty_sweep_writes_header_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"norm": {"family": "euclidean"}, "facets": 64,
        "phase": {"sigma": 1.0, "sweep": {"variable": "v", "start": 0.0, "stop": 5.0, "points": 0}}});
    let out = run_ok(&tmp, "phase", &cfg, "run", &[]);
    assert_eq!(fs::read_to_string(out.join("phase.csv")).unwrap(), "v,ell,kind,a,radius,tau,energy,excess\n");
}

#[test]
fn excess_sweep_layers_follow_thresholds() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"norm": {"family": "killed_walk", "beta": 3.0}, "facets": 256,
        "model": {"n": 48, "beta": 3.0, "p_v": 0.1, "p_s": 0.9},
        "phase": {"l_max": 6, "sweep": {"variable": "excess", "start": 0.0, "stop": 4.0, "points": 81}}});
    let out = run_ok(&tmp, "phase", &cfg, "run", &[]);
    let (h, rows) = read_csv(&out.join("thresholds.csv"));
    let thresholds: Vec<f64> = rows.iter().map(|r| r[column(&h, "A_ell")].parse().unwrap()).collect();
    assert!(thresholds.windows(2).all(|w| w[0] < w[1]));
    let (h, rows) = read_csv(&out.join("phase.csv"));
    assert_eq!(rows.len(), 81);
    for r in rows {
        let a: f64 = r[column(&h, "excess")].parse().unwrap();
        let ell: usize = r[column(&h, "ell")].parse().unwrap();
        let expected = thresholds.iter().filter(|&&t| t <= a).count();
        // exactly at a threshold either side is optimal
        if thresholds.iter().all(|t| (t - a).abs() > 1e-6) {
            assert_eq!(ell, expected, "A = {a}");
        }
    }
}

#[test]
fn phase_outputs_reproduce_from_archived_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"norm": {"family": "killed_walk", "beta": 2.0}, "facets": 128,
        "phase": {"sigma": 0.7, "sweep": {"variable": "v", "start": 0.0, "stop": 12.0, "points": 25}}});
    let first = run_ok(&tmp, "phase", &cfg, "first", &[]);
    let archived = first.join("config.json");
    let second = tmp.path().join("second");
    let o = facets(&["phase", "--config", archived.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for f in ["thresholds.csv", "phase.csv", "branches.dat", "config.json", "manifest.json"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
    let manifest = read_json(&first.join("manifest.json"));
    assert!(manifest["tool_version"].as_str().unwrap().starts_with("facets "));
    assert_eq!(manifest["command"], "phase");
}

#[test]
fn norm_dump() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"norm": {"family": "euclidean"}, "facets": 4096});
    let out = run_ok(&tmp, "norm", &cfg, "run", &[]);
    let info = read_json(&out.join("norm.json"));
    assert!((info["w"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-4);
    assert_eq!(info["axis_tension"].as_f64().unwrap(), 1.0);
    let pts: Vec<(f64, f64)> = fs::read_to_string(out.join("wulff.dat"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let mut it = l.split_whitespace().map(|t| t.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(pts.first(), pts.last());
    assert!(pts.iter().all(|(x, y)| (x.hypot(*y) - 1.0).abs() < 1e-3));
}

fn small_simulation(seed: u64) -> Value {
    json!({"norm": {"family": "killed_walk", "beta": 2.0}, "facets": 128,
        "model": {"n": 8, "beta": 2.0, "p_v": 0.1, "p_s": 0.9},
        "excess": [0.0, 1.5],
        "chain": {"sweeps": 3000, "burn_in": 500, "thinning": 10, "snapshot_every": 500, "replicas": 2},
        "seed": seed})
}

#[test]
fn fixed_seeds_give_identical_summaries() {
    let tmp = TempDir::new().unwrap();
    let a = run_ok(&tmp, "simulate", &small_simulation(5), "a", &["--workers", "1"]);
    let b = run_ok(&tmp, "simulate", &small_simulation(5), "b", &["--workers", "3"]);
    let sa = fs::read(a.join("summary.json")).unwrap();
    assert_eq!(sa, fs::read(b.join("summary.json")).unwrap());
    assert_eq!(
        fs::read(a.join("chains/a01_r01/records.csv")).unwrap(),
        fs::read(b.join("chains/a01_r01/records.csv")).unwrap()
    );
    let c = run_ok(&tmp, "simulate", &small_simulation(5), "c", &["--seed", "6"]);
    assert_ne!(sa, fs::read(c.join("summary.json")).unwrap());
    assert_eq!(read_json(&c.join("config.json"))["seed"], 6);

    let s: Value = serde_json::from_slice(&sa).unwrap();
    assert_eq!(s["failed_chains"], 0);
    let per = s["excess"].as_array().unwrap();
    assert_eq!(per.len(), 2);
    for (i, e) in per.iter().enumerate() {
        let chains = e["chains"].as_array().unwrap();
        assert_eq!(chains.len(), 2);
        for (r, ch) in chains.iter().enumerate() {
            assert_eq!(ch["chain"].as_u64().unwrap(), (2 * i + r) as u64);
            assert_eq!(ch["records"], 250);
            assert_eq!(ch["snapshots"], 5);
        }
        let total: u64 = e["large_contours"]["bins"].as_array().unwrap().iter().map(|b| b["samples"].as_u64().unwrap()).sum();
        assert_eq!(total, 500);
        assert!(e["predicted"]["layers"].is_u64());
    }
    let snaps = fs::read_dir(a.join("chains/a00_r00/snapshots")).unwrap().count();
    assert_eq!(snaps, 5);
}

#[test]
fn summary_references_archived_config_hash() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_simulation(1);
    cfg["excess"] = json!([0.5]);
    cfg["chain"]["replicas"] = json!(1);
    cfg["out"] = json!("ignored-by-archive");
    let out = run_ok(&tmp, "simulate", &cfg, "run", &[]);
    let bytes = fs::read(out.join("config.json")).unwrap();
    let hash = format!("{:x}", Sha256::digest(&bytes));
    assert_eq!(read_json(&out.join("summary.json"))["config_sha256"], hash.as_str());
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["config_sha256"], hash.as_str());
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["streams"], json!([0]));
    assert!(read_json(&out.join("config.json")).get("out").is_none());
}

#[test]
fn zero_excess_stays_flat_at_low_temperature() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"norm": {"family": "killed_walk", "beta": 2.5}, "facets": 128,
        "model": {"n": 32, "beta": 2.5, "p_v": 0.1, "p_s": 0.9},
        "excess": [0.0],
        "chain": {"sweeps": 6000, "burn_in": 1000, "thinning": 10, "replicas": 2},
        "seed": 3});
    let out = run_ok(&tmp, "simulate", &cfg, "run", &[]);
    let s = read_json(&out.join("summary.json"));
    let e = &s["excess"][0];
    assert_eq!(e["predicted"]["layers"], 0);
    let bins = e["large_contours"]["bins"].as_array().unwrap();
    let at_zero = bins.iter().find(|b| b["count"] == 0).map_or(0.0, |b| b["frequency"].as_f64().unwrap());
    assert!(at_zero >= 0.9, "mass at 0: {at_zero}");
}

/// CSV of a `(2n - 1)`-square field from rows listed north first.
fn field_csv(n: usize, height: impl Fn(usize, usize) -> i32) -> String {
    let side = 2 * n - 1;
    let mut s = format!("N={n}\n");
    for iy in (0..side).rev() {
        let row: Vec<String> = (0..side).map(|ix| height(ix, iy).to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn in_cells(ix: usize, iy: usize, lo: usize, hi: usize) -> bool {
    (lo..hi).contains(&ix) && (lo..hi).contains(&iy)
}

fn analyze(args: &[&str]) -> Output {
    let mut v = vec!["analyze"];
    v.extend_from_slice(args);
    facets(&v)
}

#[test]
fn analyze_empty_directory() {
    let tmp = TempDir::new().unwrap();
    let snaps = tmp.path().join("snaps");
    fs::create_dir(&snaps).unwrap();
    let out = tmp.path().join("out");
    let o = analyze(&["--snapshots", snaps.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = read_json(&out.join("report.json"));
    assert_eq!(r["snapshots"], 0);
    assert_eq!(r["per_snapshot"], json!([]));
    assert!(r["epigraph_distance"].is_null());
}

#[test]
fn analyze_exact_stack_has_zero_distance() {
    let tmp = TempDir::new().unwrap();
    let snaps = tmp.path().join("snaps");
    fs::create_dir(&snaps).unwrap();
    // N = 8: cells 2..13 at height 1, cells 5..10 at height 2
    let n = 8;
    let csv = field_csv(n, |x, y| in_cells(x, y, 2, 13) as i32 + in_cells(x, y, 5, 10) as i32);
    fs::write(snaps.join("stack.csv"), &csv).unwrap();
    // cell i spans [(i - n + 1/2) / n, (i - n + 3/2) / n]
    let square = |lo: f64| json!({"vertices": [{"x": lo, "y": lo}, {"x": -lo, "y": lo}, {"x": -lo, "y": -lo}, {"x": lo, "y": -lo}]});
    let pred = tmp.path().join("pred.json");
    fs::write(&pred, json!({"layers": [square(-0.6875), square(-0.3125)]}).to_string()).unwrap();
    let out = tmp.path().join("out");
    let o = analyze(&["--snapshots", snaps.to_str().unwrap(), "--prediction", pred.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out.join("report.json"));
    let s = &r["per_snapshot"][0];
    assert_eq!(s["large_contours"], 2);
    let d = s["epigraph_distance"].as_f64().unwrap();
    assert!(d < 1e-9, "distance {d}");
    let areas: Vec<f64> = s["areas_by_level"].as_array().unwrap().iter().map(|a| a.as_f64().unwrap()).collect();
    assert_eq!(areas.len(), 2);
    assert!((areas[0] - 1.890625).abs() < 1e-12 && (areas[1] - 0.390625).abs() < 1e-12);
}

#[test]
fn analyze_histogram_matches_hand_count() {
    let tmp = TempDir::new().unwrap();
    let snaps = tmp.path().join("snaps");
    fs::create_dir(&snaps).unwrap();
    let n = 8;
    let flat = |_: usize, _: usize| 0;
    let one = |x, y| in_cells(x, y, 3, 12) as i32;
    let nested = |x, y| in_cells(x, y, 2, 13) as i32 + in_cells(x, y, 6, 9) as i32;
    let side_by_side = |x: usize, y: usize| ((1..7).contains(&x) && (4..11).contains(&y)) as i32 + ((8..14).contains(&x) && (4..11).contains(&y)) as i32;
    let pit = |x, y| -(in_cells(x, y, 4, 11) as i32);
    // a single raised cell has length 4, below eps N = 6 at eps = 0.75
    let bump = |x, y| (x == 7 && y == 7) as i32;
    let fields: Vec<(&str, String, usize)> = vec![
        ("f00.csv", field_csv(n, flat), 0),
        ("f01.csv", field_csv(n, bump), 0),
        ("f02.csv", field_csv(n, flat), 0),
        ("f03.csv", field_csv(n, one), 1),
        ("f04.csv", field_csv(n, one), 1),
        ("f05.csv", field_csv(n, pit), 1),
        ("f06.csv", field_csv(n, |x, y| one(x, y) + bump(x, y)), 1),
        ("f07.csv", field_csv(n, nested), 2),
        ("f08.csv", field_csv(n, side_by_side), 2),
        ("f09.csv", field_csv(n, nested), 2),
    ];
    for (name, csv, _) in &fields {
        fs::write(snaps.join(name), csv).unwrap();
    }
    fs::write(snaps.join("broken.csv"), "N=8\n1,2,3\n").unwrap();
    fs::write(snaps.join("notes.txt"), "not a snapshot").unwrap();

    let out = tmp.path().join("out");
    let o = analyze(&["--snapshots", snaps.to_str().unwrap(), "--eps", "0.75", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = read_json(&out.join("report.json"));
    assert_eq!(r["snapshots"], 10);
    assert_eq!(r["skipped"].as_array().unwrap().len(), 1);
    assert_eq!(r["skipped"][0]["file"], "broken.csv");
    for (i, (name, _, expected)) in fields.iter().enumerate() {
        assert_eq!(r["per_snapshot"][i]["file"], *name);
        assert_eq!(r["per_snapshot"][i]["large_contours"], *expected, "{name}");
    }
    let bins: Vec<(u64, u64)> = r["large_contours"]["bins"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| (b["count"].as_u64().unwrap(), b["samples"].as_u64().unwrap()))
        .collect();
    assert_eq!(bins, vec![(0, 3), (1, 4), (2, 3)]);
    assert_eq!(r["large_contours"]["modal_count"], 1);
}

#[test]
fn analyze_with_predicted_stack_from_config() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_simulation(2);
    cfg["excess"] = json!([1.5]);
    cfg["chain"]["replicas"] = json!(1);
    let sim = run_ok(&tmp, "simulate", &cfg, "sim", &[]);
    let cfg_path = sim.join("config.json");
    let out = tmp.path().join("out");
    let snaps = sim.join("chains/a00_r00/snapshots");
    let o = analyze(&[
        "--snapshots", snaps.to_str().unwrap(),
        "--config", cfg_path.to_str().unwrap(),
        "--excess", "1.5",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out.join("report.json"));
    assert_eq!(r["snapshots"], 5);
    // the simulation measured the same snapshots against the same stack
    let s = read_json(&sim.join("summary.json"));
    let sim_q = &s["excess"][0]["epigraph"]["distance"];
    if let Some(count) = sim_q["count"].as_u64() {
        assert_eq!(r["epigraph_distance"]["count"].as_u64().unwrap(), count);
        assert!((r["epigraph_distance"]["median"].as_f64().unwrap() - sim_q["median"].as_f64().unwrap()).abs() < 1e-12);
    }
    assert!(read_json(&out.join("manifest.json"))["config_sha256"].is_string());
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.json");
    assert_eq!(code(&facets(&["phase", "--config", missing.to_str().unwrap()])), 1);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&facets(&["phase", "--config", bad.to_str().unwrap()])), 1);
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();

    let invalid = [
        json!({"norm": {"family": "nonexistent"}}),
        json!({"norm": {"family": "euclidean"}, "facets": 30}),
        json!({"norm": {"family": "euclidean"}, "phase": {"sigma": -1.0}}),
        json!({"norm": {"family": "euclidean"}, "unknown_field": 1}),
        json!({"norm": {"family": "euclidean"}, "model": {"n": 8, "beta": 2.0, "p_v": 0.9, "p_s": 0.1}}),
        json!({"norm": {"family": "euclidean"}, "phase": {"sweep": {"variable": "excess", "start": 0.0, "stop": 1.0, "points": 3}}}),
    ];
    for (i, cfg) in invalid.iter().enumerate() {
        let p = write_config(tmp.path(), &format!("invalid{i}.json"), cfg);
        assert_eq!(code(&facets(&["phase", "--config", p.to_str().unwrap(), "--out", o])), 1, "{cfg}");
    }
    // simulate-specific checks
    let no_excess = write_config(tmp.path(), "noexcess.json", &json!({"norm": {"family": "euclidean"}, "facets": 64,
        "model": {"n": 8, "beta": 2.0, "p_v": 0.1, "p_s": 0.9}, "chain": {"sweeps": 10}}));
    assert_eq!(code(&facets(&["simulate", "--config", no_excess.to_str().unwrap(), "--out", o])), 1);
    let mut cfg = small_simulation(0);
    cfg["chain"]["burn_in"] = json!(5000);
    let p = write_config(tmp.path(), "burn.json", &cfg);
    assert_eq!(code(&facets(&["simulate", "--config", p.to_str().unwrap(), "--out", o])), 1);
    let p = write_config(tmp.path(), "ok.json", &small_simulation(0));
    assert_eq!(code(&facets(&["simulate", "--config", p.to_str().unwrap(), "--out", o, "--workers", "0"])), 1);

    // argument errors
    assert_eq!(code(&facets(&["frobnicate"])), 1);
    assert_eq!(code(&facets(&["phase", "--seed", "minus-one"])), 1);
    assert_eq!(code(&facets(&["phase"])), 1);
    assert_eq!(code(&facets(&["analyze", "--snapshots", tmp.path().join("nope").to_str().unwrap(), "--out", o])), 1);
    assert_eq!(code(&facets(&["--help"])), 0);
    assert_eq!(code(&facets(&["--version"])), 0);

    // runtime: the sweep runs past the layer cap
    let capped = write_config(tmp.path(), "capped.json", &json!({"norm": {"family": "euclidean"}, "facets": 64,
        "phase": {"sigma": 1.0, "l_max": 1, "sweep": {"variable": "v", "start": 0.0, "stop": 100.0, "points": 5}}}));
    let o2 = facets(&["phase", "--config", capped.to_str().unwrap(), "--out", o]);
    assert_eq!(code(&o2), 2, "{}", String::from_utf8_lossy(&o2.stderr));
}

#[test]
fn environment_overrides_output_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &json!({"norm": {"family": "euclidean"}, "facets": 64, "out": "from-config"}));
    let target = tmp.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_facets"))
        .args(["norm", "--config", cfg.to_str().unwrap()])
        .env("FACETS_OUT", &target)
        .env("RUST_LOG", "warn")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("wulff.dat").exists());
    assert!(!tmp.path().join("from-config").exists());
    let flag = tmp.path().join("from-flag");
    let o = Command::new(env!("CARGO_BIN_EXE_facets"))
        .args(["norm", "--config", cfg.to_str().unwrap(), "--out", flag.to_str().unwrap()])
        .env("FACETS_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(flag.join("norm.json").exists());
}
