use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use etpa_core::biphoton::marginals;
use etpa_core::dispersion::{DispersionTable, Process};
use etpa_core::hom::visibility;
use etpa_core::scenarios::StateSetup;
use sha2::{Digest, Sha256};

const SMALL: &str = "grid.n_points=64";

fn etpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etpa"))
        .args(args)
        .env_remove("ETPA_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["run", "--output-dir", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    let o = etpa(&all);
    assert!(o.status.success(), "{}", stderr(&o));
    o
}

fn hashes(dir: &Path) -> BTreeMap<String, String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, hex::encode(Sha256::digest(fs::read(&p).unwrap())))
        })
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn shipped_configs_validate() {
    let mut n = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let o = etpa(&["validate", "--config", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
        let out = String::from_utf8(o.stdout).unwrap();
        assert!(out.starts_with("OK\n"));
        assert!(out.contains("[pump]") || out.contains("scenario = \"table1\""));
        n += 1;
    }
    assert_eq!(n, 8);
}

#[test]
fn list_scenarios_names_all_eight() {
    let o = etpa(&["list-scenarios"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for s in [
        "fig1", "fig2", "fig3", "fig4", "fig5", "fig7", "table1", "custom",
    ] {
        assert!(text.lines().any(|l| l.starts_with(s)), "{s}");
    }
}

#[test]
fn notch_eta_out_of_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scenario = \"fig3\"\n[notch]\neta = 1.3\n").unwrap();
    let o = etpa(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("notch.eta") && stderr(&o).contains("[0, 1]"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn zero_pump_bandwidth_exits_2() {
    let o = etpa(&["validate", "--scenario", "fig1", "--pump-sigma-nm", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("pump.sigma_p_nm") && stderr(&o).contains("> 0"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn custom_without_crystal_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "scenario = \"custom\"\n[pump]\nsigma_p_nm = 1.0\n").unwrap();
    let out = dir.path().join("out");
    let o = etpa(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("crystal"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "scenario = \"fig1\"\n\n[pump]\nsigma = 1.0\n").unwrap();
    let o = etpa(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn out_of_range_wavelength_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = etpa(&[
        "run",
        "--scenario",
        "fig1",
        "--set",
        "pump.lambda_p0_nm=300",
        "--set",
        SMALL,
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("outside"), "{}", stderr(&o));
}

#[test]
fn set_overrides_file_and_flag_overrides_set() {
    let cfg = configs().join("fig3.toml");
    let o = etpa(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "notch.eta=0.5",
        "--set",
        "pump.sigma_p_nm=2.0",
        "--pump-sigma-nm",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("eta = 0.5"));
    assert!(text.contains("sigma_p_nm = 3.0"));
}

#[test]
fn fig2_writes_state_and_interferogram() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &["--scenario", "fig2", "--pump-sigma-nm", "5", "--set", SMALL],
    );
    for f in [
        "jsi.csv",
        "marginals.csv",
        "hom.csv",
        "hom.json",
        "state.json",
        "config.toml",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let state = StateSetup::pulsed(Process::TypeII)
        .with_points(64)
        .build(&DispersionTable::ktp())
        .unwrap();
    let v = json(&dir.path().join("hom.json"))["visibility"]
        .as_f64()
        .unwrap();
    assert_eq!(v, visibility(&state).unwrap());

    let csv = fs::read_to_string(dir.path().join("marginals.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "wavelength_nm,detuning_rad_per_s,signal_pairs_per_s,idler_pairs_per_s"
    );
    let signal: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(signal, marginals(&state).0);
    let jsi_rows = fs::read_to_string(dir.path().join("jsi.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(jsi_rows, 64 * 64 + 1);
}

#[test]
fn table1_matches_printed_rates() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &["--config", configs().join("table1.toml").to_str().unwrap()],
    );
    let printed = [
        ("Rh6G (He)", 2.2e4),
        ("ICG (He)", 1.66e5),
        ("Rh6G (Parzuchowski)", 333.81),
        ("AF455", 584.17),
        ("Qdot", 1.33e5),
        ("Fluorescein", 278.17),
        ("9R-S", 5.56e3),
        ("C153", 445.08),
    ];
    let mut rdr = csv::Reader::from_path(dir.path().join("table1.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = header
        .iter()
        .position(|h| h == "r_abs_pairs_per_s")
        .unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), printed.len());
    for (row, (name, r_abs)) in rows.iter().zip(printed) {
        assert_eq!(&row[0], name);
        let got: f64 = row[col].parse().unwrap();
        assert!((got / r_abs - 1.0).abs() < 0.02, "{name}: {got} vs {r_abs}");
    }
    let budget = json(&dir.path().join("budget.json"));
    assert!((budget["noise_floor"].as_f64().unwrap() / 6322.0 - 1.0).abs() < 0.01);
}

#[test]
fn manifest_covers_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig3.toml");
    run_in(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "--set", SMALL],
    );
    let m = json(&dir.path().join("manifest.json"));
    let listed: BTreeMap<String, String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            (
                e["path"].as_str().unwrap().to_string(),
                e["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    let mut on_disk = hashes(dir.path());
    on_disk.remove("manifest.json");
    assert_eq!(listed, on_disk);
    let roles: Vec<&str> = m["inputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["role"].as_str().unwrap())
        .collect();
    assert_eq!(roles, ["sellmeier", "samples", "config", "resolved_config"]);
    let cfg_hash = hex::encode(Sha256::digest(fs::read(&cfg).unwrap()));
    assert_eq!(m["inputs"][2]["sha256"], cfg_hash.as_str());
}

#[test]
fn reruns_are_byte_identical_and_seed_dependent() {
    let cfg = configs().join("fig7.toml");
    let args = [
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        SMALL,
        "--set",
        "noise.n_frames=20",
    ];
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    run_in(a.path(), &args);
    run_in(b.path(), &args);
    let mut other = args.to_vec();
    other.extend(["--seed", "8"]);
    run_in(c.path(), &other);
    let (ha, hb, hc) = (hashes(a.path()), hashes(b.path()), hashes(c.path()));
    let strip = |mut h: BTreeMap<String, String>| {
        h.remove("manifest.json");
        h.remove("config.toml");
        h
    };
    assert_eq!(ha.len(), hb.len());
    for (name, hash) in &ha {
        if name != "manifest.json" && name != "config.toml" {
            assert_eq!(Some(hash), hb.get(name), "{name}");
        }
    }
    assert_ne!(strip(ha)["absorption.csv"], strip(hc)["absorption.csv"]);
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = configs().join("fig7.toml");
    let base = [
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        SMALL,
        "--set",
        "noise.n_frames=20",
    ];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut one = base.to_vec();
    one.extend(["--threads", "1"]);
    let mut four = base.to_vec();
    four.extend(["--threads", "4"]);
    run_in(a.path(), &one);
    run_in(b.path(), &four);
    let (mut ha, mut hb) = (hashes(a.path()), hashes(b.path()));
    ha.remove("manifest.json");
    hb.remove("manifest.json");
    ha.remove("config.toml");
    hb.remove("config.toml");
    assert_eq!(ha, hb);
}

#[test]
fn data_dir_overrides_samples() {
    let data = tempfile::tempdir().unwrap();
    let text =
        etpa_core::samples::SAMPLES_TOML.replace("sigma_e_cm2 = 8e-24", "sigma_e_cm2 = 9e-24");
    assert_ne!(text, etpa_core::samples::SAMPLES_TOML);
    fs::write(data.path().join("samples.toml"), &text).unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_etpa"))
        .args([
            "run",
            "--scenario",
            "table1",
            "--output-dir",
            out.path().to_str().unwrap(),
        ])
        .env("ETPA_DATA_DIR", data.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let m = json(&out.path().join("manifest.json"));
    assert_eq!(m["inputs"][0]["source"], "builtin");
    assert!(m["inputs"][1]["source"]
        .as_str()
        .unwrap()
        .ends_with("samples.toml"));
    let t = json(&out.path().join("table1.json"));
    assert_eq!(t["rows"][0]["sigma_e_cm2"].as_f64(), Some(9e-24));

    let o = Command::new(env!("CARGO_BIN_EXE_etpa"))
        .args(["validate", "--scenario", "table1"])
        .env("ETPA_DATA_DIR", data.path().join("missing"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
