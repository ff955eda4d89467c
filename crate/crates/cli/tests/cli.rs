use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn odf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odf")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn default_config() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("config/default.toml")).unwrap()
}

/// Default config with a short frequency sweep, written into `dir`.
fn quick_config(dir: &Path) -> PathBuf {
    let text = default_config().replace("sweep_points = 61", "sweep_points = 3");
    let path = dir.join("quick.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[i].to_string()).collect()
}

#[test]
fn enumerate_reports_540_states() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let o = odf(&["enumerate", "--nmax", "8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("540 states"));
    assert_eq!(read_csv(&out.join("states.csv")).len(), 540);
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("config_hash") && manifest.contains("seed = 1"));
}

#[test]
fn windows_red_threshold_for_n4() {
    let dir = tempfile::tempdir().unwrap();
    let o = odf(&["windows", "--exclude-up-to", "4", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let red: Vec<f64> =
        column(&dir.path().join("windows.csv"), "red_min_nm").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(red.len(), 3);
    assert!((red[2] - 789.4).abs() < 0.3, "{red:?}");
}

#[test]
fn simulate_reports_both_mode_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let out = dir.path().join("s");
    let o = odf(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f: Vec<f64> = column(&out.join("modes.csv"), "f_ip_hz").iter().map(|s| s.parse().unwrap()).collect();
    assert!((f[0] / 1e3 - 695.0).abs() < 1.5, "{f:?}");
    assert!((f[1] / 1e3 - 668.0).abs() < 1.5, "{f:?}");
    assert_eq!(column(&out.join("modes.csv"), "configuration"), ["same_phase", "opposite_phase"]);
    for name in ["sweep_sp.csv", "sweep_op.csv", "signal_sp.csv", "signal_op.csv", "excitation.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn outputs_repeat_and_ignore_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = odf(&["spectrum", "--points", "21", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        std::fs::read(out.join("spectrum.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "4"));
}

#[test]
fn signals_round_trip_through_identification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let path = |p: &str| dir.path().join(p).to_str().unwrap().to_string();
    assert!(odf(&["simulate", "--config", cfg, "--out", &path("s")]).status.success());
    assert!(odf(&["calibrate", "--config", cfg, "--out", &path("c")]).status.success());
    let o = odf(&[
        "identify",
        "--config",
        cfg,
        "--sp",
        &path("s/signal_sp.csv"),
        "--op",
        &path("s/signal_op.csv"),
        "--bundle",
        &path("c/calibration"),
        "--out",
        &path("i"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(path("i/identification.json")).unwrap()).unwrap();
    let id = &doc["identifications"][0];
    assert_eq!(id["measurement"]["sign"], "Red");
    let k1 = &id["candidates"]["tiers"][0]["candidates"];
    // the default config drives N=0 J=1/2
    assert!(k1.as_array().unwrap().iter().any(|c| c["state"]["n"] == 0 && c["state"]["nuclear_spin"] == 0));
}

#[test]
fn classify_consecutive_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(
        &m,
        "wavelength_nm,intensity_W_m2,shift_Hz,sigma_Hz,sign,f_ip_Hz\n\
         789.71,1.15e7,1500,80,blue,695000\n\
         789.71,1.15e7,1500,80,red,695000\n\
         789.71,1.15e7,1500,80,red,690000\n\
         789.71,1.15e7,1520,80,red,690000\n",
    )
    .unwrap();
    let out = dir.path().join("k");
    assert!(odf(&["classify", "--measurements", m.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    assert_eq!(column(&out.join("events.csv"), "event"), ["quantum_jump", "reaction", "no_change"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    assert_eq!(odf(&["windows", "--exclude-up-to", "4", "--bogus"]).status.code(), Some(2));
    assert_eq!(odf(&["classify", "--measurements", "/nonexistent.csv", "--out", out]).status.code(), Some(2));

    let both = default_config().replace("half_wavelengths = 19", "half_wavelengths = 19\natomic_frequency_hz = 5e5");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, both).unwrap();
    let o = odf(&["windows", "--exclude-up-to", "4", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exactly one"));

    let neither = default_config().replace("anchor_shift_hz = -390.0", "");
    std::fs::write(&bad, neither).unwrap();
    let o = odf(&["windows", "--exclude-up-to", "4", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    // a partner signal far larger than the atomic shift cannot be corrected
    let cfg = quick_config(dir.path());
    let s = dir.path().join("s");
    assert!(odf(&["simulate", "--config", cfg.to_str().unwrap(), "--out", s.to_str().unwrap()]).status.success());
    let signal = s.join("signal_sp.csv");
    let o =
        odf(&["calibrate", "--partner-signal", signal.to_str().unwrap(), "--atomic-shift-hz", "-100", "--out", out]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
