use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scene_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

fn ghostimg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghostimg")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn write_scene(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn thermal_scene(distance: f64) -> Value {
    json!({
        "source": {"photon_flux": 1e6, "beam_radius": 1e-3, "coherence_length": 1e-4,
                   "coherence_time": 1e-9, "class": "thermal"},
        "path": {"distance": distance, "wavenumber": 1e7},
        "object": {"kind": "point"},
        "detector": {"quantum_efficiency": 0.9, "integration_time": 1e-10},
        "run": {"grid": {"samples": 61, "extent": 1.22e-3}}
    })
}

fn run_ok(scene: &Path, out: &Path) -> Value {
    let o = ghostimg(&["run", scene.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    read_json(&out.join("metrics.json"))
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn near_field_point_resolution() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_ok(&scene_path("thermal-near-field.json"), tmp.path());
    let psf = m["psf_radius"].as_f64().unwrap();
    let want = 2f64.sqrt() * 1e-4;
    assert!((psf / want - 1.0).abs() < 0.02, "{psf}");
    for f in ["image.grid", "signal.grid", "background.grid", "metadata.json", "manifest.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let manifest = read_json(&tmp.path().join("manifest.json"));
    assert_eq!(manifest["regime"], "near_field");
    assert_eq!(manifest["run_id"].as_str().unwrap(), &manifest["config_hash"].as_str().unwrap()[..16]);
}

#[test]
fn reruns_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = scene_path("thermal-montecarlo.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&scene, &a);
    run_ok(&scene, &b);
    for f in ["image.grid", "signal.grid", "background.grid", "standard_error.grid", "metrics.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ma = without_timing(read_json(&a.join("manifest.json")));
    let mb = without_timing(read_json(&b.join("manifest.json")));
    assert_eq!(ma, mb);
}

#[test]
fn manifest_reproduces_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&scene_path("phase-sensitive-far-field-slit.json"), &a);
    run_ok(&a.join("manifest.json"), &b);
    assert_eq!(fs::read(a.join("image.grid")).unwrap(), fs::read(b.join("image.grid")).unwrap());
    let (ma, mb) = (read_json(&a.join("manifest.json")), read_json(&b.join("manifest.json")));
    assert_eq!(ma["run_id"], mb["run_id"]);
}

#[test]
fn single_worker_matches_pool() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = scene_path("thermal-montecarlo.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&scene, &a);
    let o = Command::new(env!("CARGO_BIN_EXE_ghostimg"))
        .args(["run", scene.to_str().unwrap(), "-o", b.to_str().unwrap()])
        .env("GHOSTIMG_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(a.join("image.grid")).unwrap(), fs::read(b.join("image.grid")).unwrap());
    assert_eq!(code(&ghostimg(&["--workers", "0", "run", scene.to_str().unwrap()])), 2);
}

#[test]
fn intermediate_regime_needs_numeric_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_scene(tmp.path(), "mid.json", &thermal_scene(0.5));
    let o = ghostimg(&["run", p.to_str().unwrap(), "-o", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("mode=numeric"), "{}", stderr(&o));
    let out = tmp.path().join("numeric");
    let m = run_ok(&scene_path("intermediate-numeric.json"), &out);
    assert!(m["psf_radius"].as_f64().unwrap() > 0.0);
    assert_eq!(read_json(&out.join("manifest.json"))["regime"], "intermediate");
}

#[test]
fn bad_configs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = thermal_scene(0.005);
    v["source"]["coherence_length"] = json!(-1.0);
    let p = write_scene(tmp.path(), "neg.json", &v);
    assert_eq!(code(&ghostimg(&["run", p.to_str().unwrap(), "-o", tmp.path().to_str().unwrap()])), 2);
    let mut v = thermal_scene(0.005);
    v["detector"]["colour"] = json!("red");
    let p = write_scene(tmp.path(), "unknown.json", &v);
    assert_eq!(code(&ghostimg(&["run", p.to_str().unwrap(), "-o", tmp.path().to_str().unwrap()])), 2);
    let missing = tmp.path().join("nope.json");
    assert_eq!(code(&ghostimg(&["run", missing.to_str().unwrap()])), 2);
}

#[test]
fn too_bright_quantum_is_regime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = thermal_scene(0.005);
    v["source"]["class"] = json!("quantum_phase_sensitive");
    v["source"]["photon_flux"] = json!(1e12);
    let p = write_scene(tmp.path(), "bright.json", &v);
    assert_eq!(code(&ghostimg(&["run", p.to_str().unwrap(), "-o", tmp.path().to_str().unwrap()])), 3);
}

fn sweep_rows(out: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(out.join("sweep.csv"))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn far_field_fov_grows_linearly() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ghostimg(&["sweep", scene_path("sweep-far-field-fov.json").to_str().unwrap(), "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = sweep_rows(tmp.path());
    let col = rows[0].iter().position(|c| c == "fov_radius").unwrap();
    let pts: Vec<(f64, f64)> = rows[1..].iter().map(|r| (r[1].parse().unwrap(), r[col].parse().unwrap())).collect();
    assert_eq!(pts.len(), 4);
    // Least-squares slope through the origin.
    let slope = pts.iter().map(|(l, f)| l * f).sum::<f64>() / pts.iter().map(|(l, _)| l * l).sum::<f64>();
    let want = 2.0 / (1e7 * 1e-4);
    assert!((slope / want - 1.0).abs() < 0.03, "{slope} vs {want}");
    for r in &rows[1..] {
        assert!(tmp.path().join(format!("run_{:04}", r[0].parse::<usize>().unwrap())).join("manifest.json").exists());
    }
    assert!(tmp.path().join("sweep_manifest.json").exists());
}

#[test]
fn contrast_follows_temporal_overlap() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ghostimg(&["sweep", scene_path("sweep-contrast.json").to_str().unwrap(), "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = sweep_rows(tmp.path());
    let col = rows[0].iter().position(|c| c == "contrast").unwrap();
    let c: Vec<(f64, f64)> = rows[1..].iter().map(|r| (r[1].parse().unwrap(), r[col].parse().unwrap())).collect();
    let c0 = c[0].1;
    for &(ratio, v) in &c[1..] {
        let want = (1.0 + 0.25 * ratio * ratio).powf(-0.5);
        assert!((v / c0 / want - 1.0).abs() < 0.02, "T_d/T0 = {ratio}: {v}");
    }
}

#[test]
fn empty_sweep_is_a_single_run() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_scene(tmp.path(), "s.json", &thermal_scene(0.005));
    let out = tmp.path().join("out");
    let o = ghostimg(&["sweep", p.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn validate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = scene_path("thermal-montecarlo.json");
    let o = ghostimg(&["validate", scene.to_str().unwrap(), "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&tmp.path().join("validation.json"));
    assert_eq!(r["passed"], true);
    assert!(r["fraction"].as_f64().unwrap() >= 0.95);

    let o = ghostimg(&["validate", scene.to_str().unwrap(), "--min-fraction", "1.1"]);
    assert_eq!(code(&o), 4);
    let o = ghostimg(&["validate", scene_path("quantum-near-field.json").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

fn certify(args: &[&str]) -> (i32, String) {
    let o = ghostimg(&[&["certify"], args].concat());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap_or(Value::Null);
    (code(&o), v["classicality"].as_str().unwrap_or("").to_owned())
}

#[test]
fn certify_classifies_gsm_bounds() {
    let s = scene_path("thermal-near-field.json");
    let s = s.to_str().unwrap();
    assert_eq!(certify(&["--scene", s, "--bound", "classical"]), (0, "classical".into()));
    assert_eq!(certify(&["--scene", s, "--bound", "quantum"]), (0, "quantum_admissible".into()));
    assert_eq!(certify(&["--scene", s, "--bound", "quantum", "--scale", "2"]), (0, "unphysical".into()));
}

#[test]
fn certify_spectrum_file() {
    let tmp = tempfile::tempdir().unwrap();
    let gn: f64 = 0.25;
    let pair = |gp: f64| {
        json!({"dims": [2], "spacing": [1.0], "gn": [gn, gn], "gp": [[gp, 0.0], [0.0, gp]]})
    };
    let cases = [(gn, "classical"), ((gn * (1.0 + gn)).sqrt(), "quantum_admissible"), (1.0, "unphysical")];
    for (gp, want) in cases {
        let p = write_scene(tmp.path(), "pair.json", &pair(gp));
        assert_eq!(certify(&["--spectrum", p.to_str().unwrap()]), (0, want.to_owned()), "{gp}");
    }
    let p = write_scene(tmp.path(), "bad.json", &json!({"dims": [3], "spacing": [1.0], "gn": [1.0], "gp": []}));
    assert_eq!(certify(&["--spectrum", p.to_str().unwrap()]).0, 2);
}

#[test]
fn report_renders_and_checks_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    run_ok(&scene_path("relay-unit-magnification.json"), &run);
    let o = ghostimg(&["report", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let pgm = fs::read(run.join("image.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n128 128\n255\n"));
    assert_eq!(pgm.len(), b"P5\n128 128\n255\n".len() + 128 * 128);
    let csv = fs::read_to_string(run.join("image.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,C"));
    assert_eq!(csv.lines().count(), 1 + 128 * 128);

    let mut bytes = fs::read(run.join("signal.grid")).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(run.join("signal.grid"), bytes).unwrap();
    let o = ghostimg(&["report", run.join("manifest.json").to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}
