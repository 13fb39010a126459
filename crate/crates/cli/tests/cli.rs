use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sicspin::lattice::Species;
use sicspin::spinphys::{nuclear_transition_frequency, Constants, FieldConfig, HyperfineTensor, Ms};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sicspin"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn sicspin")
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

fn seed(s: u32, file: &str) -> String {
    fixture(&format!("register25/seed_{s:02}/{file}")).display().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("json error on stderr");
    serde_json::from_str::<Value>(line).unwrap()["error"].clone()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn place_recovers_a_fixture_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("placement.json");
    let o = run(&["place", "--couplings", &seed(0, "couplings.csv"), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert_eq!(v["solutions"].as_array().unwrap().len(), 1);
    assert_eq!(v["solutions"][0]["assignment"].as_object().unwrap().len(), 25);
    let m = json(&dir.path().join("placement.manifest.json"));
    assert_eq!(m["command"], "place");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 1);
    assert_eq!(m["outputs"][0]["path"], "placement.json");
}

#[test]
fn missing_input_is_a_usage_error_naming_the_path() {
    let o = run(&["place", "--couplings", "/nonexistent/couplings.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_error(&o);
    assert_eq!(e["kind"], "missing_input");
    assert!(e["message"].as_str().unwrap().contains("/nonexistent/couplings.csv"));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[placement]\ntolerance_default = -1.0\n").unwrap();
    let o = run(&["--config", s(&cfg), "place", "--couplings", &seed(0, "couplings.csv")]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&cfg, "[placement]\nno_such_key = 1\n").unwrap();
    let o = run(&["--config", s(&cfg), "place", "--couplings", &seed(0, "couplings.csv")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infeasible_table_is_a_domain_error() {
    let o = run(&["place", "--couplings", &seed(2, "couplings.csv")]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_error(&o)["kind"], "infeasible");
}

#[test]
fn place_then_refine_writes_positions_csv() {
    let dir = tempfile::tempdir().unwrap();
    let placed = dir.path().join("p.json");
    let refined = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let ms = seed(0, "couplings.csv");
    assert!(run(&["place", "--couplings", &ms, "--out", s(&placed)]).status.success());
    let o = run(&["refine", "--solution", s(&placed), "--couplings", &ms, "--out", s(&refined), "--csv", s(&csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&refined);
    assert!(r["residual"].as_f64().unwrap() <= r["initial_residual"].as_f64().unwrap());
    assert!(r["displacements"]["max"].as_f64().unwrap() < 3.08);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 26);
    let m = json(&dir.path().join("r.manifest.json"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn export_graph_colours_and_cutoff() {
    let dir = tempfile::tempdir().unwrap();
    let edges = |cutoff: &str| {
        let out = dir.path().join(format!("g{cutoff}.json"));
        let dot = dir.path().join(format!("g{cutoff}.dot"));
        let o = run(&[
            "export-graph",
            "--couplings",
            &seed(0, "couplings.csv"),
            "--cluster",
            &seed(0, "cluster.json"),
            "--cutoff",
            cutoff,
            "--out",
            s(&out),
            "--dot",
            s(&dot),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(std::fs::read_to_string(&dot).unwrap().starts_with("graph couplings {"));
        json(&out)
    };
    let g1 = edges("1");
    let nodes = g1["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 25);
    assert_eq!(nodes.iter().filter(|n| n["color"] == "green").count(), 22);
    assert_eq!(nodes.iter().filter(|n| n["color"] == "orange").count(), 3);
    assert!(nodes.iter().all(|n| n["position"].is_array()));
    let n1 = g1["edges"].as_array().unwrap().len();
    let n5 = edges("5")["edges"].as_array().unwrap().len();
    let n50 = edges("50")["edges"].as_array().unwrap().len();
    assert!(n1 >= n5 && n5 >= n50 && n1 > n50);
}

#[test]
fn export_graph_without_couplings_gives_nodes_only() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "spin_a,spin_b,f_hz,sigma_hz,subspace_mode\n").unwrap();
    let out = dir.path().join("g.json");
    let o = run(&["export-graph", "--couplings", s(&empty), "--cluster", &seed(0, "cluster.json"), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g = json(&out);
    assert_eq!(g["nodes"].as_array().unwrap().len(), 25);
    assert!(g["edges"].as_array().unwrap().is_empty());
}

#[test]
fn telegraph_on_shipped_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = run(&["telegraph", "--trace", s(&fixture("telegraph_trace.csv")), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    let bd = r["rate_bright_to_dark"]["rate"].as_f64().unwrap();
    let db = r["rate_dark_to_bright"]["rate"].as_f64().unwrap();
    let bd_se = r["rate_bright_to_dark"]["stderr"].as_f64().unwrap();
    let db_se = r["rate_dark_to_bright"]["stderr"].as_f64().unwrap();
    assert!((bd - 0.18).abs() < 3.0 * bd_se, "{bd} +- {bd_se}");
    assert!((db - 0.85).abs() < 3.0 * db_se, "{db} +- {db_se}");
    let o = run(&["telegraph", "--trace", s(&fixture("telegraph_trace.csv")), "--window", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ddrf_calc_json() {
    use std::f64::consts::PI;
    let (f0, f1, f_rf, tau) = (1.66e6, 1.70e6, 1.66e6, 20e-6);
    let o = run(&[
        "ddrf-calc", "--f0", "1.66e6", "--f1", "1.70e6", "--f-rf", "1.66e6", "--tau", "20e-6", "--rabi", "2000",
        "--n-pulses", "10", "--json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let x = PI + 2.0 * PI * (f0 + f1 - 2.0 * f_rf) * tau;
    assert!((v["phase_update_rad"].as_f64().unwrap() - x.sin().atan2(x.cos())).abs() < 1e-9);
    // Driven on f0: sinc(0) = 1 and the other branch is far detuned.
    let w = v["effective_rabi_hz"].as_f64().unwrap();
    let off = 2.0 * PI * (f1 - f_rf) * tau;
    assert!((w - 2000.0 * (off.sin() / off - 1.0)).abs() < 1e-9);
    let theta = v["rotation_angle_rad"].as_f64().unwrap();
    assert!((theta - 2.0 * PI * 10.0 * w * tau).abs() < 1e-12);
    let o = run(&["ddrf-calc", "--f0", "1e6", "--f1", "1e6", "--f-rf", "1e6", "--tau", "1e-6", "--rabi", "1", "--n-pulses", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_from_delta_b_and_angles() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = run(&["calibrate", "--delta-b", "-1.53", "--delta-b-unc", "0.6", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&out);
    assert!((c["calibration"]["g_factor"].as_f64().unwrap() + 2.0012).abs() < 5e-5);
    let o = run(&["calibrate", "--rotation-deg", "0.037", "--tilt-deg", "0.056", "--out", s(&out)]);
    assert!(o.status.success());
    assert!((json(&out)["transverse_field_g"].as_f64().unwrap() - 2.3).abs() < 0.05);
    let o = run(&["calibrate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_scan_recovers_field_offset() {
    let dir = tempfile::tempdir().unwrap();
    let k = Constants::default();
    let true_offset = -1.5;
    let field = FieldConfig::aligned(1960.9 + true_offset);
    let dft = [("Si2", 120e3, 40e3), ("Si3", -60e3, 25e3), ("C1", 300e3, 90e3)];
    let mut freqs = String::from("label,f_a_hz,ms_a,f_b_hz,ms_b\n");
    let mut table = String::from("label,A_zz_Hz,A_perp_Hz\n");
    for (label, a_zz, a_perp) in dft {
        let sp = k.nucleus(if label.starts_with('C') { Species::C } else { Species::Si });
        let hf = HyperfineTensor::from_parallel_perp(a_zz, a_perp, 0.0);
        let fp = nuclear_transition_frequency(&field, &sp, &hf, Ms::PlusThreeHalves);
        let fm = nuclear_transition_frequency(&field, &sp, &hf, Ms::MinusThreeHalves);
        freqs.push_str(&format!("{label},{fp},+3/2,{fm},-3/2\n"));
        table.push_str(&format!("{label},{a_zz},{a_perp}\n"));
    }
    let fpath = dir.path().join("freqs.csv");
    let dpath = dir.path().join("dft.csv");
    std::fs::write(&fpath, freqs).unwrap();
    std::fs::write(&dpath, table).unwrap();
    let out = dir.path().join("cal.json");
    let o = run(&["calibrate", "--freqs", s(&fpath), "--dft", s(&dpath), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&out);
    let db = c["calibration"]["delta_b"].as_f64().unwrap();
    assert!((db - true_offset).abs() < 0.02, "{db}");
    assert_eq!(c["dft_comparison"]["rows"].as_object().map(|r| r.len()), Some(3));
    assert_eq!(json(&dir.path().join("cal.manifest.json"))["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn lattice_json_uses_angstrom_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sites.json");
    let o = run(&["lattice", "--radius", "4", "--species", "si", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    let sites = v.as_array().or_else(|| v["sites"].as_array()).unwrap();
    assert!(!sites.is_empty());
    for site in sites {
        assert_eq!(site["species"], "Si");
        let r: f64 = ["x_A", "y_A", "z_A"].iter().map(|k| site[*k].as_f64().unwrap().powi(2)).sum::<f64>().sqrt();
        assert!(r <= 4.0 + 1e-9);
    }
    let csv = run(&["lattice", "--radius", "3"]);
    assert!(String::from_utf8_lossy(&csv.stdout).starts_with("species,i,j,k,basis,x_A,y_A,z_A"));
}

#[test]
fn flags_override_config_and_land_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[placement]\ntolerance_default = 0.8\nmin_detectable = 2.5\n").unwrap();
    let out = dir.path().join("p.json");
    let o = run(&[
        "--config", s(&cfg), "--g-electron", "-2.001", "place", "--couplings", &seed(0, "couplings.csv"), "--tolerance",
        "0.7", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&dir.path().join("p.manifest.json"));
    assert_eq!(m["config"]["placement"]["tolerance_default"], 0.7);
    assert_eq!(m["config"]["placement"]["min_detectable"], 2.5);
    assert_eq!(m["config"]["constants"]["g_electron"], -2.001);
    assert_eq!(m["constants"]["g_electron"], -2.001);
}

#[test]
fn reproduce_is_byte_identical_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let o = run(&["reproduce", "--out", s(&first)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = first.join("manifest.json");
    let o = run(&["reproduce", "--manifest", s(&manifest), "--verify", "--out", s(&second)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in sicspin_cli::reproduce::OUTPUT_FILES.iter().chain(&["manifest.json"]) {
        assert_eq!(std::fs::read(first.join(name)).unwrap(), std::fs::read(second.join(name)).unwrap(), "{name}");
    }
    let report = json(&first.join("report.json"));
    assert_eq!(report["recovered"], true);
    assert_eq!(report["n_spins"], 25);
    let other = dir.path().join("other");
    assert!(run(&["reproduce", "--seed", "7", "--out", s(&other)]).status.success());
    assert_ne!(std::fs::read(first.join("couplings.csv")).unwrap(), std::fs::read(other.join("couplings.csv")).unwrap());
}
