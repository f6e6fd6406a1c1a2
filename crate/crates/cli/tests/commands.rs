use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const OUTPUTS: [&str; 5] = [
    "model.json",
    "modes.json",
    "dispersive.json",
    "fit_report.json",
    "impedance_compare.csv",
];

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/single_rlc.s1p")
}

fn blackbox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blackbox"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    match fs::read_dir(dir) {
        Ok(rd) => {
            let mut v: Vec<String> = rd.map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
            v.sort();
            v
        }
        Err(_) => Vec::new(),
    }
}

#[test]
fn pipeline_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = blackbox(&["pipeline", "-i", s(&fixture()), "--e-j-ghz", "20", "-o", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let mut want: Vec<String> = OUTPUTS.iter().map(|s| s.to_string()).collect();
    want.sort();
    assert_eq!(listing(&out), want);

    let d: serde_json::Value = serde_json::from_slice(&fs::read(out.join("dispersive.json")).unwrap()).unwrap();
    assert_eq!(d["exact"]["freqs_ghz"].as_array().unwrap().len(), 1);
    assert_eq!(d["perturbative"]["alpha_mhz"].as_array().unwrap().len(), 1);
    let f = d["exact"]["freqs_ghz"][0].as_f64().unwrap();
    assert!((f - 5.0).abs() < 1e-9);
    let dev = d["relative_deviation"]["alpha"][0].as_f64().unwrap();
    assert!(dev < 0.1, "{dev}");

    let modes: serde_json::Value = serde_json::from_slice(&fs::read(out.join("modes.json")).unwrap()).unwrap();
    assert!((modes[0]["r_ohm"].as_f64().unwrap() - 2000.0).abs() < 1e-6);
    assert!((modes[0]["q"].as_f64().unwrap() - 50.0).abs() < 1e-9);

    let csv = fs::read_to_string(out.join("impedance_compare.csv")).unwrap();
    assert!(csv.starts_with("freq_hz,abs_z_data_ohm,abs_z_fit_ohm\n"));
    assert_eq!(csv.lines().count(), 402);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let r = blackbox(&["pipeline", "-i", s(&fixture()), "--e-j-ghz", "20", "-o", s(out)]);
        assert!(r.status.success());
    }
    for name in OUTPUTS {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn both_junction_sources_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = blackbox(&[
        "pipeline",
        "-i",
        s(&fixture()),
        "--e-j-ghz",
        "20",
        "--i-c-ua",
        "0.03",
        "-o",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(listing(&out).is_empty());
}

#[test]
fn unparseable_input_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.s1p");
    fs::write(&bad, "# GHz S RI R 50\n1 0.1 0.2\n0.5 0.1 0.2\n").unwrap();
    let out = dir.path().join("run");
    let r = blackbox(&["pipeline", "-i", s(&bad), "--e-j-ghz", "20", "-o", s(&out)]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("parse stage"));
    assert!(listing(&out).is_empty());
}

#[test]
fn non_convergence_exits_with_fit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = blackbox(&["fit", "-i", s(&fixture()), "--max-iters", "1", "-o", s(&out)]);
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(listing(&out).is_empty());
}

#[test]
fn quantize_failure_leaves_no_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = blackbox(&[
        "pipeline",
        "-i",
        s(&fixture()),
        "--e-j-ghz",
        "20",
        "--truncations",
        "5000",
        "-o",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(6));
    assert!(listing(&out).is_empty());
}

#[test]
fn fit_then_quantize_matches_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full");
    assert!(blackbox(&["pipeline", "-i", s(&fixture()), "--e-j-ghz", "20", "-o", s(&full)])
        .status
        .success());
    let q = dir.path().join("q");
    let r = blackbox(&[
        "quantize",
        "--modes",
        s(&full.join("modes.json")),
        "--e-j-ghz",
        "20",
        "-o",
        s(&q),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(
        fs::read(q.join("dispersive.json")).unwrap(),
        fs::read(full.join("dispersive.json")).unwrap()
    );

    let fit = dir.path().join("fit");
    assert!(blackbox(&["fit", "-i", s(&fixture()), "-o", s(&fit)]).status.success());
    assert_eq!(listing(&fit), ["fit_report.json", "impedance_compare.csv", "model.json"]);
    assert_eq!(
        fs::read(fit.join("model.json")).unwrap(),
        fs::read(full.join("model.json")).unwrap()
    );
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("run");
    fs::write(
        &cfg,
        format!(
            "# single RLC\ninput = {}\ni_c_ua = 0.03\ntruncations = 12\noutput_dir = {}\n",
            s(&fixture()),
            s(&out)
        ),
    )
    .unwrap();
    let r = blackbox(&["pipeline", "--config", s(&cfg), "--truncations", "15"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let d: serde_json::Value = serde_json::from_slice(&fs::read(out.join("dispersive.json")).unwrap()).unwrap();
    assert_eq!(d["truncations"][0], 15);
    // E_J = Φ₀·30 nA/2π is h·14.9 GHz.
    let ej = d["exact"]["ej_ghz"].as_f64().unwrap();
    assert!((ej - 14.9).abs() < 0.01, "{ej}");
}

#[test]
fn several_inputs_in_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("first.s1p");
    let b = dir.path().join("second.s1p");
    fs::copy(fixture(), &a).unwrap();
    fs::copy(fixture(), &b).unwrap();
    let out = dir.path().join("run");
    let r = blackbox(&["pipeline", "-i", s(&a), s(&b), "--e-j-ghz", "20", "-j", "2", "-o", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(listing(&out), ["first", "second"]);
    assert_eq!(
        fs::read(out.join("first/dispersive.json")).unwrap(),
        fs::read(out.join("second/dispersive.json")).unwrap()
    );
}

#[test]
fn rcsj_writes_both_branches() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("iv");
    let r = blackbox(&[
        "rcsj",
        "--beta-c",
        "25",
        "--points",
        "31",
        "--settle-periods",
        "30",
        "--average-periods",
        "60",
        "--trace",
        "-o",
        s(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let iv = fs::read_to_string(out.join("iv.csv")).unwrap();
    let mut lines = iv.lines();
    assert_eq!(lines.next(), Some("branch,i_amp,v_volt"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().filter(|r| r[0] == "up").count(), 31);
    assert_eq!(rows.iter().filter(|r| r[0] == "down").count(), 31);
    // Hysteresis: at I_c/2 the up branch is superconducting, the down branch is not.
    let v_at = |branch: &str, i: f64| -> f64 {
        rows.iter()
            .find(|r| r[0] == branch && (r[1].parse::<f64>().unwrap() - i).abs() < 1e-12)
            .map(|r| r[2].parse().unwrap())
            .unwrap()
    };
    assert!(v_at("up", 0.5e-6).abs() < 1e-8);
    assert!(v_at("down", 0.5e-6) > 1e-5);

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t_s,phi_rad,v_volt\n"));
}

#[test]
fn rcsj_needs_one_damping_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let r = blackbox(&["rcsj", "-o", s(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
    let r = blackbox(&["rcsj", "--beta-c", "1", "--r-n-ohm", "10", "-o", s(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
}
