//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};

use blackbox_core::constants::SI;
use blackbox_core::network::{s_to_z, z_to_s, FrequencyResponse, ResponseKind};
use blackbox_core::quantize::{
    build_hamiltonian, charge_operator, flux_operator, kerr_exact, kerr_perturbative, JunctionParams, QuantizedMode,
};
use blackbox_core::ratfit::{self, FitOptions, RationalModel};
use blackbox_core::rcsj::{self, PhaseState, RcsjParams};
use blackbox_core::synthesis::{chain_impedance, synthesize_modes};
use blackbox_verify::{overdamped_voltage, parallel_rlc_impedance, parallel_rlc_pole, parallel_rlc_residue};

const ROUND_TRIP_TOL: f64 = 1e-12;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(1);
const POLE_TOL: f64 = 1e-6;
const FIT_MAX_ITERS: usize = 20;
const FIT_BUDGET: Duration = Duration::from_secs(5);
const SYNTH_TOL: f64 = 1e-9;
const CHAIN_TOL: f64 = 1e-6;
const HARMONIC_TOL: f64 = 1e-12;
const COMMUTATOR_TOL: f64 = 1e-12;
const KERR_TOL: f64 = 0.10;
const KERR_BUDGET: Duration = Duration::from_secs(30);
const IDENTITY_TOL: f64 = 4.0 * f64::EPSILON;
const IV_TOL: f64 = 0.01;
const SUPERCONDUCTING_V: f64 = 1e-3;
const RETRAP_MAX: f64 = 0.5;
const SWITCH_MIN: f64 = 0.95;
const SWEEP_BUDGET: Duration = Duration::from_secs(60);
const ENERGY_DRIFT_TOL: f64 = 1e-8;
const PLASMA_TOL: f64 = 1e-3;

// Two-mode network: (f0 Hz, Q, R ohm).
const MODES: [(f64, f64, f64); 2] = [(5e9, 50.0, 1000.0), (7e9, 80.0, 500.0)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn two_mode_data() -> FrequencyResponse {
    let freqs: Vec<f64> = (0..1000).map(|k| 3e9 + 6e9 * k as f64 / 999.0).collect();
    let values = freqs
        .iter()
        .map(|&f| MODES.iter().map(|&(f0, q, r)| parallel_rlc_impedance(f0, q, r, f)).sum())
        .collect();
    FrequencyResponse::new(freqs, values, ResponseKind::Impedance, None).unwrap()
}

fn two_mode_fit() -> (FrequencyResponse, RationalModel, ratfit::FitReport, Duration) {
    let data = two_mode_data();
    let t = Instant::now();
    let (model, report) = ratfit::fit(&data, 2, &FitOptions::default()).unwrap();
    (data, model, report, t.elapsed())
}

fn c1_round_trip() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(20241016);
    let n = 1000;
    let freqs: Vec<f64> = (1..=n).map(|k| 1e8 * k as f64).collect();
    let values: Vec<Complex64> = (0..n)
        .map(|_| {
            let r = 0.99 * rng.random::<f64>().sqrt();
            Complex64::from_polar(r, rng.random_range(-PI..PI))
        })
        .collect();
    let s = FrequencyResponse::new(freqs, values.clone(), ResponseKind::Scattering, Some(50.0)).unwrap();
    let t = Instant::now();
    let back = z_to_s(&s_to_z(&s).unwrap(), None).unwrap();
    let elapsed = t.elapsed();
    let err = back
        .values()
        .iter()
        .zip(&values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    outcome(
        err < ROUND_TRIP_TOL && elapsed < ROUND_TRIP_BUDGET,
        format!("max |ΔS| = {err:.2e}, {elapsed:.2?}"),
    )
}

fn c2_vector_fit() -> Outcome {
    let (_, model, report, elapsed) = two_mode_fit();
    let mut poles: Vec<Complex64> = model.upper_half().into_iter().map(|(p, _)| p).collect();
    poles.sort_by(|a, b| a.im.total_cmp(&b.im));
    let worst = if poles.len() == 2 {
        poles
            .iter()
            .zip(MODES.iter())
            .map(|(p, &(f0, q, _))| {
                let want = parallel_rlc_pole(f0, q);
                (p - want).norm() / want.norm()
            })
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    outcome(
        worst < POLE_TOL && report.converged && report.iterations <= FIT_MAX_ITERS && elapsed < FIT_BUDGET,
        format!(
            "pole rel err {worst:.2e}, {} iterations, converged {}, {elapsed:.2?}",
            report.iterations, report.converged
        ),
    )
}

fn c3_synthesis() -> Outcome {
    let pairs: Vec<(Complex64, Complex64)> = MODES
        .iter()
        .map(|&(f0, q, r)| (parallel_rlc_pole(f0, q), parallel_rlc_residue(f0, q, r)))
        .collect();
    let model = RationalModel::from_upper_half(&pairs, 0.0, 0.0).unwrap();
    let modes = synthesize_modes(&model).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let mut worst: f64 = 0.0;
    for (m, &(f0, q, r)) in modes.iter().zip(MODES.iter()) {
        let w = 2.0 * PI * f0;
        let c = q / (w * r);
        let l = 1.0 / (w * w * c);
        for (got, want) in [(m.omega, w), (m.q_factor, q), (m.r, r), (m.l, l), (m.c, c)] {
            worst = worst.max(rel(got, want));
        }
    }

    let (data, fitted, _, _) = two_mode_fit();
    let fitted_modes = synthesize_modes(&fitted).unwrap();
    let chain = chain_impedance(&fitted_modes, data.freqs()).unwrap();
    let model_z = ratfit::evaluate_model(&fitted, data.freqs()).unwrap();
    let chain_err = chain
        .iter()
        .zip(&model_z)
        .map(|(a, b)| (a - b).norm() / b.norm())
        .fold(0.0, f64::max);
    outcome(
        modes.len() == 2 && worst < SYNTH_TOL && chain_err < CHAIN_TOL,
        format!("parameter rel err {worst:.2e}, chain vs model {chain_err:.2e}"),
    )
}

fn c4_harmonic() -> Outcome {
    let w = 2.0 * PI * 6e9;
    let m = QuantizedMode::new(w, 100e-15).unwrap();
    let h = build_hamiltonian(&[m], &JunctionParams::direct(0.0).unwrap(), &[20]).unwrap();
    let mut e: Vec<f64> = h.entries.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    // Ground level is compared against one quantum.
    let worst = e
        .iter()
        .enumerate()
        .map(|(n, &v)| (v - SI.hbar * w * n as f64).abs() / (SI.hbar * w * n.max(1) as f64))
        .fold(0.0, f64::max);
    outcome(worst < HARMONIC_TOL, format!("max rel deviation {worst:.2e}"))
}

fn c5_commutator() -> Outcome {
    let n = 20;
    let m = QuantizedMode::new(2.0 * PI * 5e9, 80e-15).unwrap();
    let phi = flux_operator(&m, n);
    let q = charge_operator(&m, n);
    let c = &phi * &q - &q * &phi;
    let mut worst: f64 = 0.0;
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let want = if i == j { Complex64::new(0.0, SI.hbar) } else { Complex64::new(0.0, 0.0) };
            worst = worst.max((c[(i, j)] - want).norm());
        }
    }
    outcome(
        worst < COMMUTATOR_TOL * SI.hbar,
        format!("max deviation {:.2e} ħ", worst / SI.hbar),
    )
}

fn c6_kerr() -> Outcome {
    let t = Instant::now();
    let ec = SI.h * 250e6;
    let mut devs = Vec::new();
    for ratio in [50.0, 200.0, 1000.0] {
        let ej = ratio * ec;
        let m = QuantizedMode::with_phi_zpf((8.0 * ej * ec).sqrt() / SI.hbar, (2.0 * ec / ej).powf(0.25)).unwrap();
        let j = JunctionParams::direct(ej).unwrap();
        let h = build_hamiltonian(&[m], &j, &[30]).unwrap();
        let exact = kerr_exact(&h, &[m]).unwrap().alpha[0];
        let pert = kerr_perturbative(&[m], &j).unwrap().alpha[0];
        devs.push((exact - pert).abs() / pert);
    }
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);

    let modes = [
        QuantizedMode::with_phi_zpf(2.0 * PI * 5e9, 0.15).unwrap(),
        QuantizedMode::with_phi_zpf(2.0 * PI * 7e9, 0.10).unwrap(),
    ];
    let j = JunctionParams::from_frequency(20e9).unwrap();
    let h = build_hamiltonian(&modes, &j, &[10, 10]).unwrap();
    let exact = kerr_exact(&h, &modes).unwrap();
    let pert = kerr_perturbative(&modes, &j).unwrap();
    let chi_dev = (exact.chi[0][1] - pert.chi[0][1]).abs() / pert.chi[0][1];
    let asym = exact.chi_asymmetry();
    let elapsed = t.elapsed();
    outcome(
        devs[0] < KERR_TOL && monotone && chi_dev < KERR_TOL && asym == 0.0 && elapsed < KERR_BUDGET,
        format!(
            "transmon α dev {:.2}% / {:.2}% / {:.2}% at E_J/E_C 50/200/1000 (monotone {monotone}), χ dev {:.2}%, χ asymmetry {asym:.1e}, {elapsed:.2?}",
            100.0 * devs[0],
            100.0 * devs[1],
            100.0 * devs[2],
            100.0 * chi_dev
        ),
    )
}

fn c7_identity() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let modes: Vec<QuantizedMode> = (0..3)
            .map(|_| {
                QuantizedMode::with_phi_zpf(2.0 * PI * rng.random_range(3e9..9e9), rng.random_range(0.01..0.9)).unwrap()
            })
            .collect();
        let j = JunctionParams::from_frequency(rng.random_range(1e9..100e9)).unwrap();
        let d = kerr_perturbative(&modes, &j).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    let want = 2.0 * (d.alpha[a] * d.alpha[b]).sqrt();
                    worst = worst.max((d.chi[a][b] - want).abs() / want);
                }
            }
        }
    }
    outcome(worst <= IDENTITY_TOL, format!("max rel deviation {worst:.2e}"))
}

fn junction(beta_c: f64) -> RcsjParams {
    RcsjParams::with_beta_c(1e-6, 1e-13, beta_c, 1e-3).unwrap()
}

fn c8_overdamped() -> Outcome {
    let p = junction(0.01);
    let (up, down) = rcsj::iv_sweep(&p, 1.5 * p.i_c, 30, 50, 200).unwrap();
    let top = up.points.last().unwrap();
    let want = overdamped_voltage(top.i_drive, p.i_c, p.r_n);
    let top_err = (top.v_avg - want).abs() / want;
    let floor = SUPERCONDUCTING_V * p.i_c * p.r_n;
    let mut branch_err: f64 = 0.0;
    for (u, d) in up.points.iter().zip(down.points.iter().rev()) {
        if u.v_avg.abs() < floor && d.v_avg.abs() < floor {
            continue;
        }
        branch_err = branch_err.max((u.v_avg - d.v_avg).abs() / u.v_avg.abs().max(d.v_avg.abs()));
    }
    outcome(
        top_err < IV_TOL && branch_err < IV_TOL,
        format!(
            "v(1.5 I_c) off closed form by {:.3}%, up/down max diff {:.3}%",
            100.0 * top_err,
            100.0 * branch_err
        ),
    )
}

fn c9_hysteresis() -> Outcome {
    let p = junction(25.0);
    let t = Instant::now();
    let (up, down) = rcsj::iv_sweep(&p, 1.5 * p.i_c, 100, 50, 200).unwrap();
    let elapsed = t.elapsed();
    let threshold = SUPERCONDUCTING_V * p.i_c * p.r_n;
    let switch = up.switching_current(threshold).unwrap_or(f64::INFINITY);
    let retrap = down.retrapping_current(threshold).unwrap_or(f64::INFINITY);
    outcome(
        retrap < RETRAP_MAX * p.i_c && switch >= SWITCH_MIN * p.i_c && elapsed < SWEEP_BUDGET,
        format!(
            "switching at {:.4} I_c, retrapping at {:.4} I_c, 100-point sweep {elapsed:.2?}",
            switch / p.i_c,
            retrap / p.i_c
        ),
    )
}

fn c10_conservation() -> Outcome {
    let p = RcsjParams::with_beta_c(1e-6, 1e-13, 1.0, 1e9).unwrap();
    let wp = p.plasma_frequency();
    let start = PhaseState { phi: 0.5, dphi_dt: 0.0, time: 0.0 };
    let trace = rcsj::integrate(&p, |_| 0.0, start, 100.0 * 2.0 * PI / wp, 1e-12).unwrap();
    let e0 = p.energy(&start);
    let drift = trace.iter().map(|s| (p.energy(s) - e0).abs() / e0).fold(0.0, f64::max);

    let small = PhaseState { phi: 0.01, dphi_dt: 0.0, time: 0.0 };
    let trace = rcsj::integrate(&p, |_| 0.0, small, 50.0 * 2.0 * PI / wp, 1e-11).unwrap();
    // Upward zero crossings, linearly interpolated between accepted steps.
    let ups: Vec<f64> = trace
        .windows(2)
        .filter(|w| w[0].phi < 0.0 && w[1].phi >= 0.0)
        .map(|w| w[0].time + (w[1].time - w[0].time) * (-w[0].phi) / (w[1].phi - w[0].phi))
        .collect();
    let w = 2.0 * PI * (ups.len() - 1) as f64 / (ups[ups.len() - 1] - ups[0]);
    let f_err = (w / wp - 1.0).abs();
    outcome(
        drift < ENERGY_DRIFT_TOL && f_err < PLASMA_TOL,
        format!("energy drift {drift:.2e}, plasma frequency off by {:.4}%", 100.0 * f_err),
    )
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures/single_rlc.s1p")
}

fn pipeline_into(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let cli = blackbox_cli::args::parse_args([
        "blackbox",
        "pipeline",
        "-i",
        fixture().to_str().unwrap(),
        "--e-j-ghz",
        "20",
        "-o",
        dir.to_str().unwrap(),
    ])
    .unwrap();
    let mut files = blackbox_cli::run(&cli).unwrap();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let a = pipeline_into(&tmp.path().join("a"));
    let b = pipeline_into(&tmp.path().join("b"));
    let json: Vec<&String> = a.iter().map(|(n, _)| n).filter(|n| n.ends_with(".json")).collect();
    outcome(
        a == b && json.len() == 4,
        format!("{} JSON files compared across two runs, identical: {}", json.len(), a == b),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("S/Z round trip", c1_round_trip),
        ("two-mode vector fit", c2_vector_fit),
        ("synthesis round trip", c3_synthesis),
        ("harmonic limit", c4_harmonic),
        ("commutator", c5_commutator),
        ("Kerr cross-validation", c6_kerr),
        ("cross-Kerr identity", c7_identity),
        ("RCSJ overdamped IV", c8_overdamped),
        ("RCSJ hysteresis", c9_hysteresis),
        ("RCSJ conservation and plasma frequency", c10_conservation),
        ("pipeline determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            k + 1,
            result.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
