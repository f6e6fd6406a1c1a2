//! `rcsj` subcommand.

use std::f64::consts::PI;
use std::path::PathBuf;

use blackbox_core::constants::SI;
use blackbox_core::rcsj::{self, PhaseState, RcsjParams, SweepOptions};

use crate::args::RcsjArgs;
use crate::error::{CliError, Result, Stage};
use crate::report::{to_csv, Outputs};

pub fn params_from_args(a: &RcsjArgs) -> Result<RcsjParams> {
    let i_c = a.i_c_ua * 1e-6;
    let c_j = a.c_j_ff * 1e-15;
    let r_n = match (a.beta_c, a.r_n_ohm) {
        (Some(b), None) => {
            if !(b.is_finite() && b > 0.0) {
                return Err(CliError::config(format!("beta_c = {b} must be positive")));
            }
            (b * SI.phi0 / (2.0 * PI * i_c * c_j)).sqrt()
        }
        (None, Some(r)) => r,
        (Some(_), Some(_)) => return Err(CliError::config("set only one of beta_c and r_n_ohm")),
        (None, None) => return Err(CliError::config("one of beta_c or r_n_ohm is required")),
    };
    let gap_v = match a.gap_mv {
        Some(mv) => mv * 1e-3,
        None => a.gap_ratio * i_c * r_n,
    };
    let delta0 = 0.5 * SI.e_charge * gap_v;
    RcsjParams::new(i_c, r_n, c_j, delta0)
        .and_then(|p| p.with_gap_smoothing(a.gap_smoothing))
        .map_err(CliError::config)
}

/// Runs the sweep (and optional trace) in memory.
pub fn rcsj_outputs(a: &RcsjArgs) -> Result<Outputs> {
    let params = params_from_args(a)?;
    if a.points < 2 {
        return Err(CliError::config("points must be at least 2"));
    }
    if !(a.tol.is_finite() && a.tol > 0.0) {
        return Err(CliError::config(format!("tol = {} must be positive", a.tol)));
    }
    if !(a.i_max_ratio.is_finite() && a.i_max_ratio != 0.0) {
        return Err(CliError::config(format!("i_max_ratio = {} must be nonzero", a.i_max_ratio)));
    }
    log::info!(
        "beta_c = {:.6}, plasma frequency = {:.6} GHz, R_N = {:.6} ohm",
        params.beta_c(),
        params.plasma_frequency() / (2.0 * PI * 1e9),
        params.r_n
    );
    let i_max = a.i_max_ratio * params.i_c;
    let options = SweepOptions {
        settle_periods: a.settle_periods,
        average_periods: a.average_periods,
        tol: a.tol,
    };
    let sim = |e: rcsj::RcsjError| CliError::new(Stage::Simulate, e);
    let (up, down) = rcsj::iv_sweep_with(&params, i_max, a.points, &options).map_err(sim)?;

    let mut text = String::from("branch,i_amp,v_volt\n");
    for curve in [&up, &down] {
        for p in &curve.points {
            text.push_str(&format!(
                "{},{},{}\n",
                curve.branch.label(),
                crate::report::format_float(p.i_drive),
                crate::report::format_float(p.v_avg)
            ));
        }
    }
    let mut out = Outputs::new();
    out.add("iv.csv", text.into_bytes());

    if a.trace {
        let periods = (a.settle_periods + a.average_periods).max(1) as f64;
        let t_end = periods * 2.0 * PI / params.plasma_frequency();
        let trace = rcsj::integrate(&params, |_| i_max, PhaseState::rest(), t_end, a.tol).map_err(sim)?;
        let rows = trace.iter().map(|s| vec![s.time, s.phi, s.voltage()]);
        out.add("trace.csv", to_csv("t_s,phi_rad,v_volt", rows));
    }
    Ok(out)
}

pub fn run_rcsj(a: &RcsjArgs) -> Result<Vec<PathBuf>> {
    if a.output_dir.as_os_str().is_empty() {
        return Err(CliError::config("empty output directory"));
    }
    rcsj_outputs(a)?.commit(&a.output_dir)
}
