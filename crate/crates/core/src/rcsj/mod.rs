//! Current-driven resistively and capacitively shunted junction.
//!
//! `C·(Φ₀/2π)·φ̈ + G(V)·(Φ₀/2π)·φ̇ + I_c·sin φ = I_d(t)` with `V = (Φ₀/2π)·φ̇`
//! and a quasiparticle conductance that switches on above the gap voltage.
//! Internally time is `τ = ω_p·t`, which turns the equation into
//! `φ'' + γ(V)·φ' + sin φ = I_d/I_c` with `γ = G/(ω_p·C)`.

mod dopri;

use std::f64::consts::PI;

use thiserror::Error;

use crate::constants::SI;
use dopri::{Dopri5, State, StepFailure};

/// Default smoothing half-width of the gap step, as a fraction of `2Δ₀/e`.
pub const DEFAULT_GAP_SMOOTHING: f64 = 1e-3;
pub const DEFAULT_SETTLE_PERIODS: u32 = 50;
pub const DEFAULT_AVERAGE_PERIODS: u32 = 200;
pub const DEFAULT_TOL: f64 = 1e-8;

// Largest step, in units of 1/ω_p.
const MAX_STEP: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RcsjError {
    #[error("invalid junction parameter {name} = {value}")]
    InvalidParams { name: &'static str, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step size underflow at t = {time:e} s")]
    StepUnderflow { time: f64 },
    #[error("non-finite state at t = {time:e} s")]
    NonFinite { time: f64 },
    #[error("at bias {i_drive:e} A: {source}")]
    AtBias {
        i_drive: f64,
        #[source]
        source: Box<RcsjError>,
    },
}

pub type Result<T> = std::result::Result<T, RcsjError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcsjParams {
    /// Critical current, A.
    pub i_c: f64,
    /// Normal-state resistance, Ω.
    pub r_n: f64,
    /// Junction capacitance, F.
    pub c_j: f64,
    /// Zero-temperature gap, J.
    pub delta0: f64,
    /// Half-width of the conductance ramp as a fraction of the gap voltage.
    pub gap_smoothing: f64,
}

impl RcsjParams {
    pub fn new(i_c: f64, r_n: f64, c_j: f64, delta0: f64) -> Result<Self> {
        let p = Self {
            i_c,
            r_n,
            c_j,
            delta0,
            gap_smoothing: DEFAULT_GAP_SMOOTHING,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with a given Stewart–McCumber number, and a gap voltage
    /// of `gap_over_icrn · I_c·R_N`.
    pub fn with_beta_c(i_c: f64, c_j: f64, beta_c: f64, gap_over_icrn: f64) -> Result<Self> {
        if !(beta_c.is_finite() && beta_c > 0.0) {
            return Err(RcsjError::InvalidParams { name: "beta_c", value: beta_c });
        }
        let r_n = (beta_c * SI.phi0 / (2.0 * PI * i_c * c_j)).sqrt();
        let delta0 = 0.5 * SI.e_charge * gap_over_icrn * i_c * r_n;
        Self::new(i_c, r_n, c_j, delta0)
    }

    pub fn with_gap_smoothing(mut self, fraction: f64) -> Result<Self> {
        self.gap_smoothing = fraction;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("i_c", self.i_c),
            ("r_n", self.r_n),
            ("c_j", self.c_j),
            ("delta0", self.delta0),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(RcsjError::InvalidParams { name, value });
            }
        }
        if !(self.gap_smoothing.is_finite() && (0.0..1.0).contains(&self.gap_smoothing)) {
            return Err(RcsjError::InvalidParams {
                name: "gap_smoothing",
                value: self.gap_smoothing,
            });
        }
        Ok(())
    }

    /// `2Δ₀/e`, V.
    pub fn gap_voltage(&self) -> f64 {
        2.0 * self.delta0 / SI.e_charge
    }

    /// `√(2πI_c/(Φ₀C_J))`, rad/s.
    pub fn plasma_frequency(&self) -> f64 {
        (2.0 * PI * self.i_c / (SI.phi0 * self.c_j)).sqrt()
    }

    /// `2πI_cR_N²C_J/Φ₀`.
    pub fn beta_c(&self) -> f64 {
        2.0 * PI * self.i_c * self.r_n * self.r_n * self.c_j / SI.phi0
    }

    /// Josephson energy `Φ₀I_c/2π`, J.
    pub fn josephson_energy(&self) -> f64 {
        SI.phi0 * self.i_c / (2.0 * PI)
    }

    /// `(Φ₀/2π)²C·φ̇²/2 + E_J(1 - cos φ)`, J.
    pub fn energy(&self, state: &PhaseState) -> f64 {
        let flux = SI.phi0 / (2.0 * PI);
        0.5 * flux * flux * self.c_j * state.dphi_dt * state.dphi_dt
            + self.josephson_energy() * (1.0 - state.phi.cos())
    }

    // Voltage per unit dφ/dτ.
    fn voltage_scale(&self) -> f64 {
        SI.phi0 / (2.0 * PI) * self.plasma_frequency()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub phi: f64,
    /// rad/s
    pub dphi_dt: f64,
    /// s
    pub time: f64,
}

impl PhaseState {
    pub fn rest() -> Self {
        Self { phi: 0.0, dphi_dt: 0.0, time: 0.0 }
    }

    /// Junction voltage `(Φ₀/2π)·dφ/dt`.
    pub fn voltage(&self) -> f64 {
        SI.phi0 / (2.0 * PI) * self.dphi_dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    SweepUp,
    SweepDown,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::SweepUp => "up",
            Branch::SweepDown => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvPoint {
    pub i_drive: f64,
    pub v_avg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IVCurve {
    pub branch: Branch,
    pub points: Vec<IvPoint>,
}

impl IVCurve {
    /// First drive current, in sweep order, where `|v_avg| ≥ threshold`.
    pub fn switching_current(&self, threshold: f64) -> Option<f64> {
        self.points.iter().find(|p| p.v_avg.abs() >= threshold).map(|p| p.i_drive)
    }

    /// First drive current, in sweep order, where `|v_avg| < threshold`.
    pub fn retrapping_current(&self, threshold: f64) -> Option<f64> {
        self.points.iter().find(|p| p.v_avg.abs() < threshold).map(|p| p.i_drive)
    }
}

/// Quasiparticle conductance: zero below the gap voltage, `1/R_N` above it,
/// and linear across `2Δ₀/e ± w`.
pub fn junction_conductance(v: f64, params: &RcsjParams) -> f64 {
    let vg = params.gap_voltage();
    let w = params.gap_smoothing * vg;
    let v = v.abs();
    if v <= vg - w {
        0.0
    } else if v >= vg + w {
        1.0 / params.r_n
    } else {
        (v - (vg - w)) / (2.0 * w) / params.r_n
    }
}

struct Scaled {
    params: RcsjParams,
    omega_p: f64,
    v_scale: f64,
    damping_scale: f64,
}

impl Scaled {
    fn new(params: &RcsjParams) -> Result<Self> {
        params.validate()?;
        let omega_p = params.plasma_frequency();
        Ok(Self {
            params: *params,
            omega_p,
            v_scale: params.voltage_scale(),
            damping_scale: 1.0 / (omega_p * params.c_j),
        })
    }

    fn rhs(&self, i_norm: f64, y: &State) -> State {
        let g = junction_conductance(self.v_scale * y[1], &self.params);
        [y[1], i_norm - y[0].sin() - g * self.damping_scale * y[1]]
    }

    fn to_state(&self, y: &State, tau: f64) -> PhaseState {
        PhaseState {
            phi: y[0],
            dphi_dt: y[1] * self.omega_p,
            time: tau / self.omega_p,
        }
    }

    fn map_failure(&self, f: StepFailure) -> RcsjError {
        match f {
            StepFailure::Underflow { t } => RcsjError::StepUnderflow { time: t / self.omega_p },
            StepFailure::NonFinite { t } => RcsjError::NonFinite { time: t / self.omega_p },
        }
    }
}

/// Integrates from `initial` to `t_end` under drive current `drive(t)` (A),
/// returning the initial state and every accepted step.
pub fn integrate<D>(
    params: &RcsjParams,
    drive: D,
    initial: PhaseState,
    t_end: f64,
    tol: f64,
) -> Result<Vec<PhaseState>>
where
    D: Fn(f64) -> f64,
{
    let sc = Scaled::new(params)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(RcsjError::InvalidArgument(format!("tolerance {tol}")));
    }
    if ![initial.phi, initial.dphi_dt, initial.time].iter().all(|v| v.is_finite()) {
        return Err(RcsjError::InvalidArgument("non-finite initial state".into()));
    }
    if t_end.is_nan() || t_end <= initial.time {
        return Err(RcsjError::InvalidArgument(format!(
            "t_end {t_end:e} is not after the initial time {:e}",
            initial.time
        )));
    }
    let (tau0, tau_end) = (initial.time * sc.omega_p, t_end * sc.omega_p);
    let y0 = [initial.phi, initial.dphi_dt / sc.omega_p];
    let i_c = params.i_c;
    let omega_p = sc.omega_p;

    let mut out = vec![initial];
    let mut solver = Dopri5::new(tol, MAX_STEP);
    solver
        .run(
            |tau, y| sc.rhs(drive(tau / omega_p) / i_c, y),
            tau0,
            y0,
            tau_end,
            |step| out.push(sc.to_state(&step.y1, step.t1)),
        )
        .map_err(|f| sc.map_failure(f))?;
    Ok(out)
}

/// Settings for [`iv_sweep_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub settle_periods: u32,
    pub average_periods: u32,
    pub tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            settle_periods: DEFAULT_SETTLE_PERIODS,
            average_periods: DEFAULT_AVERAGE_PERIODS,
            tol: DEFAULT_TOL,
        }
    }
}

/// Sweeps the dc drive `0 → i_max → 0` over `n_points` evenly spaced values
/// per branch, carrying the state from one bias point to the next. Periods
/// are plasma periods `2π/ω_p`.
pub fn iv_sweep(
    params: &RcsjParams,
    i_max: f64,
    n_points: usize,
    settle_periods: u32,
    average_periods: u32,
) -> Result<(IVCurve, IVCurve)> {
    iv_sweep_with(
        params,
        i_max,
        n_points,
        &SweepOptions {
            settle_periods,
            average_periods,
            ..SweepOptions::default()
        },
    )
}

pub fn iv_sweep_with(
    params: &RcsjParams,
    i_max: f64,
    n_points: usize,
    options: &SweepOptions,
) -> Result<(IVCurve, IVCurve)> {
    let sc = Scaled::new(params)?;
    if n_points < 2 {
        return Err(RcsjError::InvalidArgument(format!("n_points = {n_points}")));
    }
    if !(i_max.is_finite() && i_max != 0.0) {
        return Err(RcsjError::InvalidArgument(format!("i_max = {i_max}")));
    }
    if options.average_periods == 0 {
        return Err(RcsjError::InvalidArgument("average_periods = 0".into()));
    }
    if !(options.tol.is_finite() && options.tol > 0.0) {
        return Err(RcsjError::InvalidArgument(format!("tolerance {}", options.tol)));
    }
    if i_max.abs() <= params.i_c {
        log::warn!("i_max = {i_max:e} A does not exceed I_c = {:e} A", params.i_c);
    }

    let grid: Vec<f64> = (0..n_points)
        .map(|k| i_max * k as f64 / (n_points - 1) as f64)
        .collect();
    let mut solver = Dopri5::new(options.tol, MAX_STEP);
    let mut y = [0.0, 0.0];
    let mut tau = 0.0;

    let mut run_branch = |branch: Branch, currents: &mut dyn Iterator<Item = f64>| -> Result<IVCurve> {
        let mut points = Vec::new();
        for i_drive in currents {
            let v_avg = bias_point(&sc, &mut solver, &mut y, &mut tau, i_drive / params.i_c, options)
                .map_err(|e| RcsjError::AtBias {
                    i_drive,
                    source: Box::new(e),
                })?;
            points.push(IvPoint { i_drive, v_avg });
        }
        Ok(IVCurve { branch, points })
    };
    let up = run_branch(Branch::SweepUp, &mut grid.iter().copied())?;
    let down = run_branch(Branch::SweepDown, &mut grid.iter().rev().copied())?;
    Ok((up, down))
}

// Settles at a fixed bias and returns the average voltage. The average is
// taken between the window start and the last time the phase first reached a
// whole number of 2π slips beyond its starting value, falling back to the
// full window when no slip completes.
fn bias_point(
    sc: &Scaled,
    solver: &mut Dopri5,
    y: &mut State,
    tau: &mut f64,
    i_norm: f64,
    options: &SweepOptions,
) -> Result<f64> {
    let period = 2.0 * PI;
    let rhs = |_: f64, y: &State| sc.rhs(i_norm, y);

    let settle_end = *tau + options.settle_periods as f64 * period;
    if settle_end > *tau {
        *y = solver.run(rhs, *tau, *y, settle_end, |_| {}).map_err(|f| sc.map_failure(f))?;
        *tau = settle_end;
    }

    let (tau_start, phi_start) = (*tau, y[0]);
    let window_end = tau_start + options.average_periods as f64 * period;
    let mut slips = 0u64;
    let mut slip_time = tau_start;
    let mut direction = 0.0;
    *y = solver
        .run(rhs, tau_start, *y, window_end, |step| {
            let offset = step.y1[0] - phi_start;
            if direction == 0.0 && offset.abs() >= period {
                direction = offset.signum();
            }
            if direction == 0.0 {
                return;
            }
            while direction * offset >= (slips + 1) as f64 * period {
                slips += 1;
                let level = phi_start + direction * slips as f64 * period;
                slip_time = if (step.y0[0] - level) * direction >= 0.0 {
                    step.t0
                } else {
                    step.crossing(0, level)
                };
            }
        })
        .map_err(|f| sc.map_failure(f))?;
    *tau = window_end;

    let dphi_dtau = if slips > 0 {
        direction * slips as f64 * period / (slip_time - tau_start)
    } else {
        (y[0] - phi_start) / (window_end - tau_start)
    };
    Ok(sc.v_scale * dphi_dtau)
}

#[cfg(test)]
mod tests {
    use super::*;

    const I_C: f64 = 1e-6;
    const C_J: f64 = 1e-13;

    fn junction(beta_c: f64) -> RcsjParams {
        RcsjParams::with_beta_c(I_C, C_J, beta_c, 1e-3).unwrap()
    }

    fn undamped() -> RcsjParams {
        RcsjParams::with_beta_c(I_C, C_J, 1.0, 1e9).unwrap()
    }

    // Mean period between successive upward zero crossings of φ.
    fn measured_frequency(trace: &[PhaseState]) -> f64 {
        let mut ups = Vec::new();
        for w in trace.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.phi < 0.0 && b.phi >= 0.0 {
                // Cubic Hermite root by bisection.
                let h = b.time - a.time;
                let f = |t: f64| {
                    let s = (t - a.time) / h;
                    let (s2, s3) = (s * s, s * s * s);
                    (2.0 * s3 - 3.0 * s2 + 1.0) * a.phi
                        + (s3 - 2.0 * s2 + s) * h * a.dphi_dt
                        + (-2.0 * s3 + 3.0 * s2) * b.phi
                        + (s3 - s2) * h * b.dphi_dt
                };
                let (mut lo, mut hi) = (a.time, b.time);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < 0.0 {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                ups.push(0.5 * (lo + hi));
            }
        }
        assert!(ups.len() > 10);
        2.0 * PI * (ups.len() - 1) as f64 / (ups[ups.len() - 1] - ups[0])
    }

    #[test]
    fn conductance_plateaus_and_ramp() {
        let p = junction(1.0);
        let vg = p.gap_voltage();
        let w = p.gap_smoothing * vg;
        assert_eq!(junction_conductance(0.0, &p), 0.0);
        assert_eq!(junction_conductance(10.0 * vg, &p), 1.0 / p.r_n);
        assert_eq!(junction_conductance(-10.0 * vg, &p), 1.0 / p.r_n);
        for s in [1.0, -1.0] {
            let edge = s * (vg + w);
            assert_eq!(junction_conductance(edge, &p), 1.0 / p.r_n);
            let inside = junction_conductance(s * (vg + w * (1.0 - 1e-12)), &p);
            assert!((inside * p.r_n - 1.0).abs() < 1e-9);
            assert_eq!(junction_conductance(s * (vg - w), &p), 0.0);
        }
        assert!((junction_conductance(vg, &p) * p.r_n - 0.5).abs() < 1e-12);
    }

    #[test]
    fn derived_scales() {
        let p = junction(25.0);
        assert!((p.beta_c() - 25.0).abs() < 1e-12);
        assert!((p.gap_voltage() / (p.i_c * p.r_n) - 1e-3).abs() < 1e-15);
        assert!(RcsjParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(RcsjParams::new(1.0, 1.0, 1.0, f64::NAN).is_err());
        assert!(p.with_gap_smoothing(1.5).is_err());
    }

    #[test]
    fn equilibrium_stays_put() {
        let p = junction(1.0);
        let t_end = 20.0 * 2.0 * PI / p.plasma_frequency();
        let trace = integrate(&p, |_| 0.0, PhaseState::rest(), t_end, 1e-10).unwrap();
        assert!(trace.iter().all(|s| s.phi == 0.0 && s.dphi_dt == 0.0));
        assert_eq!(trace.last().unwrap().time, t_end);
    }

    #[test]
    fn small_oscillation_at_plasma_frequency() {
        for beta_c in [0.01, 1.0, 25.0] {
            let p = junction(beta_c);
            let wp = p.plasma_frequency();
            let start = PhaseState { phi: 0.01, dphi_dt: 0.0, time: 0.0 };
            // Amplitude stays inside the subgap window, so the motion is undamped.
            let trace = integrate(&p, |_| 0.0, start, 50.0 * 2.0 * PI / wp, 1e-11).unwrap();
            let w = measured_frequency(&trace);
            assert!((w / wp - 1.0).abs() < 1e-3, "beta_c {beta_c}: {w} vs {wp}");
        }
    }

    #[test]
    fn undamped_energy_is_conserved() {
        let p = undamped();
        let start = PhaseState { phi: 0.5, dphi_dt: 0.0, time: 0.0 };
        let t_end = 100.0 * 2.0 * PI / p.plasma_frequency();
        let trace = integrate(&p, |_| 0.0, start, t_end, 1e-12).unwrap();
        let e0 = p.energy(&start);
        let drift = trace
            .iter()
            .map(|s| (p.energy(s) - e0).abs() / e0)
            .fold(0.0, f64::max);
        assert!(drift < 1e-8, "drift {drift:e}");
    }

    #[test]
    fn bad_arguments() {
        let p = junction(1.0);
        assert!(matches!(
            integrate(&p, |_| 0.0, PhaseState::rest(), 0.0, 1e-8),
            Err(RcsjError::InvalidArgument(_))
        ));
        assert!(integrate(&p, |_| 0.0, PhaseState::rest(), 1e-9, 0.0).is_err());
        assert!(iv_sweep(&p, 1.5 * I_C, 1, 5, 5).is_err());
    }

    #[test]
    fn overdamped_branch_matches_closed_form() {
        let p = junction(0.01);
        let (up, down) = iv_sweep(&p, 1.5 * I_C, 7, 50, 200).unwrap();
        let top = up.points.last().unwrap();
        assert_eq!(top.i_drive, 1.5 * I_C);
        let want = p.r_n * (top.i_drive.powi(2) - I_C * I_C).sqrt();
        assert!((top.v_avg / want - 1.0).abs() < 0.01, "{} vs {want}", top.v_avg);

        for (u, d) in up.points.iter().zip(down.points.iter().rev()) {
            assert_eq!(u.i_drive, d.i_drive);
            let scale = (I_C * p.r_n).max(u.v_avg.abs());
            assert!((u.v_avg - d.v_avg).abs() < 0.01 * scale, "{u:?} {d:?}");
            if u.i_drive < 0.99 * I_C {
                assert!(u.v_avg.abs() < 1e-3 * I_C * p.r_n);
            }
        }
    }

    #[test]
    fn underdamped_sweep_is_hysteretic() {
        let p = junction(25.0);
        let (up, down) = iv_sweep(&p, 1.5 * I_C, 31, 50, 100).unwrap();
        let threshold = 1e-3 * I_C * p.r_n;
        let switch = up.switching_current(threshold).unwrap();
        let retrap = down.retrapping_current(threshold).unwrap();
        assert!(switch >= 0.95 * I_C, "switch {switch:e}");
        assert!(retrap < 0.5 * I_C, "retrap {retrap:e}");
        // Running branch follows the ohmic line well above I_c.
        let top = down.points[0];
        assert!((top.v_avg / (top.i_drive * p.r_n) - 1.0).abs() < 0.05);
    }

    #[test]
    fn reversed_drive_mirrors_the_curve() {
        let p = junction(1.0);
        let (up, down) = iv_sweep(&p, 1.5 * I_C, 6, 20, 50).unwrap();
        let (up_n, down_n) = iv_sweep(&p, -1.5 * I_C, 6, 20, 50).unwrap();
        for (a, b) in up.points.iter().chain(&down.points).zip(up_n.points.iter().chain(&down_n.points)) {
            assert_eq!(a.i_drive, -b.i_drive);
            assert!((a.v_avg + b.v_avg).abs() <= 1e-12 * a.v_avg.abs().max(1e-12));
        }
    }

    #[test]
    fn halving_tolerance_moves_points_under_one_percent() {
        let p = junction(0.01);
        let coarse = iv_sweep_with(
            &p,
            1.5 * I_C,
            5,
            &SweepOptions { settle_periods: 30, average_periods: 100, tol: 1e-8 },
        )
        .unwrap();
        let fine = iv_sweep_with(
            &p,
            1.5 * I_C,
            5,
            &SweepOptions { settle_periods: 30, average_periods: 100, tol: 5e-9 },
        )
        .unwrap();
        let floor = 1e-3 * I_C * p.r_n;
        for (a, b) in coarse.0.points.iter().zip(&fine.0.points) {
            assert!((a.v_avg - b.v_avg).abs() <= 0.01 * a.v_avg.abs().max(floor));
        }
    }
}
