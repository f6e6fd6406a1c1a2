//! parse → transform → fit → synthesize → quantize.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use blackbox_core::network::{self, FrequencyResponse, InputFormat, ResponseKind};
use blackbox_core::quantize::{
    self, build_hamiltonian, kerr_exact, kerr_perturbative, DispersiveDocument, DispersiveModel,
    JunctionParams, DEFAULT_DIM_CAP, MIN_EXACT_TRUNCATION,
};
use blackbox_core::ratfit::{self, FitOptions, FitReport, RationalModel, Weighting};
use blackbox_core::synthesis::{self, RlcMode};

use crate::args::{FitFlags, FormatArg, JunctionFlags, WeightingArg};
use crate::error::{CliError, Result, Stage};
use crate::report::{to_csv, to_json, Outputs};

/// Fully resolved settings for `fit` and `pipeline` runs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub input_format: FormatArg,
    pub ref_impedance_ohm: Option<f64>,
    pub n_pole_pairs: usize,
    pub fit: FitOptions,
    pub junction: Option<JunctionSpec>,
    pub truncations: Vec<usize>,
    pub output_dir: PathBuf,
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JunctionSpec {
    EjGhz(f64),
    IcUa(f64),
}

impl JunctionSpec {
    pub fn from_flags(flags: &JunctionFlags) -> Result<Self> {
        match (flags.e_j_ghz, flags.i_c_ua) {
            (Some(e), None) => Ok(JunctionSpec::EjGhz(e)),
            (None, Some(i)) => Ok(JunctionSpec::IcUa(i)),
            (Some(_), Some(_)) => Err(CliError::config("set only one of e_j_ghz and i_c_ua")),
            (None, None) => Err(CliError::config("one of e_j_ghz or i_c_ua is required")),
        }
    }

    pub fn params(self) -> Result<JunctionParams> {
        let r = match self {
            JunctionSpec::EjGhz(g) if g > 0.0 => JunctionParams::from_frequency(g * 1e9),
            JunctionSpec::EjGhz(g) => return Err(CliError::config(format!("e_j_ghz = {g} must be positive"))),
            JunctionSpec::IcUa(i) => JunctionParams::from_critical_current(i * 1e-6),
        };
        r.map_err(CliError::config)
    }
}

impl RunConfig {
    pub fn from_fit_flags(fit: &FitFlags, junction: Option<&JunctionFlags>) -> Result<Self> {
        if fit.inputs.is_empty() {
            return Err(CliError::config("no input files"));
        }
        if fit.inputs.iter().any(|p| p.as_os_str().is_empty()) || fit.output_dir.as_os_str().is_empty() {
            return Err(CliError::config("empty path"));
        }
        if fit.n_pole_pairs == 0 {
            return Err(CliError::config("n_pole_pairs must be at least 1"));
        }
        if fit.max_iters == 0 {
            return Err(CliError::config("max_iters must be at least 1"));
        }
        if !(fit.tol.is_finite() && fit.tol > 0.0) {
            return Err(CliError::config(format!("tol = {} must be positive", fit.tol)));
        }
        if fit.jobs == 0 {
            return Err(CliError::config("jobs must be at least 1"));
        }
        if let Some(z0) = fit.ref_impedance_ohm {
            if !(z0.is_finite() && z0 > 0.0) {
                return Err(CliError::config(format!("ref_impedance_ohm = {z0} must be positive")));
            }
        }
        let (junction, truncations) = match junction {
            Some(j) => {
                let spec = JunctionSpec::from_flags(j)?;
                spec.params()?;
                check_truncations(&j.truncations)?;
                (Some(spec), j.truncations.clone())
            }
            None => (None, Vec::new()),
        };
        Ok(Self {
            inputs: fit.inputs.clone(),
            input_format: fit.input_format,
            ref_impedance_ohm: fit.ref_impedance_ohm,
            n_pole_pairs: fit.n_pole_pairs,
            fit: FitOptions {
                max_iters: fit.max_iters,
                pole_move_tol: fit.tol,
                include_const: fit.include_const,
                include_slope: fit.include_slope,
                weighting: match fit.weighting {
                    WeightingArg::Uniform => Weighting::Uniform,
                    WeightingArg::InverseMagnitude => Weighting::InverseMagnitude,
                },
            },
            junction,
            truncations,
            output_dir: fit.output_dir.clone(),
            jobs: fit.jobs,
        })
    }

    /// Output directory for one input: the configured directory itself for a
    /// single input, else a subdirectory named after the input's stem.
    pub fn output_dir_for(&self, input: &Path) -> PathBuf {
        if self.inputs.len() == 1 {
            return self.output_dir.clone();
        }
        let stem = input.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "input".into());
        self.output_dir.join(stem)
    }
}

fn check_truncations(t: &[usize]) -> Result<()> {
    if let Some(&bad) = t.iter().find(|&&n| n < MIN_EXACT_TRUNCATION) {
        return Err(CliError::config(format!(
            "truncation {bad} is below the minimum of {MIN_EXACT_TRUNCATION}"
        )));
    }
    Ok(())
}

/// Per-mode truncations: an explicit list, one value broadcast, or the
/// largest uniform value up to 20 (one mode) or 10 that fits the dimension cap.
pub fn resolve_truncations(requested: &[usize], n_modes: usize) -> Result<Vec<usize>> {
    match requested.len() {
        0 => {
            let mut t = if n_modes <= 1 { 20 } else { 10 };
            while t > MIN_EXACT_TRUNCATION && (t as f64).powi(n_modes as i32) > DEFAULT_DIM_CAP as f64 {
                t -= 1;
            }
            Ok(vec![t; n_modes])
        }
        1 => Ok(vec![requested[0]; n_modes]),
        n if n == n_modes => Ok(requested.to_vec()),
        n => Err(CliError::new(
            Stage::Quantize,
            format!("{n} truncations given for {n_modes} modes"),
        )),
    }
}

pub fn input_format(choice: FormatArg, path: &Path) -> Result<InputFormat> {
    match choice {
        FormatArg::Touchstone => Ok(InputFormat::TouchstoneSubset),
        FormatArg::CsvS => Ok(InputFormat::Csv(ResponseKind::Scattering)),
        FormatArg::CsvZ => Ok(InputFormat::Csv(ResponseKind::Impedance)),
        FormatArg::Auto => {
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            match ext.as_deref() {
                Some("s1p") | Some("ts") => Ok(InputFormat::TouchstoneSubset),
                _ => Err(CliError::config(format!(
                    "{}: cannot infer the format; pass --input-format",
                    path.display()
                ))
                .for_input(path)),
            }
        }
    }
}

/// Reads an input file and returns its impedance.
pub fn load_impedance(path: &Path, cfg: &RunConfig) -> Result<FrequencyResponse> {
    let format = input_format(cfg.input_format, path)?;
    let file = File::open(path).map_err(|e| CliError::new(Stage::Parse, e))?;
    let resp = network::parse_response(file, format, cfg.ref_impedance_ohm).map_err(|e| CliError::new(Stage::Parse, e))?;
    match resp.kind() {
        ResponseKind::Impedance => Ok(resp),
        ResponseKind::Scattering => network::s_to_z(&resp).map_err(|e| CliError::new(Stage::Parse, e)),
    }
}

pub struct FitOutcome {
    pub impedance: FrequencyResponse,
    pub model: RationalModel,
    pub report: FitReport,
}

pub fn fit_stage(z: FrequencyResponse, cfg: &RunConfig) -> Result<FitOutcome> {
    let (model, report) = ratfit::fit(&z, cfg.n_pole_pairs, &cfg.fit).map_err(|e| CliError::new(Stage::Fit, e))?;
    if !report.converged {
        return Err(CliError::new(
            Stage::Fit,
            format!(
                "no convergence after {} iterations (rms error {:e} ohm)",
                report.iterations, report.rms_error
            ),
        ));
    }
    Ok(FitOutcome {
        impedance: z,
        model,
        report,
    })
}

pub fn synthesis_stage(fit: &FitOutcome) -> Result<Vec<RlcMode>> {
    if let Some(w) = synthesis::discarded_term_warning(&fit.model, fit.impedance.freqs()) {
        log::warn!("{w}");
    }
    synthesis::synthesize_modes(&fit.model).map_err(|e| CliError::new(Stage::Synthesis, e))
}

/// Exact and perturbative Kerr coefficients side by side.
#[derive(Debug, Clone, Serialize)]
pub struct DispersiveReport {
    pub truncations: Vec<usize>,
    pub perturbative: DispersiveDocument,
    pub exact: DispersiveDocument,
    pub relative_deviation: Deviation,
}

/// `|perturbative - exact| / |exact|`, zero where the exact value is zero.
#[derive(Debug, Clone, Serialize)]
pub struct Deviation {
    pub alpha: Vec<f64>,
    pub chi: Vec<Vec<f64>>,
}

fn relative(p: f64, e: f64) -> f64 {
    if e == 0.0 {
        if p == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (p - e).abs() / e.abs()
    }
}

pub fn quantize_stage(modes: &[RlcMode], junction: JunctionSpec, truncations: &[usize]) -> Result<DispersiveReport> {
    let q = |e: quantize::QuantizeError| CliError::new(Stage::Quantize, e);
    let params = junction.params()?;
    let qmodes = quantize::quantize_modes(modes).map_err(q)?;
    let truncations = resolve_truncations(truncations, qmodes.len())?;
    let pert: DispersiveModel = kerr_perturbative(&qmodes, &params).map_err(q)?;
    let h = build_hamiltonian(&qmodes, &params, &truncations).map_err(q)?;
    let exact = kerr_exact(&h, &qmodes).map_err(q)?;
    let relative_deviation = Deviation {
        alpha: pert.alpha.iter().zip(&exact.alpha).map(|(&p, &e)| relative(p, e)).collect(),
        chi: pert
            .chi
            .iter()
            .zip(&exact.chi)
            .map(|(pr, er)| pr.iter().zip(er).map(|(&p, &e)| relative(p, e)).collect())
            .collect(),
    };
    Ok(DispersiveReport {
        truncations,
        perturbative: (&pert).into(),
        exact: (&exact).into(),
        relative_deviation,
    })
}

fn fit_outputs(fit: &FitOutcome, out: &mut Outputs) -> Result<()> {
    let freqs = fit.impedance.freqs();
    let z_fit = ratfit::evaluate_model(&fit.model, freqs).map_err(|e| CliError::new(Stage::Fit, e))?;
    let rows = freqs
        .iter()
        .zip(fit.impedance.values())
        .zip(&z_fit)
        .map(|((&f, zd), zf)| vec![f, zd.norm(), zf.norm()]);
    out.add("model.json", to_json(&fit.model)?);
    out.add("fit_report.json", to_json(&fit.report)?);
    out.add("impedance_compare.csv", to_csv("freq_hz,abs_z_data_ohm,abs_z_fit_ohm", rows));
    Ok(())
}

/// `fit` subcommand outputs for one input, in memory.
pub fn fit_only(input: &Path, cfg: &RunConfig) -> Result<Outputs> {
    let z = load_impedance(input, cfg)?;
    let fit = fit_stage(z, cfg)?;
    let mut out = Outputs::new();
    fit_outputs(&fit, &mut out)?;
    Ok(out)
}

/// All pipeline outputs for one input, in memory.
pub fn pipeline_one(input: &Path, cfg: &RunConfig) -> Result<Outputs> {
    let junction = cfg
        .junction
        .ok_or_else(|| CliError::config("one of e_j_ghz or i_c_ua is required"))?;
    let z = load_impedance(input, cfg)?;
    let fit = fit_stage(z, cfg)?;
    let modes = synthesis_stage(&fit)?;
    let dispersive = quantize_stage(&modes, junction, &cfg.truncations)?;

    let mut out = Outputs::new();
    fit_outputs(&fit, &mut out)?;
    out.add("modes.json", to_json(&modes)?);
    out.add("dispersive.json", to_json(&dispersive)?);
    Ok(out)
}

/// Runs `work` on every input, `cfg.jobs` at a time, committing each
/// input's outputs only when all of its stages succeed. Returns the written
/// paths, or the first failure in input order.
pub fn run_all<F>(cfg: &RunConfig, work: F) -> Result<Vec<PathBuf>>
where
    F: Fn(&Path, &RunConfig) -> Result<Outputs> + Sync,
{
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Vec<PathBuf>>>>> = Mutex::new(vec![None; cfg.inputs.len()]);
    let workers = cfg.jobs.min(cfg.inputs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(input) = cfg.inputs.get(k) else { break };
                log::info!("processing {}", input.display());
                let r = work(input, cfg)
                    .and_then(|o| o.commit(&cfg.output_dir_for(input)))
                    .map_err(|e| e.for_input(input));
                results.lock().expect("results lock")[k] = Some(r);
            });
        }
    });
    let mut written = Vec::new();
    for r in results.into_inner().expect("results lock") {
        written.extend(r.expect("every input processed")?);
    }
    Ok(written)
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.junction.is_none() {
        return Err(CliError::config("one of e_j_ghz or i_c_ua is required"));
    }
    run_all(cfg, pipeline_one)
}

pub fn run_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    run_all(cfg, fit_only)
}

/// `quantize` subcommand: reads a modes.json and writes dispersive.json.
pub fn run_quantize(modes_path: &Path, junction: &JunctionFlags, output_dir: &Path) -> Result<Vec<PathBuf>> {
    let spec = JunctionSpec::from_flags(junction)?;
    spec.params()?;
    check_truncations(&junction.truncations)?;
    let text = std::fs::read_to_string(modes_path)
        .map_err(|e| CliError::new(Stage::Parse, e).for_input(modes_path))?;
    let modes: Vec<RlcMode> =
        serde_json::from_str(&text).map_err(|e| CliError::new(Stage::Parse, e).for_input(modes_path))?;
    for m in &modes {
        m.validate().map_err(|e| CliError::new(Stage::Parse, e).for_input(modes_path))?;
    }
    let report = quantize_stage(&modes, spec, &junction.truncations)?;
    let mut out = Outputs::new();
    out.add("dispersive.json", to_json(&report)?);
    out.commit(output_dir)
}
