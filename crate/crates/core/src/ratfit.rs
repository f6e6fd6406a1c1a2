//! Pole-residue fitting of sampled impedance by iterative pole relocation
//! (vector fitting).
//!
//! The model is
//!
//! ```text
//! Z(s) = Σ_k r_k / (s - p_k) + d + e·s,      s = j·2πf
//! ```
//!
//! with real `d` and `e`, and poles that are real or come in conjugate pairs
//! with conjugate residues.
//!
//! Each iteration solves one linear least-squares problem for the residues of
//! `σ(s)·Z(s)` and of a scaling function `σ(s) = 1 + Σ c̃_k/(s - p_k)` that
//! shares the current poles, then moves the poles to the zeros of `σ`, which
//! are the eigenvalues of `A - b·c̃ᵀ` in the real state-space form of `σ`.
//! Unstable zeros are reflected into the left half-plane. Residues are
//! identified against the final pole set with a second, ordinary
//! least-squares solve.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{FrequencyResponse, ResponseKind};

/// Evaluations closer than this (relative to `|s|`) to a pole are rejected.
const POLE_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {need} samples for {pairs} pole pair(s), got {have}")]
    InsufficientSamples { have: usize, need: usize, pairs: usize },
    #[error("at least one pole pair is required")]
    NoPoles,
    #[error("fit requires impedance data, got {0}")]
    WrongKind(ResponseKind),
    #[error("rank-deficient least-squares system at iteration {iteration}")]
    RankDeficient { iteration: usize },
    #[error("non-finite values at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("pole relocation lost conjugate symmetry at iteration {iteration}")]
    BrokenSymmetry { iteration: usize },
    #[error("evaluation at {freq_hz} Hz coincides with a pole")]
    AtPole { freq_hz: f64 },
    #[error("frequency {0} Hz is not finite and positive")]
    BadFrequency(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, FitError>;

/// Fitted impedance `Z(s) = Σ r_k/(s - p_k) + d + e·s`.
///
/// Poles are in rad/s, residues in ohm·rad/s. A complex pole is stored
/// immediately followed by its conjugate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelDocument", try_from = "ModelDocument")]
pub struct RationalModel {
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
    /// `d`, ohms.
    pub const_term: f64,
    /// `e`, ohm·s.
    pub slope_term: f64,
}

impl RationalModel {
    /// A model with no poles.
    pub fn constant(d: f64) -> Self {
        Self {
            poles: Vec::new(),
            residues: Vec::new(),
            const_term: d,
            slope_term: 0.0,
        }
    }

    /// Builds a model from pole/residue pairs in the upper half-plane; the
    /// conjugate of each is appended automatically. Real poles must carry
    /// real residues.
    pub fn from_upper_half(
        pairs: &[(Complex64, Complex64)],
        const_term: f64,
        slope_term: f64,
    ) -> Result<Self> {
        let mut poles = Vec::with_capacity(2 * pairs.len());
        let mut residues = Vec::with_capacity(2 * pairs.len());
        for &(p, r) in pairs {
            if p.im == 0.0 {
                if r.im != 0.0 {
                    return Err(FitError::InvalidModel(format!(
                        "real pole {} has complex residue",
                        p.re
                    )));
                }
                poles.push(p);
                residues.push(r);
            } else {
                let (p, r) = if p.im > 0.0 { (p, r) } else { (p.conj(), r.conj()) };
                poles.extend([p, p.conj()]);
                residues.extend([r, r.conj()]);
            }
        }
        let model = Self {
            poles,
            residues,
            const_term,
            slope_term,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks the structural invariants: matching lengths, finite values,
    /// and conjugate pairing of complex poles and their residues.
    pub fn validate(&self) -> Result<()> {
        if self.poles.len() != self.residues.len() {
            return Err(FitError::InvalidModel(format!(
                "{} poles but {} residues",
                self.poles.len(),
                self.residues.len()
            )));
        }
        let finite = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
        if !self.poles.iter().chain(&self.residues).all(finite)
            || !self.const_term.is_finite()
            || !self.slope_term.is_finite()
        {
            return Err(FitError::InvalidModel("non-finite coefficient".into()));
        }
        let mut i = 0;
        while i < self.poles.len() {
            let (p, r) = (self.poles[i], self.residues[i]);
            if p.im == 0.0 {
                if r.im != 0.0 {
                    return Err(FitError::InvalidModel(format!("real pole #{i} has complex residue")));
                }
                i += 1;
                continue;
            }
            if i + 1 >= self.poles.len()
                || self.poles[i + 1] != p.conj()
                || self.residues[i + 1] != r.conj()
            {
                return Err(FitError::InvalidModel(format!(
                    "pole #{i} is not followed by its conjugate with a conjugate residue"
                )));
            }
            i += 2;
        }
        Ok(())
    }

    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|p| p.re < 0.0)
    }

    /// Representative (Im ≥ 0) pole/residue of every real pole or conjugate pair.
    pub fn upper_half(&self) -> Vec<(Complex64, Complex64)> {
        self.poles
            .iter()
            .zip(&self.residues)
            .filter(|(p, _)| p.im >= 0.0)
            .map(|(&p, &r)| (p, r))
            .collect()
    }

    /// Evaluates the model at complex frequency `s` (rad/s).
    pub fn eval_s(&self, s: Complex64) -> Complex64 {
        let poles: Complex64 = self
            .poles
            .iter()
            .zip(&self.residues)
            .map(|(&p, &r)| r / (s - p))
            .sum();
        poles + self.const_term + s * self.slope_term
    }
}

/// Serialized form of [`RationalModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub poles_re: Vec<f64>,
    pub poles_im: Vec<f64>,
    pub residues_re: Vec<f64>,
    pub residues_im: Vec<f64>,
    pub d_ohm: f64,
    pub slope_ohm_s: f64,
}

impl From<RationalModel> for ModelDocument {
    fn from(m: RationalModel) -> Self {
        Self {
            poles_re: m.poles.iter().map(|p| p.re).collect(),
            poles_im: m.poles.iter().map(|p| p.im).collect(),
            residues_re: m.residues.iter().map(|r| r.re).collect(),
            residues_im: m.residues.iter().map(|r| r.im).collect(),
            d_ohm: m.const_term,
            slope_ohm_s: m.slope_term,
        }
    }
}

impl TryFrom<ModelDocument> for RationalModel {
    type Error = FitError;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        let n = doc.poles_re.len();
        if doc.poles_im.len() != n || doc.residues_re.len() != n || doc.residues_im.len() != n {
            return Err(FitError::InvalidModel("array lengths differ".into()));
        }
        let zip = |re: &[f64], im: &[f64]| -> Vec<Complex64> {
            re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()
        };
        let model = RationalModel {
            poles: zip(&doc.poles_re, &doc.poles_im),
            residues: zip(&doc.residues_re, &doc.residues_im),
            const_term: doc.d_ohm,
            slope_term: doc.slope_ohm_s,
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weight each sample by `1/|Z|`, for data spanning many decades.
    InverseMagnitude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Relative pole displacement below which the iteration stops.
    pub pole_move_tol: f64,
    pub include_const: bool,
    pub include_slope: bool,
    pub weighting: Weighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 20,
            pole_move_tol: 1e-8,
            include_const: true,
            include_slope: false,
            weighting: Weighting::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    /// RMS of `Z_fit - Z_data` over all samples, ohms.
    pub rms_error: f64,
    /// Largest `|Z_fit - Z_data| / |Z_data|`.
    pub max_rel_error: f64,
    pub converged: bool,
    /// `rms_error` after each iteration.
    pub rms_history: Vec<f64>,
}

/// Evaluates `model` at `s = j·2πf` for each frequency.
pub fn evaluate_model(model: &RationalModel, freqs: &[f64]) -> Result<Vec<Complex64>> {
    freqs
        .iter()
        .map(|&f| {
            if !(f.is_finite() && f > 0.0) {
                return Err(FitError::BadFrequency(f));
            }
            let s = Complex64::new(0.0, 2.0 * PI * f);
            if model.poles.iter().any(|&p| (s - p).norm() <= POLE_FLOOR * s.norm()) {
                return Err(FitError::AtPole { freq_hz: f });
            }
            Ok(model.eval_s(s))
        })
        .collect()
}

/// One real pole or one conjugate pair (stored by its Im > 0 member), in
/// normalized frequency units.
#[derive(Debug, Clone, Copy, PartialEq)]
enum PoleSlot {
    Real(f64),
    Pair(Complex64),
}

impl PoleSlot {
    fn width(&self) -> usize {
        match self {
            PoleSlot::Real(_) => 1,
            PoleSlot::Pair(_) => 2,
        }
    }

    fn representative(&self) -> Complex64 {
        match *self {
            PoleSlot::Real(a) => Complex64::new(a, 0.0),
            PoleSlot::Pair(p) => p,
        }
    }

    fn reflected(self) -> Self {
        match self {
            PoleSlot::Real(a) => PoleSlot::Real(-a.abs()),
            PoleSlot::Pair(p) => PoleSlot::Pair(Complex64::new(-p.re.abs(), p.im)),
        }
    }
}

fn sort_slots(slots: &mut [PoleSlot]) {
    slots.sort_by(|a, b| {
        let (pa, pb) = (a.representative(), b.representative());
        pa.im.total_cmp(&pb.im).then(pa.re.total_cmp(&pb.re))
    });
}

/// Real basis functions of the pole set at normalized frequency `s`:
/// `1/(s-a)` for a real pole, and `1/(s-p) + 1/(s-p*)`, `j/(s-p) - j/(s-p*)`
/// for a pair, so that `c'·φ₁ + c''·φ₂ = c/(s-p) + c*/(s-p*)` with `c = c' + jc''`.
fn basis_row(slots: &[PoleSlot], s: Complex64, out: &mut Vec<Complex64>) {
    out.clear();
    for slot in slots {
        match *slot {
            PoleSlot::Real(a) => out.push(1.0 / (s - a)),
            PoleSlot::Pair(p) => {
                let t1 = 1.0 / (s - p);
                let t2 = 1.0 / (s - p.conj());
                out.push(t1 + t2);
                out.push(Complex64::i() * (t1 - t2));
            }
        }
    }
}

/// Least-squares solve with column equilibration.
///
/// Returns the solution and whether the scaled matrix was numerically rank
/// deficient. Deficient directions are dropped (minimum-norm solution).
fn lstsq(mut a: DMatrix<f64>, b: DVector<f64>) -> (DVector<f64>, bool) {
    let scales: Vec<f64> = a
        .column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 { 1.0 / n } else { 1.0 }
        })
        .collect();
    for (j, &sc) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(sc);
    }
    let (rows, cols) = a.shape();
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = f64::EPSILON * rows.max(cols) as f64 * smax;
    let deficient = smax == 0.0 || svd.singular_values.min() <= cutoff;
    let mut x = svd
        .solve(&b, cutoff)
        .unwrap_or_else(|_| DVector::zeros(cols));
    for (j, &sc) in scales.iter().enumerate() {
        x[j] *= sc;
    }
    (x, deficient)
}

struct Problem<'a> {
    /// Normalized `s = jω/ω₀`.
    s: Vec<Complex64>,
    data: &'a [Complex64],
    weights: Vec<f64>,
    include_const: bool,
    include_slope: bool,
}

/// Residues and polynomial terms identified against a fixed pole set.
struct Identified {
    coeffs: Vec<f64>,
    d: f64,
    e: f64,
}

impl Problem<'_> {
    fn n_poly(&self) -> usize {
        usize::from(self.include_const) + usize::from(self.include_slope)
    }

    fn push_poly(&self, row: &mut Vec<Complex64>, s: Complex64) {
        if self.include_const {
            row.push(Complex64::new(1.0, 0.0));
        }
        if self.include_slope {
            row.push(s);
        }
    }

    /// Solves for σ's residues and returns its zeros as the new pole set.
    fn relocate(&self, slots: &[PoleSlot], iteration: usize) -> Result<Vec<PoleSlot>> {
        let n = slots.iter().map(PoleSlot::width).sum::<usize>();
        let cols = 2 * n + self.n_poly();
        let k = self.s.len();
        let mut a = DMatrix::<f64>::zeros(2 * k, cols);
        let mut b = DVector::<f64>::zeros(2 * k);
        let mut phi = Vec::with_capacity(n);
        let mut row = Vec::with_capacity(cols);

        for (i, (&s, &f)) in self.s.iter().zip(self.data).enumerate() {
            basis_row(slots, s, &mut phi);
            row.clear();
            row.extend_from_slice(&phi);
            self.push_poly(&mut row, s);
            row.extend(phi.iter().map(|&p| -f * p));
            let w = self.weights[i];
            for (j, v) in row.iter().enumerate() {
                a[(i, j)] = w * v.re;
                a[(k + i, j)] = w * v.im;
            }
            b[i] = w * f.re;
            b[k + i] = w * f.im;
        }

        let (x, _) = lstsq(a, b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite { iteration });
        }
        let sigma = &x.as_slice()[n + self.n_poly()..];

        // State-space form of σ: zeros are eig(A - b·c̃ᵀ).
        let mut h = DMatrix::<f64>::zeros(n, n);
        let mut bvec = vec![0.0; n];
        let mut col = 0;
        for slot in slots {
            match *slot {
                PoleSlot::Real(a) => {
                    h[(col, col)] = a;
                    bvec[col] = 1.0;
                    col += 1;
                }
                PoleSlot::Pair(p) => {
                    h[(col, col)] = p.re;
                    h[(col, col + 1)] = p.im;
                    h[(col + 1, col)] = -p.im;
                    h[(col + 1, col + 1)] = p.re;
                    bvec[col] = 2.0;
                    col += 2;
                }
            }
        }
        for (i, &bi) in bvec.iter().enumerate() {
            if bi != 0.0 {
                for (j, &cj) in sigma.iter().enumerate() {
                    h[(i, j)] -= bi * cj;
                }
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite { iteration });
        }

        let eig = h.complex_eigenvalues();
        let scale = eig.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let tiny = 1e3 * f64::EPSILON * scale;
        let mut new_slots = Vec::with_capacity(slots.len());
        let mut width = 0;
        for z in eig.iter() {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(FitError::NonFinite { iteration });
            }
            if z.im.abs() <= tiny {
                new_slots.push(PoleSlot::Real(z.re));
                width += 1;
            } else if z.im > 0.0 {
                new_slots.push(PoleSlot::Pair(*z));
                width += 2;
            }
        }
        if width != n {
            return Err(FitError::BrokenSymmetry { iteration });
        }
        let mut new_slots: Vec<PoleSlot> = new_slots.into_iter().map(PoleSlot::reflected).collect();
        sort_slots(&mut new_slots);
        Ok(new_slots)
    }

    fn identify(&self, slots: &[PoleSlot], iteration: usize) -> Result<Identified> {
        let n = slots.iter().map(PoleSlot::width).sum::<usize>();
        let cols = n + self.n_poly();
        let k = self.s.len();
        let mut a = DMatrix::<f64>::zeros(2 * k, cols);
        let mut b = DVector::<f64>::zeros(2 * k);
        let mut row = Vec::with_capacity(cols);
        for (i, (&s, &f)) in self.s.iter().zip(self.data).enumerate() {
            basis_row(slots, s, &mut row);
            self.push_poly(&mut row, s);
            let w = self.weights[i];
            for (j, v) in row.iter().enumerate() {
                a[(i, j)] = w * v.re;
                a[(k + i, j)] = w * v.im;
            }
            b[i] = w * f.re;
            b[k + i] = w * f.im;
        }
        let (x, deficient) = lstsq(a, b);
        if deficient {
            return Err(FitError::RankDeficient { iteration });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite { iteration });
        }
        let mut idx = n;
        let mut next = |on: bool| {
            if on {
                idx += 1;
                x[idx - 1]
            } else {
                0.0
            }
        };
        let d = next(self.include_const);
        let e = next(self.include_slope);
        Ok(Identified {
            coeffs: x.as_slice()[..n].to_vec(),
            d,
            e,
        })
    }
}

fn max_relative_displacement(old: &[PoleSlot], new: &[PoleSlot]) -> f64 {
    if old.len() != new.len() {
        return f64::INFINITY;
    }
    old.iter()
        .zip(new)
        .map(|(a, b)| match (a, b) {
            (PoleSlot::Real(_), PoleSlot::Pair(_)) | (PoleSlot::Pair(_), PoleSlot::Real(_)) => f64::INFINITY,
            _ => {
                let (pa, pb) = (a.representative(), b.representative());
                (pa - pb).norm() / pa.norm().max(f64::MIN_POSITIVE)
            }
        })
        .fold(0.0, f64::max)
}

/// Initial poles: pairs with imaginary parts log-spaced across the band and
/// real parts at 1% of the imaginary part.
fn initial_slots(w_min: f64, w_max: f64, n_pairs: usize) -> Vec<PoleSlot> {
    let (lo, hi) = (w_min.ln(), w_max.ln());
    (0..n_pairs)
        .map(|i| {
            let w = if n_pairs == 1 {
                ((lo + hi) / 2.0).exp()
            } else {
                (lo + (hi - lo) * i as f64 / (n_pairs - 1) as f64).exp()
            };
            PoleSlot::Pair(Complex64::new(-w / 100.0, w))
        })
        .collect()
}

fn assemble(slots: &[PoleSlot], id: &Identified, w0: f64) -> RationalModel {
    let mut poles = Vec::new();
    let mut residues = Vec::new();
    let mut col = 0;
    for slot in slots {
        match *slot {
            PoleSlot::Real(a) => {
                poles.push(Complex64::new(a * w0, 0.0));
                residues.push(Complex64::new(id.coeffs[col] * w0, 0.0));
                col += 1;
            }
            PoleSlot::Pair(p) => {
                let r = Complex64::new(id.coeffs[col], id.coeffs[col + 1]) * w0;
                let p = p * w0;
                poles.extend([p, p.conj()]);
                residues.extend([r, r.conj()]);
                col += 2;
            }
        }
    }
    RationalModel {
        poles,
        residues,
        const_term: id.d,
        slope_term: id.e / w0,
    }
}

fn errors(model: &RationalModel, data: &FrequencyResponse) -> (f64, f64) {
    let mut sum_sq = 0.0;
    let mut max_rel: f64 = 0.0;
    let scale = data.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (f, z) in data.iter() {
        let err = (model.eval_s(Complex64::new(0.0, 2.0 * PI * f)) - z).norm();
        sum_sq += err * err;
        let denom = if z.norm() > 0.0 { z.norm() } else { scale.max(f64::MIN_POSITIVE) };
        max_rel = max_rel.max(err / denom);
    }
    ((sum_sq / data.len() as f64).sqrt(), max_rel)
}

/// Minimum sample count for `n_pole_pairs`.
pub fn required_samples(n_pole_pairs: usize) -> usize {
    2 * (2 * n_pole_pairs + 2)
}

/// Fits `n_pole_pairs` conjugate pole pairs to impedance data.
pub fn fit(
    data: &FrequencyResponse,
    n_pole_pairs: usize,
    options: &FitOptions,
) -> Result<(RationalModel, FitReport)> {
    if data.kind() != ResponseKind::Impedance {
        return Err(FitError::WrongKind(data.kind()));
    }
    if n_pole_pairs == 0 {
        return Err(FitError::NoPoles);
    }
    let need = required_samples(n_pole_pairs);
    if data.len() < need {
        return Err(FitError::InsufficientSamples {
            have: data.len(),
            need,
            pairs: n_pole_pairs,
        });
    }

    let freqs = data.freqs();
    let w_min = 2.0 * PI * freqs[0];
    let w_max = 2.0 * PI * freqs[freqs.len() - 1];
    let w0 = (w_min * w_max).sqrt();

    let weights = match options.weighting {
        Weighting::Uniform => vec![1.0; data.len()],
        Weighting::InverseMagnitude => {
            let floor = data.values().iter().map(|z| z.norm()).fold(0.0, f64::max) * 1e-12;
            data.values()
                .iter()
                .map(|z| 1.0 / z.norm().max(floor).max(f64::MIN_POSITIVE))
                .collect()
        }
    };
    let problem = Problem {
        s: freqs.iter().map(|&f| Complex64::new(0.0, 2.0 * PI * f / w0)).collect(),
        data: data.values(),
        weights,
        include_const: options.include_const,
        include_slope: options.include_slope,
    };

    let mut slots = initial_slots(w_min / w0, w_max / w0, n_pole_pairs);
    let mut rms_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut model = None;

    for iteration in 1..=options.max_iters {
        iterations = iteration;
        let relocated = problem.relocate(&slots, iteration)?;
        let displacement = max_relative_displacement(&slots, &relocated);
        slots = relocated;

        let id = problem.identify(&slots, iteration)?;
        let m = assemble(&slots, &id, w0);
        let (rms, _) = errors(&m, data);
        if !rms.is_finite() {
            return Err(FitError::NonFinite { iteration });
        }
        rms_history.push(rms);
        log::debug!("vector fit iteration {iteration}: rms {rms:.3e}, pole move {displacement:.3e}");
        model = Some(m);
        if displacement < options.pole_move_tol {
            converged = true;
            break;
        }
    }

    let model = match model {
        Some(m) => m,
        // max_iters == 0: identify residues against the starting poles only.
        None => assemble(&slots, &problem.identify(&slots, 0)?, w0),
    };
    let (rms_error, max_rel_error) = errors(&model, data);
    Ok((
        model,
        FitReport {
            iterations,
            rms_error,
            max_rel_error,
            converged,
            rms_history,
        },
    ))
}
