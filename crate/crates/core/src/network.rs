//! One-port frequency responses: parsing and scattering/impedance conversion.
//!
//! Two text formats are accepted:
//!
//! * a single-port Touchstone subset: `!` comments, exactly one option line
//!   `# <HZ|KHZ|MHZ|GHZ> <S|Z> RI R <ref>`, then `<freq> <re> <im>` rows;
//! * CSV with the header `freq_hz,re,im`.
//!
//! Touchstone `Z` data is normalized to the reference resistance, as in the
//! Touchstone format itself, and is denormalized to ohms on ingest.

use std::fmt;
use std::io::Read;

use num_complex::Complex64;
use thiserror::Error;

/// Default reference impedance used when none is given.
pub const DEFAULT_REF_IMPEDANCE: f64 = 50.0;

/// Minimum `|1 - S|` (and `|Z + Z0| / Z0` for the inverse map) before division.
pub const SINGULARITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: frequency {freq_hz} Hz is not strictly increasing")]
    NonMonotone { line: usize, freq_hz: f64 },
    #[error("line {line}: unsupported option line `{text}`")]
    UnsupportedOption { line: usize, text: String },
    #[error("no option line found before data")]
    MissingOptionLine,
    #[error("scattering data requires a reference impedance")]
    MissingRefImpedance,
    #[error("reference impedance must be finite and positive, got {0}")]
    InvalidRefImpedance(f64),
    #[error("no data rows")]
    Empty,
    #[error("invalid response: {0}")]
    Invalid(String),
    #[error("open-circuit singularity (S = 1) at {freq_hz} Hz")]
    OpenCircuit { freq_hz: f64 },
    #[error("impedance equals -Z0 at {freq_hz} Hz; no finite scattering value")]
    NegativeMatch { freq_hz: f64 },
    #[error("expected {expected} data, got {found}")]
    WrongKind {
        expected: ResponseKind,
        found: ResponseKind,
    },
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NetworkError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseKind {
    Scattering,
    Impedance,
}

impl fmt::Display for ResponseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResponseKind::Scattering => f.write_str("scattering"),
            ResponseKind::Impedance => f.write_str("impedance"),
        }
    }
}

/// Input file format. CSV files do not declare what they contain, so the
/// caller supplies the kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    TouchstoneSubset,
    Csv(ResponseKind),
}

/// A sampled one-port response.
///
/// Frequencies are in hertz, strictly positive and strictly increasing.
/// Values are dimensionless for scattering data and ohms for impedance data.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
    kind: ResponseKind,
    ref_impedance: Option<f64>,
}

impl FrequencyResponse {
    /// Builds a response, checking every invariant of the type.
    pub fn new(
        freqs: Vec<f64>,
        values: Vec<Complex64>,
        kind: ResponseKind,
        ref_impedance: Option<f64>,
    ) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(NetworkError::Invalid(format!(
                "{} frequencies but {} values",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.is_empty() {
            return Err(NetworkError::Empty);
        }
        for (i, &f) in freqs.iter().enumerate() {
            if !f.is_finite() || f <= 0.0 {
                return Err(NetworkError::Invalid(format!(
                    "frequency #{i} = {f} is not finite and positive"
                )));
            }
            if i > 0 && f <= freqs[i - 1] {
                return Err(NetworkError::Invalid(format!(
                    "frequency #{i} = {f} Hz is not strictly increasing"
                )));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(NetworkError::Invalid(format!(
                "value at {} Hz is not finite",
                freqs[i]
            )));
        }
        if let Some(z0) = ref_impedance {
            if !(z0.is_finite() && z0 > 0.0) {
                return Err(NetworkError::InvalidRefImpedance(z0));
            }
        }
        if kind == ResponseKind::Scattering && ref_impedance.is_none() {
            return Err(NetworkError::MissingRefImpedance);
        }
        Ok(Self {
            freqs,
            values,
            kind,
            ref_impedance,
        })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn ref_impedance(&self) -> Option<f64> {
        self.ref_impedance
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.freqs.iter().copied().zip(self.values.iter().copied())
    }
}

/// Reads a response from `source`.
///
/// `ref_impedance`, when given, overrides the reference resistance declared
/// on a Touchstone option line and is required for CSV scattering data.
pub fn parse_response<R: Read>(
    mut source: R,
    format: InputFormat,
    ref_impedance: Option<f64>,
) -> Result<FrequencyResponse> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    if let Some(z0) = ref_impedance {
        if !(z0.is_finite() && z0 > 0.0) {
            return Err(NetworkError::InvalidRefImpedance(z0));
        }
    }
    match format {
        InputFormat::TouchstoneSubset => parse_touchstone(&text, ref_impedance),
        InputFormat::Csv(kind) => parse_csv(&text, kind, ref_impedance),
    }
}

struct OptionLine {
    freq_scale: f64,
    kind: ResponseKind,
    ref_impedance: f64,
}

fn parse_option_line(line_no: usize, line: &str) -> Result<OptionLine> {
    let unsupported = || NetworkError::UnsupportedOption {
        line: line_no,
        text: line.trim().to_string(),
    };
    let tokens: Vec<String> = line
        .trim_start_matches('#')
        .split_whitespace()
        .map(|t| t.to_ascii_uppercase())
        .collect();
    if tokens.len() != 5 {
        return Err(unsupported());
    }
    let freq_scale = match tokens[0].as_str() {
        "HZ" => 1.0,
        "KHZ" => 1e3,
        "MHZ" => 1e6,
        "GHZ" => 1e9,
        _ => return Err(unsupported()),
    };
    let kind = match tokens[1].as_str() {
        "S" => ResponseKind::Scattering,
        "Z" => ResponseKind::Impedance,
        _ => return Err(unsupported()),
    };
    if tokens[2] != "RI" || tokens[3] != "R" {
        return Err(unsupported());
    }
    let ref_impedance: f64 = tokens[4].parse().map_err(|_| unsupported())?;
    if !(ref_impedance.is_finite() && ref_impedance > 0.0) {
        return Err(NetworkError::InvalidRefImpedance(ref_impedance));
    }
    Ok(OptionLine {
        freq_scale,
        kind,
        ref_impedance,
    })
}

fn parse_number(line_no: usize, token: &str, what: &str) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| NetworkError::Malformed {
        line: line_no,
        reason: format!("cannot parse {what} `{token}`"),
    })?;
    if !v.is_finite() {
        return Err(NetworkError::Malformed {
            line: line_no,
            reason: format!("{what} `{token}` is not finite"),
        });
    }
    Ok(v)
}

/// Accumulates rows, enforcing a strictly increasing positive grid.
#[derive(Default)]
struct RowSink {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
}

impl RowSink {
    fn push(&mut self, line_no: usize, freq_hz: f64, value: Complex64) -> Result<()> {
        if freq_hz <= 0.0 {
            return Err(NetworkError::Malformed {
                line: line_no,
                reason: format!("frequency {freq_hz} Hz must be positive"),
            });
        }
        if let Some(&last) = self.freqs.last() {
            if freq_hz <= last {
                return Err(NetworkError::NonMonotone {
                    line: line_no,
                    freq_hz,
                });
            }
        }
        self.freqs.push(freq_hz);
        self.values.push(value);
        Ok(())
    }
}

fn parse_touchstone(text: &str, ref_override: Option<f64>) -> Result<FrequencyResponse> {
    let mut option: Option<OptionLine> = None;
    let mut rows = RowSink::default();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if option.is_some() {
                return Err(NetworkError::UnsupportedOption {
                    line: line_no,
                    text: format!("{line} (second option line)"),
                });
            }
            if !rows.freqs.is_empty() {
                return Err(NetworkError::Malformed {
                    line: line_no,
                    reason: "option line after data rows".into(),
                });
            }
            option = Some(parse_option_line(line_no, line)?);
            continue;
        }
        let opt = option.as_ref().ok_or(NetworkError::MissingOptionLine)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(NetworkError::Malformed {
                line: line_no,
                reason: format!("expected 3 columns, found {}", tokens.len()),
            });
        }
        let f = parse_number(line_no, tokens[0], "frequency")? * opt.freq_scale;
        let re = parse_number(line_no, tokens[1], "real part")?;
        let im = parse_number(line_no, tokens[2], "imaginary part")?;
        let mut value = Complex64::new(re, im);
        if opt.kind == ResponseKind::Impedance {
            value *= opt.ref_impedance;
        }
        rows.push(line_no, f, value)?;
    }

    let opt = option.ok_or(NetworkError::MissingOptionLine)?;
    if rows.freqs.is_empty() {
        return Err(NetworkError::Empty);
    }
    let z0 = ref_override.unwrap_or(opt.ref_impedance);
    FrequencyResponse::new(rows.freqs, rows.values, opt.kind, Some(z0))
}

fn parse_csv(text: &str, kind: ResponseKind, ref_impedance: Option<f64>) -> Result<FrequencyResponse> {
    if kind == ResponseKind::Scattering && ref_impedance.is_none() {
        return Err(NetworkError::MissingRefImpedance);
    }
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_no, header) = lines.next().ok_or(NetworkError::Empty)?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns != ["freq_hz", "re", "im"] {
        return Err(NetworkError::Malformed {
            line: header_no,
            reason: format!("expected header `freq_hz,re,im`, found `{header}`"),
        });
    }

    let mut rows = RowSink::default();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(NetworkError::Malformed {
                line: line_no,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let f = parse_number(line_no, fields[0], "frequency")?;
        let re = parse_number(line_no, fields[1], "real part")?;
        let im = parse_number(line_no, fields[2], "imaginary part")?;
        rows.push(line_no, f, Complex64::new(re, im))?;
    }
    if rows.freqs.is_empty() {
        return Err(NetworkError::Empty);
    }
    FrequencyResponse::new(rows.freqs, rows.values, kind, ref_impedance)
}

/// `Z = Z0 (1 + S) / (1 - S)` for a single reflection coefficient.
pub fn impedance_from_reflection(s: Complex64, z0: f64) -> Option<Complex64> {
    let denom = Complex64::new(1.0, 0.0) - s;
    if denom.norm() < SINGULARITY_TOL {
        return None;
    }
    Some(z0 * (1.0 + s) / denom)
}

/// `S = (Z - Z0) / (Z + Z0)`.
pub fn reflection_from_impedance(z: Complex64, z0: f64) -> Option<Complex64> {
    let denom = z + z0;
    if denom.norm() < SINGULARITY_TOL * z0 {
        return None;
    }
    Some((z - z0) / denom)
}

/// Converts scattering data to port impedance in ohms.
pub fn s_to_z(resp: &FrequencyResponse) -> Result<FrequencyResponse> {
    if resp.kind != ResponseKind::Scattering {
        return Err(NetworkError::WrongKind {
            expected: ResponseKind::Scattering,
            found: resp.kind,
        });
    }
    let z0 = resp.ref_impedance.ok_or(NetworkError::MissingRefImpedance)?;
    let values = resp
        .iter()
        .map(|(f, s)| impedance_from_reflection(s, z0).ok_or(NetworkError::OpenCircuit { freq_hz: f }))
        .collect::<Result<Vec<_>>>()?;
    FrequencyResponse::new(resp.freqs.clone(), values, ResponseKind::Impedance, Some(z0))
}

/// Converts impedance data to scattering data referenced to `ref_impedance`,
/// falling back to the response's own reference, then to 50 ohms.
pub fn z_to_s(resp: &FrequencyResponse, ref_impedance: Option<f64>) -> Result<FrequencyResponse> {
    if resp.kind != ResponseKind::Impedance {
        return Err(NetworkError::WrongKind {
            expected: ResponseKind::Impedance,
            found: resp.kind,
        });
    }
    let z0 = ref_impedance
        .or(resp.ref_impedance)
        .unwrap_or(DEFAULT_REF_IMPEDANCE);
    if !(z0.is_finite() && z0 > 0.0) {
        return Err(NetworkError::InvalidRefImpedance(z0));
    }
    let values = resp
        .iter()
        .map(|(f, z)| reflection_from_impedance(z, z0).ok_or(NetworkError::NegativeMatch { freq_hz: f }))
        .collect::<Result<Vec<_>>>()?;
    FrequencyResponse::new(resp.freqs.clone(), values, ResponseKind::Scattering, Some(z0))
}
