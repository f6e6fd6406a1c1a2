//! Command-line surface and the key-value config file.
//!
//! A config file holds `key = value` lines whose keys are flag names with
//! underscores (`n_pole_pairs = 2`). Entries for flags that are also given
//! on the command line are dropped, so explicit flags win.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "blackbox", version, about = "Impedance data to dispersive Hamiltonians, and RCSJ IV sweeps")]
#[command(args_override_self = true)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a rational impedance model to one-port data.
    Fit(FitArgs),
    /// Quantize an RLC mode list against a junction.
    Quantize(QuantizeArgs),
    /// Sweep the IV curve of a current-biased junction.
    Rcsj(RcsjArgs),
    /// Parse, fit, synthesize and quantize in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// Pick from the file extension (.s1p → touchstone).
    Auto,
    Touchstone,
    /// CSV of reflection coefficients: freq_hz,re,im
    CsvS,
    /// CSV of impedances in ohms: freq_hz,re,im
    CsvZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Uniform,
    InverseMagnitude,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArg {
    /// Key-value file supplying defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitFlags {
    /// Input response files.
    #[arg(short, long = "input", num_args = 1..)]
    pub inputs: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub input_format: FormatArg,

    /// Reference impedance, overriding the file's.
    #[arg(long)]
    pub ref_impedance_ohm: Option<f64>,

    #[arg(long, default_value_t = 1)]
    pub n_pole_pairs: usize,

    #[arg(long, default_value_t = 20)]
    pub max_iters: usize,

    /// Relative pole movement that counts as converged.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub include_const: bool,

    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub include_slope: bool,

    #[arg(long, value_enum, default_value_t = WeightingArg::Uniform)]
    pub weighting: WeightingArg,

    #[arg(short, long, default_value = "out")]
    pub output_dir: PathBuf,

    /// Inputs processed concurrently.
    #[arg(short, long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct JunctionFlags {
    /// Josephson energy E_J/h in GHz.
    #[arg(long)]
    pub e_j_ghz: Option<f64>,

    /// Critical current in µA.
    #[arg(long)]
    pub i_c_ua: Option<f64>,

    /// Fock levels per mode; one value applies to every mode.
    #[arg(long, num_args = 1..)]
    pub truncations: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub fit: FitFlags,
    #[command(flatten)]
    pub junction: JunctionFlags,
}

#[derive(Debug, Clone, Args)]
pub struct QuantizeArgs {
    #[command(flatten)]
    pub config: ConfigArg,

    /// modes.json from a previous fit or pipeline run.
    #[arg(long)]
    pub modes: Option<PathBuf>,

    #[command(flatten)]
    pub junction: JunctionFlags,

    #[arg(short, long, default_value = "out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RcsjArgs {
    #[command(flatten)]
    pub config: ConfigArg,

    /// Critical current in µA.
    #[arg(long, default_value_t = 1.0)]
    pub i_c_ua: f64,

    /// Junction capacitance in fF.
    #[arg(long, default_value_t = 100.0)]
    pub c_j_ff: f64,

    /// Stewart–McCumber parameter; sets R_N.
    #[arg(long)]
    pub beta_c: Option<f64>,

    /// Normal resistance in ohms.
    #[arg(long)]
    pub r_n_ohm: Option<f64>,

    /// Gap voltage 2Δ₀/e in mV.
    #[arg(long)]
    pub gap_mv: Option<f64>,

    /// Gap voltage as a multiple of I_c·R_N, used when --gap-mv is absent.
    /// The small default gives plain resistive damping on the running branch.
    #[arg(long, default_value_t = 1e-3)]
    pub gap_ratio: f64,

    /// Ramp half-width around the gap, as a fraction of the gap voltage.
    #[arg(long, default_value_t = blackbox_core::rcsj::DEFAULT_GAP_SMOOTHING)]
    pub gap_smoothing: f64,

    /// Sweep maximum in units of I_c.
    #[arg(long, default_value_t = 1.5)]
    pub i_max_ratio: f64,

    #[arg(long, default_value_t = 100)]
    pub points: usize,

    #[arg(long, default_value_t = blackbox_core::rcsj::DEFAULT_SETTLE_PERIODS)]
    pub settle_periods: u32,

    #[arg(long, default_value_t = blackbox_core::rcsj::DEFAULT_AVERAGE_PERIODS)]
    pub average_periods: u32,

    #[arg(long, default_value_t = blackbox_core::rcsj::DEFAULT_TOL)]
    pub tol: f64,

    /// Also write trace.csv: a run from rest at the maximum bias.
    #[arg(long)]
    pub trace: bool,

    #[arg(short, long, default_value = "out")]
    pub output_dir: PathBuf,
}

impl Command {
    fn config_path(&self) -> Option<&Path> {
        match self {
            Command::Fit(a) => a.config.config.as_deref(),
            Command::Quantize(a) => a.config.config.as_deref(),
            Command::Rcsj(a) => a.config.config.as_deref(),
            Command::Pipeline(a) => a.config.config.as_deref(),
        }
    }
}

const SUBCOMMANDS: [&str; 4] = ["fit", "quantize", "rcsj", "pipeline"];

/// Parses `args`, splicing in a `--config` file if one is named.
pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, ParseFailure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&args).map_err(ParseFailure::Clap)?;
    let Some(path) = cli.command.config_path() else {
        return Ok(cli);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| ParseFailure::Config(CliError::config(format!("{}: {e}", path.display()))))?;
    let entries = config_entries(&text).map_err(ParseFailure::Config)?;
    let at = args
        .iter()
        .position(|a| SUBCOMMANDS.iter().any(|s| a == s))
        .expect("parsed command line has a subcommand");
    let sub_name = args[at].to_string_lossy().into_owned();

    let mut command = Cli::command();
    let matches = command.try_get_matches_from_mut(&args).map_err(ParseFailure::Clap)?;
    let (_, sub_matches) = matches.subcommand().expect("subcommand present");
    let sub = command.find_subcommand(&sub_name).expect("known subcommand");
    let given_on_command_line = |key: &str| {
        let long = key.replace('_', "-");
        sub.get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()))
            .map(|a| sub_matches.value_source(a.get_id().as_str()) == Some(ValueSource::CommandLine))
            .unwrap_or(false)
    };

    let mut spliced = args[..=at].to_vec();
    for (key, tokens) in entries {
        if !given_on_command_line(&key) {
            spliced.extend(tokens.into_iter().map(OsString::from));
        }
    }
    spliced.extend_from_slice(&args[at + 1..]);
    Cli::try_parse_from(&spliced).map_err(ParseFailure::Clap)
}

#[derive(Debug)]
pub enum ParseFailure {
    Clap(clap::Error),
    Config(CliError),
}

/// Flag tokens for each config file entry, keyed by the entry's name.
/// Values split on whitespace, so list-valued keys take several.
pub fn config_entries(text: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(CliError::config(format!("config line {}: bad key {key:?}", n + 1)));
        }
        if key == "config" {
            return Err(CliError::config(format!("config line {}: nested config files", n + 1)));
        }
        let values: Vec<&str> = value.split_whitespace().collect();
        if values.is_empty() {
            return Err(CliError::config(format!("config line {}: empty value for {key}", n + 1)));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let mut tokens = Vec::new();
        // Boolean switches take no value.
        if key == "trace" {
            match values.as_slice() {
                ["true"] => tokens.push(flag),
                ["false"] => {}
                _ => return Err(CliError::config(format!("config line {}: trace is true or false", n + 1))),
            }
        } else {
            tokens.push(flag);
            tokens.extend(values.into_iter().map(String::from));
        }
        out.push((key.to_string(), tokens));
    }
    Ok(out)
}
