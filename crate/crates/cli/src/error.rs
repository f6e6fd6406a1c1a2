use std::fmt;
use std::path::PathBuf;

/// Pipeline stage a failure is attributed to; decides the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Parse,
    Fit,
    Synthesis,
    Quantize,
    Simulate,
    Write,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Parse => 3,
            Stage::Fit => 4,
            Stage::Synthesis => 5,
            Stage::Quantize => 6,
            Stage::Simulate => 7,
            Stage::Write => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Parse => "parse",
            Stage::Fit => "fit",
            Stage::Synthesis => "synthesis",
            Stage::Quantize => "quantize",
            Stage::Simulate => "simulate",
            Stage::Write => "write",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub stage: Stage,
    pub input: Option<PathBuf>,
    pub message: String,
}

impl CliError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        Self {
            stage,
            input: None,
            message: message.to_string(),
        }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Self::new(Stage::Config, message)
    }

    pub fn for_input(mut self, path: impl Into<PathBuf>) -> Self {
        self.input.get_or_insert(path.into());
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage", self.stage.name())?;
        if let Some(p) = &self.input {
            write!(f, " ({})", p.display())?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;
