use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Exit codes: 1 bad input, 2 nothing found, 3 budget or precision out of
/// reach, 4 anything else.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Budget(String),
    Compute(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Budget(_) => 3,
            Failure::Compute(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Budget(m) | Failure::Compute(m) => m,
        }
    }
}

pub const EXIT_NOT_FOUND: u8 = 2;

#[derive(Serialize)]
struct Envelope<'a> {
    command: &'a str,
    parameters: &'a BTreeMap<String, Value>,
    result: &'a Value,
    certified_error: Option<f64>,
    elapsed_ms: u64,
}

/// What a command produced, before formatting.
pub struct Report {
    pub command: &'static str,
    pub parameters: BTreeMap<String, Value>,
    pub result: Value,
    pub certified_error: Option<f64>,
    /// Text output in order; lines flagged `false` are dropped by `--quiet`.
    pub text: Vec<(bool, String)>,
    pub csv: Option<String>,
    /// Message for stderr, printed in every format.
    pub diagnostic: Option<String>,
    pub exit_code: u8,
}

impl Report {
    pub fn new(command: &'static str, result: Value) -> Self {
        Report {
            command,
            parameters: BTreeMap::new(),
            result,
            certified_error: None,
            text: Vec::new(),
            csv: None,
            diagnostic: None,
            exit_code: 0,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_owned(), value.into());
        self
    }

    pub fn line(mut self, line: impl Into<String>) -> Self {
        self.text.push((true, line.into()));
        self
    }

    pub fn detail(mut self, line: impl Into<String>) -> Self {
        self.text.push((false, line.into()));
        self
    }

    pub fn emit(self, format: Format, quiet: bool, elapsed: Duration) -> Result<u8, Failure> {
        match format {
            Format::Json => {
                let envelope = Envelope {
                    command: self.command,
                    parameters: &self.parameters,
                    result: &self.result,
                    certified_error: self.certified_error,
                    elapsed_ms: elapsed.as_millis().try_into().unwrap_or(u64::MAX),
                };
                let json = serde_json::to_string_pretty(&envelope).map_err(|e| Failure::Compute(e.to_string()))?;
                println!("{json}");
            }
            Format::Csv => {
                let Some(csv) = &self.csv else {
                    return Err(Failure::Input(format!("--csv is not available for `{}`", self.command)));
                };
                print!("{csv}");
            }
            Format::Text => {
                for (essential, line) in &self.text {
                    if *essential || !quiet {
                        println!("{line}");
                    }
                }
            }
        }
        if let Some(diagnostic) = &self.diagnostic {
            eprintln!("{diagnostic}");
        }
        Ok(self.exit_code)
    }
}
