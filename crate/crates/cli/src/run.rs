use std::fmt;
use std::path::{Path, PathBuf};

/// A command's results, kept in memory until the run succeeds.
#[derive(Default)]
pub struct Run {
    pub stdout: String,
    pub files: Vec<(PathBuf, Vec<u8>)>,
    pub inputs: Vec<(PathBuf, Vec<u8>)>,
}

impl Run {
    pub fn say(&mut self, line: impl AsRef<str>) {
        self.stdout.push_str(line.as_ref());
        self.stdout.push('\n');
    }

    pub fn file(&mut self, path: &Path, bytes: Vec<u8>) {
        self.files.push((path.to_path_buf(), bytes));
    }

    pub fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Runtime(format!("{}: not UTF-8", path.display())))?;
        self.inputs.push((path.to_path_buf(), bytes));
        Ok(text)
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid flags; exit code 2.
    Usage(String),
    /// Domain, truncation, I/O and other failures; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<poclab::Error> for CliError {
    fn from(e: poclab::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Up to six decimals, trailing zeros removed.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// `LO:HI:N` as `N` evenly spaced values.
pub fn parse_range(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("{flag} expects LO:HI:N, got '{text}'"));
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok(poclab::criteria::phase::linspace(lo, hi, n))
}
