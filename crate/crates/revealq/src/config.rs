//! Experiment config loading with diagnostics anchored to the source text.

use std::fmt;
use std::path::{Path, PathBuf};

use revealq_core::harness::ExperimentConfig;

#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    /// 1-based line and column, when the problem can be located.
    pub location: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Some((line, col)) => write!(f, "{}:{line}:{col}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let err = |location, message: String| ConfigError {
        path: path.to_path_buf(),
        location,
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(None, e.to_string()))?;
    parse_config(&text).map_err(|(location, message)| err(location, message))
}

/// Parses and validates a config. Errors carry a 1-based position when one
/// can be found: the parser's own position, or the line of the offending key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, (Option<(usize, usize)>, String)> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let message = match full.rfind(" at line ") {
            Some(i) => full[..i].to_string(),
            None => full,
        };
        let location = (e.line() > 0).then(|| (e.line(), e.column()));
        (location, message)
    })?;
    config.validate().map_err(|e| {
        let message = e.to_string();
        (field_of(&message).and_then(|f| locate_key(text, f)), message)
    })?;
    Ok(config)
}

fn field_of(message: &str) -> Option<&str> {
    let start = message.find("field `")? + "field `".len();
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

fn locate_key(text: &str, key: &str) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    text.lines()
        .enumerate()
        .find_map(|(i, line)| line.find(&needle).map(|c| (i + 1, c + 1)))
}
