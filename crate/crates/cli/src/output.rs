//! Number formatting and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::CliResult;

/// Decimal rendering with 17 significant digits, which round-trips any `f64`.
pub fn fmt17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, x)
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Test,
    Validate,
    Generate,
}

/// Written to the output directory before any heavy work starts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub timestamp_unix: u64,
    pub tool_version: &'static str,
    pub config: C,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(command: Command, config_path: Option<&Path>, output_dir: &Path, config: C) -> Self {
        Self {
            command,
            config_path: config_path.map(Path::to_path_buf),
            output_dir: output_dir.to_path_buf(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            tool_version: env!("CARGO_PKG_VERSION"),
            config,
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}
