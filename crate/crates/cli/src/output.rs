use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::ValueEnum;
use serde_json::{json, Value};

/// Directory used for result files when `--output` is not given.
pub const OUTPUT_DIR_ENV: &str = "INCSEQ_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Everything a command produces before it is rendered.
pub struct Artifact {
    /// CSV body including the header row.
    pub csv: String,
    pub rows: Value,
    pub summary: String,
    /// Set when the run detected an invariant violation.
    pub violation: Option<String>,
}

pub struct RunInfo<'a> {
    pub command: &'a str,
    pub seed: u64,
    /// Only recorded in the file when the caller asked for it; files are otherwise reproducible.
    pub wall_clock: Option<Duration>,
}

pub fn render(artifact: &Artifact, format: Format, info: &RunInfo<'_>) -> String {
    let version = env!("CARGO_PKG_VERSION");
    match format {
        Format::Csv => {
            let mut text = artifact.csv.clone();
            text.push_str(&format!("# incseq {version} command={} seed={}", info.command, info.seed));
            if let Some(wall) = info.wall_clock {
                text.push_str(&format!(" wall_clock_s={:.3}", wall.as_secs_f64()));
            }
            text.push('\n');
            text
        }
        Format::Json => {
            let mut doc = json!({
                "version": version,
                "command": info.command,
                "seed": info.seed,
                "rows": artifact.rows,
            });
            if let Some(wall) = info.wall_clock {
                doc["wall_clock_s"] = json!(wall.as_secs_f64());
            }
            let mut text = serde_json::to_string_pretty(&doc).expect("rows serialize");
            text.push('\n');
            text
        }
    }
}

/// Resolves where the rendered artifact goes; `None` means stdout.
pub fn destination(explicit: Option<&Path>, command: &str, format: Format) -> Option<PathBuf> {
    if let Some(path) = explicit {
        return Some(path.to_path_buf());
    }
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|d| !d.is_empty())
        .map(|dir| Path::new(&dir).join(format!("{command}.{}", format.extension())))
}

pub fn write(dest: Option<&Path>, text: &str) -> io::Result<()> {
    match dest {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text)
        }
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}
