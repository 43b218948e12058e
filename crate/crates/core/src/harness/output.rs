use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, ExperimentConfig, HarnessError};

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    config: ExperimentConfig,
}

/// Claims `dir` for `cfg`. An existing manifest from a different config
/// is an error; nothing in the directory is touched in that case.
pub fn claim_output_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(MANIFEST);
    let hash = cfg.hash();
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let found = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| {
                v.get("config_hash")
                    .and_then(|h| h.as_str())
                    .map(str::to_owned)
            })
            .unwrap_or_default();
        if found != hash {
            return Err(HarnessError::ConfigMismatch {
                dir: dir.to_path_buf(),
                found,
                expected: hash,
            });
        }
    }
    let m = Manifest {
        config_hash: hash,
        config: cfg.clone(),
    };
    write_text(
        &path,
        &(serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n"),
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Comma-separated table preceded by a `# key=value` provenance line.
pub struct Csv {
    buf: String,
    cols: usize,
}

impl Csv {
    pub fn new(provenance: &[(&str, String)], header: &[&str]) -> Self {
        let mut buf = String::from("#");
        for (i, (k, v)) in provenance.iter().enumerate() {
            let sep = if i == 0 { " " } else { ", " };
            let _ = write!(buf, "{sep}{k}={v}");
        }
        buf.push('\n');
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self {
            buf,
            cols: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.cols);
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        write_text(path, &self.buf)
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
