//! CSV and JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::TimeSeries;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

/// `t, rerr_*, perr_*, phat_err_*, rerr_avg, perr_avg`, one row per sample,
/// values with 17 significant digits.
pub fn to_csv(series: &TimeSeries) -> String {
    let mut header = vec!["t".to_string()];
    for prefix in ["rerr", "perr", "phat_err"] {
        header.extend(series.followers.iter().map(|id| format!("{prefix}_{id}")));
    }
    header.push("rerr_avg".into());
    header.push("perr_avg".into());
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..series.len() {
        let row = std::iter::once(series.times[k])
            .chain(series.rerr[k].iter().copied())
            .chain(series.perr[k].iter().copied())
            .chain(series.phat_err[k].iter().copied())
            .chain([series.rerr_avg[k], series.perr_avg[k]]);
        for (c, v) in row.enumerate() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), ExportError> {
    fs::write(path, contents).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn export(series: &TimeSeries, path: &Path) -> Result<(), ExportError> {
    write_file(path, to_csv(series).as_bytes())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), ExportError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}
