//! Shared I/O helpers for the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use gmk_core::motion::{canonicalize, load_pose_sequence, ChannelKind, Manifest, PoseSequence};
use ndarray::Array2;

use crate::error::CliError;

/// Read a headerless CSV of finite decimals into a matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!("file not found: {}", path.display())));
    }
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (r, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row_len = 0usize;
        for (c, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Input(format!(
                    "{}: row {r}, column {c}: not a finite decimal",
                    path.display()
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "{}: row {r}, column {c}: non-finite value",
                    path.display()
                )));
            }
            values.push(v);
            row_len += 1;
        }
        match cols {
            None => cols = Some(row_len),
            Some(expected) if expected != row_len => {
                return Err(CliError::Input(format!(
                    "{}: row {r}: expected {expected} columns, found {row_len}",
                    path.display()
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| {
        CliError::Input(format!("{}: file is empty", path.display()))
    })?;
    Ok(Array2::from_shape_vec((rows, cols), values).expect("consistent row widths"))
}

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Input(format!("cannot finalize {}: {e}", path.display())))?;
    Ok(())
}

pub fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Print a report to stdout, or write it atomically to `out`.
///
/// A closed stdout (downstream `head`, etc.) is not an error.
pub fn emit_report(report: &serde_json::Value, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Input(format!("cannot serialize report: {e}")))?;
    match out {
        None => {
            use std::io::Write as _;
            let stdout = std::io::stdout();
            match writeln!(stdout.lock(), "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => other
                    .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}"))),
            }
        }
        Some(path) => write_atomic(path, format!("{text}\n").as_bytes()),
    }
}

/// Load a pose CSV with its manifest and canonicalize it when the layout
/// carries position channels.
///
/// The root is the joint named by `root_joint` holding one position channel
/// per axis; layouts without any position channels skip canonicalization.
pub fn load_canonical_sequence(
    poses: &Path,
    manifest: &Manifest,
    root_joint: &str,
) -> Result<PoseSequence, CliError> {
    let seq = load_pose_sequence(poses, manifest.fps, manifest.channels.clone())?;
    let has_positions = seq.channels().iter().any(|c| c.kind.is_position());
    if !has_positions {
        return Ok(seq);
    }
    let mut root = [None; 3];
    for (i, desc) in seq.channels().iter().enumerate() {
        if desc.joint_name == root_joint {
            match desc.kind {
                ChannelKind::PositionX => root[0] = Some(i),
                ChannelKind::PositionY => root[1] = Some(i),
                ChannelKind::PositionZ => root[2] = Some(i),
                ChannelKind::Angle => {}
            }
        }
    }
    match root {
        [Some(x), Some(y), Some(z)] => Ok(canonicalize(&seq, [x, y, z])?),
        _ => Err(CliError::Input(format!(
            "layout has position channels but no root joint {root_joint:?} with x/y/z positions"
        ))),
    }
}
