//! File formats: plain CSV with shortest round-trip decimals, LF line
//! endings, and a mandatory header row, plus a JSON metadata sibling
//! (`<name>.meta.json`) carrying everything needed to re-run the command.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gravicont::{DepthScanResult, EstimatedSource, LayerDensity, ObservationSet};
use nalgebra::Point3;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err(path))?;
        }
    }
    std::fs::write(path, content).map_err(io_err(path))
}

/// Observations CSV: `x1,x2,x3,g_clean[,g_noisy]`.
pub fn render_observations(
    points: &[Point3<f64>],
    clean: &[f64],
    noisy: Option<&[f64]>,
) -> String {
    let mut out = String::new();
    match noisy {
        Some(_) => out.push_str("x1,x2,x3,g_clean,g_noisy\n"),
        None => out.push_str("x1,x2,x3,g_clean\n"),
    }
    for (i, p) in points.iter().enumerate() {
        let _ = write!(out, "{},{},{},{}", p.x, p.y, p.z, clean[i]);
        if let Some(n) = noisy {
            let _ = write!(out, ",{}", n[i]);
        }
        out.push('\n');
    }
    out
}

/// Parsed observations file.
pub struct ObservationsFile {
    pub points: Vec<Point3<f64>>,
    pub clean: Vec<f64>,
    pub noisy: Option<Vec<f64>>,
}

impl ObservationsFile {
    /// Values a solver should invert: noisy when present, else clean.
    pub fn working_values(&self) -> &[f64] {
        self.noisy.as_deref().unwrap_or(&self.clean)
    }

    pub fn observation_set(&self) -> Result<ObservationSet, CliError> {
        ObservationSet::new(self.points.clone(), self.working_values().to_vec())
            .map_err(|e| CliError::Config(format!("observations file: {e}")))
    }
}

pub fn read_observations(path: &Path) -> Result<ObservationsFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: empty file", path.display())))?;
    let has_noisy = match header {
        "x1,x2,x3,g_clean,g_noisy" => true,
        "x1,x2,x3,g_clean" => false,
        other => {
            return Err(CliError::Config(format!(
                "{}: unrecognized header {other:?}",
                path.display()
            )))
        }
    };
    let mut points = Vec::new();
    let mut clean = Vec::new();
    let mut noisy = if has_noisy { Some(Vec::new()) } else { None };
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if has_noisy { 5 } else { 4 };
        if fields.len() != expected {
            return Err(CliError::Config(format!(
                "{}:{}: expected {expected} fields, found {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>().map_err(|_| {
                CliError::Config(format!(
                    "{}:{}: invalid number {s:?}",
                    path.display(),
                    lineno + 2
                ))
            })
        };
        points.push(Point3::new(parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
        clean.push(parse(fields[3])?);
        if let Some(n) = noisy.as_mut() {
            n.push(parse(fields[4])?);
        }
    }
    if points.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", path.display())));
    }
    Ok(ObservationsFile { points, clean, noisy })
}

/// Scan CSV: `h,chi,converged,iterations`.
pub fn render_scan(scan: &DepthScanResult) -> String {
    let mut out = String::from("h,chi,converged,iterations\n");
    for i in 0..scan.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            scan.depths[i], scan.residuals[i], scan.converged[i], scan.iterations[i]
        );
    }
    out
}

/// Parsed `(h, chi)` curve from a scan file.
pub fn read_scan_curve(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: empty file", path.display())))?;
    if header != "h,chi,converged,iterations" {
        return Err(CliError::Config(format!(
            "{}: unrecognized header {header:?}",
            path.display()
        )));
    }
    let mut depths = Vec::new();
    let mut residuals = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CliError::Config(format!(
                "{}:{}: expected 4 fields, found {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>().map_err(|_| {
                CliError::Config(format!(
                    "{}:{}: invalid number {s:?}",
                    path.display(),
                    lineno + 2
                ))
            })
        };
        depths.push(parse(fields[0])?);
        residuals.push(parse(fields[1])?);
    }
    if depths.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", path.display())));
    }
    Ok((depths, residuals))
}

/// Density CSV: `x1,x2,phi,mass`, one row per grid node in row-major order.
pub fn render_density(density: &LayerDensity) -> String {
    let mut out = String::from("x1,x2,phi,mass\n");
    let grid = density.grid();
    for (j, node) in grid.nodes().iter().enumerate() {
        let phi = density.phi()[j];
        let _ = writeln!(out, "{},{},{},{}", node.x, node.y, phi, phi * grid.cell_areas()[j]);
    }
    out
}

/// Sources CSV: `round,mass,x1,x2,depth,residual_after`.
pub fn render_sources(sources: &[EstimatedSource], residuals_after: &[f64]) -> String {
    let mut out = String::from("round,mass,x1,x2,depth,residual_after\n");
    for (s, r) in sources.iter().zip(residuals_after) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.round, s.mass, s.position.x, s.position.y, -s.position.z, r
        );
    }
    out
}

/// Path of the metadata sibling: `dir/name.csv` -> `dir/name.meta.json`.
pub fn meta_path(artifact: &Path) -> PathBuf {
    artifact.with_extension("meta.json")
}

/// Writes the metadata sibling of an emitted artifact.
pub fn write_metadata(
    artifact: &Path,
    command: &str,
    config: &ExperimentConfig,
    extra: serde_json::Value,
    wall_time_s: f64,
) -> Result<(), CliError> {
    let meta = json!({
        "artifact": artifact.file_name().and_then(|n| n.to_str()),
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.noise.seed,
        "config": config,
        "extra": extra,
        "wall_time_s": wall_time_s,
    });
    let path = meta_path(artifact);
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::Config(format!("metadata serialization: {e}")))?;
    write_text(&path, &text)
}
