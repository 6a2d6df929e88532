//! File artifacts: nodal heatmaps (CSV + PGM), boundary-data CSV, sweep
//! CSV, and JSON reports.
//!
//! Numeric CSV cells use 17 significant digits, enough to reproduce any
//! f64 bitwise when re-read.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Error;
use crate::experiments::metrics::RecoveryReport;
use crate::fem::TriMesh;
use crate::sweep::{MorozovResult, SweepResult};
use crate::DenseVector;

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(field: &str, line_no: usize) -> Result<f64, Error> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Format(format!("line {line_no}: expected a number, got {field:?}"))
    })
}

/// Writes `stem.csv` (node_index, x_coord, y_coord, value) and `stem.pgm`
/// (8-bit binary graymap of the nodal grid, values mapped linearly from
/// `[0, max(x, 1e-15)]` to 0..=255, top row of the image at y = 1).
/// Returns the two paths written.
pub fn export_heatmap(
    x: &DenseVector,
    mesh: &TriMesh,
    path_stem: &Path,
) -> Result<(PathBuf, PathBuf), Error> {
    let n = mesh.nodes_per_side();
    if x.len() != mesh.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "vector length {} != node count {}",
            x.len(),
            mesh.n_nodes()
        )));
    }
    let coords = mesh.node_coords();
    let mut csv = String::with_capacity(x.len() * 64);
    csv.push_str("node_index,x_coord,y_coord,value\n");
    for i in 0..x.len() {
        let _ = writeln!(
            csv,
            "{i},{},{},{}",
            fmt_f64(coords[i][0]),
            fmt_f64(coords[i][1]),
            fmt_f64(x[i])
        );
    }
    let csv_path = path_stem.with_extension("csv");
    fs::write(&csv_path, csv)?;

    let vmax = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(1e-15);
    let mut pgm = format!("P5\n{n} {n}\n255\n").into_bytes();
    for row in (0..n).rev() {
        for col in 0..n {
            let v = x[mesh.node_index(col, row)].clamp(0.0, vmax);
            pgm.push((255.0 * v / vmax).round() as u8);
        }
    }
    let pgm_path = path_stem.with_extension("pgm");
    fs::write(&pgm_path, pgm)?;
    Ok((csv_path, pgm_path))
}

/// Reads the value column of a heatmap CSV back, in node order.
pub fn read_heatmap_csv(path: &Path) -> Result<DenseVector, Error> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            continue;
        }
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "line {line_no}: expected 4 columns, got {}",
                fields.len()
            )));
        }
        let node: usize = fields[0].trim().parse().map_err(|_| {
            Error::Format(format!("line {line_no}: bad node index {:?}", fields[0]))
        })?;
        if node != values.len() {
            return Err(Error::Format(format!(
                "line {line_no}: node index {node} out of order (expected {})",
                values.len()
            )));
        }
        values.push(parse_f64(fields[3], line_no)?);
    }
    Ok(DenseVector::from_vec(values))
}

/// Writes an (index, value) CSV, e.g. for boundary data.
pub fn write_values_csv(values: &DenseVector, header: &str, path: &Path) -> Result<(), Error> {
    let mut csv = String::with_capacity(values.len() * 32);
    let _ = writeln!(csv, "index,{header}");
    for i in 0..values.len() {
        let _ = writeln!(csv, "{i},{}", fmt_f64(values[i]));
    }
    fs::write(path, csv)?;
    Ok(())
}

/// Reads the value column of an (index, value) CSV.
pub fn read_values_csv(path: &Path) -> Result<DenseVector, Error> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            continue;
        }
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::Format(format!(
                "line {line_no}: expected 2 columns, got {}",
                fields.len()
            )));
        }
        values.push(parse_f64(fields[1], line_no)?);
    }
    Ok(DenseVector::from_vec(values))
}

/// Renders the box-bound sweep as CSV (columns s, g, derivative,
/// converged) with the vertex verdict in a trailing comment.
pub fn sweep_csv_string(sweep: &SweepResult) -> String {
    let mut csv = String::new();
    csv.push_str("s,g,derivative,converged\n");
    for i in 0..sweep.s_grid.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_f64(sweep.s_grid[i]),
            fmt_f64(sweep.g_values[i]),
            fmt_f64(sweep.derivative[i]),
            sweep.converged[i]
        );
    }
    match &sweep.vertex {
        Some(v) => {
            let _ = writeln!(
                csv,
                "# vertex s={} index={} second_difference={} low_confidence={}",
                fmt_f64(v.s),
                v.index,
                fmt_f64(v.second_difference),
                v.low_confidence
            );
        }
        None => csv.push_str("# vertex none\n"),
    }
    csv
}

/// Writes [`sweep_csv_string`] to a file.
pub fn write_sweep_csv(sweep: &SweepResult, path: &Path) -> Result<(), Error> {
    fs::write(path, sweep_csv_string(sweep))?;
    Ok(())
}

/// Writes the discrepancy search trace: one (alpha, misfit) row per
/// evaluation and the selection verdict in a trailing comment.
pub fn write_morozov_csv(found: &MorozovResult, path: &Path) -> Result<(), Error> {
    let mut csv = String::from("alpha,misfit\n");
    for &(a, m) in &found.evaluations {
        let _ = writeln!(csv, "{a:.16e},{m:.16e}");
    }
    let _ = writeln!(
        csv,
        "# selected alpha={:.16e} misfit={:.16e} target={:.16e} in_band={} monotone={}",
        found.alpha, found.misfit, found.target, found.in_band, found.monotone
    );
    fs::write(path, csv)?;
    Ok(())
}

/// Writes a recovery report as pretty-printed JSON.
pub fn write_report_json(report: &RecoveryReport, path: &Path) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("report serialization: {e}")))?;
    fs::write(path, json + "\n")?;
    Ok(())
}
