//! CSV and text outputs. Floats are written with 17 significant digits.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::metrics::{CampaignSummary, MetricsRecord};
use crate::harness::runner::RunOutcome;
use crate::harness::spectrum::Spectrum;
use crate::sensitivity::SensitivityModel;

pub const TRAJECTORY_HEADER: &str = "t,r,u,d,u_tilde,y_tilde,delta,e";
pub const METRICS_HEADER: &str = "t,mean_abs_delta,mse,violation_rate,mean_d,var_d";
pub const SPECTRUM_HEADER: &str = "freq_hz,power,yd_max";

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn row(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

pub fn write_trajectory(path: &Path, run: &RunOutcome) -> Result<()> {
    let lines = std::iter::once(TRAJECTORY_HEADER.to_string()).chain(run.steps.iter().map(|s| {
        format!(
            "{},{}",
            s.t,
            row(&[s.r, s.u, s.d, s.u_tilde, s.y_tilde, s.delta, s.e])
        )
    }));
    write_lines(path, lines)
}

pub fn write_metrics(path: &Path, metrics: &MetricsRecord) -> Result<()> {
    let lines = std::iter::once(METRICS_HEADER.to_string()).chain(metrics.rows.iter().map(|r| {
        format!(
            "{},{}",
            r.t,
            row(&[r.mean_abs_delta, r.mse, r.violation_rate, r.mean_d, r.var_d])
        )
    }));
    write_lines(path, lines)
}

pub fn write_summary(path: &Path, summaries: &[CampaignSummary]) -> Result<()> {
    let text: Vec<String> = summaries.iter().map(|s| s.to_text()).collect();
    write_lines(path, std::iter::once(text.join("\n")))
}

/// Appends every `(label, spectrum)` pair to one long-format table.
pub fn write_spectra(path: &Path, spectra: &[(String, Spectrum)]) -> Result<()> {
    let lines = std::iter::once(SPECTRUM_HEADER.to_string()).chain(spectra.iter().flat_map(
        |(label, s)| {
            s.freq_hz
                .iter()
                .zip(&s.power)
                .map(move |(f, p)| format!("{},{label}", row(&[*f, *p])))
        },
    ));
    write_lines(path, lines)
}

pub fn sensitivity_csv(s: &SensitivityModel) -> String {
    let mut out = String::from("kind,index,value\n");
    for (i, c) in s.a_tilde().coeffs().iter().enumerate() {
        out.push_str(&format!("a_tilde,{i},{}\n", fmt_f64(*c)));
    }
    for (i, c) in s.b_tilde().coeffs().iter().enumerate() {
        out.push_str(&format!("b_tilde,{i},{}\n", fmt_f64(*c)));
    }
    for (i, g) in s.impulse().iter().enumerate() {
        out.push_str(&format!("g,{},{}\n", i + 1, fmt_f64(*g)));
    }
    out.push_str(&format!("stable,0,{}\n", s.is_stable()));
    out
}

/// Reads one named column of a CSV file with a header row.
pub fn read_csv_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is empty", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let idx = header
        .split(',')
        .position(|h| h.trim() == column)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("column {column:?} not in {}", path.display()))
        })?;
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let field = line.split(',').nth(idx).ok_or_else(|| {
            Error::InvalidArgument(format!("row {} of {} is short", n + 2, path.display()))
        })?;
        out.push(field.trim().parse::<f64>().map_err(|_| {
            Error::InvalidArgument(format!(
                "row {} of {}: {field:?} is not a number",
                n + 2,
                path.display()
            ))
        })?);
    }
    Ok(out)
}
