//! CSV, JSON and gnuplot output of study results.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::study::{StudyReport, StudyRow};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Json,
}

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["eps", "err_lux", "err_l2", "err_corrector"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=k).map(|i| format!("pairing_gap_{i}")));
    h.extend(["energy", "iterations", "wall_ms"].iter().map(|s| s.to_string()));
    h
}

/// Rows as CSV text with `k` pairing columns.
pub fn rows_to_csv(rows: &[StudyRow], k: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(csv_header(k))?;
    for r in rows {
        if r.pairing_gap.len() != k {
            return Err(Error::Usage(format!("row at eps = {} has {} pairing gaps, expected {k}", r.eps, r.pairing_gap.len())));
        }
        let mut rec = vec![num(r.eps), num(r.err_lux), num(r.err_l2), num(r.err_corrector)];
        rec.extend(r.pairing_gap.iter().map(|v| num(*v)));
        rec.extend([num(r.energy), r.iterations.to_string(), r.wall_ms.to_string()]);
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn pairing_count(report: &StudyReport) -> usize {
    report.summary.pairing_limits.len()
}

/// Writes the report: CSV rows, or the JSON report with its manifest.
pub fn export(report: &StudyReport, format: ExportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match format {
        ExportFormat::Csv => write_file(path, &rows_to_csv(&report.rows, pairing_count(report))?),
        ExportFormat::Json => write_file(path, &(serde_json::to_string_pretty(report)? + "\n")),
    }
}

/// Reads a report written by [`export`] in JSON form.
pub fn read_report(path: impl AsRef<Path>) -> Result<StudyReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// One `eps value` file per error column in `dir`, skipping NaN entries.
pub fn export_gnuplot(report: &StudyReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut cols: Vec<(String, Vec<f64>)> = vec![
        ("err_lux".into(), report.rows.iter().map(|r| r.err_lux).collect()),
        ("err_l2".into(), report.rows.iter().map(|r| r.err_l2).collect()),
        ("err_corrector".into(), report.rows.iter().map(|r| r.err_corrector).collect()),
    ];
    for i in 0..pairing_count(report) {
        cols.push((format!("pairing_gap_{}", i + 1), report.rows.iter().map(|r| r.pairing_gap[i]).collect()));
    }
    for (name, vals) in cols {
        let mut s = format!("# eps {name}\n");
        for (r, v) in report.rows.iter().zip(vals) {
            if v.is_finite() {
                s.push_str(&format!("{} {}\n", num(r.eps), num(v)));
            }
        }
        write_file(&dir.join(format!("{name}.dat")), &s)?;
    }
    Ok(())
}

/// Writes every output configured in the study's `output` section.
pub fn write_outputs(report: &StudyReport) -> Result<()> {
    let out = &report.manifest.config.output;
    if let Some(p) = &out.csv {
        export(report, ExportFormat::Csv, p)?;
    }
    if let Some(p) = &out.json {
        export(report, ExportFormat::Json, p)?;
    }
    if let Some(d) = &out.gnuplot_dir {
        export_gnuplot(report, d)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eps: f64) -> StudyRow {
        StudyRow {
            eps,
            err_lux: 0.1 * eps,
            err_l2: 1.0 / 3.0 * eps,
            err_corrector: f64::NAN,
            pairing_gap: vec![eps * eps],
            energy: 0.125,
            iterations: 2,
            wall_ms: 0,
            energy_gap: 1e-17,
            residual_norm: 1e-15,
            solution_norm: 0.3,
            failed: None,
        }
    }

    #[test]
    fn header_only_and_one_row() {
        assert_eq!(
            rows_to_csv(&[], 2).unwrap(),
            "eps,err_lux,err_l2,err_corrector,pairing_gap_1,pairing_gap_2,energy,iterations,wall_ms\n"
        );
        let s = rows_to_csv(&[row(0.25)], 1).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').next().unwrap(), "2.5000000000000000e-1");
        assert!(lines[1].contains("NaN"));
        assert!(lines[1].contains("8.3333333333333329e-2"));
    }

    #[test]
    fn rows_round_trip_through_json() {
        let rows = vec![row(0.5), row(0.25)];
        let text = serde_json::to_string(&rows).unwrap();
        assert!(text.contains("\"err_corrector\":null"));
        let back: Vec<StudyRow> = serde_json::from_str(&text).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert!(b.err_corrector.is_nan());
            let (mut a, mut b) = (a.clone(), b.clone());
            a.err_corrector = 0.0;
            b.err_corrector = 0.0;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn io_errors_carry_the_path() {
        let rows = [row(0.5)];
        let e = write_file(Path::new("/proc/forbidden/x.csv"), &rows_to_csv(&rows, 1).unwrap()).unwrap_err();
        assert!(e.to_string().contains("/proc/forbidden"), "{e}");
    }
}
