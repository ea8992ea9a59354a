//! Report files: deterministic names, atomic writes, JSON/CSV/SVG/text.

use std::hash::Hasher;
use std::io::Write;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use serde::Serialize;
use thiserror::Error;

use crate::config::{OutputFormat, RunConfig};
use crate::diagnostics::DiagnosticsReport;
use crate::experiments::{ExampleReport, VerdictMatrix};
use crate::plot::{render_plot, PlotData, PlotKind, PlotSpec};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),
}

/// FNV-1a (64 bit) of the canonical expression text, as 16 hex digits.
pub fn expression_hash(text: &str) -> String {
    let mut h = FnvHasher::default();
    h.write(text.as_bytes());
    format!("{:016x}", h.finish())
}

/// File stem `{command}-{hash}-{seed}`.
pub fn report_stem(command: &str, expression: &str, base_seed: u64) -> String {
    format!("{command}-{}-{base_seed}", expression_hash(expression))
}

pub enum Report<'a> {
    Diagnostics(&'a DiagnosticsReport),
    Table(&'a VerdictMatrix),
    Example(&'a ExampleReport),
}

impl Report<'_> {
    fn expression(&self) -> String {
        match self {
            Report::Diagnostics(r) => r.expression.clone(),
            Report::Table(t) => format!("table(r={})", t.logistic_r),
            Report::Example(e) => format!("{}:{}", e.example, e.expression),
        }
    }

    fn json(&self) -> Result<String, serde_json::Error> {
        fn pretty<T: Serialize>(v: &T) -> Result<String, serde_json::Error> {
            let mut s = serde_json::to_string_pretty(v)?;
            s.push('\n');
            Ok(s)
        }
        match self {
            Report::Diagnostics(r) => pretty(r),
            Report::Table(t) => pretty(t),
            Report::Example(e) => pretty(e),
        }
    }

    fn csv(&self) -> String {
        match self {
            Report::Diagnostics(r) => {
                histogram_csv(&r.histogram, r.config.seeds * r.config.iterates)
            }
            Report::Table(t) => {
                let mut out = String::from("f,g,verdict,expected,matches,lyapunov,coverage\n");
                for c in &t.cells {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        c.pair.0.name(),
                        c.pair.1.name(),
                        c.verdict,
                        c.expected,
                        c.matches,
                        c.lyapunov,
                        c.coverage
                    ));
                }
                out
            }
            Report::Example(e) => {
                let mut out = String::from("check,status,expected,observed\n");
                for c in &e.checks {
                    out.push_str(&format!(
                        "\"{}\",{:?},\"{}\",\"{}\"\n",
                        c.name, c.status, c.expected, c.observed
                    ));
                }
                out
            }
        }
    }

    fn text(&self) -> Option<String> {
        match self {
            Report::Diagnostics(_) => None,
            Report::Table(t) => Some(t.to_string()),
            Report::Example(e) => Some(format!("{e}\n")),
        }
    }

    fn svg(&self) -> Option<String> {
        match self {
            Report::Diagnostics(r) => Some(render_plot(
                &PlotSpec::new(PlotKind::Histogram, &r.expression),
                &PlotData::Histogram(r.histogram.clone()),
            )),
            _ => None,
        }
    }
}

/// Histogram rows `x,count,density` with `x` the bin centre.
pub fn histogram_csv(densities: &[f64], total: usize) -> String {
    let bins = densities.len();
    let mut out = String::from("x,count,density\n");
    for (i, d) in densities.iter().enumerate() {
        let x = (i as f64 + 0.5) / bins as f64;
        let count = (d * total as f64).round() as u64;
        out.push_str(&format!("{x},{count},{d}\n"));
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes the report in every configured format; returns the paths written.
pub fn write_report(
    report: &Report,
    command: &str,
    config: &RunConfig,
) -> Result<Vec<PathBuf>, ReportError> {
    let stem = report_stem(command, &report.expression(), config.base_seed);
    let mut written = Vec::new();
    let mut emit = |ext: &str, body: String| -> Result<(), ReportError> {
        let path = config.output_dir.join(format!("{stem}.{ext}"));
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };
    for format in &config.formats {
        match format {
            OutputFormat::Json => emit("json", report.json()?)?,
            OutputFormat::Csv => emit("csv", report.csv())?,
            OutputFormat::Svg => {
                if let Some(svg) = report.svg() {
                    emit("svg", svg)?;
                }
            }
        }
    }
    if let Some(text) = report.text() {
        emit("txt", text)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(expression_hash(""), "cbf29ce484222325");
        assert_eq!(expression_hash("a"), "af63dc4c8601ec8c");
        assert_eq!(
            report_stem("diagnose", "", 7),
            "diagnose-cbf29ce484222325-7"
        );
    }

    #[test]
    fn csv_mass() {
        let csv = histogram_csv(&[0.25, 0.75], 4);
        assert_eq!(csv, "x,count,density\n0.25,1,0.25\n0.75,3,0.75\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/r.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(
            std::fs::read_dir(path.parent().unwrap()).unwrap().count(),
            1
        );
    }
}
