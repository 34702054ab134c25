//! Writes oracle reports: one summary text file plus one CSV per property.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mblbfgs_core::verification::OracleReport;

use crate::error::{CliError, Result};

pub const SUMMARY: &str = "summary.txt";

/// One line per report, then its notes indented beneath it.
pub fn summary_text(reports: &[OracleReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(
            out,
            "{} {}: trials {}, max violation {:e}, failing seeds {:?}",
            if r.passed { "PASS" } else { "FAIL" },
            r.property,
            r.trials,
            r.max_violation,
            r.failing_seeds
        );
        for n in &r.notes {
            let _ = writeln!(out, "    {n}");
        }
    }
    out
}

/// Writes `summary.txt` and `<property>.csv` for each report into `dir`.
pub fn write_reports(dir: &Path, reports: &[OracleReport]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    let summary = dir.join(SUMMARY);
    fs::write(&summary, summary_text(reports)).map_err(|e| CliError::write(&summary, e))?;
    for r in reports {
        let path = dir.join(format!("{}.csv", r.property));
        let io = |e: csv::Error| CliError::write(&path, std::io::Error::other(e));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(&r.table.columns).map_err(io)?;
        for row in &r.table.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::write(&path, e))?;
    }
    Ok(())
}
