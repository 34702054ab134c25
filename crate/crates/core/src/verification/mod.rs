//! Oracles and behavior checks.
//!
//! Each check returns an [`OracleReport`]. Trials are seeded
//! deterministically from the caller's seeds, so any failure can be replayed
//! from the seeds recorded in the report.

mod checks;
pub mod oracles;

pub use checks::*;

use alloc::string::String;
use alloc::vec::Vec;

/// Numeric table attached to a report (written out as CSV by the CLI crate).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| String::from(*c)).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub property: String,
    pub trials: usize,
    /// Largest deviation from the property, in the property's own units.
    pub max_violation: f64,
    pub passed: bool,
    /// Seeds that reproduce a failure.
    pub failing_seeds: Vec<u64>,
    pub notes: Vec<String>,
    pub table: Table,
}

impl OracleReport {
    fn new(property: &str, table: Table) -> Self {
        OracleReport {
            property: String::from(property),
            trials: 0,
            max_violation: 0.0,
            passed: true,
            failing_seeds: Vec::new(),
            notes: Vec::new(),
            table,
        }
    }

    fn violation(&mut self, amount: f64) {
        if amount > self.max_violation || amount.is_nan() {
            self.max_violation = amount;
        }
    }

    fn fail(&mut self, seed: u64) {
        self.passed = false;
        if !self.failing_seeds.contains(&seed) {
            self.failing_seeds.push(seed);
        }
    }

    fn fail_all(&mut self, seeds: &[u64]) {
        for &s in seeds {
            self.fail(s);
        }
    }

    fn note(&mut self, text: String) {
        self.notes.push(text);
    }
}
