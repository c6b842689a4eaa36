//! Output records: fixed-header CSV tables and per-criterion checks.

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};

/// Where a reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Paper,
    Derived,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Paper => "paper",
            Provenance::Derived => "derived",
        })
    }
}

/// Outcome of one tolerance check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub criterion: String,
    pub seed: u64,
    pub measured: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub provenance: Provenance,
    /// Heuristic checks are reported but never fail a run.
    pub heuristic: bool,
}

impl Check {
    pub fn new(
        criterion: impl Into<String>,
        seed: u64,
        measured: f64,
        reference: f64,
        tolerance: f64,
        pass: bool,
        provenance: Provenance,
    ) -> Self {
        Check {
            criterion: criterion.into(),
            seed,
            measured,
            reference,
            tolerance,
            pass,
            provenance,
            heuristic: false,
        }
    }

    pub fn heuristic(mut self) -> Self {
        self.heuristic = true;
        self
    }

    /// Whether this check should fail the run.
    pub fn blocking_failure(&self) -> bool {
        !self.pass && !self.heuristic
    }

    pub fn status(&self) -> &'static str {
        match (self.pass, self.heuristic) {
            (true, _) => "pass",
            (false, true) => "review",
            (false, false) => "fail",
        }
    }
}

/// Format a float so that identical values always print identically.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:e}")
    }
}

/// A CSV table with a fixed header; every row must match its width.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Table {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(&self.name);
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shorthand for building rows from heterogeneous cells.
#[macro_export]
macro_rules! row {
    ($($cell:expr),* $(,)?) => {
        vec![$($crate::record::Cell::cell(&$cell)),*]
    };
}

pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        fmt_f64(*self)
    }
}

impl Cell for usize {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for u64 {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for i64 {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for bool {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for &str {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

pub fn summary_table(checks: &[Check]) -> Table {
    let mut t = Table::new(
        "summary.csv",
        &[
            "criterion",
            "seed",
            "measured",
            "reference",
            "tolerance",
            "pass",
            "status",
            "provenance",
        ],
    );
    for c in checks {
        t.push(row![
            c.criterion.as_str(),
            c.seed,
            c.measured,
            c.reference,
            c.tolerance,
            c.pass,
            c.status(),
            c.provenance.to_string()
        ]);
    }
    t
}
