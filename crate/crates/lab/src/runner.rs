//! Run driver: replicate seeds in parallel, protocols per seed, serialized
//! CSV output and the closed-form reference audit.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use rayon::prelude::*;

use sofic_bayes::hypothesis::SourceSummary;

use crate::config::Protocol;
use crate::context::{EnsembleRun, Lab, Output};
use crate::protocols::{concentration, density, diversity, exact, ldp, predictive, rate, sieve};
use crate::record::{summary_table, Check, Provenance, Table};

/// Which protocols a theorem selector enables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Selection {
    pub density: bool,
    pub concentration: bool,
    pub ldp: bool,
    pub predictive: bool,
    pub rate: bool,
    pub sieve: bool,
    pub diversity: bool,
    pub exact: bool,
}

impl Selection {
    pub fn of(protocol: Protocol) -> Self {
        let none = Selection::default();
        match protocol {
            Protocol::Theorem(1 | 2) => Selection {
                density: true,
                ..none
            },
            Protocol::Theorem(3) => Selection {
                concentration: true,
                ..none
            },
            Protocol::Theorem(4) => Selection { ldp: true, ..none },
            Protocol::Theorem(5) => Selection {
                predictive: true,
                ..none
            },
            Protocol::Theorem(_) => Selection { rate: true, ..none },
            Protocol::Sieve => Selection {
                sieve: true,
                ..none
            },
            Protocol::Diversity => Selection {
                diversity: true,
                ..none
            },
            Protocol::Exact => Selection {
                exact: true,
                ..none
            },
            Protocol::All => Selection {
                density: true,
                concentration: true,
                ldp: true,
                predictive: true,
                rate: true,
                sieve: true,
                diversity: true,
                exact: true,
            },
        }
    }

    pub fn needs_ensemble(&self) -> bool {
        self.density || self.concentration || self.ldp || self.rate
    }
}

/// All protocols selected for one replicate seed.
pub fn run_seed(lab: &Lab, seed: u64, sel: Selection) -> Result<Output> {
    let mut out = Output::default();
    if sel.needs_ensemble() {
        let run = EnsembleRun::build(lab, seed, lab.cfg.members);
        if sel.density {
            out.extend(density::evaluate(lab, &run));
        }
        if sel.concentration {
            out.extend(concentration::evaluate(lab, &run));
        }
        if sel.ldp {
            out.extend(ldp::evaluate(lab, &run));
        }
        if sel.rate {
            let schedule = lab.cfg.rate_schedule().map_err(anyhow::Error::msg)?;
            out.extend(rate::evaluate(lab, &run, &schedule));
        }
    }
    if sel.predictive {
        out.extend(predictive::run(lab, seed));
    }
    if sel.sieve {
        out.extend(sieve::run(lab, seed));
    }
    if sel.diversity {
        out.extend(diversity::run(lab, seed));
    }
    if sel.exact {
        out.extend(exact::run(lab, seed));
    }
    Ok(out)
}

/// Largest |stored − recomputed| over closed-form reference cells, here
/// the fair-coin divergence 1 − h_P in the density tables.
pub fn audit_closed_form(lab: &Lab, tables: &[Table]) -> f64 {
    let fresh = SourceSummary::new(lab.source());
    let expected = 1.0 - fresh.entropy_rate();
    let mut worst = 0.0f64;
    for table in tables
        .iter()
        .filter(|t| t.name.starts_with("density_growth"))
    {
        let col = |name: &str| {
            table
                .header
                .iter()
                .position(|h| *h == name)
                .expect("column")
        };
        let (probe, h) = (col("probe"), col("h_probe_bits"));
        for row in table.rows.iter().filter(|r| r[probe] == "fair_coin") {
            let stored: f64 = row[h].parse().unwrap_or(f64::NAN);
            let err = (stored - expected).abs();
            worst = if err.is_nan() {
                f64::INFINITY
            } else {
                worst.max(err)
            };
        }
    }
    worst
}

pub struct Report {
    pub dir: PathBuf,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| c.blocking_failure())
            .collect()
    }
}

/// Runs every replicate, then writes the config echo, all tables and the
/// summary into the output directory.
pub fn run(lab: &Lab) -> Result<Report> {
    let sel = Selection::of(lab.cfg.protocol);
    let outputs: Vec<Output> = lab
        .seeds()
        .into_par_iter()
        .map(|seed| run_seed(lab, seed, sel))
        .collect::<Result<_>>()?;
    let mut all = Output::default();
    for o in outputs {
        all.extend(o);
    }
    if sel.density {
        let err = audit_closed_form(lab, &all.tables);
        all.checks.push(Check::new(
            "audit/closed-form-references",
            lab.cfg.seed,
            err,
            0.0,
            1e-12,
            err <= 1e-12,
            Provenance::ClosedForm,
        ));
    }
    let dir = lab.cfg.output.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.txt"), lab.cfg.to_text())
        .with_context(|| format!("writing {}", dir.join("config.txt").display()))?;
    for table in &all.tables {
        table.write(&dir)?;
    }
    summary_table(&all.checks).write(&dir)?;
    Ok(Report {
        dir,
        checks: all.checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn selections() {
        assert!(Selection::of(Protocol::Theorem(1)).density);
        assert_eq!(
            Selection::of(Protocol::Theorem(2)),
            Selection::of(Protocol::Theorem(1))
        );
        assert!(!Selection::of(Protocol::Theorem(5)).needs_ensemble());
        assert!(Selection::of(Protocol::All).exact);
    }

    #[test]
    fn density_run_passes_audit() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.horizon = 200;
        cfg.members = 50;
        cfg.protocol = Protocol::Theorem(1);
        cfg.output = dir.path().to_path_buf();
        let lab = Lab::new(cfg).unwrap();
        let report = run(&lab).unwrap();
        let audit = report
            .checks
            .iter()
            .find(|c| c.criterion == "audit/closed-form-references")
            .unwrap();
        assert!(audit.pass, "{audit:?}");
        assert!(dir.path().join("summary.csv").exists());
        assert!(dir.path().join("config.txt").exists());
        assert!(dir.path().join("density_growth_seed1.csv").exists());
    }
}
