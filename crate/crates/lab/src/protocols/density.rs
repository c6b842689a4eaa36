//! Density growth: (1/t)·log₂[R_t(θ)/⟨R_t⟩] against −(h(θ) − h_min).

use sofic_bayes::hypothesis::DEFAULT_FLOOR;
use sofic_bayes::{optimal_in_order, MarkovHypothesis};

use crate::context::{EnsembleRun, Lab, Output};
use crate::record::{Check, Provenance, Table};
use crate::row;

/// Upper-bound checks start at this time (or at T, if shorter).
pub const UPPER_BOUND_FROM: usize = 1000;

pub struct Probe {
    pub name: String,
    pub theta: MarkovHypothesis,
}

/// Default probes: the fair coin, the projected minimisers of orders 0-2
/// and the ensemble's best member.
pub fn default_probes(lab: &Lab, run: &EnsembleRun) -> Vec<Probe> {
    let mut probes = vec![Probe {
        name: "fair_coin".into(),
        theta: MarkovHypothesis::fair_coin(),
    }];
    for k in 0..=2 {
        if let Ok(theta) = optimal_in_order(k, lab.source(), DEFAULT_FLOOR) {
            probes.push(Probe {
                name: format!("optimal_order_{k}"),
                theta,
            });
        }
    }
    probes.push(Probe {
        name: "best_member".into(),
        theta: run.members[run.best].clone(),
    });
    probes
}

pub fn evaluate(lab: &Lab, run: &EnsembleRun) -> Output {
    let tol = &lab.cfg.tol;
    let times = run.times();
    let last = times.len() - 1;
    let from = UPPER_BOUND_FROM.min(run.horizon());
    let mut table = Table::new(
        format!("density_growth_seed{}.csv", run.seed),
        &[
            "t",
            "probe",
            "rate_bits",
            "reference_bits",
            "h_probe_bits",
            "h_min_bits",
            "h_min_gap_bits",
            "pass",
        ],
    );
    let gap = run.h_min - lab.cfg.h_inf;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut finals = Vec::new();
    for probe in default_probes(lab, run) {
        let h = lab.divergence(&probe.theta, &run.path);
        let reference = -(h - run.h_min);
        let ll = probe.theta.log_likelihood_at(&run.path, times);
        for (j, &t) in times.iter().enumerate() {
            let rate = (ll[j] - run.traj.log2_mean(j)) / t as f64;
            let excess = rate - reference;
            let checked = t >= from;
            if checked {
                worst_excess = worst_excess.max(excess);
            }
            let pass = !checked || excess <= tol.density;
            table.push(row![
                t,
                probe.name.as_str(),
                rate,
                reference,
                h,
                run.h_min,
                gap,
                pass
            ]);
            if j == last {
                finals.push((probe.name.clone(), rate, reference));
            }
        }
    }
    let mut checks = Vec::new();
    for (name, rate, reference) in &finals {
        let (label, tolerance) = match name.as_str() {
            "fair_coin" => ("theorem2/fair-coin-limit", tol.density),
            "best_member" => ("theorem2/best-member-limit", tol.density_best),
            _ => continue,
        };
        checks.push(Check::new(
            label,
            run.seed,
            *rate,
            *reference,
            tolerance,
            (rate - reference).abs() <= tolerance,
            Provenance::Derived,
        ));
    }
    checks.push(Check::new(
        "theorem1/upper-bound",
        run.seed,
        worst_excess,
        0.0,
        tol.density,
        worst_excess <= tol.density,
        Provenance::Derived,
    ));
    Output {
        tables: vec![table],
        checks,
    }
}
