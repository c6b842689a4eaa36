//! Posterior rates: Π_t(N_{ε_t}) → 1 for N_ε = {θ : h(θ) ≤ h_min + ε}.

use crate::config::RateSchedule;
use crate::context::{EnsembleRun, Lab, Output};
use crate::record::{Check, Provenance, Table};
use crate::row;

pub fn evaluate(lab: &Lab, run: &EnsembleRun, schedule: &RateSchedule) -> Output {
    let times = run.times();
    let last = times.len() - 1;
    let mut table = Table::new(
        format!("rate_seed{}.csv", run.seed),
        &[
            "t",
            "epsilon_bits",
            "members_in_n",
            "mass",
            "log2_complement_mass_per_t",
            "neg_epsilon_bits",
            "h_min_bits",
            "h_min_gap_bits",
            "empty",
        ],
    );
    let gap = run.h_min - lab.cfg.h_inf;
    let mut terminal = (0.0, 0);
    for (j, &t) in times.iter().enumerate() {
        let eps = schedule.epsilon(t);
        let inside = run.mask(|i| run.h[i] <= run.h_min + eps);
        let outside: Vec<bool> = inside.iter().map(|b| !b).collect();
        let count = inside.iter().filter(|&&b| b).count();
        let mass = run.traj.log2_mass(j, &inside).exp2();
        let complement = run.traj.log2_mass(j, &outside) / t as f64;
        table.push(row![
            t,
            eps,
            count,
            mass,
            complement,
            -eps,
            run.h_min,
            gap,
            count == 0
        ]);
        if j == last {
            terminal = (mass, count);
        }
    }
    let (mass, count) = terminal;
    let threshold = lab.cfg.tol.rate_mass;
    let check = Check::new(
        "theorem6/terminal-mass",
        run.seed,
        mass,
        threshold,
        1.0 - threshold,
        count > 0 && mass >= threshold,
        Provenance::Derived,
    );
    Output {
        tables: vec![table],
        checks: vec![check],
    }
}
