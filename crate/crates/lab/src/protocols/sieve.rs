//! Sieve behaviour: monotone G_t, min-h over G_t, last-entry sweep, prior
//! tail decay, empirical blocks and the uniform-convergence profile.

use sofic_bayes::sieve::{
    empirical_block_dist, last_entry_sweep, prior_tail_mass, sieve_membership, tail_decay_fit,
    uniform_convergence_profile, SieveSchedule, SweepPoint,
};
use sofic_bayes::{draw_prior_ensemble, MarkovHypothesis, PriorSpec};

use crate::context::{checkpoints, derive_seed, stream, Lab, Output};
use crate::record::{Check, Provenance, Table};
use crate::row;

/// Monte Carlo draws for the within-order z-violation mass.
pub const TAIL_DRAWS: usize = 1000;
const BLOCK_K: usize = 3;

/// Doubly-exponential order prior with rate h_P + ε.
pub fn sieve_prior(lab: &Lab) -> PriorSpec {
    PriorSpec::doubly_exponential(
        lab.cfg.sieve_prior_c,
        lab.h_p + lab.cfg.sieve_epsilon,
        None,
        lab.cfg.prior_alpha,
    )
    .expect("validated parameters")
}

/// Untruncated geometric order prior, kept for contrast.
pub fn geometric_contrast_prior(lab: &Lab) -> PriorSpec {
    PriorSpec::geometric(lab.cfg.prior_lambda, None, lab.cfg.prior_alpha)
        .expect("validated parameters")
}

/// Probe times for the last-entry sweep: up to T/10, so the horizon is
/// at least ten times the largest probe.
pub fn sweep_probes(horizon: usize) -> Vec<usize> {
    checkpoints(horizon / 10)
}

/// Smallest probe time from which on no violation occurs, or `None` when
/// the final probe is itself violated.
pub fn violation_free_from(points: &[SweepPoint]) -> Option<usize> {
    match points.iter().rposition(|p| p.violation) {
        None => points.first().map(|p| p.t),
        Some(i) => points.get(i + 1).map(|p| p.t),
    }
}

/// Number of (member, t) pairs, t = 1..=T, whose membership disagrees with
/// "t at or after the entry time", plus any in-then-out transitions.
pub fn monotonicity_violations(
    members: &[MarkovHypothesis],
    sched: &SieveSchedule,
    horizon: usize,
) -> usize {
    members
        .iter()
        .map(|m| {
            let entry = sched.entry_time(m);
            let mut was_in = false;
            let mut bad = 0;
            for t in 1..=horizon {
                let inside = sieve_membership(m, t, sched);
                bad += usize::from(inside != (t >= entry)) + usize::from(was_in && !inside);
                was_in = inside;
            }
            bad
        })
        .sum()
}

pub fn run(lab: &Lab, seed: u64) -> Output {
    let sched = &lab.sched;
    let horizon = lab.cfg.horizon;
    let path = lab.path(seed);
    let m = lab.cfg.sieve_members;
    let prior = sieve_prior(lab);
    let ensemble = draw_prior_ensemble(&prior, m, derive_seed(seed, stream::SIEVE));
    let members = ensemble.members();
    let h: Vec<f64> = members.iter().map(|t| lab.divergence(t, &path)).collect();
    let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
    let entry: Vec<usize> = members.iter().map(|t| sched.entry_time(t)).collect();

    let rows_at = checkpoints(horizon);
    let min_h_series: Vec<f64> = rows_at
        .iter()
        .map(|&t| {
            members
                .iter()
                .zip(&h)
                .filter(|(theta, _)| sieve_membership(theta, t, sched))
                .map(|(_, &v)| v)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let min_h_increases = min_h_series.windows(2).filter(|w| w[1] > w[0]).count();
    let final_min_h = *min_h_series.last().expect("non-empty grid");

    let probes = sweep_probes(horizon);
    let sweep = last_entry_sweep(
        members,
        m,
        sched,
        &path,
        lab.source(),
        &probes,
        lab.cfg.delta,
    );
    let t0 = violation_free_from(&sweep);

    let in_g = |t: usize| entry.iter().filter(|&&e| e <= t).count();
    let profile_times: Vec<usize> = rows_at.iter().copied().filter(|&t| in_g(t) > 0).collect();
    let profile = uniform_convergence_profile(
        members,
        &h,
        &path,
        lab.source(),
        &profile_times,
        Some(sched),
    )
    .unwrap_or_default();

    let mut table = Table::new(
        format!("sieve_seed{seed}.csv"),
        &[
            "t",
            "k_t",
            "z_t",
            "members_in_g",
            "min_h_in_g_bits",
            "h_min_bits",
            "log2_order_tail",
            "tau_hat",
            "violation",
            "uniform_deviation_bits",
            "block_tv_k3",
        ],
    );
    for (j, &t) in rows_at.iter().enumerate() {
        let sweep_cell = sweep.iter().find(|p| p.t == t);
        let deviation = profile
            .iter()
            .find(|p| p.t == t)
            .map_or(f64::NAN, |p| p.deviation);
        let tv = if t >= BLOCK_K {
            let emp = empirical_block_dist(&path[..t], BLOCK_K).expect("t ≥ k");
            emp.total_variation(lab.summary.blocks(BLOCK_K).expect("k in range"))
        } else {
            f64::NAN
        };
        table.push(row![
            t,
            sched.k(t),
            sched.z(t),
            in_g(t),
            min_h_series[j],
            h_min,
            prior.log2_order_tail(sched.k(t).max(0) as usize),
            sweep_cell.map_or(String::new(), |p| p.tau_hat.to_string()),
            sweep_cell.map_or(String::new(), |p| p.violation.to_string()),
            deviation,
            tv
        ]);
    }

    let tail_times: Vec<usize> = checkpoints(horizon)
        .into_iter()
        .filter(|t| t.is_power_of_two() && *t >= 16 || *t == horizon)
        .collect();
    let geometric = geometric_contrast_prior(lab);
    let mut tail = Table::new(
        format!("sieve_tail_seed{seed}.csv"),
        &[
            "t",
            "prior",
            "k_t",
            "log2_order_tail",
            "z_violation_mass",
            "total_tail_mass",
            "log2_bound",
            "order_tail_within_bound",
        ],
    );
    for (name, p) in [("doubly_exponential", &prior), ("geometric", &geometric)] {
        for &t in &tail_times {
            let tm = prior_tail_mass(p, sched, t, TAIL_DRAWS, derive_seed(seed, stream::TAIL));
            tail.push(row![
                t,
                name,
                tm.k_t,
                tm.log2_order_tail,
                tm.z_violation,
                tm.total,
                tm.log2_bound,
                tm.order_tail_within_bound
            ]);
        }
    }
    let fit_doubly = tail_decay_fit(&prior, sched, &tail_times);
    let fit_geometric = tail_decay_fit(&geometric, sched, &tail_times);

    let monotone = monotonicity_violations(members, sched, horizon);
    let last_probe = probes.last().copied().unwrap_or(0);
    let checks = vec![
        Check::new(
            "sieve/membership-monotone",
            seed,
            monotone as f64,
            0.0,
            0.0,
            monotone == 0,
            Provenance::ClosedForm,
        ),
        Check::new(
            "sieve/min-h-to-ensemble-minimum",
            seed,
            final_min_h,
            h_min,
            0.0,
            min_h_increases == 0 && final_min_h == h_min,
            Provenance::Derived,
        ),
        Check::new(
            "sieve/last-entry-t0",
            seed,
            t0.map_or(f64::INFINITY, |t| t as f64),
            last_probe as f64,
            0.0,
            t0.is_some(),
            Provenance::Derived,
        ),
        Check::new(
            "sieve/geometric-tail-flagged",
            seed,
            fit_geometric.fitted_beta,
            sched.tail_beta,
            0.0,
            !fit_geometric.meets_exponential_target,
            Provenance::Derived,
        ),
        Check::new(
            "sieve/doubly-exponential-order-tail",
            seed,
            fit_doubly.fitted_beta,
            sched.tail_beta,
            0.0,
            fit_doubly.meets_exponential_target,
            Provenance::Derived,
        ),
    ];
    Output {
        tables: vec![table, tail],
        checks,
    }
}
