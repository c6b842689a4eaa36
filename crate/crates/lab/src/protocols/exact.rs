//! Exact desk-scale oracles: source exactness, support law, normalisation,
//! divergence against the relative AEP, and Bayes against replicator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sofic_bayes::hypothesis::aep_on_path;
use sofic_bayes::process::path_log_prob_trajectory;
use sofic_bayes::symbols::index_block;
use sofic_bayes::{
    draw_prior_ensemble, entropy_rate, path_log_prob, sample_path, HiddenMarkovSource,
    MarkovHypothesis, PriorSpec,
};

use crate::config::SourceChoice;
use crate::context::{derive_seed, stream, Lab, Output};
use crate::record::{Check, Provenance, Table};
use crate::row;

pub const NORMALISATION_MAX_T: usize = 12;
pub const SUPPORT_MAX_T: usize = 14;
pub const AEP_HYPOTHESES: usize = 100;
pub const AEP_LENGTH: usize = 100_000;
pub const AEP_TOLERANCE: f64 = 0.02;
pub const AEP_MAX_ORDER: usize = 6;

/// Largest |Σ_x 2^{log₂ f(x)} − 1| over lengths 1..=`max_t`.
pub fn normalisation_error(max_t: usize, log_prob: impl Fn(&[u8]) -> f64) -> f64 {
    (1..=max_t)
        .map(|t| {
            let total: f64 = (0..1usize << t)
                .map(|i| log_prob(&index_block(i, t)).exp2())
                .sum();
            (total - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Even-process support law: a maximal block of 1s bounded by 0s on both
/// sides must have even length.
pub fn violates_even_support(x: &[u8]) -> bool {
    let mut run = 0usize;
    let mut opened = false;
    for &a in x {
        if a == 1 {
            run += 1;
        } else {
            if opened && run % 2 == 1 {
                return true;
            }
            opened = true;
            run = 0;
        }
    }
    false
}

/// Number of sequences of length ≤ `max_t` whose zero-probability status
/// disagrees with the support law.
pub fn support_law_mismatches(source: &HiddenMarkovSource, max_t: usize) -> usize {
    (1..=max_t)
        .map(|t| {
            (0..1usize << t)
                .filter(|&i| {
                    let x = index_block(i, t);
                    let impossible = path_log_prob(source, &x) == f64::NEG_INFINITY;
                    impossible != violates_even_support(&x)
                })
                .count()
        })
        .sum()
}

/// Per-hypothesis |AEP estimate − h| on one shared path of the replicate.
pub fn aep_gaps(lab: &Lab, seed: u64, count: usize, length: usize) -> Vec<f64> {
    let prior = PriorSpec {
        max_order: Some(
            lab.prior
                .max_order
                .map_or(AEP_MAX_ORDER, |k| k.min(AEP_MAX_ORDER)),
        ),
        ..lab.prior.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::HYPOTHESES));
    let hyps: Vec<MarkovHypothesis> = (0..count).map(|_| prior.sample(&mut rng)).collect();
    let path = sample_path(lab.source(), length, derive_seed(seed, stream::PATH));
    let logp = *path_log_prob_trajectory(lab.source(), &path)
        .last()
        .expect("non-empty");
    hyps.iter()
        .map(|theta| {
            let h = lab.summary.divergence(theta).expect("order ≤ 6");
            let aep = -(theta.log_likelihood(&path) - logp) / length as f64;
            debug_assert!((aep - aep_on_path(theta, lab.source(), &path)).abs() < 1e-9);
            (aep - h).abs()
        })
        .collect()
}

/// Largest |w_update − w_replicator| over all steps and members.
pub fn bayes_replicator_gap(lab: &Lab, seed: u64, m: usize, horizon: usize) -> f64 {
    let path = sample_path(lab.source(), horizon, derive_seed(seed, stream::PATH));
    let mut bayes = draw_prior_ensemble(&lab.prior, m, derive_seed(seed, stream::ENSEMBLE));
    let mut replicator = bayes.clone();
    let mut worst = 0.0f64;
    for &a in &path {
        let fitness = replicator.likelihoods(a);
        replicator
            .replicator_step(&fitness)
            .expect("positive fitness");
        replicator.advance_history(a);
        bayes.update(a);
        for (x, y) in bayes.weights().iter().zip(replicator.weights()) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

pub fn run(lab: &Lab, seed: u64) -> Output {
    let source = lab.source();
    let mut checks = Vec::new();
    let pi = source.stationary();
    let stationarity: f64 = (0..pi.len())
        .map(|j| {
            let flow: f64 = (0..pi.len()).map(|i| pi[i] * source.transition(i, j)).sum();
            (flow - pi[j]).abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "exact/stationarity",
        seed,
        stationarity,
        0.0,
        1e-12,
        stationarity <= 1e-12,
        Provenance::ClosedForm,
    ));
    if lab.cfg.source == SourceChoice::Even {
        let err = (pi[0] - 1.0 / 3.0).abs().max((pi[1] - 2.0 / 3.0).abs());
        checks.push(Check::new(
            "exact/even-stationary",
            seed,
            err,
            0.0,
            1e-12,
            err <= 1e-12,
            Provenance::Paper,
        ));
        let mismatches = support_law_mismatches(source, SUPPORT_MAX_T);
        checks.push(Check::new(
            "exact/support-law",
            seed,
            mismatches as f64,
            0.0,
            0.0,
            mismatches == 0,
            Provenance::Paper,
        ));
    }
    let rate = entropy_rate(source);
    let h12 = *rate.block_estimates.last().expect("block estimates");
    checks.push(Check::new(
        "exact/block-entropy-h12",
        seed,
        h12,
        rate.value(),
        0.02,
        (h12 - rate.value()).abs() <= 0.02,
        Provenance::Derived,
    ));
    let source_norm = normalisation_error(NORMALISATION_MAX_T, |x| path_log_prob(source, x));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::HYPOTHESES));
    let hyp_norm = (0..10)
        .map(|_| {
            let theta = lab.prior.sample(&mut rng);
            normalisation_error(NORMALISATION_MAX_T, |x| theta.log_likelihood(x))
        })
        .fold(source_norm, f64::max);
    checks.push(Check::new(
        "exact/normalisation",
        seed,
        hyp_norm,
        0.0,
        1e-9,
        hyp_norm <= 1e-9,
        Provenance::ClosedForm,
    ));
    let gaps = aep_gaps(lab, seed, AEP_HYPOTHESES, AEP_LENGTH);
    let within = gaps.iter().filter(|&&g| g <= AEP_TOLERANCE).count();
    checks.push(Check::new(
        "exact/aep-vs-divergence",
        seed,
        within as f64,
        0.95 * AEP_HYPOTHESES as f64,
        AEP_TOLERANCE,
        within * 100 >= 95 * AEP_HYPOTHESES,
        Provenance::Derived,
    ));
    let m = lab.cfg.members.min(1000);
    let horizon = lab.cfg.horizon.min(1000);
    let gap = bayes_replicator_gap(lab, seed, m, horizon);
    checks.push(Check::new(
        "exact/bayes-replicator",
        seed,
        gap,
        0.0,
        1e-15,
        gap <= 1e-15,
        Provenance::Paper,
    ));
    let mut table = Table::new(
        format!("aep_seed{seed}.csv"),
        &["hypothesis", "abs_gap_bits", "pass"],
    );
    for (i, g) in gaps.iter().enumerate() {
        table.push(row![i, *g, *g <= AEP_TOLERANCE]);
    }
    Output {
        tables: vec![table],
        checks,
    }
}
