//! Growing sets G_t of well-behaved hypotheses and the diagnostics built
//! on them.
//!
//! G_t holds the chains of order at most k(t) − 1 whose log transition
//! probabilities are bounded by z_t, with
//! k(t) = ⌊log₂ t / (h_P + ε)⌋ − 1 and z_t = C·t^γ. Logarithms are base 2.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hypothesis::{History, MarkovHypothesis};
use crate::posterior::PriorSpec;
use crate::process::{
    path_log_prob_trajectory, BlockDistribution, HiddenMarkovSource, MAX_BLOCK_LEN,
};
use crate::symbols::Symbol;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SieveSchedule {
    pub epsilon: f64,
    pub growth_c: f64,
    pub gamma: f64,
    pub h_p: f64,
    pub tail_alpha: f64,
    pub tail_beta: f64,
}

impl SieveSchedule {
    pub fn new(
        epsilon: f64,
        growth_c: f64,
        gamma: f64,
        h_p: f64,
        tail_alpha: f64,
        tail_beta: f64,
    ) -> Result<Self> {
        let s = SieveSchedule {
            epsilon,
            growth_c,
            gamma,
            h_p,
            tail_alpha,
            tail_beta,
        };
        s.validate()?;
        Ok(s)
    }

    /// ε = 0.1, C = 4, γ at 80% of its upper limit, α = 10, β = 0.01.
    pub fn default_for(h_p: f64) -> Self {
        let epsilon = 0.1;
        let gamma = 0.8 * gamma_limit(h_p, epsilon);
        SieveSchedule::new(epsilon, 4.0, gamma, h_p, 10.0, 0.01).expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSchedule(m));
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.h_p >= 0.0) {
            return bad(format!("entropy rate must be ≥ 0, got {}", self.h_p));
        }
        if !(self.growth_c > 0.0) {
            return bad(format!("C must be > 0, got {}", self.growth_c));
        }
        let limit = self.gamma_limit();
        if !(self.gamma > 0.0 && self.gamma < limit) {
            return bad(format!(
                "gamma must lie in (0, {limit}), got {}",
                self.gamma
            ));
        }
        if !(self.tail_alpha > 0.0 && self.tail_beta > 0.0) {
            return bad("tail targets alpha and beta must be > 0".into());
        }
        Ok(())
    }

    /// Upper limit (h_P + ε/2)/(h_P + ε) for γ.
    pub fn gamma_limit(&self) -> f64 {
        gamma_limit(self.h_p, self.epsilon)
    }

    /// k(t) = ⌊log₂ t / (h_P + ε)⌋ − 1; negative for very small t.
    pub fn k(&self, t: usize) -> i64 {
        if t == 0 {
            return -1;
        }
        ((t as f64).log2() / (self.h_p + self.epsilon)).floor() as i64 - 1
    }

    /// Largest order admitted into G_t, if any.
    pub fn max_member_order(&self, t: usize) -> Option<usize> {
        let k = self.k(t) - 1;
        (k >= 0).then_some(k as usize)
    }

    /// z_t = C·t^γ.
    pub fn z(&self, t: usize) -> f64 {
        self.growth_c * (t as f64).powf(self.gamma)
    }

    /// log₂ of the tail target α·2^(−βt).
    pub fn log2_tail_bound(&self, t: usize) -> f64 {
        self.tail_alpha.log2() - self.tail_beta * t as f64
    }

    /// First t at which θ belongs to G_t; membership persists afterwards.
    pub fn entry_time(&self, theta: &MarkovHypothesis) -> usize {
        let order_ok = |t: usize| self.max_member_order(t).is_some_and(|k| theta.order() <= k);
        let z = theta.z_max_log();
        let z_ok = |t: usize| self.z(t) >= z;
        first_true(order_ok).max(first_true(z_ok))
    }
}

fn gamma_limit(h_p: f64, epsilon: f64) -> f64 {
    (h_p + epsilon / 2.0) / (h_p + epsilon)
}

/// Smallest t ≥ 1 with `pred(t)` for a monotone predicate.
fn first_true(pred: impl Fn(usize) -> bool) -> usize {
    let mut hi = 1usize;
    while !pred(hi) {
        if hi >= usize::MAX / 4 {
            return usize::MAX;
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    // pred(lo) is false (or lo == 0), pred(hi) is true.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.max(1)
}

/// θ ∈ G_t: order ≤ k(t) − 1 and z(θ) ≤ z_t.
pub fn sieve_membership(theta: &MarkovHypothesis, t: usize, sched: &SieveSchedule) -> bool {
    sched
        .max_member_order(t)
        .is_some_and(|k| theta.order() <= k && theta.z_max_log() <= sched.z(t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailMass {
    pub t: usize,
    pub k_t: i64,
    pub z_t: f64,
    /// Exact Σ_{k ≥ k(t)} ρ_k, in log₂ and linear form.
    pub log2_order_tail: f64,
    pub order_tail: f64,
    /// Monte Carlo mass of order-admissible draws that violate the z bound.
    pub z_violation: f64,
    pub total: f64,
    pub log2_bound: f64,
    pub bound: f64,
    /// Whether the order tail meets α·2^(−βt).
    pub order_tail_within_bound: bool,
}

/// Estimate Π₀(G_tᶜ): the exact order tail plus a Monte Carlo estimate of
/// the within-order z-violation mass from `m` prior draws.
pub fn prior_tail_mass(
    prior: &PriorSpec,
    sched: &SieveSchedule,
    t: usize,
    m: usize,
    seed: u64,
) -> TailMass {
    let k_t = sched.k(t);
    let log2_order_tail = prior.log2_order_tail(k_t.max(0) as usize);
    let z_t = sched.z(t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let violations = (0..m)
        .filter(|_| {
            let theta = prior.sample(&mut rng);
            (theta.order() as i64) < k_t && theta.z_max_log() > z_t
        })
        .count();
    let z_violation = violations as f64 / m.max(1) as f64;
    let order_tail = log2_order_tail.exp2();
    let log2_bound = sched.log2_tail_bound(t);
    TailMass {
        t,
        k_t,
        z_t,
        log2_order_tail,
        order_tail,
        z_violation,
        total: (order_tail + z_violation).min(1.0),
        log2_bound,
        bound: log2_bound.exp2(),
        order_tail_within_bound: log2_order_tail <= log2_bound,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    /// Least-squares slope of log₂(order tail) against t.
    pub slope: f64,
    /// −slope, comparable to the target β.
    pub fitted_beta: f64,
    /// The order tail stays below α·2^(−βt) at every probed t.
    pub meets_exponential_target: bool,
    pub points: Vec<(usize, f64)>,
}

/// Fit the decay of the exact order tail over `times`. Times whose tail is
/// exactly zero (beyond a truncated prior's support) count as within bound
/// and are left out of the fit.
pub fn tail_decay_fit(prior: &PriorSpec, sched: &SieveSchedule, times: &[usize]) -> TailFit {
    let points: Vec<(usize, f64)> = times
        .iter()
        .map(|&t| (t, prior.log2_order_tail(sched.k(t).max(0) as usize)))
        .collect();
    let meets = points.iter().all(|&(t, v)| v <= sched.log2_tail_bound(t));
    let finite: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, v)| v.is_finite())
        .map(|&(t, v)| (t as f64, v))
        .collect();
    let slope = least_squares_slope(&finite);
    TailFit {
        slope,
        fitted_beta: -slope,
        meets_exponential_target: meets,
        points,
    }
}

/// Ordinary least-squares slope of y on x; NaN with fewer than two points.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Frequencies of overlapping length-`k` windows of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBlockDist {
    pub k: usize,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl EmpiricalBlockDist {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.total as f64)
            .collect()
    }

    pub fn frequency(&self, block: &[Symbol]) -> f64 {
        self.counts[crate::symbols::block_index(block)] as f64 / self.total as f64
    }

    /// L1 distance to an exact block distribution.
    pub fn total_variation(&self, exact: &BlockDistribution) -> f64 {
        exact.total_variation(&self.frequencies())
    }
}

pub fn empirical_block_dist(x: &[Symbol], k: usize) -> Result<EmpiricalBlockDist> {
    if k == 0 || k > MAX_BLOCK_LEN {
        return Err(Error::BlockLengthOutOfRange {
            k,
            max: MAX_BLOCK_LEN,
        });
    }
    if x.len() < k {
        return Err(Error::PathLength {
            got: x.len(),
            expected: k,
        });
    }
    let mut counts = vec![0u64; 1 << k];
    let mask = (1usize << k) - 1;
    let mut w = crate::symbols::block_index(&x[..k]);
    counts[w] += 1;
    for &a in &x[k..] {
        w = ((w << 1) | a as usize) & mask;
        counts[w] += 1;
    }
    Ok(EmpiricalBlockDist {
        k,
        counts,
        total: (x.len() - k + 1) as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub t: usize,
    /// max over θ ∈ G_t of |(1/t)·log₂ R_t(θ) + h(θ)|.
    pub deviation: f64,
    pub members: usize,
}

/// Uniform-convergence profile D(t) over `times`. With a schedule, only
/// members of G_t count at time t; without one, every member does.
pub fn uniform_convergence_profile(
    members: &[MarkovHypothesis],
    h: &[f64],
    path: &[Symbol],
    source: &HiddenMarkovSource,
    times: &[usize],
    sched: Option<&SieveSchedule>,
) -> Result<Vec<ProfilePoint>> {
    assert_eq!(members.len(), h.len());
    let logp = path_log_prob_trajectory(source, path);
    let logf: Vec<Vec<f64>> = members
        .iter()
        .map(|m| m.log_likelihood_at(path, times))
        .collect();
    times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let mut count = 0;
            let mut worst = 0.0f64;
            for (i, m) in members.iter().enumerate() {
                if sched.is_some_and(|s| !sieve_membership(m, t, s)) {
                    continue;
                }
                count += 1;
                let rate = (logf[i][j] - logp[t]) / t as f64;
                worst = worst.max((rate + h[i]).abs());
            }
            if count == 0 || t == 0 {
                return Err(Error::EmptySet { t });
            }
            Ok(ProfilePoint {
                t,
                deviation: worst,
                members: count,
            })
        })
        .collect()
}

/// Largest n at which `series[n-1]` exceeds the final value by more than
/// `delta`; 0 if it never does. `series[n-1]` holds the value at time n.
pub fn last_entry_from_series(series: &[f64], delta: f64) -> usize {
    let Some(&limit) = series.last() else {
        return 0;
    };
    series
        .iter()
        .rposition(|&v| v > limit + delta)
        .map_or(0, |i| i + 1)
}

/// τ̂(G, δ) for a fixed set G of members, where the set-averaged ratio is
/// ⟨R_n G⟩ = (1/`prior_size`)·Σ_{θ ∈ G} R_n(θ) and the value at the end of
/// `path` stands in for the limsup.
pub fn last_entry_time(
    members: &[MarkovHypothesis],
    prior_size: usize,
    path: &[Symbol],
    source: &HiddenMarkovSource,
    delta: f64,
) -> usize {
    let logp = path_log_prob_trajectory(source, path);
    let sweep = set_rate_series(members, &[members.len()], prior_size, path, &logp);
    last_entry_from_series(&sweep[0], delta)
}

/// (1/n)·log₂⟨R_n G⟩ for n = 1..=T and each prefix `G = members[..c]`,
/// `c` in `prefix_counts`.
fn set_rate_series(
    members: &[MarkovHypothesis],
    prefix_counts: &[usize],
    prior_size: usize,
    path: &[Symbol],
    logp: &[f64],
) -> Vec<Vec<f64>> {
    let log2_m = (prior_size as f64).log2();
    let mut acc = vec![0.0f64; members.len()];
    let mut series = vec![Vec::with_capacity(path.len()); prefix_counts.len()];
    let mut history = History::new();
    for (i, &a) in path.iter().enumerate() {
        for (v, m) in acc.iter_mut().zip(members) {
            *v += m.log2_predict(&history, a);
        }
        history.push(a);
        let n = i + 1;
        // Streaming prefix log-sum-exp, sampled at each prefix count.
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0f64;
        let mut next = 0;
        for (j, &v) in acc.iter().enumerate() {
            while next < prefix_counts.len() && prefix_counts[next] == j {
                series[next].push(rate_value(max, sum, log2_m, logp[n], n));
                next += 1;
            }
            if v > max {
                sum = sum * (max - v).exp2() + 1.0;
                max = v;
            } else {
                sum += (v - max).exp2();
            }
        }
        while next < prefix_counts.len() {
            series[next].push(rate_value(max, sum, log2_m, logp[n], n));
            next += 1;
        }
    }
    series
}

fn rate_value(max: f64, sum: f64, log2_m: f64, logp: f64, n: usize) -> f64 {
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    (max + sum.log2() - log2_m - logp) / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub t: usize,
    pub members_in_g: usize,
    pub tau_hat: usize,
    /// τ̂(G_t, δ) > t.
    pub violation: bool,
}

/// Sweep the last-entry condition t ≥ τ̂(G_t, δ) over `probe_times`, with
/// the whole path as the horizon. `prior_size` is the ensemble size M.
pub fn last_entry_sweep(
    members: &[MarkovHypothesis],
    prior_size: usize,
    sched: &SieveSchedule,
    path: &[Symbol],
    source: &HiddenMarkovSource,
    probe_times: &[usize],
    delta: f64,
) -> Vec<SweepPoint> {
    let entry: Vec<usize> = members.iter().map(|m| sched.entry_time(m)).collect();
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by_key(|&i| entry[i]);
    let sorted: Vec<MarkovHypothesis> = order.iter().map(|&i| members[i].clone()).collect();
    let sorted_entry: Vec<usize> = order.iter().map(|&i| entry[i]).collect();
    let counts: Vec<usize> = probe_times
        .iter()
        .map(|&t| sorted_entry.partition_point(|&e| e <= t))
        .collect();
    let mut distinct: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let logp = path_log_prob_trajectory(source, path);
    let series = set_rate_series(&sorted, &distinct, prior_size, path, &logp);
    probe_times
        .iter()
        .zip(&counts)
        .map(|(&t, &c)| {
            let tau_hat = distinct
                .binary_search(&c)
                .map(|g| last_entry_from_series(&series[g], delta))
                .unwrap_or(0);
            SweepPoint {
                t,
                members_in_g: c,
                tau_hat,
                violation: tau_hat > t,
            }
        })
        .collect()
}
