//! Member-major likelihood evaluation for large ensembles.
//!
//! Stepping an ensemble symbol by symbol touches every member per step;
//! for M = 10⁵ members it is far cheaper to run each member over the whole
//! path and record its log-likelihood at a set of checkpoints. Sequential
//! updating and this batch form agree (see the ensemble tests).

use rayon::prelude::*;

use crate::hypothesis::MarkovHypothesis;
use crate::posterior::log2_sum_exp2;
use crate::symbols::Symbol;

#[derive(Debug, Clone)]
pub struct LikelihoodTrajectory {
    times: Vec<usize>,
    /// `loglik[j][i]` = log₂ f_{θ_i}(x_1^{times[j]}).
    loglik: Vec<Vec<f64>>,
    members: usize,
}

impl LikelihoodTrajectory {
    /// `times` must be ascending and bounded by `path.len()`.
    pub fn compute(members: &[MarkovHypothesis], path: &[Symbol], times: &[usize]) -> Self {
        assert!(
            times.windows(2).all(|w| w[0] <= w[1]),
            "times must be sorted"
        );
        assert!(times.last().is_none_or(|&t| t <= path.len()));
        let per_member: Vec<Vec<f64>> = members
            .par_iter()
            .map(|m| m.log_likelihood_at(path, times))
            .collect();
        let loglik = (0..times.len())
            .map(|j| per_member.iter().map(|row| row[j]).collect())
            .collect();
        LikelihoodTrajectory {
            times: times.to_vec(),
            loglik,
            members: members.len(),
        }
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.members
    }

    pub fn is_empty(&self) -> bool {
        self.members == 0
    }

    /// Member log-likelihoods at checkpoint `j`.
    pub fn at(&self, j: usize) -> &[f64] {
        &self.loglik[j]
    }

    /// log₂ of the prior-averaged likelihood ⟨f⟩ at checkpoint `j`.
    pub fn log2_mean(&self, j: usize) -> f64 {
        log2_sum_exp2(self.loglik[j].iter().copied()) - (self.members as f64).log2()
    }

    /// log₂ Π_t(A) at checkpoint `j` for the members flagged in `selected`.
    pub fn log2_mass(&self, j: usize, selected: &[bool]) -> f64 {
        let row = &self.loglik[j];
        let sub = log2_sum_exp2(
            row.iter()
                .zip(selected)
                .filter(|(_, &s)| s)
                .map(|(v, _)| *v)
                .collect::<Vec<_>>(),
        );
        if sub == f64::NEG_INFINITY {
            return sub;
        }
        sub - log2_sum_exp2(row.iter().copied())
    }

    /// Index of the member with the highest likelihood at checkpoint `j`.
    pub fn argmax(&self, j: usize) -> usize {
        self.loglik[j]
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |b, (i, &v)| if v > b.1 { (i, v) } else { b },
            )
            .0
    }

    /// The same checkpoints restricted to the first `m` members.
    pub fn truncated(&self, m: usize) -> Self {
        let m = m.min(self.members);
        LikelihoodTrajectory {
            times: self.times.clone(),
            loglik: self.loglik.iter().map(|row| row[..m].to_vec()).collect(),
            members: m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::{draw_prior_ensemble, PriorSpec};
    use crate::process::{build_even_process, sample_path};

    #[test]
    fn checkpoints_match_sequential_updating() {
        let prior = PriorSpec::geometric(0.5, Some(4), 1.0).unwrap();
        let mut ens = draw_prior_ensemble(&prior, 50, 3);
        let path = sample_path(&build_even_process(), 300, 4);
        let times = [0, 1, 7, 100, 300];
        let traj = LikelihoodTrajectory::compute(ens.members(), &path, &times);
        let mut j = 0;
        for t in 0..=path.len() {
            if times[j] == t {
                for (a, b) in traj.at(j).iter().zip(ens.log_weights()) {
                    assert!((a - b).abs() < 1e-9, "t = {t}: {a} vs {b}");
                }
                assert!((traj.log2_mean(j) - ens.log2_mean_likelihood()).abs() < 1e-9);
                j += 1;
                if j == times.len() {
                    break;
                }
            }
            ens.update(path[t]);
        }
        let short = traj.truncated(10);
        assert_eq!(short.len(), 10);
        assert_eq!(short.at(3), &traj.at(3)[..10]);
    }
}
