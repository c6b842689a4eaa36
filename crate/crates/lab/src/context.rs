//! Shared experiment state: the resolved source, priors and schedule, seed
//! derivation, checkpoint grids and the per-seed ensemble run.

use anyhow::{anyhow, Context as _, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sofic_bayes::hypothesis::{aep_on_path, SourceSummary};
use sofic_bayes::sieve::SieveSchedule;
use sofic_bayes::trajectory::LikelihoodTrajectory;
use sofic_bayes::{
    build_even_process, draw_prior_ensemble, sample_path, HiddenMarkovSource, MarkovHypothesis,
    PriorSpec, Symbol,
};

use crate::config::{ExperimentConfig, SourceChoice};
use crate::record::{Check, Table};

/// Independent random streams derived from one replicate seed.
pub mod stream {
    pub const PATH: u64 = 1;
    pub const ENSEMBLE: u64 = 2;
    pub const SIEVE: u64 = 3;
    pub const TAIL: u64 = 4;
    pub const HYPOTHESES: u64 = 5;
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Dyadic times, multiples of T/100 and T itself, ascending.
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    let step = (horizon / 100).max(1);
    let mut times: Vec<usize> = (1..)
        .map(|j| j * step)
        .take_while(|&t| t <= horizon)
        .collect();
    times.extend(
        (0..usize::BITS)
            .map(|j| 1usize << j)
            .take_while(|&t| t <= horizon),
    );
    times.push(horizon);
    times.sort_unstable();
    times.dedup();
    times
}

/// Tables and checks produced by one protocol.
#[derive(Debug, Default, Clone)]
pub struct Output {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Output {
    pub fn extend(&mut self, other: Output) {
        self.tables.extend(other.tables);
        self.checks.extend(other.checks);
    }
}

pub struct Lab {
    pub cfg: ExperimentConfig,
    pub summary: SourceSummary,
    pub h_p: f64,
    pub prior: PriorSpec,
    pub sched: SieveSchedule,
}

impl Lab {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate().map_err(|e| anyhow!("config: {e}"))?;
        let source = match &cfg.source {
            SourceChoice::Even => build_even_process(),
            SourceChoice::File(p) => HiddenMarkovSource::from_file(p)
                .with_context(|| format!("loading source {}", p.display()))?,
        };
        let summary = SourceSummary::new(&source);
        let h_p = summary.entropy_rate();
        let prior = cfg.prior_spec(h_p).map_err(|e| anyhow!("config: {e}"))?;
        let limit = (h_p + cfg.sieve_epsilon / 2.0) / (h_p + cfg.sieve_epsilon);
        let gamma = cfg.sieve_gamma.unwrap_or(0.8 * limit);
        let sched = SieveSchedule::new(
            cfg.sieve_epsilon,
            cfg.sieve_c,
            gamma,
            h_p,
            cfg.sieve_tail_alpha,
            cfg.sieve_tail_beta,
        )
        .map_err(|e| anyhow!("config: {e}"))?;
        Ok(Lab {
            cfg,
            summary,
            h_p,
            prior,
            sched,
        })
    }

    pub fn source(&self) -> &HiddenMarkovSource {
        self.summary.source()
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.cfg.replicates as u64)
            .map(|r| self.cfg.seed.wrapping_add(r))
            .collect()
    }

    /// The observed path of a replicate.
    pub fn path(&self, seed: u64) -> Vec<Symbol> {
        sample_path(
            self.source(),
            self.cfg.horizon,
            derive_seed(seed, stream::PATH),
        )
    }

    /// h(θ) in bits: exact where block enumeration allows, otherwise the
    /// relative-AEP estimate on `path`.
    pub fn divergence(&self, theta: &MarkovHypothesis, path: &[Symbol]) -> f64 {
        self.summary
            .divergence(theta)
            .unwrap_or_else(|_| aep_on_path(theta, self.source(), path))
    }
}

/// One replicate of the ensemble experiments: a path, M prior draws, their
/// divergence rates and their log-likelihoods at the checkpoints.
pub struct EnsembleRun {
    pub seed: u64,
    pub path: Vec<Symbol>,
    pub members: Vec<MarkovHypothesis>,
    pub h: Vec<f64>,
    pub h_min: f64,
    pub best: usize,
    pub traj: LikelihoodTrajectory,
}

impl EnsembleRun {
    pub fn build(lab: &Lab, seed: u64, m: usize) -> Self {
        let path = lab.path(seed);
        let ensemble = draw_prior_ensemble(&lab.prior, m, derive_seed(seed, stream::ENSEMBLE));
        let members = ensemble.members().to_vec();
        let h: Vec<f64> = members.iter().map(|t| lab.divergence(t, &path)).collect();
        let times = checkpoints(path.len());
        let traj = LikelihoodTrajectory::compute(&members, &path, &times);
        Self::assemble(seed, path, members, h, traj)
    }

    fn assemble(
        seed: u64,
        path: Vec<Symbol>,
        members: Vec<MarkovHypothesis>,
        h: Vec<f64>,
        traj: LikelihoodTrajectory,
    ) -> Self {
        let (best, h_min) =
            h.iter().enumerate().fold(
                (0, f64::INFINITY),
                |b, (i, &v)| if v < b.1 { (i, v) } else { b },
            );
        EnsembleRun {
            seed,
            path,
            members,
            h,
            h_min,
            best,
            traj,
        }
    }

    /// The same replicate restricted to its first `m` prior draws, which
    /// is itself an iid draw of size `m`.
    pub fn truncated(&self, m: usize) -> Self {
        let m = m.min(self.members.len());
        Self::assemble(
            self.seed,
            self.path.clone(),
            self.members[..m].to_vec(),
            self.h[..m].to_vec(),
            self.traj.truncated(m),
        )
    }

    pub fn times(&self) -> &[usize] {
        self.traj.times()
    }

    pub fn horizon(&self) -> usize {
        self.path.len()
    }

    pub fn mask(&self, pred: impl Fn(usize) -> bool) -> Vec<bool> {
        (0..self.members.len()).map(pred).collect()
    }

    /// Smallest h over the flagged members, or +∞ for an empty set.
    pub fn set_infimum(&self, mask: &[bool]) -> f64 {
        self.h
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min)
    }
}
