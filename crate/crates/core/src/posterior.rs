//! Monte Carlo representation of the posterior over Θ.
//!
//! An ensemble holds members drawn i.i.d. from the prior, so every member
//! carries prior weight 1/M. Each member accumulates its log₂ likelihood;
//! normalising these gives posterior weights proportional to R_t(θ_i), the
//! true-path probability cancelling in the normalisation. All weight
//! arithmetic stays in log space with one max shift per query.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypothesis::{History, MarkovHypothesis, MAX_ORDER};
use crate::symbols::{BinaryDist, Symbol};

/// Untruncated order priors are sampled up to this order.
pub const MAX_SAMPLED_ORDER: usize = 20;

const PAR_THRESHOLD: usize = 4096;

/// log₂ Σ 2^v, with `-inf` for an empty or all-`-inf` input.
pub fn log2_sum_exp2(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = values.into_iter().map(|v| (v - max).exp2()).sum();
    max + s.log2()
}

/// Family of prior weights over chain orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderPrior {
    /// ρ_k ∝ λ^k.
    Geometric { lambda: f64 },
    /// ρ_k ∝ exp(−c·2^(rate·k)); sieve experiments use rate = h_P + ε.
    DoublyExponential { c: f64, rate: f64 },
}

impl OrderPrior {
    /// Unnormalised natural-log weight of order `k`.
    fn ln_weight(&self, k: usize) -> f64 {
        match *self {
            OrderPrior::Geometric { lambda } => k as f64 * lambda.ln(),
            OrderPrior::DoublyExponential { c, rate } => -c * (rate * k as f64).exp2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub orders: OrderPrior,
    /// Truncation of the order prior; `None` keeps the infinite support.
    pub max_order: Option<usize>,
    /// Symmetric Beta/Dirichlet concentration of every context row.
    pub alpha: f64,
}

impl PriorSpec {
    pub fn geometric(lambda: f64, max_order: Option<usize>, alpha: f64) -> Result<Self> {
        let p = PriorSpec {
            orders: OrderPrior::Geometric { lambda },
            max_order,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn doubly_exponential(
        c: f64,
        rate: f64,
        max_order: Option<usize>,
        alpha: f64,
    ) -> Result<Self> {
        let p = PriorSpec {
            orders: OrderPrior::DoublyExponential { c, rate },
            max_order,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidPrior(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if let Some(k) = self.max_order {
            if k > MAX_ORDER {
                return Err(Error::InvalidPrior(format!(
                    "max order {k} exceeds {MAX_ORDER}"
                )));
            }
        }
        match self.orders {
            OrderPrior::Geometric { lambda } => {
                let ok =
                    lambda > 0.0 && (lambda < 1.0 || (lambda == 1.0 && self.max_order.is_some()));
                if !ok {
                    return Err(Error::InvalidPrior(format!(
                        "geometric ratio {lambda} must lie in (0, 1) (or equal 1 with a truncation)"
                    )));
                }
            }
            OrderPrior::DoublyExponential { c, rate } => {
                if !(c > 0.0 && rate > 0.0) {
                    return Err(Error::InvalidPrior(format!(
                        "doubly-exponential parameters must be positive (c = {c}, rate = {rate})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn support_end(&self) -> usize {
        self.max_order.unwrap_or(MAX_SAMPLED_ORDER)
    }

    /// Natural-log normaliser over the full (possibly infinite) support.
    fn ln_normaliser(&self) -> f64 {
        let end = match (self.max_order, self.orders) {
            (Some(k), _) => k,
            (None, OrderPrior::Geometric { lambda }) => {
                return -(1.0 - lambda).ln();
            }
            // Terms beyond this are below exp(-c·2^(rate·200)).
            (None, OrderPrior::DoublyExponential { .. }) => 200,
        };
        ln_sum_exp((0..=end).map(|k| self.orders.ln_weight(k)))
    }

    /// log₂ ρ_k.
    pub fn log2_order_weight(&self, k: usize) -> f64 {
        if self.max_order.is_some_and(|m| k > m) {
            return f64::NEG_INFINITY;
        }
        (self.orders.ln_weight(k) - self.ln_normaliser()) / std::f64::consts::LN_2
    }

    /// ρ_k for k = 0..=K, where K is the truncation (or the sampling cap).
    pub fn order_weights(&self) -> Vec<f64> {
        (0..=self.support_end())
            .map(|k| self.log2_order_weight(k).exp2())
            .collect()
    }

    /// log₂ Σ_{k ≥ from} ρ_k, exact over the prior's full support.
    pub fn log2_order_tail(&self, from: usize) -> f64 {
        let ln_norm = self.ln_normaliser();
        let ln_tail = match (self.max_order, self.orders) {
            (Some(m), _) if from > m => return f64::NEG_INFINITY,
            (Some(m), _) => ln_sum_exp((from..=m).map(|k| self.orders.ln_weight(k))),
            (None, OrderPrior::Geometric { lambda }) => {
                from as f64 * lambda.ln() - (1.0 - lambda).ln()
            }
            (None, OrderPrior::DoublyExponential { .. }) => {
                ln_sum_exp((from..from + 200).map(|k| self.orders.ln_weight(k)))
            }
        };
        (ln_tail - ln_norm) / std::f64::consts::LN_2
    }

    pub fn sample_order<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let weights = self.order_weights();
        let total: f64 = weights.iter().sum();
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        weights.len() - 1
    }

    /// One draw from Π₀: an order from ρ, then independent Beta(α, α)
    /// rows.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MarkovHypothesis {
        let k = self.sample_order(rng);
        let beta = Beta::new(self.alpha, self.alpha).expect("alpha validated");
        let p1 = (0..1usize << k)
            .map(|_| loop {
                let p: f64 = beta.sample(rng);
                if p > 0.0 && p < 1.0 {
                    break p;
                }
            })
            .collect();
        MarkovHypothesis::new(k, p1).expect("rows strictly inside (0, 1)")
    }
}

fn ln_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
pub struct EnsemblePosterior {
    members: Vec<MarkovHypothesis>,
    log_weights: Vec<f64>,
    history: History,
    /// Σ_n log₂ ⟨φ_n⟩, the running log mean fitness.
    log_mean_fitness: f64,
}

/// M i.i.d. draws from the prior, all with log weight 0.
pub fn draw_prior_ensemble(prior: &PriorSpec, m: usize, seed: u64) -> EnsemblePosterior {
    assert!(m >= 1, "ensemble needs at least one member");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = (0..m).map(|_| prior.sample(&mut rng)).collect();
    EnsemblePosterior::from_members(members)
}

impl EnsemblePosterior {
    pub fn from_members(members: Vec<MarkovHypothesis>) -> Self {
        assert!(!members.is_empty(), "ensemble needs at least one member");
        let m = members.len();
        EnsemblePosterior {
            members,
            log_weights: vec![0.0; m],
            history: History::new(),
            log_mean_fitness: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[MarkovHypothesis] {
        &self.members
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Number of observations absorbed.
    pub fn t(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    /// Shift every log weight by a constant; posterior quantities are
    /// unchanged.
    pub fn shift_log_weights(&mut self, c: f64) {
        self.log_weights.iter_mut().for_each(|w| *w += c);
    }

    fn log_normaliser(&self) -> f64 {
        log2_sum_exp2(self.log_weights.iter().copied())
    }

    /// Normalised posterior weights.
    pub fn weights(&self) -> Vec<f64> {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = self.log_weights.iter().map(|w| (w - max).exp2()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Conditional likelihoods L_{t+1}(θ_i) of the next symbol.
    pub fn likelihoods(&self, a: Symbol) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| m.likelihood(&self.history, a))
            .collect()
    }

    /// Bayes update on the next symbol.
    pub fn update(&mut self, a: Symbol) {
        let history = self.history;
        let log_l: Vec<f64> = if self.members.len() >= PAR_THRESHOLD {
            self.members
                .par_iter()
                .map(|m| m.log2_predict(&history, a))
                .collect()
        } else {
            self.members
                .iter()
                .map(|m| m.log2_predict(&history, a))
                .collect()
        };
        self.apply_log_fitness(&log_l);
        self.history.push(a);
    }

    /// Discrete replicator map: weight_i ← weight_i·φ_i / ⟨φ⟩. The history
    /// is not advanced; pair with [`EnsemblePosterior::advance_history`].
    pub fn replicator_step(&mut self, fitness: &[f64]) -> Result<()> {
        if fitness.len() != self.members.len() {
            return Err(Error::FitnessLength {
                got: fitness.len(),
                expected: self.members.len(),
            });
        }
        if let Some((index, &value)) = fitness.iter().enumerate().find(|(_, &f)| !(f > 0.0)) {
            return Err(Error::NonPositiveFitness { index, value });
        }
        let log_f: Vec<f64> = fitness.iter().map(|f| f.log2()).collect();
        self.apply_log_fitness(&log_f);
        Ok(())
    }

    /// Record a symbol without reweighting.
    pub fn advance_history(&mut self, a: Symbol) {
        self.history.push(a);
    }

    fn apply_log_fitness(&mut self, log_f: &[f64]) {
        let before = self.log_normaliser();
        for (w, f) in self.log_weights.iter_mut().zip(log_f) {
            *w += f;
        }
        self.log_mean_fitness += self.log_normaliser() - before;
    }

    /// Π_t(A) for the members selected by `pred`.
    pub fn posterior_mass(&self, pred: impl Fn(usize, &MarkovHypothesis) -> bool) -> f64 {
        self.log2_posterior_mass(pred).exp2()
    }

    /// log₂ Π_t(A), computed without leaving log space.
    pub fn log2_posterior_mass(&self, pred: impl Fn(usize, &MarkovHypothesis) -> bool) -> f64 {
        let selected = self
            .log_weights
            .iter()
            .zip(&self.members)
            .enumerate()
            .filter(|(i, (_, m))| pred(*i, m))
            .map(|(_, (w, _))| *w);
        let sub = log2_sum_exp2(selected.collect::<Vec<_>>());
        if sub == f64::NEG_INFINITY {
            return sub;
        }
        sub - self.log_normaliser()
    }

    /// Each member's next-symbol distribution at the current time.
    pub fn member_predictions(&self) -> Vec<BinaryDist> {
        self.members
            .iter()
            .map(|m| m.predict(&self.history))
            .collect()
    }

    /// The posterior predictive mixture F_Π^t.
    pub fn predictive_dist(&self) -> BinaryDist {
        let w = self.weights();
        let p1: f64 = self
            .member_predictions()
            .iter()
            .zip(&w)
            .map(|(d, w)| w * d.p1())
            .sum();
        let p0: f64 = self
            .member_predictions()
            .iter()
            .zip(&w)
            .map(|(d, w)| w * d.p(0))
            .sum();
        let total = p0 + p1;
        BinaryDist([p0 / total, p1 / total])
    }

    /// log₂ ⟨R_t⟩ up to the common log₂ p(x_1^t) term, i.e. the log of the
    /// prior-averaged likelihood.
    pub fn log2_mean_likelihood(&self) -> f64 {
        self.log_normaliser() - (self.members.len() as f64).log2()
    }

    /// (1/t)·[log₂ R_t(θ) − log₂ ⟨R_t⟩] for an arbitrary θ; `path` must be
    /// the `t` symbols this ensemble has absorbed.
    pub fn posterior_log_density_rate(
        &self,
        theta: &MarkovHypothesis,
        path: &[Symbol],
    ) -> Result<f64> {
        if path.len() != self.t() {
            return Err(Error::PathLength {
                got: path.len(),
                expected: self.t(),
            });
        }
        if path.is_empty() {
            return Err(Error::PathLength {
                got: 0,
                expected: 1,
            });
        }
        Ok((theta.log_likelihood(path) - self.log2_mean_likelihood()) / self.t() as f64)
    }

    /// The same rate for member `index`, from its accumulated weight.
    pub fn member_log_density_rate(&self, index: usize) -> f64 {
        (self.log_weights[index] - self.log2_mean_likelihood()) / self.t() as f64
    }

    /// Time average of log₂ relative fitness L_n(θ)/⟨L_n⟩ for member `index`.
    pub fn relative_fitness_average(&self, index: usize) -> f64 {
        (self.log_weights[index] - self.log_mean_fitness) / self.t() as f64
    }

    /// log₂ of posterior over prior weight at the most-weighted member.
    pub fn intensity_of_selection(&self) -> f64 {
        let w = self.weights();
        let max = w.iter().copied().fold(0.0, f64::max);
        (max * self.members.len() as f64).log2()
    }

    /// Index of the member with the largest accumulated weight.
    pub fn argmax(&self) -> usize {
        self.log_weights
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &w)| {
                if w > best.1 {
                    (i, w)
                } else {
                    best
                }
            })
            .0
    }

    /// Plain-text snapshot: a header, then one line per member with its
    /// log weight, order and P(1) rows.
    pub fn to_snapshot(&self) -> String {
        let (bits, len) = self.history.raw();
        let mut out = String::new();
        let _ = writeln!(out, "# ensemble posterior snapshot");
        let _ = writeln!(out, "t {len}");
        let _ = writeln!(out, "history {bits}");
        let _ = writeln!(out, "log_mean_fitness {}", self.log_mean_fitness);
        let _ = writeln!(out, "members {}", self.members.len());
        for (m, w) in self.members.iter().zip(&self.log_weights) {
            let _ = write!(out, "{w} {}", m.order());
            for p in m.p1() {
                let _ = write!(out, " {p}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (ln, line) = lines.next().ok_or(Error::Parse {
                line: 0,
                message: format!("missing '{key}' line"),
            })?;
            line.strip_prefix(key)
                .map(|v| (ln, v.trim().to_string()))
                .ok_or(Error::Parse {
                    line: ln,
                    message: format!("expected '{key}'"),
                })
        };
        let bad = |line: usize, what: &str| Error::Parse {
            line,
            message: format!("bad {what}"),
        };
        let (ln, v) = header("t")?;
        let t: usize = v.parse().map_err(|_| bad(ln, "t"))?;
        let (ln, v) = header("history")?;
        let bits: u64 = v.parse().map_err(|_| bad(ln, "history"))?;
        let (ln, v) = header("log_mean_fitness")?;
        let log_mean_fitness: f64 = v.parse().map_err(|_| bad(ln, "log_mean_fitness"))?;
        let (ln, v) = header("members")?;
        let m: usize = v.parse().map_err(|_| bad(ln, "member count"))?;
        let mut members = Vec::with_capacity(m);
        let mut log_weights = Vec::with_capacity(m);
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 3 {
                return Err(bad(ln, "member line"));
            }
            let w: f64 = f[0].parse().map_err(|_| bad(ln, "log weight"))?;
            let order: usize = f[1].parse().map_err(|_| bad(ln, "order"))?;
            let p1: Vec<f64> = f[2..]
                .iter()
                .map(|s| s.parse().map_err(|_| bad(ln, "probability")))
                .collect::<Result<_>>()?;
            let theta = MarkovHypothesis::new(order, p1).map_err(|e| Error::Parse {
                line: ln,
                message: e.to_string(),
            })?;
            members.push(theta);
            log_weights.push(w);
        }
        if members.len() != m || m == 0 {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected {m} members, found {}", members.len()),
            });
        }
        Ok(EnsemblePosterior {
            members,
            log_weights,
            history: History::from_raw(bits, t),
            log_mean_fitness,
        })
    }
}
