//! Exact posterior over chain orders under symmetric Dirichlet rows.
//!
//! For order `k` the integrated likelihood of the transitions after the
//! first `k` symbols is a product of Dirichlet-multinomial terms, one per
//! context. To compare orders on the same data, each of the first `k`
//! symbols is additionally charged probability 1/2 (the prior predictive
//! of an unseen context); [`OrderPosterior::log2_conditional_marginal`]
//! keeps the purely conditional value.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::hypothesis::History;
use crate::posterior::{log2_sum_exp2, PriorSpec};
use crate::symbols::{check_symbols, BinaryDist, Symbol};

pub const MAX_CONJUGATE_ORDER: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderPosterior {
    pub t: usize,
    /// log₂ ρ_k renormalised over 0..=k_max.
    pub log2_prior: Vec<f64>,
    /// Integrated likelihood of all t symbols under order k, in bits.
    pub log2_marginal: Vec<f64>,
    /// Integrated likelihood conditioned on the first k symbols, in bits.
    pub log2_conditional_marginal: Vec<f64>,
    pub weights: Vec<f64>,
    /// `counts[k][w] = [n(w0), n(w1)]`.
    pub counts: Vec<Vec<[u64; 2]>>,
}

impl OrderPosterior {
    /// Order with the largest posterior weight (the lowest on ties).
    pub fn mode(&self) -> usize {
        self.weights
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |b, (k, &w)| if w > b.1 { (k, w) } else { b },
            )
            .0
    }
}

fn check_k_max(k_max: usize) -> Result<()> {
    if k_max > MAX_CONJUGATE_ORDER {
        return Err(Error::OrderTooLarge {
            order: k_max,
            max: MAX_CONJUGATE_ORDER,
        });
    }
    Ok(())
}

fn truncated_log2_prior(prior: &PriorSpec, k_max: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..=k_max).map(|k| prior.log2_order_weight(k)).collect();
    let norm = log2_sum_exp2(raw.iter().copied());
    raw.into_iter().map(|w| w - norm).collect()
}

fn normalise(log2_prior: &[f64], log2_marginal: &[f64]) -> Vec<f64> {
    let joint: Vec<f64> = log2_prior
        .iter()
        .zip(log2_marginal)
        .map(|(p, m)| p + m)
        .collect();
    let norm = log2_sum_exp2(joint.iter().copied());
    joint.into_iter().map(|j| (j - norm).exp2()).collect()
}

/// Batch order posterior from the closed-form Dirichlet-multinomial.
pub fn conjugate_order_posterior(
    prior: &PriorSpec,
    x: &[Symbol],
    k_max: usize,
) -> Result<OrderPosterior> {
    check_k_max(k_max)?;
    check_symbols(x)?;
    let alpha = prior.alpha;
    let mut counts = Vec::with_capacity(k_max + 1);
    let mut conditional = Vec::with_capacity(k_max + 1);
    let mut full = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut c = vec![[0u64; 2]; 1 << k];
        if x.len() > k {
            let mask = (1usize << k) - 1;
            let mut ctx = crate::symbols::block_index(&x[..k]);
            for &a in &x[k..] {
                c[ctx][a as usize] += 1;
                ctx = ((ctx << 1) | a as usize) & mask;
            }
        }
        let ln_ml: f64 = c
            .iter()
            .filter(|row| row[0] + row[1] > 0)
            .map(|row| {
                let n = (row[0] + row[1]) as f64;
                ln_gamma(2.0 * alpha) - ln_gamma(n + 2.0 * alpha)
                    + row
                        .iter()
                        .map(|&m| ln_gamma(m as f64 + alpha) - ln_gamma(alpha))
                        .sum::<f64>()
            })
            .sum();
        let cond = ln_ml / std::f64::consts::LN_2;
        conditional.push(cond);
        full.push(cond - k.min(x.len()) as f64);
        counts.push(c);
    }
    let log2_prior = truncated_log2_prior(prior, k_max);
    let weights = normalise(&log2_prior, &full);
    Ok(OrderPosterior {
        t: x.len(),
        log2_prior,
        log2_marginal: full,
        log2_conditional_marginal: conditional,
        weights,
        counts,
    })
}

/// Sequential form of the same posterior, giving the predictive
/// distribution at every step.
#[derive(Debug, Clone)]
pub struct ConjugateEngine {
    alpha: f64,
    log2_prior: Vec<f64>,
    log2_marginal: Vec<f64>,
    counts: Vec<Vec<[u64; 2]>>,
    history: History,
}

impl ConjugateEngine {
    pub fn new(prior: &PriorSpec, k_max: usize) -> Result<Self> {
        check_k_max(k_max)?;
        Ok(ConjugateEngine {
            alpha: prior.alpha,
            log2_prior: truncated_log2_prior(prior, k_max),
            log2_marginal: vec![0.0; k_max + 1],
            counts: (0..=k_max).map(|k| vec![[0u64; 2]; 1 << k]).collect(),
            history: History::new(),
        })
    }

    pub fn k_max(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn t(&self) -> usize {
        self.history.len()
    }

    /// Dirichlet posterior mean for the current context of order `k`; 1/2
    /// until `k` symbols have been seen.
    pub fn order_predictive(&self, k: usize) -> BinaryDist {
        if self.history.len() < k {
            return BinaryDist([0.5, 0.5]);
        }
        let row = self.counts[k][self.history.last(k)];
        let n = (row[0] + row[1]) as f64 + 2.0 * self.alpha;
        BinaryDist([
            (row[0] as f64 + self.alpha) / n,
            (row[1] as f64 + self.alpha) / n,
        ])
    }

    pub fn order_weights(&self) -> Vec<f64> {
        normalise(&self.log2_prior, &self.log2_marginal)
    }

    /// Posterior predictive: order-weighted mixture of the per-order
    /// predictives.
    pub fn predictive(&self) -> BinaryDist {
        let w = self.order_weights();
        let mut p = [0.0; 2];
        for (k, wk) in w.iter().enumerate() {
            let d = self.order_predictive(k);
            p[0] += wk * d.0[0];
            p[1] += wk * d.0[1];
        }
        let total = p[0] + p[1];
        BinaryDist([p[0] / total, p[1] / total])
    }

    pub fn update(&mut self, a: Symbol) {
        let t = self.history.len();
        for k in 0..self.counts.len() {
            let d = self.order_predictive(k);
            self.log2_marginal[k] += d.p(a).log2();
            if t >= k {
                let ctx = self.history.last(k);
                self.counts[k][ctx][a as usize] += 1;
            }
        }
        self.history.push(a);
    }

    pub fn order_posterior(&self) -> OrderPosterior {
        let conditional = self
            .log2_marginal
            .iter()
            .enumerate()
            .map(|(k, m)| m + k.min(self.t()) as f64)
            .collect();
        OrderPosterior {
            t: self.t(),
            log2_prior: self.log2_prior.clone(),
            log2_marginal: self.log2_marginal.clone(),
            log2_conditional_marginal: conditional,
            weights: self.order_weights(),
            counts: self.counts.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::parse_bits;

    fn prior() -> PriorSpec {
        PriorSpec::geometric(0.5, None, 0.5).unwrap()
    }

    #[test]
    fn empty_path_returns_prior() {
        let post = conjugate_order_posterior(&prior(), &[], 6).unwrap();
        for (k, w) in post.weights.iter().enumerate() {
            assert!((w - post.log2_prior[k].exp2()).abs() < 1e-15);
        }
    }

    #[test]
    fn alternation_needs_memory() {
        let x: Vec<Symbol> = (0..200).map(|i| (i % 2 == 0) as Symbol).collect();
        let post = conjugate_order_posterior(&prior(), &x, 4).unwrap();
        assert!(post.mode() >= 1);
        assert!(post.weights[0] < 1e-10);
    }

    #[test]
    fn counts_are_exact_tallies() {
        let x = parse_bits("0110111").unwrap();
        let post = conjugate_order_posterior(&prior(), &x, 2).unwrap();
        assert_eq!(post.counts[0][0], [2, 5]);
        // Order-1 transitions: 0->1, 1->1, 1->0, 0->1, 1->1, 1->1.
        assert_eq!(post.counts[1][0], [0, 2]);
        assert_eq!(post.counts[1][1], [1, 3]);
    }

    #[test]
    fn sequential_matches_closed_form() {
        let x = parse_bits("011011110110011011111100110").unwrap();
        let batch = conjugate_order_posterior(&prior(), &x, 5).unwrap();
        let mut engine = ConjugateEngine::new(&prior(), 5).unwrap();
        x.iter().for_each(|&a| engine.update(a));
        let seq = engine.order_posterior();
        for k in 0..=5 {
            assert!((batch.log2_marginal[k] - seq.log2_marginal[k]).abs() < 1e-9);
            assert!((batch.weights[k] - seq.weights[k]).abs() < 1e-12);
        }
        assert_eq!(batch.counts, seq.counts);
    }

    #[test]
    fn symmetric_prior_predicts_one_half() {
        let engine = ConjugateEngine::new(&prior(), 8).unwrap();
        assert_eq!(engine.predictive(), BinaryDist([0.5, 0.5]));
        assert!(ConjugateEngine::new(&prior(), 13).is_err());
    }
}
