//! Strictly positive stationary binary Markov chains of finite order.
//!
//! Contexts of an order-`k` chain are encoded as integers in `0..2^k` with
//! the oldest symbol in the most significant bit, so the successor of
//! context `w` after symbol `a` is `((w << 1) | a) mod 2^k`.

use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::process::{
    block_distribution, entropy_rate, path_log_prob, sample_path, BlockDistribution,
    HiddenMarkovSource, MAX_BLOCK_LEN,
};
use crate::stationary::shift_chain_stationary;
use crate::symbols::{check_symbols, format_bits, index_block, parse_bits, BinaryDist, Symbol};

/// Largest order a hypothesis may have; exact divergence rates stop at
/// `MAX_BLOCK_LEN - 1`.
pub const MAX_ORDER: usize = 24;

/// Default floor applied to projected minimisers.
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// The last (up to 64) observed symbols and the number observed so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct History {
    bits: u64,
    len: usize,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols(x: &[Symbol]) -> Self {
        let mut h = History::new();
        x.iter().for_each(|&a| h.push(a));
        h
    }

    pub fn push(&mut self, a: Symbol) {
        self.bits = (self.bits << 1) | a as u64;
        self.len += 1;
    }

    /// Number of symbols observed.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The most recent `min(k, len)` symbols as an index.
    pub fn last(&self, k: usize) -> usize {
        let k = k.min(self.len).min(63);
        (self.bits & ((1u64 << k) - 1)) as usize
    }

    pub(crate) fn raw(&self) -> (u64, usize) {
        (self.bits, self.len)
    }

    pub(crate) fn from_raw(bits: u64, len: usize) -> Self {
        History { bits, len }
    }
}

/// Stationary block marginals of lengths `0..=k`; `levels[k]` is the
/// invariant distribution of the context-shift chain.
#[derive(Debug, Clone)]
struct Marginals {
    levels: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MarkovHypothesis {
    order: usize,
    p1: Vec<f64>,
    log2_next: Vec<[f64; 2]>,
    marginals: OnceLock<Marginals>,
}

impl PartialEq for MarkovHypothesis {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.p1 == other.p1
    }
}

impl MarkovHypothesis {
    /// `p1[w]` is the probability of emitting 1 after context `w`.
    pub fn new(order: usize, p1: Vec<f64>) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::InvalidHypothesis(format!(
                "order {order} exceeds the maximum {MAX_ORDER}"
            )));
        }
        if p1.len() != 1 << order {
            return Err(Error::InvalidHypothesis(format!(
                "order {order} needs {} rows, got {}",
                1usize << order,
                p1.len()
            )));
        }
        if let Some((w, p)) = p1.iter().enumerate().find(|(_, &p)| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidHypothesis(format!(
                "row {w} has P(1) = {p}; probabilities must lie in (0, 1)"
            )));
        }
        let log2_next = p1.iter().map(|&p| [(1.0 - p).log2(), p.log2()]).collect();
        Ok(MarkovHypothesis {
            order,
            p1,
            log2_next,
            marginals: OnceLock::new(),
        })
    }

    /// I.i.d. Bernoulli chain with P(1) = `q1`.
    pub fn iid(q1: f64) -> Result<Self> {
        Self::new(0, vec![q1])
    }

    pub fn fair_coin() -> Self {
        Self::iid(0.5).expect("valid")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_contexts(&self) -> usize {
        self.p1.len()
    }

    pub fn p1(&self) -> &[f64] {
        &self.p1
    }

    pub fn next_prob(&self, context: usize, a: Symbol) -> f64 {
        if a == 1 {
            self.p1[context]
        } else {
            1.0 - self.p1[context]
        }
    }

    pub fn next_dist(&self, context: usize) -> BinaryDist {
        BinaryDist::from_p1(self.p1[context])
    }

    #[inline]
    pub fn log2_next(&self, context: usize, a: Symbol) -> f64 {
        self.log2_next[context][a as usize]
    }

    fn marginals(&self) -> &Marginals {
        self.marginals.get_or_init(|| {
            let top = shift_chain_stationary(self.order, &self.p1);
            let mut levels = vec![top];
            for _ in 0..self.order {
                let prev = levels.last().expect("non-empty");
                levels.push(prev.chunks(2).map(|c| c[0] + c[1]).collect());
            }
            levels.reverse();
            Marginals { levels }
        })
    }

    /// Invariant distribution over contexts (length-`k` blocks).
    pub fn stationary_blocks(&self) -> &[f64] {
        &self.marginals().levels[self.order]
    }

    /// Stationary marginal of blocks of length `j ≤ k`.
    pub fn stationary_marginal(&self, j: usize) -> &[f64] {
        &self.marginals().levels[j]
    }

    /// Next-symbol distribution given everything observed so far. While
    /// fewer than `k` symbols have been seen, this conditions the stationary
    /// block marginal on the partial prefix.
    pub fn predict(&self, history: &History) -> BinaryDist {
        if history.len() >= self.order {
            self.next_dist(history.last(self.order))
        } else {
            BinaryDist([self.likelihood(history, 0), self.likelihood(history, 1)])
        }
    }

    /// Conditional probability of `a` given the history.
    pub fn likelihood(&self, history: &History, a: Symbol) -> f64 {
        let n = history.len();
        if n >= self.order {
            self.next_prob(history.last(self.order), a)
        } else {
            let prefix = history.last(n);
            let m = self.marginals();
            m.levels[n + 1][(prefix << 1) | a as usize] / m.levels[n][prefix]
        }
    }

    /// log₂ of [`MarkovHypothesis::likelihood`], bit-for-bit.
    #[inline]
    pub fn log2_predict(&self, history: &History, a: Symbol) -> f64 {
        if history.len() >= self.order {
            self.log2_next(history.last(self.order), a)
        } else {
            self.likelihood(history, a).log2()
        }
    }

    /// log₂ f_θ(x): the stationary marginal of the first `k` symbols plus
    /// the transition terms. Shorter sequences use the marginal directly.
    pub fn log_likelihood(&self, x: &[Symbol]) -> f64 {
        let k = self.order.min(x.len());
        let head = crate::symbols::block_index(&x[..k]);
        let mut acc = self.stationary_marginal(k)[head].log2();
        acc += self.transition_log_likelihood(x);
        acc
    }

    /// log₂ f_θ(x_{k+1}^t | x_1^k): conditions on the first `k` symbols.
    pub fn log_likelihood_conditional(&self, x: &[Symbol]) -> f64 {
        self.transition_log_likelihood(x)
    }

    fn transition_log_likelihood(&self, x: &[Symbol]) -> f64 {
        if x.len() <= self.order {
            return 0.0;
        }
        let mask = self.p1.len() - 1;
        let mut ctx = crate::symbols::block_index(&x[..self.order]);
        let mut acc = 0.0;
        for &a in &x[self.order..] {
            acc += self.log2_next[ctx][a as usize];
            ctx = ((ctx << 1) | a as usize) & mask;
        }
        acc
    }

    /// log₂ f_θ(x_1^n) at each requested `n` (ascending, each ≤ `x.len()`).
    pub fn log_likelihood_at(&self, x: &[Symbol], times: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(times.len());
        let mut next_time = times.iter().peekable();
        while next_time.peek() == Some(&&0) {
            out.push(0.0);
            next_time.next();
        }
        let k = self.order;
        let mask = self.p1.len() - 1;
        let mut acc = 0.0;
        let mut history = History::new();
        let mut ctx = 0usize;
        for (i, &a) in x.iter().enumerate() {
            if i < k {
                acc += self.log2_predict(&history, a);
                history.push(a);
                ctx = history.last(k);
            } else {
                acc += self.log2_next[ctx][a as usize];
                ctx = ((ctx << 1) | a as usize) & mask;
            }
            while next_time.peek() == Some(&&(i + 1)) {
                out.push(acc);
                next_time.next();
            }
            if next_time.peek().is_none() {
                break;
            }
        }
        out
    }

    /// z(θ): the largest |log₂ f_θ(a | w)| over all contexts and symbols.
    pub fn z_max_log(&self) -> f64 {
        self.log2_next
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Plain-text table: `order k`, then one row per context with the
    /// context bits (`-` for the empty context), P(0) and P(1).
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "order {}", self.order);
        for (w, &p) in self.p1.iter().enumerate() {
            let ctx = if self.order == 0 {
                "-".to_string()
            } else {
                format_bits(&index_block(w, self.order))
            };
            let _ = writeln!(out, "{ctx} {} {}", 1.0 - p, p);
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let perr = |line: usize, message: String| Error::Parse { line, message };
        let (ln, head) = lines.next().ok_or_else(|| perr(0, "empty table".into()))?;
        let order: usize = head
            .strip_prefix("order")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| perr(ln, "expected 'order <k>'".into()))?;
        if order > MAX_ORDER {
            return Err(perr(ln, format!("order {order} exceeds {MAX_ORDER}")));
        }
        let mut p1 = vec![f64::NAN; 1 << order];
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(perr(ln, "expected '<context> <P(0)> <P(1)>'".into()));
            }
            let w = if f[0] == "-" {
                Vec::new()
            } else {
                parse_bits(f[0]).map_err(|_| perr(ln, format!("bad context {:?}", f[0])))?
            };
            if w.len() != order {
                return Err(perr(
                    ln,
                    format!("context {:?} is not of length {order}", f[0]),
                ));
            }
            let p0: f64 = f[1].parse().map_err(|_| perr(ln, "bad P(0)".into()))?;
            let q: f64 = f[2].parse().map_err(|_| perr(ln, "bad P(1)".into()))?;
            if (p0 + q - 1.0).abs() > 1e-12 {
                return Err(perr(ln, format!("row sums to {}", p0 + q)));
            }
            p1[crate::symbols::block_index(&w)] = q;
        }
        if p1.iter().any(|p| p.is_nan()) {
            return Err(perr(0, "missing context rows".into()));
        }
        MarkovHypothesis::new(order, p1)
    }
}

/// Entropy rate and exact block distributions of a source, computed once
/// and shared by every divergence evaluation.
#[derive(Debug)]
pub struct SourceSummary {
    source: HiddenMarkovSource,
    entropy_rate: f64,
    blocks: Vec<OnceLock<BlockDistribution>>,
}

impl SourceSummary {
    pub fn new(source: &HiddenMarkovSource) -> Self {
        SourceSummary {
            source: source.clone(),
            entropy_rate: entropy_rate(source).value(),
            blocks: (0..=MAX_BLOCK_LEN).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn source(&self) -> &HiddenMarkovSource {
        &self.source
    }

    /// h_P in bits per symbol.
    pub fn entropy_rate(&self) -> f64 {
        self.entropy_rate
    }

    pub fn blocks(&self, k: usize) -> Result<&BlockDistribution> {
        if k == 0 || k > MAX_BLOCK_LEN {
            return Err(Error::BlockLengthOutOfRange {
                k,
                max: MAX_BLOCK_LEN,
            });
        }
        if let Some(b) = self.blocks[k].get() {
            return Ok(b);
        }
        let b = block_distribution(&self.source, k)?;
        Ok(self.blocks[k].get_or_init(|| b))
    }

    /// h(θ) in bits per symbol.
    pub fn divergence(&self, theta: &MarkovHypothesis) -> Result<f64> {
        let k = theta.order();
        if k + 1 > MAX_BLOCK_LEN {
            return Err(Error::OrderTooLarge {
                order: k,
                max: MAX_BLOCK_LEN - 1,
            });
        }
        let blocks = self.blocks(k + 1)?;
        let cross: f64 = blocks
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(wa, &p)| -p * theta.log2_next(wa >> 1, (wa & 1) as Symbol))
            .sum();
        Ok(cross - self.entropy_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub path_length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    /// h(θ), bits per symbol.
    pub h_theta: f64,
    /// J(θ) = h(θ) − h_inf.
    pub j_theta: f64,
    pub z_theta: f64,
    pub mc_estimate: Option<McEstimate>,
}

/// Exact divergence rate against the infimum reference `h_inf` (0 for the
/// even-process family).
pub fn divergence_rate(
    theta: &MarkovHypothesis,
    source: &HiddenMarkovSource,
) -> Result<DivergenceReport> {
    divergence_report(theta, &SourceSummary::new(source), 0.0)
}

pub fn divergence_report(
    theta: &MarkovHypothesis,
    summary: &SourceSummary,
    h_inf: f64,
) -> Result<DivergenceReport> {
    let h_theta = summary.divergence(theta)?;
    Ok(DivergenceReport {
        h_theta,
        j_theta: h_theta - h_inf,
        z_theta: theta.z_max_log(),
        mc_estimate: None,
    })
}

/// −(1/t)·log₂[f_θ(X_1^t) / p(X_1^t)] on a path sampled with `seed`.
pub fn aep_estimate(
    theta: &MarkovHypothesis,
    source: &HiddenMarkovSource,
    t: usize,
    seed: u64,
) -> f64 {
    let path = sample_path(source, t.max(1), seed);
    aep_on_path(theta, source, &path)
}

pub fn aep_on_path(theta: &MarkovHypothesis, source: &HiddenMarkovSource, path: &[Symbol]) -> f64 {
    let t = path.len() as f64;
    -(theta.log_likelihood(path) - path_log_prob(source, path)) / t
}

/// The divergence-minimising conditionals P(a | w) of an order-`k` chain:
/// the source's own conditionals from its (k+1)-block distribution. `None`
/// marks contexts the source never produces.
pub fn optimal_conditionals(k: usize, source: &HiddenMarkovSource) -> Result<Vec<Option<f64>>> {
    if k + 1 > MAX_BLOCK_LEN {
        return Err(Error::OrderTooLarge {
            order: k,
            max: MAX_BLOCK_LEN - 1,
        });
    }
    let blocks = block_distribution(source, k + 1)?;
    Ok(blocks
        .probs()
        .chunks(2)
        .map(|c| {
            let total = c[0] + c[1];
            (total > 0.0).then(|| c[1] / total)
        })
        .collect())
}

/// Divergence minimiser in the closure of Θ_k, projected back into Θ_k by
/// clamping every probability to `[floor, 1 − floor]`. Contexts with zero
/// source probability get P(1) = 1/2.
pub fn optimal_in_order(
    k: usize,
    source: &HiddenMarkovSource,
    floor: f64,
) -> Result<MarkovHypothesis> {
    if !(floor > 0.0 && floor < 0.5) {
        return Err(Error::InvalidHypothesis(format!(
            "floor {floor} outside (0, 1/2)"
        )));
    }
    let p1 = optimal_conditionals(k, source)?
        .into_iter()
        .map(|p| p.unwrap_or(0.5).clamp(floor, 1.0 - floor))
        .collect();
    MarkovHypothesis::new(k, p1)
}

pub fn hypothesis_log_likelihood(theta: &MarkovHypothesis, x: &[Symbol]) -> Result<f64> {
    check_symbols(x)?;
    Ok(theta.log_likelihood(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::build_even_process;

    #[test]
    fn rejects_degenerate_rows() {
        assert!(MarkovHypothesis::iid(0.0).is_err());
        assert!(MarkovHypothesis::iid(1.0).is_err());
        assert!(MarkovHypothesis::new(1, vec![0.5]).is_err());
    }

    #[test]
    fn fair_coin_likelihood() {
        let coin = MarkovHypothesis::fair_coin();
        let x = parse_bits("0110100111").unwrap();
        assert!((coin.log_likelihood(&x) + 10.0).abs() < 1e-12);
        assert_eq!(coin.z_max_log(), 1.0);
    }

    #[test]
    fn order_one_unrolled() {
        let theta = MarkovHypothesis::new(1, vec![0.3, 0.8]).unwrap();
        let x = [0u8, 1];
        let expected = theta.stationary_blocks()[0].log2() + 0.3f64.log2();
        assert!((theta.log_likelihood(&x) - expected).abs() < 1e-12);
        // π(0)·0.3 = π(1)·0.2 balances the two-state chain.
        assert!((theta.stationary_blocks()[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn z_of_biased_coin() {
        let theta = MarkovHypothesis::iid(2.0 / 3.0).unwrap();
        assert!((theta.z_max_log() - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn divergence_closed_forms() {
        let even = build_even_process();
        let coin = divergence_rate(&MarkovHypothesis::fair_coin(), &even).unwrap();
        assert!((coin.h_theta - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(coin.h_theta, coin.j_theta);
        let q = 2.0f64 / 3.0;
        let expected = -2.0 / 3.0 - (q * q.log2() + (1.0 - q) * (1.0 - q).log2());
        let biased = divergence_rate(&MarkovHypothesis::iid(q).unwrap(), &even).unwrap();
        assert!((biased.h_theta - expected).abs() < 1e-12);
        assert!((biased.h_theta - 0.25163).abs() < 1e-5);
    }

    #[test]
    fn optimal_conditionals_match_source() {
        let even = build_even_process();
        let c0 = optimal_conditionals(0, &even).unwrap();
        assert!((c0[0].unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let c1 = optimal_conditionals(1, &even).unwrap();
        assert!((c1[0].unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn order_too_large_for_exact_divergence() {
        let even = build_even_process();
        let theta = MarkovHypothesis::new(20, vec![0.5; 1 << 20]).unwrap();
        assert!(matches!(
            SourceSummary::new(&even).divergence(&theta),
            Err(Error::OrderTooLarge { .. })
        ));
    }

    #[test]
    fn table_round_trip() {
        let theta = MarkovHypothesis::new(2, vec![0.1, 0.25, 0.5, 0.9]).unwrap();
        let back = MarkovHypothesis::from_table(&theta.to_table()).unwrap();
        assert_eq!(back, theta);
        let coin = MarkovHypothesis::from_table(&MarkovHypothesis::fair_coin().to_table()).unwrap();
        assert_eq!(coin, MarkovHypothesis::fair_coin());
        assert!(MarkovHypothesis::from_table("order 1\n0 0.5 0.5\n").is_err());
    }

    #[test]
    fn checkpoint_likelihoods_match_batch() {
        let theta =
            MarkovHypothesis::new(3, (0..8).map(|i| 0.1 + 0.1 * i as f64).collect()).unwrap();
        let x = sample_path(&build_even_process(), 40, 2);
        let times = [0, 1, 2, 3, 5, 17, 40];
        let at = theta.log_likelihood_at(&x, &times);
        for (&t, v) in times.iter().zip(at) {
            assert!((theta.log_likelihood(&x[..t]) - v).abs() < 1e-10, "t = {t}");
        }
    }
}
