//! The true data-generating process: an edge-labelled hidden Markov chain.
//!
//! A hidden chain `S_t` moves along labelled edges; the label of the edge
//! taken from `S_t` to `S_{t+1}` is the observed symbol `X_t`. The start
//! state is drawn from the invariant distribution, so the observed process
//! is stationary. All path probabilities are reported in bits.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::stationary::gth_stationary;
use crate::symbols::{check_symbols, entropy_bits, BinaryDist, Symbol};

/// Largest block length for exact enumeration.
pub const MAX_BLOCK_LEN: usize = 20;

/// Block length used for the block-entropy sequence in [`entropy_rate`].
pub const ENTROPY_BLOCK_DEPTH: usize = 12;

const ROW_TOLERANCE: f64 = 1e-12;

/// One labelled transition of the hidden chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub prob: f64,
    pub symbol: Symbol,
}

#[derive(Debug, Clone)]
pub struct HiddenMarkovSource {
    names: Vec<String>,
    edges: Vec<Edge>,
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
    /// Edges grouped by emitted symbol.
    by_symbol: [Vec<(usize, usize, f64)>; 2],
}

impl HiddenMarkovSource {
    /// Build a source from named states and labelled edges. Outgoing
    /// probabilities of every state must sum to one; the stationary
    /// distribution is solved for and checked.
    pub fn new(names: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidSource("no states".into()));
        }
        let mut transition = vec![vec![0.0; n]; n];
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidSource(format!(
                    "edge {}->{} references an unknown state",
                    e.from, e.to
                )));
            }
            if e.symbol > 1 {
                return Err(Error::InvalidSymbol(e.symbol));
            }
            if !(e.prob > 0.0 && e.prob <= 1.0) {
                return Err(Error::InvalidSource(format!(
                    "edge {}->{} has probability {} outside (0, 1]",
                    names[e.from], names[e.to], e.prob
                )));
            }
            if edges
                .iter()
                .filter(|o| o.from == e.from && o.to == e.to && o.symbol == e.symbol)
                .count()
                > 1
            {
                return Err(Error::InvalidSource(format!(
                    "duplicate edge {}->{} with symbol {}",
                    names[e.from], names[e.to], e.symbol
                )));
            }
            transition[e.from][e.to] += e.prob;
        }
        for (s, row) in transition.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidSource(format!(
                    "outgoing probabilities of state {} sum to {total}",
                    names[s]
                )));
            }
        }
        let stationary = gth_stationary(&transition)
            .ok_or_else(|| Error::InvalidSource("transition matrix is reducible".into()))?;
        for j in 0..n {
            let flow: f64 = (0..n).map(|i| stationary[i] * transition[i][j]).sum();
            if (flow - stationary[j]).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidSource(
                    "stationary distribution failed the fixed-point check".into(),
                ));
            }
        }
        let mut by_symbol: [Vec<(usize, usize, f64)>; 2] = [Vec::new(), Vec::new()];
        for e in &edges {
            by_symbol[e.symbol as usize].push((e.from, e.to, e.prob));
        }
        Ok(HiddenMarkovSource {
            names,
            edges,
            transition,
            stationary,
            by_symbol,
        })
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Total transition probability from `from` to `to`, over all labels.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transition[from][to]
    }

    pub fn transition_matrix(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Label of the edge `from -> to`, if exactly one label is used on it.
    pub fn emission(&self, from: usize, to: usize) -> Option<Symbol> {
        let mut labels = self
            .edges
            .iter()
            .filter(|e| e.from == from && e.to == to)
            .map(|e| e.symbol);
        let first = labels.next()?;
        labels.all(|s| s == first).then_some(first)
    }

    /// Each (state, symbol) pair determines at most one successor.
    pub fn is_unifilar(&self) -> bool {
        (0..self.num_states()).all(|s| {
            (0..2u8).all(|a| {
                self.edges
                    .iter()
                    .filter(|e| e.from == s && e.symbol == a)
                    .count()
                    <= 1
            })
        })
    }

    /// Unnormalised forward step: `out = v · T^(a)`.
    fn forward(&self, v: &[f64], a: Symbol, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for &(from, to, p) in &self.by_symbol[a as usize] {
            out[to] += v[from] * p;
        }
    }

    /// Load a source from the plain-text format (see [`HiddenMarkovSource::parse`]).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Parse {
            line: 0,
            message: format!("cannot read {}: {e}", path.as_ref().display()),
        })?;
        Self::parse(&text)
    }

    /// Parse the plain-text source format:
    ///
    /// ```text
    /// # comment
    /// states A B
    /// edge A B 1 1        # from to probability symbol
    /// edge B A 1/2 1
    /// edge B B 1/2 0
    /// ```
    ///
    /// Probabilities may be decimals or fractions `p/q`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut names: Option<Vec<String>> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let perr = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            match fields[0] {
                "states" => {
                    if names.is_some() {
                        return Err(perr("duplicate 'states' line".into()));
                    }
                    if fields.len() < 2 {
                        return Err(perr("'states' needs at least one name".into()));
                    }
                    let list: Vec<String> = fields[1..].iter().map(|s| s.to_string()).collect();
                    for (i, n) in list.iter().enumerate() {
                        if list[..i].contains(n) {
                            return Err(perr(format!("duplicate state name {n:?}")));
                        }
                    }
                    names = Some(list);
                }
                "edge" => {
                    let names = names
                        .as_ref()
                        .ok_or_else(|| perr("'edge' before 'states'".into()))?;
                    if fields.len() != 5 {
                        return Err(perr(
                            "expected 'edge <from> <to> <probability> <symbol>'".into(),
                        ));
                    }
                    let lookup = |n: &str| {
                        names
                            .iter()
                            .position(|s| s == n)
                            .ok_or_else(|| perr(format!("unknown state {n:?}")))
                    };
                    let from = lookup(fields[1])?;
                    let to = lookup(fields[2])?;
                    let prob = parse_probability(fields[3]).map_err(perr)?;
                    let symbol = match fields[4] {
                        "0" => 0,
                        "1" => 1,
                        other => return Err(perr(format!("symbol must be 0 or 1, got {other:?}"))),
                    };
                    edges.push(Edge {
                        from,
                        to,
                        prob,
                        symbol,
                    });
                }
                other => return Err(perr(format!("unknown directive {other:?}"))),
            }
        }
        let names = names.ok_or(Error::Parse {
            line: 0,
            message: "missing 'states' line".into(),
        })?;
        HiddenMarkovSource::new(names, edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "states {}", self.names.join(" "));
        for e in &self.edges {
            let _ = writeln!(
                out,
                "edge {} {} {} {}",
                self.names[e.from], self.names[e.to], e.prob, e.symbol
            );
        }
        out
    }
}

fn parse_probability(s: &str) -> std::result::Result<f64, String> {
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let den: f64 = den
                .parse()
                .map_err(|_| format!("bad denominator in {s:?}"))?;
            num / den
        }
        None => s.parse().map_err(|_| format!("bad probability {s:?}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("bad probability {s:?}"))
    }
}

/// The even process: two hidden states, where state 1 must return to
/// state 2 and state 2 flips a fair coin between staying (emitting 0) and
/// leaving for state 1 (emitting 1). Observed 1-blocks between 0s have even
/// length.
pub fn build_even_process() -> HiddenMarkovSource {
    let names = vec!["1".to_string(), "2".to_string()];
    let edges = vec![
        Edge {
            from: 0,
            to: 1,
            prob: 1.0,
            symbol: 1,
        },
        Edge {
            from: 1,
            to: 0,
            prob: 0.5,
            symbol: 1,
        },
        Edge {
            from: 1,
            to: 1,
            prob: 0.5,
            symbol: 0,
        },
    ];
    HiddenMarkovSource::new(names, edges).expect("even process is well formed")
}

/// Single-state machine emitting i.i.d. Bernoulli(`p1`) symbols.
pub fn build_bernoulli_source(p1: f64) -> Result<HiddenMarkovSource> {
    let mut edges = Vec::new();
    if p1 < 1.0 {
        edges.push(Edge {
            from: 0,
            to: 0,
            prob: 1.0 - p1,
            symbol: 0,
        });
    }
    if p1 > 0.0 {
        edges.push(Edge {
            from: 0,
            to: 0,
            prob: p1,
            symbol: 1,
        });
    }
    HiddenMarkovSource::new(vec!["s".to_string()], edges)
}

/// Posterior over the hidden state given the observed prefix, i.e. the
/// distribution of the state the next transition starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    dist: Vec<f64>,
    scratch: Vec<f64>,
}

impl BeliefState {
    pub fn initial(source: &HiddenMarkovSource) -> Self {
        BeliefState {
            dist: source.stationary().to_vec(),
            scratch: vec![0.0; source.num_states()],
        }
    }

    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    pub fn next_dist(&self, source: &HiddenMarkovSource) -> BinaryDist {
        let mut p = [0.0; 2];
        for (a, slot) in p.iter_mut().enumerate() {
            *slot = source.by_symbol[a]
                .iter()
                .map(|&(from, _, prob)| self.dist[from] * prob)
                .sum();
        }
        let total = p[0] + p[1];
        BinaryDist([p[0] / total, p[1] / total])
    }

    /// Condition on the next symbol; returns its conditional probability.
    /// The belief is left untouched when that probability is zero.
    pub fn observe(&mut self, source: &HiddenMarkovSource, a: Symbol) -> f64 {
        source.forward(&self.dist, a, &mut self.scratch);
        let total: f64 = self.scratch.iter().sum();
        if total > 0.0 {
            for (d, s) in self.dist.iter_mut().zip(&self.scratch) {
                *d = s / total;
            }
        }
        total
    }
}

/// `P(X_{t+1} = · | X_1^t = prefix)` together with the belief after the prefix.
pub fn conditional_next_dist(
    source: &HiddenMarkovSource,
    prefix: &[Symbol],
) -> Result<(BinaryDist, BeliefState)> {
    check_symbols(prefix)?;
    let mut belief = BeliefState::initial(source);
    for (i, &a) in prefix.iter().enumerate() {
        if belief.observe(source, a) <= 0.0 {
            return Err(Error::ImpossiblePrefix { position: i });
        }
    }
    Ok((belief.next_dist(source), belief))
}

/// log₂ P(X_1^t = x); `-inf` for impossible sequences.
pub fn path_log_prob(source: &HiddenMarkovSource, x: &[Symbol]) -> f64 {
    *path_log_prob_trajectory(source, x)
        .last()
        .expect("trajectory has at least one entry")
}

/// Running values of log₂ P(X_1^n = x_1^n) for n = 0..=t. Entries after the
/// first impossible symbol are `-inf`.
pub fn path_log_prob_trajectory(source: &HiddenMarkovSource, x: &[Symbol]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push(0.0);
    let mut belief = BeliefState::initial(source);
    let mut acc = 0.0;
    for &a in x {
        if acc == f64::NEG_INFINITY {
            out.push(acc);
            continue;
        }
        let p = belief.observe(source, a);
        acc = if p > 0.0 {
            acc + p.log2()
        } else {
            f64::NEG_INFINITY
        };
        out.push(acc);
    }
    out
}

/// Sample `t` symbols with the hidden start state drawn from the stationary
/// distribution. Deterministic given `seed`.
pub fn sample_path(source: &HiddenMarkovSource, t: usize, seed: u64) -> Vec<Symbol> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_path_with(source, t, &mut rng)
}

pub fn sample_path_with<R: Rng + ?Sized>(
    source: &HiddenMarkovSource,
    t: usize,
    rng: &mut R,
) -> Vec<Symbol> {
    let mut out = Vec::with_capacity(t);
    if t == 0 {
        return out;
    }
    let mut state = pick(rng, source.stationary().iter().copied());
    let outgoing: Vec<Vec<&Edge>> = (0..source.num_states())
        .map(|s| source.edges.iter().filter(|e| e.from == s).collect())
        .collect();
    for _ in 0..t {
        let row = &outgoing[state];
        let e = row[pick(rng, row.iter().map(|e| e.prob))];
        out.push(e.symbol);
        state = e.to;
    }
    out
}

fn pick<R: Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Exact distribution of length-`k` blocks, indexed by [`crate::symbols::block_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDistribution {
    k: usize,
    probs: Vec<f64>,
}

impl BlockDistribution {
    pub fn new(k: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), 1 << k);
        BlockDistribution { k, probs }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn prob(&self, block: &[Symbol]) -> f64 {
        assert_eq!(block.len(), self.k);
        self.probs[crate::symbols::block_index(block)]
    }

    /// Marginal over the first `k - 1` symbols.
    pub fn drop_last(&self) -> BlockDistribution {
        let probs = self.probs.chunks(2).map(|c| c[0] + c[1]).collect();
        BlockDistribution {
            k: self.k - 1,
            probs,
        }
    }

    /// Marginal over the last `k - 1` symbols.
    pub fn drop_first(&self) -> BlockDistribution {
        let half = self.probs.len() / 2;
        let probs = (0..half)
            .map(|i| self.probs[i] + self.probs[i + half])
            .collect();
        BlockDistribution {
            k: self.k - 1,
            probs,
        }
    }

    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    /// L1 distance Σ |P(w) − Q(w)|.
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        self.probs
            .iter()
            .zip(other)
            .map(|(p, q)| (p - q).abs())
            .sum()
    }
}

pub fn block_distribution(source: &HiddenMarkovSource, k: usize) -> Result<BlockDistribution> {
    if k == 0 || k > MAX_BLOCK_LEN {
        return Err(Error::BlockLengthOutOfRange {
            k,
            max: MAX_BLOCK_LEN,
        });
    }
    Ok(block_distribution_unchecked(source, k))
}

fn block_distribution_unchecked(source: &HiddenMarkovSource, k: usize) -> BlockDistribution {
    let n = source.num_states();
    // Forward vectors of every prefix at the current depth, flattened.
    let mut level: Vec<f64> = source.stationary().to_vec();
    for _ in 0..k {
        let mut next = vec![0.0; level.len() * 2];
        for (w, v) in level.chunks(n).enumerate() {
            for a in 0..2u8 {
                let start = (2 * w + a as usize) * n;
                source.forward(v, a, &mut next[start..start + n]);
            }
        }
        level = next;
    }
    let probs = level.chunks(n).map(|v| v.iter().sum()).collect();
    BlockDistribution { k, probs }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRate {
    /// Σ_s π(s) H(outgoing edges of s); only for unifilar presentations.
    pub closed_form: Option<f64>,
    /// `block_estimates[k] = H(P^(k+1)) − H(P^(k))` for k = 0..=12.
    pub block_estimates: Vec<f64>,
}

impl EntropyRate {
    pub fn is_exact(&self) -> bool {
        self.closed_form.is_some()
    }

    /// Closed form when available, otherwise the deepest block estimate.
    pub fn value(&self) -> f64 {
        self.closed_form
            .unwrap_or_else(|| *self.block_estimates.last().expect("non-empty"))
    }
}

/// Entropy rate in bits per symbol.
pub fn entropy_rate(source: &HiddenMarkovSource) -> EntropyRate {
    let closed_form = source.is_unifilar().then(|| {
        (0..source.num_states())
            .map(|s| {
                let out: Vec<f64> = source
                    .edges
                    .iter()
                    .filter(|e| e.from == s)
                    .map(|e| e.prob)
                    .collect();
                source.stationary()[s] * entropy_bits(&out)
            })
            .sum()
    });
    let mut block_entropies = vec![0.0];
    for k in 1..=ENTROPY_BLOCK_DEPTH + 1 {
        block_entropies.push(block_distribution_unchecked(source, k).entropy_bits());
    }
    let block_estimates = block_entropies.windows(2).map(|w| w[1] - w[0]).collect();
    EntropyRate {
        closed_form,
        block_estimates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::parse_bits;

    #[test]
    fn even_process_matches_figure() {
        let even = build_even_process();
        assert_eq!(even.transition(0, 0), 0.0);
        assert_eq!(even.transition(0, 1), 1.0);
        assert_eq!(even.transition(1, 0), 0.5);
        assert_eq!(even.transition(1, 1), 0.5);
        assert!((even.stationary()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((even.stationary()[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(even.emission(1, 1), Some(0));
        assert_eq!(even.emission(0, 1), Some(1));
        assert_eq!(even.emission(1, 0), Some(1));
        assert!(even.is_unifilar());
    }

    #[test]
    fn next_symbol_distributions() {
        let even = build_even_process();
        let (d, _) = conditional_next_dist(&even, &[]).unwrap();
        assert!((d.p1() - 2.0 / 3.0).abs() < 1e-15);
        let (d, belief) = conditional_next_dist(&even, &[0]).unwrap();
        assert!((d.p1() - 0.5).abs() < 1e-15);
        assert_eq!(belief.dist(), &[0.0, 1.0]);
        let err = conditional_next_dist(&even, &parse_bits("010").unwrap()).unwrap_err();
        assert_eq!(err, Error::ImpossiblePrefix { position: 2 });
    }

    #[test]
    fn path_probabilities() {
        let even = build_even_process();
        assert!((path_log_prob(&even, &[0]) - (1.0f64 / 3.0).log2()).abs() < 1e-12);
        assert_eq!(
            path_log_prob(&even, &parse_bits("010").unwrap()),
            f64::NEG_INFINITY
        );
        assert_eq!(path_log_prob(&even, &[]), 0.0);
    }

    #[test]
    fn block_length_bounds() {
        let even = build_even_process();
        assert!(block_distribution(&even, 0).is_err());
        assert!(block_distribution(&even, 21).is_err());
        let b1 = block_distribution(&even, 1).unwrap();
        assert!((b1.get(0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((b1.get(1) - 2.0 / 3.0).abs() < 1e-15);
        let b3 = block_distribution(&even, 3).unwrap();
        assert_eq!(b3.prob(&[0, 1, 0]), 0.0);
    }

    #[test]
    fn entropy_rates() {
        let even = build_even_process();
        let h = entropy_rate(&even);
        assert!((h.closed_form.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let coin = build_bernoulli_source(0.5).unwrap();
        assert!((entropy_rate(&coin).closed_form.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_unifilar_source_reports_estimate_only() {
        // Two edges out of A both emit 1.
        let src =
            HiddenMarkovSource::parse("states A B\nedge A A 1/2 1\nedge A B 1/2 1\nedge B A 1 0\n")
                .unwrap();
        assert!(!src.is_unifilar());
        let h = entropy_rate(&src);
        assert!(!h.is_exact());
        assert!(h.value() > 0.0);
    }

    #[test]
    fn text_format_round_trip() {
        let even = build_even_process();
        let back = HiddenMarkovSource::parse(&even.to_text()).unwrap();
        assert_eq!(back.edges(), even.edges());
        assert_eq!(back.stationary(), even.stationary());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = HiddenMarkovSource::parse("states A\nedge A B 1 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = HiddenMarkovSource::parse("states A\nedge A A 0.4 1\n").unwrap_err();
        assert!(matches!(err, Error::InvalidSource(_)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let even = build_even_process();
        assert!(sample_path(&even, 0, 5).is_empty());
        assert_eq!(sample_path(&even, 100, 7), sample_path(&even, 100, 7));
        assert_ne!(sample_path(&even, 100, 7), sample_path(&even, 100, 8));
    }
}
