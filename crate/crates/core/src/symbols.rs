//! Binary alphabet helpers and next-symbol distributions.

use crate::error::{Error, Result};

/// A symbol of the binary alphabet, always 0 or 1.
pub type Symbol = u8;

/// Parse a string of '0'/'1' characters into symbols. Whitespace is ignored.
pub fn parse_bits(s: &str) -> Result<Vec<Symbol>> {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Parse {
                line: 0,
                message: format!("unexpected character {other:?} in bit string"),
            }),
        })
        .collect()
}

pub fn format_bits(x: &[Symbol]) -> String {
    x.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

/// Encode a block as an integer with the first symbol in the most
/// significant position.
pub fn block_index(x: &[Symbol]) -> usize {
    x.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

/// Inverse of [`block_index`] for a block of length `k`.
pub fn index_block(mut index: usize, k: usize) -> Vec<Symbol> {
    let mut out = vec![0u8; k];
    for slot in out.iter_mut().rev() {
        *slot = (index & 1) as u8;
        index >>= 1;
    }
    out
}

pub(crate) fn check_symbols(x: &[Symbol]) -> Result<()> {
    match x.iter().find(|&&b| b > 1) {
        Some(&b) => Err(Error::InvalidSymbol(b)),
        None => Ok(()),
    }
}

/// P ln(P/Q) − P + Q = Q·φ(P/Q − 1), with φ(u) = (1+u)ln(1+u) − u taken
/// from its alternating series near u = 0.
fn kl_term(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return q;
    }
    if q == 0.0 {
        return f64::INFINITY;
    }
    let u = (p - q) / q;
    let phi = if u.abs() < 0.1 {
        let mut sum = 0.0;
        let mut power = u * u;
        for n in 2..24 {
            let n = n as f64;
            sum += power / (n * (n - 1.0));
            power *= -u;
        }
        sum
    } else {
        (1.0 + u) * u.ln_1p() - u
    };
    q * phi
}

/// A probability distribution over the binary alphabet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryDist(pub [f64; 2]);

impl BinaryDist {
    pub fn from_p1(p1: f64) -> Self {
        BinaryDist([1.0 - p1, p1])
    }

    pub fn p(&self, a: Symbol) -> f64 {
        self.0[a as usize]
    }

    pub fn p1(&self) -> f64 {
        self.0[1]
    }

    /// Squared Hellinger distance, Σ_a (√P(a) − √Q(a))², evaluated as
    /// Σ_a (P(a) − Q(a))² / (√P(a) + √Q(a))² to avoid cancellation.
    pub fn hellinger_sq(&self, other: &BinaryDist) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&p, &q)| {
                let s = p.sqrt() + q.sqrt();
                if s == 0.0 {
                    0.0
                } else {
                    ((p - q) / s).powi(2)
                }
            })
            .sum()
    }

    /// Total variation as the L1 distance Σ_a |P(a) − Q(a)|.
    pub fn total_variation(&self, other: &BinaryDist) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(p, q)| (p - q).abs())
            .sum()
    }

    /// Kullback-Leibler divergence D(self ‖ other) in nats, summed as
    /// Σ_a [P ln(P/Q) − P + Q] so every term is non-negative.
    pub fn kl_nats(&self, other: &BinaryDist) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&p, &q)| kl_term(p, q))
            .sum()
    }

    /// Kullback-Leibler divergence D(self ‖ other) in bits.
    pub fn kl_bits(&self, other: &BinaryDist) -> f64 {
        self.kl_nats(other) / std::f64::consts::LN_2
    }

    /// Shannon entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.0)
    }
}

/// Shannon entropy in bits of a (not necessarily binary) distribution.
pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}
