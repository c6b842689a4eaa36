//! Invariant distributions of finite Markov chains.
//!
//! Dense chains use the Grassmann–Taksar–Heyman elimination, which involves
//! no subtractions and stays accurate even for nearly decomposable chains.
//! The context-shift chains of high-order hypotheses are sparse (two
//! successors per state) and fall back to power iteration.

/// Stationary distribution of a dense row-stochastic matrix. Returns `None`
/// when the chain is not irreducible enough for elimination to proceed.
pub fn gth_stationary(matrix: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = matrix.len();
    if n == 0 {
        return None;
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for k in (1..n).rev() {
        let s: f64 = a[k][..k].iter().sum();
        if s <= 0.0 {
            return None;
        }
        for i in 0..k {
            a[i][k] /= s;
        }
        for i in 0..k {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            let (head, tail) = a.split_at_mut(k);
            let row_k = &tail[0];
            for j in 0..k {
                head[i][j] += aik * row_k[j];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for j in 1..n {
        pi[j] = (0..j).map(|i| pi[i] * a[i][j]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    Some(pi)
}

const DENSE_LIMIT: usize = 1 << 10;

/// Stationary distribution of the context-shift chain of an order-`k` binary
/// chain: state `w` moves to `((w << 1) | a) mod 2^k` with probability
/// `p1[w]` for `a = 1`.
pub fn shift_chain_stationary(order: usize, p1: &[f64]) -> Vec<f64> {
    let n = 1usize << order;
    if order == 0 {
        return vec![1.0];
    }
    let mask = n - 1;
    if n <= DENSE_LIMIT {
        let mut m = vec![vec![0.0; n]; n];
        for (w, row) in m.iter_mut().enumerate() {
            row[(w << 1) & mask] += 1.0 - p1[w];
            row[((w << 1) | 1) & mask] += p1[w];
        }
        if let Some(pi) = gth_stationary(&m) {
            return pi;
        }
    }
    power_iteration(order, p1)
}

fn power_iteration(order: usize, p1: &[f64]) -> Vec<f64> {
    let n = 1usize << order;
    let mask = n - 1;
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..1_000_000 {
        next.iter_mut().for_each(|v| *v = 0.0);
        for w in 0..n {
            next[(w << 1) & mask] += pi[w] * (1.0 - p1[w]);
            next[((w << 1) | 1) & mask] += pi[w] * p1[w];
        }
        let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if diff < 1e-15 {
            break;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    pi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(m: &[Vec<f64>], pi: &[f64]) -> f64 {
        (0..pi.len())
            .map(|j| ((0..pi.len()).map(|i| pi[i] * m[i][j]).sum::<f64>() - pi[j]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn two_state_chain() {
        let m = vec![vec![0.0, 1.0], vec![0.5, 0.5]];
        let pi = gth_stationary(&m).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let m = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(gth_stationary(&m).is_none());
    }

    #[test]
    fn dense_and_power_iteration_agree() {
        let p1: Vec<f64> = (0..16).map(|i| 0.1 + 0.05 * i as f64).collect();
        let dense = shift_chain_stationary(4, &p1);
        let power = power_iteration(4, &p1);
        for (a, b) in dense.iter().zip(&power) {
            assert!((a - b).abs() < 1e-12);
        }
        let n = 16;
        let mut m = vec![vec![0.0; n]; n];
        for w in 0..n {
            m[w][(w << 1) & 15] += 1.0 - p1[w];
            m[w][((w << 1) | 1) & 15] += p1[w];
        }
        assert!(residual(&m, &dense) < 1e-14);
    }
}
