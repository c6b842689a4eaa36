use sofic_bayes::process::build_bernoulli_source;
use sofic_bayes::symbols::index_block;
use sofic_bayes::{
    block_distribution, build_even_process, conditional_next_dist, entropy_rate, path_log_prob,
};

fn all_blocks(t: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..1usize << t).map(move |i| index_block(i, t))
}

/// Zero-bounded run of 1s with odd length.
fn has_odd_bounded_run(x: &[u8]) -> bool {
    let s: String = x.iter().map(|&a| if a == 1 { '1' } else { '0' }).collect();
    let inner = s.trim_start_matches('1');
    let Some(last_zero) = inner.rfind('0') else {
        return false;
    };
    inner[..=last_zero].split('0').any(|run| run.len() % 2 == 1)
}

#[test]
fn even_stationary_and_entropy_rate() {
    let even = build_even_process();
    let pi = even.stationary();
    assert!((pi[0] - 1.0 / 3.0).abs() <= 1e-12 && (pi[1] - 2.0 / 3.0).abs() <= 1e-12);
    // One state branches 1/2-1/2, the other is deterministic.
    let oracle = pi
        .iter()
        .enumerate()
        .map(|(s, &w)| {
            let row: Vec<f64> = (0..2)
                .map(|j| even.transition(s, j))
                .filter(|&p| p > 0.0)
                .collect();
            w * row.iter().map(|p| -p * p.log2()).sum::<f64>()
        })
        .sum::<f64>();
    let rate = entropy_rate(&even);
    assert!(rate.is_exact());
    assert!((rate.value() - 2.0 / 3.0).abs() <= 1e-12);
    assert!((oracle - 2.0 / 3.0).abs() <= 1e-12);
    let h12 = *rate.block_estimates.last().unwrap();
    assert!((h12 - 2.0 / 3.0).abs() <= 0.02, "h12 = {h12}");
}

#[test]
fn bernoulli_entropy_rate() {
    let p: f64 = 0.3;
    let src = build_bernoulli_source(p).unwrap();
    let h = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
    assert!((entropy_rate(&src).value() - h).abs() < 1e-12);
}

#[test]
fn support_law_up_to_14() {
    let even = build_even_process();
    assert_eq!(path_log_prob(&even, &[0, 1, 0]), f64::NEG_INFINITY);
    for t in 1..=14 {
        for x in all_blocks(t) {
            let impossible = path_log_prob(&even, &x) == f64::NEG_INFINITY;
            assert_eq!(impossible, has_odd_bounded_run(&x), "{x:?}");
        }
    }
}

#[test]
fn source_normalises_up_to_12() {
    let even = build_even_process();
    for t in 1..=12 {
        let total: f64 = all_blocks(t).map(|x| path_log_prob(&even, &x).exp2()).sum();
        assert!((total - 1.0).abs() <= 1e-9, "t={t}: {total}");
    }
}

#[test]
fn chain_rule_over_conditionals() {
    let even = build_even_process();
    for x in all_blocks(10).filter(|x| path_log_prob(&even, x).is_finite()) {
        let by_chain: f64 = (0..x.len())
            .map(|i| {
                conditional_next_dist(&even, &x[..i])
                    .unwrap()
                    .0
                    .p(x[i])
                    .log2()
            })
            .sum();
        assert!((by_chain - path_log_prob(&even, &x)).abs() < 1e-12);
    }
}

#[test]
fn block_marginals_are_consistent_and_stationary() {
    let even = build_even_process();
    for k in 2..=10 {
        let big = block_distribution(&even, k).unwrap();
        let small = block_distribution(&even, k - 1).unwrap();
        for (a, b) in big.drop_last().probs().iter().zip(small.probs()) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in big.drop_first().probs().iter().zip(small.probs()) {
            assert!((a - b).abs() < 1e-14);
        }
        for (i, x) in all_blocks(k).enumerate() {
            assert!((big.get(i) - path_log_prob(&even, &x).exp2()).abs() < 1e-14);
        }
    }
}
