use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sofic_bayes::conjugate::ConjugateEngine;
use sofic_bayes::{build_even_process, draw_prior_ensemble, sample_path, BeliefState, PriorSpec};

fn prior() -> PriorSpec {
    PriorSpec::geometric(0.5, Some(6), 1.0).unwrap()
}

#[test]
fn sequential_updating_equals_batch_likelihood() {
    let even = build_even_process();
    let path = sample_path(&even, 500, 3);
    let mut ens = draw_prior_ensemble(&prior(), 200, 9);
    for &a in &path {
        ens.update(a);
    }
    let ll: Vec<f64> = ens
        .members()
        .iter()
        .map(|m| m.log_likelihood(&path))
        .collect();
    let top = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = ll.iter().map(|l| (l - top).exp2()).sum();
    for (w, l) in ens.weights().iter().zip(&ll) {
        assert!((w - (l - top).exp2() / z).abs() < 1e-12);
    }
}

#[test]
fn bayes_equals_replicator_and_stays_normalised() {
    let even = build_even_process();
    let path = sample_path(&even, 1000, 5);
    let mut bayes = draw_prior_ensemble(&prior(), 1000, 6);
    let mut repl = bayes.clone();
    for &a in &path {
        let fitness = repl.likelihoods(a);
        repl.replicator_step(&fitness).unwrap();
        repl.advance_history(a);
        bayes.update(a);
        let (wb, wr) = (bayes.weights(), repl.weights());
        for (x, y) in wb.iter().zip(&wr) {
            assert!((x - y).abs() <= 1e-15);
        }
        assert!((wb.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn mixture_hellinger_is_below_average_member_hellinger() {
    let even = build_even_process();
    let path = sample_path(&even, 300, 8);
    let mut ens = draw_prior_ensemble(&prior(), 300, 2);
    let mut belief = BeliefState::initial(&even);
    for &a in &path {
        let truth = belief.next_dist(&even);
        let mixture = truth.hellinger_sq(&ens.predictive_dist());
        let average: f64 = ens
            .weights()
            .iter()
            .zip(ens.member_predictions())
            .map(|(w, m)| w * truth.hellinger_sq(&m))
            .sum();
        assert!(mixture <= average + 1e-12);
        ens.update(a);
        belief.observe(&even, a);
    }
}

/// Orders 0 and 1 only: with more parameters the prior draws near the
/// posterior mode at t = 200 are too few for a 1% Monte Carlo estimate.
#[test]
fn ensemble_predictive_approaches_conjugate_predictive() {
    let even = build_even_process();
    let spec = PriorSpec::geometric(0.5, Some(1), 1.0).unwrap();
    for seed in 0..4 {
        let path = sample_path(&even, 200, seed);
        let mut ens = draw_prior_ensemble(&spec, 100_000, 100 + seed);
        let mut engine = ConjugateEngine::new(&spec, 1).unwrap();
        for &a in &path {
            ens.update(a);
            engine.update(a);
        }
        let (mc, exact) = (ens.predictive_dist().p1(), engine.predictive().p1());
        assert!(
            (mc - exact).abs() / exact < 0.01,
            "ensemble {mc}, conjugate {exact}"
        );
    }
}

#[test]
fn prior_order_histogram_within_three_sigma() {
    let spec = prior();
    let n = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut counts = [0usize; 7];
    for _ in 0..n {
        counts[spec.sample_order(&mut rng)] += 1;
    }
    for (k, w) in spec.order_weights().iter().enumerate() {
        let expected = n as f64 * w;
        let sigma = (n as f64 * w * (1.0 - w)).sqrt();
        assert!(
            (counts[k] as f64 - expected).abs() <= 3.0 * sigma,
            "order {k}"
        );
    }
}
