//! One-step diversity decomposition of the predictive divergence:
//! KL(P‖F_Π) = ⟨KL(P‖F_θ)⟩ − ⟨Σ_a P(a)·log₂(F_Π(a)/F_θ(a))⟩.

use sofic_bayes::{draw_prior_ensemble, BeliefState, BinaryDist};

use crate::context::{derive_seed, stream, Lab, Output};
use crate::record::{Check, Provenance, Table};
use crate::row;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub kl_mixture: f64,
    pub mean_member_kl: f64,
    pub diversity: f64,
}

impl Decomposition {
    pub fn residual(&self) -> f64 {
        (self.kl_mixture - (self.mean_member_kl - self.diversity)).abs()
    }
}

fn kl_bits(p: &BinaryDist, q: &BinaryDist) -> f64 {
    (0..2u8)
        .filter(|&a| p.p(a) > 0.0)
        .map(|a| p.p(a) * (p.p(a) / q.p(a)).log2())
        .sum()
}

/// Evaluate each term by direct summation over the binary alphabet.
pub fn decompose(truth: &BinaryDist, weights: &[f64], members: &[BinaryDist]) -> Decomposition {
    let mut mix = [0.0; 2];
    for (w, d) in weights.iter().zip(members) {
        mix[0] += w * d.p(0);
        mix[1] += w * d.p(1);
    }
    let mixture = BinaryDist(mix);
    let mut mean_member_kl = 0.0;
    let mut diversity = 0.0;
    for (w, d) in weights.iter().zip(members) {
        mean_member_kl += w * kl_bits(truth, d);
        diversity += w
            * (0..2u8)
                .filter(|&a| truth.p(a) > 0.0)
                .map(|a| truth.p(a) * (mixture.p(a) / d.p(a)).log2())
                .sum::<f64>();
    }
    Decomposition {
        kl_mixture: kl_bits(truth, &mixture),
        mean_member_kl,
        diversity,
    }
}

pub fn run(lab: &Lab, seed: u64) -> Output {
    let path = lab.path(seed);
    let source = lab.source();
    let mut ensemble = draw_prior_ensemble(
        &lab.prior,
        lab.cfg.members,
        derive_seed(seed, stream::ENSEMBLE),
    );
    let mut belief = BeliefState::initial(source);
    let mut table = Table::new(
        format!("diversity_seed{seed}.csv"),
        &[
            "t",
            "kl_mixture_bits",
            "mean_member_kl_bits",
            "diversity_bits",
            "residual_bits",
            "pass",
        ],
    );
    let tol = lab.cfg.tol.identity;
    let mut worst_residual = 0.0f64;
    let mut min_diversity = f64::INFINITY;
    for (t, &a) in path.iter().enumerate() {
        let d = decompose(
            &belief.next_dist(source),
            &ensemble.weights(),
            &ensemble.member_predictions(),
        );
        let r = d.residual();
        worst_residual = worst_residual.max(r);
        min_diversity = min_diversity.min(d.diversity);
        let ok = r <= tol && d.diversity >= -tol;
        table.push(row![t, d.kl_mixture, d.mean_member_kl, d.diversity, r, ok]);
        ensemble.update(a);
        belief.observe(source, a);
    }
    let checks = vec![
        Check::new(
            "diversity/identity-residual",
            seed,
            worst_residual,
            0.0,
            tol,
            worst_residual <= tol,
            Provenance::ClosedForm,
        ),
        Check::new(
            "diversity/term-nonnegative",
            seed,
            min_diversity,
            0.0,
            tol,
            min_diversity >= -tol,
            Provenance::ClosedForm,
        ),
    ];
    Output {
        tables: vec![table],
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_member_has_no_diversity() {
        let truth = BinaryDist::from_p1(2.0 / 3.0);
        let d = decompose(&truth, &[1.0], &[BinaryDist::from_p1(0.4)]);
        assert!(d.diversity.abs() < 1e-15);
        assert!(d.residual() < 1e-15);
    }

    #[test]
    fn identical_members_have_no_diversity() {
        let truth = BinaryDist([0.0, 1.0]);
        let m = BinaryDist::from_p1(0.7);
        let d = decompose(&truth, &[0.25, 0.75], &[m, m]);
        assert!(d.diversity.abs() < 1e-15);
    }

    #[test]
    fn mixed_members_satisfy_identity() {
        let truth = BinaryDist::from_p1(0.5);
        let members = [
            BinaryDist::from_p1(0.1),
            BinaryDist::from_p1(0.8),
            BinaryDist::from_p1(0.55),
        ];
        let d = decompose(&truth, &[0.2, 0.5, 0.3], &members);
        assert!(d.residual() < 1e-14);
        assert!(d.diversity > 0.0);
    }
}
