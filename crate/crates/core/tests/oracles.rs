//! Checks of the SC recursion and the profile estimators against
//! exhaustive enumeration of the joint distribution.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wom_polar::channel::binary_entropy;
use wom_polar::construction::{estimate_profile, exact_profile};
use wom_polar::polar::{polar_transform, sc_posterior, BitBlock, ProbPair};
use wom_polar::{ReadChannel, WomSourceModel};

/// `P(U_i = · | prefix)` by summing `Π_j prior_j(x_j)` over all `x` whose
/// transform starts with `prefix`.
fn brute_posterior(priors: &[ProbPair], prefix: &[u8]) -> Option<ProbPair> {
    let n = priors.len();
    let i = prefix.len();
    let mut mass = [0.0; 2];
    for code in 0..(1usize << n) {
        let x: Vec<u8> = (0..n).map(|j| ((code >> j) & 1) as u8).collect();
        let weight: f64 = x.iter().zip(priors).map(|(&b, p)| p.prob(b)).product();
        let u = polar_transform(&BitBlock::new(x).unwrap());
        if u.as_slice()[..i] == *prefix {
            mass[usize::from(u.as_slice()[i])] += weight;
        }
    }
    ProbPair::new(mass[0], mass[1]).ok()
}

fn random_pair(rng: &mut impl Rng) -> ProbPair {
    match rng.gen_range(0..6) {
        0 => ProbPair::certain(0),
        1 => ProbPair::certain(1),
        _ => ProbPair::new(rng.gen(), rng.gen()).unwrap(),
    }
}

#[test]
fn posterior_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in [2usize, 4, 8] {
        for _ in 0..200 {
            let priors: Vec<ProbPair> = (0..n).map(|_| random_pair(&mut rng)).collect();
            // Draw a prefix from the true law so it has positive probability.
            let i = rng.gen_range(0..n);
            let mut prefix = Vec::with_capacity(i);
            for _ in 0..i {
                let p = brute_posterior(&priors, &prefix).unwrap();
                prefix.push(u8::from(rng.gen::<f64>() < p.p1));
            }
            let expected = brute_posterior(&priors, &prefix).unwrap();
            let got = sc_posterior(&priors, &prefix).unwrap();
            assert!((got.p0 - expected.p0).abs() <= 1e-10, "n={n} prefix={prefix:?}");
            assert!((got.p1 - expected.p1).abs() <= 1e-10);
        }
    }
}

#[test]
fn posterior_example_from_state_model() {
    let model = WomSourceModel::new(0.5, 0.5).unwrap();
    let s = BitBlock::parse("1101").unwrap();
    let priors = model.leaf_priors_from_state(&s);
    let got = sc_posterior(&priors, &[0, 1]).unwrap();
    let expected = brute_posterior(&priors, &[0, 1]).unwrap();
    assert!((got.p0 - expected.p0).abs() < 1e-12);
}

/// `Σ_i E[H(U_i | ·, U^{i-1})]` over prefixes drawn from the true law.
fn expected_entropy_sum(priors: &[ProbPair]) -> f64 {
    fn walk(priors: &[ProbPair], prefix: &mut Vec<u8>, weight: f64) -> f64 {
        if prefix.len() == priors.len() || weight == 0.0 {
            return 0.0;
        }
        let p = brute_posterior(priors, prefix).unwrap();
        let mut total = weight * binary_entropy(p.p1);
        for bit in [0u8, 1] {
            let w = weight * p.prob(bit);
            if w > 0.0 {
                prefix.push(bit);
                total += walk(priors, prefix, w);
                prefix.pop();
            }
        }
        total
    }
    walk(priors, &mut Vec::new(), 1.0)
}

#[test]
fn entropy_chain_rule_is_preserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in [2usize, 4, 8] {
        for _ in 0..10 {
            let priors: Vec<ProbPair> = (0..n).map(|_| random_pair(&mut rng)).collect();
            let leaf_total: f64 = priors.iter().map(|p| binary_entropy(p.p1)).sum();
            assert!((expected_entropy_sum(&priors) - leaf_total).abs() < 1e-9);
        }
    }
}

#[test]
fn exact_state_profile_sums_to_conditional_entropy() {
    for (beta, gamma) in [(0.5, 0.5), (0.2, 0.7), (0.9, 0.1)] {
        let model = WomSourceModel::new(beta, gamma).unwrap();
        for n in [1usize, 2, 4, 8] {
            let p = exact_profile(&model, None, n).unwrap();
            assert!((p.total() - n as f64 * model.conditional_entropy()).abs() < 1e-10);
            assert!(p.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        let ch = ReadChannel::bsc(0.1).unwrap();
        let h_x_given_y = binary_entropy(model.p_x0()) - ch.mutual_info_xy(&model);
        let p = exact_profile(&model, Some(&ch), 8).unwrap();
        assert!((p.total() - 8.0 * h_x_given_y).abs() < 1e-10);
    }
}

#[test]
fn estimate_agrees_with_exact_at_small_n() {
    let model = WomSourceModel::new(0.4, 0.3).unwrap();
    let ch = ReadChannel::bac(0.05, 0.15).unwrap();
    for n in [2usize, 4, 8] {
        for channel in [None, Some(&ch)] {
            let exact = exact_profile(&model, channel, n).unwrap();
            let est = estimate_profile(&model, channel, n, 20_000, 5).unwrap();
            for i in 0..n {
                let tol = 5.0 * est.std_errors[i].max(1.0 / 20_000.0);
                assert!(
                    (est.values[i] - exact.values[i]).abs() <= tol,
                    "n={n} i={i} est={} exact={}",
                    est.values[i],
                    exact.values[i]
                );
            }
        }
    }
}

#[test]
fn single_cell_estimate_tracks_closed_form() {
    let model = WomSourceModel::new(0.5, 0.5).unwrap();
    let p = estimate_profile(&model, None, 1, 10_000, 3).unwrap();
    assert!((p.values[0] - 0.5).abs() <= 5.0 * p.std_errors[0]);
}

proptest! {
    #[test]
    fn transform_is_an_involution(k in 0u32..=12, seed in any::<u64>()) {
        let n = 1usize << k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = BitBlock::new((0..n).map(|_| rng.gen_range(0..=1u8)).collect()).unwrap();
        prop_assert_eq!(polar_transform(&polar_transform(&x)), x);
    }

    #[test]
    fn transform_is_linear(k in 0u32..=10, seed in any::<u64>()) {
        let n = 1usize << k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = BitBlock::new((0..n).map(|_| rng.gen_range(0..=1u8)).collect()).unwrap();
        let b = BitBlock::new((0..n).map(|_| rng.gen_range(0..=1u8)).collect()).unwrap();
        let lhs = polar_transform(&a.xor(&b).unwrap());
        let rhs = polar_transform(&a).xor(&polar_transform(&b)).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}
