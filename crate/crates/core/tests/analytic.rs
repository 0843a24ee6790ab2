use nalgebra::DMatrix;
use proptest::prelude::*;
use qosa_core::analytic::{analytic_indices, gaussian_indices, GaussianExponent, OutputMap};
use qosa_core::contrast::{ContrastKind, QuantileLevel};
use qosa_core::distributions::GaussianLaw;
use qosa_core::models::ModelSpec;
use qosa_core::rng::RandomStream;
use rand::Rng;

fn level(a: f64) -> QuantileLevel {
    QuantileLevel::new(a).unwrap()
}

fn pinball(a: f64) -> ContrastKind {
    ContrastKind::Pinball(level(a))
}

fn random_law(d: usize, seed: u64) -> (Vec<f64>, GaussianLaw) {
    let mut rng = RandomStream::new(seed).rng();
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.3;
    let mean = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let beta = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    (beta, GaussianLaw::new(mean, cov).unwrap())
}

#[test]
fn gaussian_qose_efficiency_up_to_eight_inputs() {
    for d in 1..=8 {
        for seed in 0..3 {
            let (beta, law) = random_law(d, 10 * d as u64 + seed);
            for map in [OutputMap::Identity, OutputMap::Exp] {
                let set = gaussian_indices(&GaussianExponent::from_law(&beta, &law).unwrap(), map, pinball(0.8)).unwrap();
                assert!((set.shapley.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn linear_indices_do_not_depend_on_level_or_location() {
    let (beta, law) = random_law(4, 3);
    let shifted = GaussianLaw::new(vec![5.0, -3.0, 0.0, 1.0], law.cov().clone()).unwrap();
    let base = analytic_indices(&ModelSpec::linear_gaussian(0.0, beta.clone(), law).unwrap(), pinball(0.05)).unwrap();
    for a in [0.5, 0.95] {
        let other = analytic_indices(&ModelSpec::linear_gaussian(7.5, beta.clone(), shifted.clone()).unwrap(), pinball(a)).unwrap();
        assert_eq!(base.first_order, other.first_order);
        assert_eq!(base.total, other.total);
        assert_eq!(base.shapley, other.shapley);
    }
}

#[test]
fn lognormal_indices_ignore_location() {
    let (beta, law) = random_law(3, 8);
    let shifted = GaussianLaw::new(vec![1.0, 2.0, 3.0], law.cov().clone()).unwrap();
    let a = analytic_indices(&ModelSpec::log_linear_gaussian(0.0, beta.clone(), law).unwrap(), pinball(0.3)).unwrap();
    let b = analytic_indices(&ModelSpec::log_linear_gaussian(-2.0, beta, shifted).unwrap(), pinball(0.3)).unwrap();
    assert_eq!(a.first_order, b.first_order);
    assert_eq!(a.shapley, b.shapley);
}

#[test]
fn permuting_inputs_permutes_indices() {
    let (beta, law) = random_law(3, 12);
    let perm = [2, 0, 1];
    let cov = law.cov();
    let pcov = DMatrix::from_fn(3, 3, |r, c| cov[(perm[r], perm[c])]);
    let pbeta: Vec<f64> = perm.iter().map(|&p| beta[p]).collect();
    let plaw = GaussianLaw::new(vec![0.0; 3], pcov).unwrap();
    let a = analytic_indices(&ModelSpec::log_linear_gaussian(0.0, beta, law).unwrap(), pinball(0.7)).unwrap();
    let b = analytic_indices(&ModelSpec::log_linear_gaussian(0.0, pbeta, plaw).unwrap(), pinball(0.7)).unwrap();
    for (r, &p) in perm.iter().enumerate() {
        assert!((b.first_order[r] - a.first_order[p]).abs() < 1e-12);
        assert!((b.total[r] - a.total[p]).abs() < 1e-12);
        assert!((b.shapley[r] - a.shapley[p]).abs() < 1e-12);
    }
}

#[test]
fn equal_spreads_share_equally() {
    let d = 5;
    let sd = [1.0, 2.0, 0.5, 4.0, 1.0];
    let cov = DMatrix::from_fn(d, d, |r, c| if r == c { sd[r] * sd[r] } else { 0.0 });
    let beta: Vec<f64> = sd.iter().map(|s| 3.0 / s).collect();
    let set = analytic_indices(&ModelSpec::linear_gaussian(0.0, beta, GaussianLaw::new(vec![0.0; d], cov).unwrap()).unwrap(), pinball(0.4)).unwrap();
    assert!(set.shapley.iter().all(|v| (v - 0.2).abs() < 1e-12));
}

#[test]
fn sandwich_on_two_input_grids() {
    for map in [OutputMap::Identity, OutputMap::Exp] {
        for ai in 1..20 {
            for ri in -20..=20 {
                let rho = ri as f64 / 20.0;
                let g = GaussianExponent::bivariate([1.0, 1.0], [1.0, 2.0], rho).unwrap();
                let set = gaussian_indices(&g, map, pinball(ai as f64 / 20.0)).unwrap();
                for i in 0..2 {
                    let (lo, hi) = (set.first_order[i].min(set.total[i]), set.first_order[i].max(set.total[i]));
                    assert!(lo - 1e-12 <= set.shapley[i] && set.shapley[i] <= hi + 1e-12, "{map:?} rho={rho}");
                }
            }
        }
    }
}

#[test]
fn independent_two_input_ordering() {
    for a in [0.1, 0.5, 0.9] {
        let set = gaussian_indices(&GaussianExponent::bivariate([1.0, 1.0], [1.0, 2.0], 0.0).unwrap(), OutputMap::Identity, pinball(a)).unwrap();
        for i in 0..2 {
            assert!(set.first_order[i] <= set.shapley[i] && set.shapley[i] <= set.total[i]);
        }
    }
}

proptest! {
    #[test]
    fn additive_gaussian_props(spreads in prop::collection::vec(0.05f64..5.0, 1..=6), a in 0.01f64..0.99) {
        let g = GaussianExponent::independent(&spreads).unwrap();
        for map in [OutputMap::Identity, OutputMap::Exp] {
            let set = gaussian_indices(&g, map, pinball(a)).unwrap();
            prop_assert!(set.first_order.iter().sum::<f64>() <= 1.0 + 1e-12);
            for i in 0..spreads.len() {
                prop_assert!(set.first_order[i] <= set.total[i] + 1e-12);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&set.first_order[i]));
            }
        }
    }

    #[test]
    fn product_scale_invariance(k in 0.1f64..10.0, a in 0.05f64..0.95) {
        let base = qosa_core::analytic::exponential_product_qosa(0.5, 2.0, level(a)).unwrap();
        let scaled = qosa_core::analytic::exponential_product_qosa(0.5 * k, 2.0, level(a)).unwrap();
        prop_assert!((base.1 - scaled.1).abs() < 1e-9);
    }
}

#[test]
fn product_total_index_at_low_levels() {
    // mpmath quadrature, 30 digits
    for (a, st) in [(0.01, 0.995711332117022907510296788713), (0.03, 0.987528804951392266214679198054), (0.96, 0.501393736593597571081142300534)] {
        let (_, got) = qosa_core::analytic::exponential_product_qosa(0.1, 1.0, level(a)).unwrap();
        assert!((got - st).abs() < 1e-12, "alpha={a}: {got}");
    }
}
