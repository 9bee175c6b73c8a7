use darepc_core::contract::{
    draw_samples, empirical_conformance, fit_radius, learn_contract, pinball_loss, required_samples, EnvDomain, FeatureMap,
    LearnParams, SamplerSpec,
};
use darepc_core::geometry::HyperRect;
use darepc_core::rng::{self, tag};
use darepc_core::systems::{hash_quantized, unit_noise};
use proptest::prelude::*;

#[test]
fn hoeffding_sample_counts() {
    assert_eq!(required_samples(0.01, 0.001).unwrap(), 34539);
    assert!([5756, 5757].contains(&required_samples(0.02, 0.01).unwrap()));
    assert!(required_samples(0.0, 0.1).is_err());
    assert!(required_samples(0.1, 1.0).is_err());
}

fn brute_constant(r: &[f64], tau: f64) -> f64 {
    r.iter().map(|&c| pinball_loss(tau, r, &vec![c; r.len()])).fold(f64::INFINITY, f64::min)
}

#[test]
fn constant_fits_match_brute_force_on_fifty_datasets() {
    for k in 0..50u64 {
        let mut g = rng::stream(k, tag::MONTE_CARLO, 0);
        let n = 20 + (rng::unit(&mut g) * 180.0) as usize;
        let tau = 0.05 + 0.9 * rng::unit(&mut g);
        let scale = 0.1 + 10.0 * rng::unit(&mut g);
        let r: Vec<f64> = (0..n).map(|_| scale * rng::unit(&mut g).powi(2)).collect();
        let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let (m, _) = fit_radius(&xr, &r, tau, FeatureMap::Constant).unwrap();
        let got = pinball_loss(tau, &r, &vec![m.intercept; n]);
        let best = brute_constant(&r, tau);
        assert!(got <= best * (1.0 + 1e-9) + 1e-12, "dataset {k}: loss {got} vs oracle {best}");
        let below = r.iter().filter(|&&v| v <= m.intercept + 1e-12).count() as f64 / n as f64;
        assert!(below + 1e-12 >= tau, "dataset {k}: coverage {below} below {tau}");
    }
}

/// Best line through two of the points; a pinball minimizer interpolates
/// at least as many points as it has parameters.
fn brute_line(x: &[f64], r: &[f64], tau: f64) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if (x[i] - x[j]).abs() < 1e-12 {
                continue;
            }
            let b = (r[j] - r[i]) / (x[j] - x[i]);
            let a = r[i] - b * x[i];
            let fit: Vec<f64> = x.iter().map(|v| a + b * v).collect();
            best = best.min(pinball_loss(tau, r, &fit));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn affine_fits_match_vertex_enumeration(
        pts in prop::collection::vec((0.0f64..10.0, 0.0f64..5.0), 8..40),
        tau in 0.1f64..0.95,
    ) {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let r: Vec<f64> = pts.iter().map(|p| p.1 + 0.3 * p.0).collect();
        let xs: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
        let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let (m, _) = fit_radius(&xr, &r, tau, FeatureMap::Affine).unwrap();
        let fit: Vec<f64> = x.iter().map(|v| m.intercept + m.coeffs[0] * v).collect();
        let got = pinball_loss(tau, &r, &fit);
        let best = brute_line(&x, &r, tau);
        prop_assert!(got <= best * (1.0 + 1e-7) + 1e-9, "loss {} vs oracle {}", got, best);
    }
}

/// Heteroscedastic toy observer: `y = x0 + 0.1 (1 + x1 + e) w`.
fn toy(x: &[f64], e: &[f64]) -> Vec<f64> {
    let w = unit_noise(hash_quantized(11, &[x[0], x[1], e[0]], &[1e-6, 1e-6, 1e-6]));
    vec![x[0] + 0.1 * (1.0 + x[1] + e[0]) * w]
}

#[test]
fn learned_contract_meets_its_targets() {
    let dom = HyperRect::from_bounds(&[(0.0, 1.0), (0.0, 2.0)]).unwrap();
    let env = HyperRect::from_bounds(&[(0.0, 1.0)]).unwrap();
    let params = LearnParams::new(0.8, 0.03, 0.01);
    let c = learn_contract(&dom, EnvDomain::Box(&env), &toy, &params, &SamplerSpec::uniform(dom.clone(), 3)).unwrap();
    assert_eq!(c.calibration.n_samples, required_samples(0.03, 0.01).unwrap());
    assert!(c.calibration.empirical_conformance >= 0.83, "{}", c.calibration.empirical_conformance);
    let held = draw_samples(EnvDomain::Box(&env), &toy, &SamplerSpec::uniform(dom.clone(), 99), 20_000).unwrap();
    let p = empirical_conformance(&c, &held);
    assert!(p >= 0.8, "held-out {p}");
    // The radius grows with x1, as the noise does.
    assert!(c.radius[0].coeffs[1] > 0.0);
}

#[test]
fn invalid_targets_are_rejected() {
    let dom = HyperRect::from_bounds(&[(0.0, 1.0), (0.0, 2.0)]).unwrap();
    let env = HyperRect::from_bounds(&[(0.0, 1.0)]).unwrap();
    for (pr, eps) in [(0.99, 0.02), (0.0, 0.01), (0.9, 0.0)] {
        let params = LearnParams::new(pr, eps, 0.01);
        assert!(learn_contract(&dom, EnvDomain::Box(&env), &toy, &params, &SamplerSpec::uniform(dom.clone(), 0)).is_err());
    }
}
