use std::f64::consts::{E, PI, SQRT_2};

use statrs::function::gamma::gamma;

use super::jet::Jet;
use super::*;
use crate::families::{Interval, ParamValue};

type J = Jet<7>;

fn vf(s: &str) -> VarianceFunctionSpec {
    VarianceFunctionSpec::parse(s).unwrap()
}

/// `[D2..D6]` from a jet of `beta -> D(mu0 || mu(beta))` at `beta = 0`.
fn jet_divergence(d: J) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (i, o) in out.iter_mut().enumerate() {
        *o = d.derivative_at(i + 2);
    }
    out
}

fn assert_bundle_matches(family: &FamilySpec, mu0: f64, oracle: [f64; 5]) {
    let v = VarianceFunctionSpec::from_family(family).unwrap();
    let b = DerivativeBundle::at(&v, mu0).unwrap();
    let got = [b.d2, b.d3, b.d4, b.d5, b.d6];
    for k in 0..5 {
        let tol = 1e-9 * oracle[k].abs().max(1.0);
        assert!(
            (got[k] - oracle[k]).abs() < tol,
            "{} at mu0 = {mu0}: D{} = {} but the divergence expansion gives {}",
            family.name(),
            k + 2,
            got[k],
            oracle[k]
        );
    }
}

#[test]
fn divergence_derivatives_poisson() {
    for mu0 in [0.3f64, 1.0, 4.5] {
        let t = J::variable(0.0);
        let mu = (t * 0.5 + mu0.sqrt()).powi(2);
        let d = (mu.ln() * -mu0 + mu0 * mu0.ln()) - mu0 + mu;
        assert_bundle_matches(&FamilySpec::poisson(), mu0, jet_divergence(d));
    }
}

#[test]
fn divergence_derivatives_gamma() {
    for k in [0.5, 1.0, 3.0] {
        for mu0 in [0.4, 2.0] {
            let t = J::variable(0.0);
            let mu = (t * (1.0 / f64::sqrt(k))).exp() * mu0;
            let r = J::constant(mu0) / mu;
            let d = (r - 1.0 - r.ln()) * k;
            assert_bundle_matches(&FamilySpec::gamma_shape(k).unwrap(), mu0, jet_divergence(d));
        }
    }
}

#[test]
fn divergence_derivatives_tweedie() {
    for mu0 in [0.5f64, 1.0, 16.0] {
        let t = J::variable(0.0);
        let mu = (t * (1.0 / (2.0 * SQRT_2)) + mu0.powf(0.25)).powi(4);
        let root = mu.sqrt();
        let diff = root - mu0.sqrt();
        let d = diff * diff / root;
        assert_bundle_matches(&FamilySpec::tweedie32(), mu0, jet_divergence(d));
    }
}

#[test]
fn divergence_derivatives_bernoulli() {
    for mu0 in [0.2f64, 0.5, 0.9] {
        let t = J::variable(0.0);
        let mu = (t * 0.5 + mu0.sqrt().asin()).sin().powi(2);
        let one = J::constant(1.0);
        let d = (J::constant(mu0.ln()) - mu.ln()) * mu0 + (J::constant((1.0 - mu0).ln()) - (one - mu).ln()) * (1.0 - mu0);
        assert_bundle_matches(&FamilySpec::bernoulli(), mu0, jet_divergence(d));
    }
}

#[test]
fn second_divergence_derivative_is_one_by_finite_differences() {
    let families = [
        (FamilySpec::gaussian_location(2.0).unwrap(), 0.7),
        (FamilySpec::gamma_shape(0.5).unwrap(), 1.5),
        (FamilySpec::tweedie32(), 2.0),
        (FamilySpec::bernoulli(), 0.3),
        (FamilySpec::poisson(), 3.0),
    ];
    for (family, mu0) in families {
        let beta0 = family
            .convert(&ParamValue::mean(mu0).with_reference(mu0), Chart::Geodesic)
            .unwrap()
            .value;
        let d = |beta: f64| {
            let mu = family.mean_of(&ParamValue::geodesic(beta, mu0)).unwrap();
            family.kl_divergence(mu0, mu).unwrap()
        };
        let h = 1e-3;
        let second = (d(beta0 + h) - 2.0 * d(beta0) + d(beta0 - h)) / (h * h);
        assert!((second - 1.0).abs() < 1e-6, "{}: {second}", family.name());
    }
}

use crate::families::Chart;

#[test]
fn battery_values_of_g_and_seventh_order() {
    // (spec, mu, g, seventh-order combination) from symbolic differentiation
    let cases: [(&str, f64, f64, f64); 10] = [
        ("const:4", 1.0, 0.0, 0.0),
        ("power:1,2,1,2", 1.0, 4.0, 64.0),
        ("power:1,2,1,1.5", 1.0, 0.0, 0.0),
        ("power:2,1,0,1.5", 2.0, 0.0, 0.0),
        ("poly:0,1", 2.0, -0.25, 0.25),
        ("poly:0,0,0,1", 2.0, 9.0, 3780.0),
        ("exp:1,1", 0.5, 0.5f64.exp(), 100.0 * E),
        ("poly:0,0,1", 3.0, 1.0, 4.0),
        ("poly:0,0,0.5", 3.0, 0.5, 1.0),
        ("poly:0,1,-1", 0.5, -3.0, f64::NAN),
    ];
    for (spec, mu, g, h) in cases {
        let b = DerivativeBundle::at(&vf(spec), mu).unwrap();
        assert!((b.g - g).abs() < 1e-10 * g.abs().max(1.0), "{spec}: g = {}", b.g);
        assert!((b.c - 2.0 * g / 3.0).abs() < 1e-10 * g.abs().max(1.0));
        if h.is_finite() {
            let got = b.seventh_order();
            assert!((got - h).abs() < 1e-9 * h.abs().max(1.0), "{spec}: seventh order {got} vs {h}");
        }
    }
}

#[test]
fn ode_and_higher_order_verdicts() {
    let cases = [
        ("const:4", true),
        ("power:1,2,1,2", true),
        ("power:1,2,1,1.5", true),
        ("power:2,1,0,1.5", true),
        ("poly:0,0,1", true),
        ("poly:0,1", false),
        ("poly:0,1,-1", false),
        ("poly:0,0,0,1", false),
        ("exp:1,1", false),
    ];
    for (spec, exchangeable) in cases {
        let v = vf(spec);
        let grid = v.default_grid(6);
        let ode = sigma_ode_check(&v, &grid).unwrap();
        let hi = higher_order_check(&v, &grid).unwrap();
        let expect = if exchangeable { Verdict::Constant } else { Verdict::NonConstant };
        assert_eq!(ode.report.verdict, expect, "{spec} ODE");
        assert_eq!(hi.verdict(), expect, "{spec} higher order");
        assert_eq!(hi.reduced.is_some(), exchangeable);
    }
    let ode = sigma_ode_check(&vf("power:1,2,1,2"), &[0.0, 1.0, 5.0]).unwrap();
    assert!((ode.g.unwrap() - 4.0).abs() < 1e-12);
    assert!((ode.c.unwrap() - 8.0 / 3.0).abs() < 1e-12);
    let tw = sigma_ode_check(&vf("power:2,1,0,1.5"), &[0.5, 1.0, 4.0]).unwrap();
    assert!(tw.g.unwrap().abs() < 1e-12 && tw.c.unwrap().abs() < 1e-12);
}

#[test]
fn tabulated_ode_check() {
    let pts = (0..=600).map(|i| 1.0 + 9.0 * i as f64 / 600.0).map(|m| (m, (2.0 * m + 1.0).powi(2))).collect();
    let v = VarianceFunctionSpec::tabulated(pts).unwrap();
    let r = sigma_ode_check(&v, &v.default_grid(5)).unwrap();
    assert_eq!(r.report.verdict, Verdict::Constant, "{:?}", r.report.values);
    assert_eq!(r.report.tolerance_used, TABULATED_TOLERANCE);
    let pts = (0..=600).map(|i| 1.0 + 9.0 * i as f64 / 600.0).map(|m| (m, m)).collect();
    let p = VarianceFunctionSpec::tabulated(pts).unwrap();
    assert_eq!(sigma_ode_check(&p, &p.default_grid(5)).unwrap().report.verdict, Verdict::NonConstant);
}

#[test]
fn classification() {
    assert!(matches!(classify_family(&vf("const:4")).unwrap(), Classification::GaussianLocation { variance } if (variance - 4.0).abs() < 1e-12));
    match classify_family(&vf("poly:0,0,0.5")).unwrap() {
        Classification::GammaLinearSigma { k, l, gamma_shape } => {
            assert!((k - 0.5f64.sqrt()).abs() < 1e-10 && l.abs() < 1e-8);
            assert!((gamma_shape - 2.0).abs() < 1e-8);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(classify_family(&vf("power:1,2,1,1.5")).unwrap(), Classification::Tweedie32Class { k, .. } if (k - 2.0).abs() < 1e-8));
    match classify_family(&vf("poly:0,1,-1")).unwrap() {
        Classification::NotExchangeable { morris, reason, failed } => {
            assert_eq!(morris, Some(MorrisClass::Binomial));
            assert_eq!(failed, FailedCheck::Ode);
            assert!(reason.contains("not a perfect square"));
        }
        other => panic!("{other:?}"),
    }
    for spec in ["poly:0,1", "poly:0,0,0,1", "exp:1,1"] {
        assert!(!classify_family(&vf(spec)).unwrap().is_exchangeable(), "{spec}");
    }
}

#[test]
fn condition_integral_closed_forms() {
    let g = FamilySpec::gaussian_location(3.0).unwrap();
    for mu0 in [-2.0, 0.0, 5.0] {
        let v = condition_integral(&g, mu0, 4).unwrap();
        assert!((v - (PI / 2.0).sqrt()).abs() < 1e-10, "{v}");
    }
    let gm = FamilySpec::gamma_shape(1.0).unwrap();
    for mu0 in [0.5, 1.0, 7.0] {
        let v = condition_integral(&gm, mu0, 2).unwrap();
        assert!((v - E * E / 4.0).abs() < 1e-8, "{v}");
    }
    let tw = FamilySpec::tweedie32();
    for mu0 in [0.5, 1.0, 3.0] {
        let v = condition_integral(&tw, mu0, 2).unwrap();
        assert!((v - PI.sqrt()).abs() < 1e-6, "{v}");
    }
    for k in [0.5, 2.0] {
        let nk: f64 = 3.0 * k;
        let closed = k.sqrt() * nk.exp() * gamma(nk) / nk.powf(nk);
        let v = condition_integral(&FamilySpec::gamma_shape(k).unwrap(), 1.3, 3).unwrap();
        assert!((v - closed).abs() < 1e-8 * closed, "k = {k}: {v} vs {closed}");
    }
}

#[test]
fn condition_integral_diverges_for_n_zero() {
    let g = FamilySpec::gaussian_location(1.0).unwrap();
    assert!(matches!(condition_integral(&g, 0.0, 0), Err(Error::DivergentIntegral { .. })));
}

#[test]
fn constancy_verdicts() {
    let r = check_constancy(&FamilySpec::gamma_shape(1.0).unwrap(), 3, &[0.5, 1.0, 2.0, 5.0]).unwrap();
    assert_eq!(r.verdict, Verdict::Constant);
    let closed = 2.0 * 3f64.exp() / 27.0;
    assert!(r.values.iter().all(|v| (v - closed).abs() < 1e-8));
    let p = check_constancy(&FamilySpec::poisson(), 2, &[1.0, 4.0]).unwrap();
    assert_eq!(p.verdict, Verdict::NonConstant);
    let b = check_constancy(&FamilySpec::bernoulli(), 2, &[0.25, 0.5]).unwrap();
    assert_eq!(b.verdict, Verdict::NonConstant);
}

#[test]
fn bernoulli_exchangeability_witness() {
    let r = exchangeability_test(&FamilySpec::bernoulli(), 0, 3, &TestSet::AllDiscrete).unwrap();
    assert_eq!(r.verdict, Verdict::NonConstant);
    let w = r.witness.unwrap();
    assert_eq!(w.first.sequence, vec![1.0, 1.0, 0.0]);
    assert_eq!(w.first.exact.as_deref(), Some("8/155"));
    assert_eq!(w.second.sequence, vec![1.0, 0.0, 1.0]);
    assert_eq!(w.second.exact.as_deref(), Some("1/20"));
}

#[test]
fn gaussian_given_continuations_are_exchangeable() {
    let g = FamilySpec::gaussian_location(1.0).unwrap();
    let r = exchangeability_test(&g, 1, 3, &TestSet::Sequences(vec![vec![0.0, 0.0, 2.0]])).unwrap();
    assert!(r.max_abs_deviation < 1e-8, "{}", r.max_abs_deviation);
    assert_eq!(r.verdict, Verdict::Constant);
}

#[test]
fn gamma_random_continuations_are_exchangeable() {
    let g = FamilySpec::gamma_shape(1.0).unwrap();
    let r = exchangeability_test(&g, 1, 3, &TestSet::RandomContinuations { count: 4, seed: 11 }).unwrap();
    assert_eq!(r.verdict, Verdict::Constant, "{}", r.max_abs_deviation);
}

#[test]
fn bayes_and_cnml() {
    let g = FamilySpec::gamma_shape(1.0).unwrap();
    let seqs: Vec<Vec<f64>> = [0.2, 1.0, 3.5].iter().map(|&x| vec![1.0, x]).collect();
    let r = bayes_cnml_agreement(&g, 1, 2, &seqs).unwrap();
    assert!(r.max_abs_deviation < 1e-8, "{}", r.max_abs_deviation);
    let w = r.witness.unwrap();
    let x: f64 = w.second.sequence[1];
    assert!((w.second.value - 1.0 / (1.0 + x).powi(2)).abs() < 1e-8);

    let b = bayes_cnml_agreement(&FamilySpec::bernoulli(), 1, 2, &[vec![1.0, 1.0]]).unwrap();
    assert_eq!(b.verdict, Verdict::NonConstant);
    let w = b.witness.unwrap();
    assert_eq!(w.first.exact.as_deref(), Some("3/4"));
    assert_eq!(w.second.exact.as_deref(), Some("4/5"));

    let tw = FamilySpec::tweedie32();
    let seqs: Vec<Vec<f64>> = [0.0, 0.5, 2.0].iter().map(|&x| vec![1.0, x]).collect();
    let r = bayes_cnml_agreement(&tw, 1, 2, &seqs).unwrap();
    assert!(r.max_abs_deviation < 1e-4, "{}", r.max_abs_deviation);
}

#[test]
fn laplace_ratios() {
    let g = FamilySpec::gamma_shape(1.0).unwrap();
    let r = laplace_asymptotics_check(&g, 1.0, Position::Interior, &[10]).unwrap();
    assert!((r.values[0] - 1.00837).abs() < 1e-5, "{}", r.values[0]);
    assert_eq!(r.verdict, Verdict::Constant);

    let gauss = FamilySpec::gaussian_location(1.0).unwrap();
    let r = laplace_asymptotics_check(&gauss, 0.3, Position::Interior, &[2, 7, 30]).unwrap();
    assert!(r.values.iter().all(|v| (v - 1.0).abs() < 1e-10));

    let half = gauss.with_mean_domain(Interval::new(0.0, f64::INFINITY, true, false)).unwrap();
    let r = laplace_asymptotics_check(&half, 0.0, Position::Boundary, &[100]).unwrap();
    assert!((r.values[0] - 0.5).abs() < 0.05);
    assert_eq!(r.verdict, Verdict::Constant);
    assert!(laplace_asymptotics_check(&half, 1.0, Position::Boundary, &[100]).is_err());
}

#[test]
fn transforms() {
    let g = FamilySpec::gamma_shape(1.5).unwrap();
    let same = transform_family(&g, MonotoneMap::identity()).unwrap();
    for x in [0.1, 1.0, 4.0] {
        assert_eq!(same.log_density_at_mean(2.0, x).unwrap(), g.log_density_at_mean(2.0, x).unwrap());
    }

    // Gamma(1/2) with rate c/2 has mean 1/c; its reciprocal is Levy(0, c).
    let c = 3.0;
    let levy = transform_family(&FamilySpec::gamma_shape(0.5).unwrap(), MonotoneMap::Reciprocal).unwrap();
    for y in [0.05, 0.3, 1.0, 2.5, 10.0] {
        let closed = 0.5 * (c / (2.0 * PI)).ln() - 1.5 * f64::ln(y) - c / (2.0 * y);
        let got = levy.log_density_at_mean(1.0 / c, y).unwrap();
        assert!((got - closed).abs() < 1e-10, "y = {y}: {got} vs {closed}");
    }

    let unit = FamilySpec::gaussian_location(1.0).unwrap();
    let affine = transform_family(&unit, MonotoneMap::Affine { scale: 2.0, shift: 3.0 }).unwrap();
    for (mu, y) in [(0.0f64, 3.0f64), (1.0, 4.2), (-2.0, 0.0)] {
        let expect = -0.5 * (2.0 * PI * 4.0).ln() - (y - (2.0 * mu + 3.0)).powi(2) / 8.0;
        assert!((affine.log_density_at_mean(mu, y).unwrap() - expect).abs() < 1e-12);
    }
    let r = exchangeability_test(&affine, 1, 3, &TestSet::Sequences(vec![vec![3.0, 1.0, 6.0]])).unwrap();
    assert_eq!(r.verdict, Verdict::Constant);
}
