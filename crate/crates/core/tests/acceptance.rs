//! Acceptance checks AC1 through AC10, one PASS/FAIL line each.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use num_bigint::BigInt;
use num_rational::BigRational;
use snml_core::analysis::{
    check_constancy, exchangeability_test, higher_order_check, laplace_asymptotics_check, sigma_ode_check,
    transform_family, Position, TestSet, VarianceFunctionSpec, Verdict,
};
use snml_core::strategies::{bayes_jeffreys_predictive, cnml_joint, conditional_regret, exact, snml_predictive};
use snml_core::{tweedie_sample, FamilySpec, Interval, MonotoneMap, ObservationSequence, Strategy};

type Outcome = Result<String, String>;
type Check = (&'static str, &'static str, fn() -> Outcome);

fn seq(values: &[f64], m: usize) -> ObservationSequence {
    ObservationSequence::new(values.to_vec(), m).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Adaptive Simpson, used as an oracle independent of the library's quadrature.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn ac1() -> Outcome {
    let t = FamilySpec::tweedie32();
    let grid = [0.25, 0.7, 1.0, 3.0, 9.0];
    let mut worst = 0.0f64;
    for &mu0 in &grid {
        for &mu1 in &grid {
            let integrand = |mu: f64| (mu - mu0) / (2.0 * mu.powf(1.5));
            let numeric = simpson(&integrand, mu0, mu1, 1e-13);
            let err = (t.kl_divergence(mu0, mu1).map_err(|e| e.to_string())? - numeric).abs();
            worst = worst.max(err);
        }
    }
    ensure(worst < 1e-8, || format!("max abs error {worst:.3e} >= 1e-8"))?;
    Ok(format!("25 pairs, max abs error {worst:.2e}"))
}

fn ac2() -> Outcome {
    let grid = [0.5, 1.0, 2.0, 4.0];
    let mut notes = vec![];
    for n in [2usize, 3, 5] {
        let laplace = (2.0 * PI / n as f64).sqrt();
        let gamma_target = (1..n).product::<usize>() as f64 * (n as f64).exp() / (n as f64).powi(n as i32);
        let cases = [
            (FamilySpec::gaussian_location(1.0).unwrap(), vec![-1.5, 0.0, 0.4, 3.0], laplace, 1e-10),
            (FamilySpec::gamma_shape(1.0).unwrap(), grid.to_vec(), gamma_target, 1e-8),
            (FamilySpec::tweedie32(), grid.to_vec(), laplace, 1e-4),
        ];
        for (family, g, target, tol) in cases {
            let r = check_constancy(&family, n, &g).map_err(|e| format!("{}: {e}", family.name()))?;
            let err = r.values.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
            ensure(err < tol, || format!("{} n={n}: error {err:.3e} >= {tol:e}", family.name()))?;
        }
        let discrete = [
            (FamilySpec::poisson(), grid.to_vec()),
            (FamilySpec::bernoulli(), vec![0.1, 0.25, 0.5, 0.7]),
        ];
        for (family, g) in discrete {
            let r = check_constancy(&family, n, &g).map_err(|e| format!("{}: {e}", family.name()))?;
            let spread = r.relative_spread();
            ensure(r.verdict == Verdict::NonConstant && spread > 0.01, || {
                format!("{} n={n}: verdict {:?}, spread {spread:.3e}", family.name(), r.verdict)
            })?;
            notes.push(spread);
        }
    }
    let min_spread = notes.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("constant families exact; smallest discrete spread {:.2}%", 100.0 * min_spread))
}

fn ac3() -> Outcome {
    let mut worst = 0.0f64;
    let cases: Vec<(FamilySpec, Vec<f64>, Vec<f64>)> = vec![
        (FamilySpec::gaussian_location(1.0).unwrap(), vec![0.3, -1.2, 2.0], vec![-2.0, -0.5, 0.0, 1.0, 3.0]),
        (FamilySpec::gamma_shape(0.5).unwrap(), vec![1.0, 0.4, 2.5], vec![0.05, 0.5, 1.0, 3.0, 8.0]),
        (FamilySpec::gamma_shape(1.0).unwrap(), vec![1.0, 0.4, 2.5], vec![0.05, 0.5, 1.0, 3.0, 8.0]),
        (FamilySpec::gamma_shape(2.0).unwrap(), vec![1.0, 0.4, 2.5], vec![0.05, 0.5, 1.0, 3.0, 8.0]),
        (FamilySpec::tweedie32(), vec![1.0, 0.0, 2.5], vec![0.0, 0.1, 1.0, 4.0]),
    ];
    for (family, history, xs) in &cases {
        for len in 1..=3 {
            let h = seq(&history[..len], len);
            let s = snml_predictive(family, &h).map_err(|e| e.to_string())?;
            let b = bayes_jeffreys_predictive(family, &h).map_err(|e| e.to_string())?;
            for &x in xs {
                let err = rel(s.prob(x), b.prob(x));
                ensure(err < 1e-6, || format!("{} history {:?} x={x}: {err:.3e}", family.name(), h.values()))?;
                worst = worst.max(err);
            }
        }
    }
    ensure(exact::snml_next_one(&[1]) == ratio(4, 5), || "Bernoulli SNML after (1) is not 4/5".into())?;
    ensure(exact::bayes_next_one(&[1]) == ratio(3, 4), || "Bernoulli Bayes after (1) is not 3/4".into())?;
    let e = FamilySpec::gamma_shape(1.0).unwrap();
    let h = seq(&[1.0], 1);
    let s = snml_predictive(&e, &h).map_err(|e| e.to_string())?;
    let b = bayes_jeffreys_predictive(&e, &h).map_err(|e| e.to_string())?;
    for x in [0.01f64, 0.5, 1.0, 3.0, 20.0] {
        let target = 1.0 / (1.0 + x).powi(2);
        let err = (s.density(x) - target).abs().max((b.density(x) - target).abs());
        ensure(err < 1e-8, || format!("Gamma witness at x={x}: {err:.3e}"))?;
    }
    Ok(format!("max relative gap {worst:.2e}; Bernoulli 4/5 vs 3/4; Gamma 1/(1+x)^2"))
}

fn ac4() -> Outcome {
    let a = exact::snml_joint(&[1, 1, 0], 0).map_err(|e| e.to_string())?;
    let b = exact::snml_joint(&[1, 0, 1], 0).map_err(|e| e.to_string())?;
    ensure(a == ratio(8, 155) && b == ratio(1, 20), || format!("Bernoulli joints {a} and {b}"))?;
    let mut worst = 0.0f64;
    let families = [
        FamilySpec::gaussian_location(1.0).unwrap(),
        FamilySpec::gamma_shape(1.0).unwrap(),
        FamilySpec::tweedie32(),
    ];
    for family in &families {
        for len in [2usize, 3] {
            let set = TestSet::RandomContinuations { count: 20, seed: 7 };
            let r = exchangeability_test(family, 1, 1 + len, &set).map_err(|e| e.to_string())?;
            ensure(r.max_abs_deviation < 1e-6, || {
                format!("{} continuation length {len}: {:.3e}", family.name(), r.max_abs_deviation)
            })?;
            worst = worst.max(r.max_abs_deviation);
        }
    }
    Ok(format!("8/155 vs 1/20 exact; continuous max discrepancy {worst:.2e}"))
}

fn ac5() -> Outcome {
    ensure(exact::shtarkov_sum(2) == ratio(5, 2), || "Shtarkov sum at n=2 is not 5/2".into())?;
    let r = conditional_regret(&FamilySpec::bernoulli(), Strategy::Nml, &seq(&[1.0, 0.0], 0)).map_err(|e| e.to_string())?;
    ensure((r.regret - 2.5f64.ln()).abs() < 1e-12, || format!("regret {} vs ln 2.5", r.regret))?;
    for n in 1..=6 {
        let mut ratios = exact::all_sequences(n).into_iter().map(|bits| {
            let joint = exact::nml_joint(&bits).unwrap();
            exact::regret_ratio(&bits, &joint)
        });
        let first = ratios.next().unwrap();
        ensure(ratios.all(|q| q == first), || format!("regret varies at n={n}"))?;
        ensure(first == exact::shtarkov_sum(n), || format!("regret at n={n} differs from the Shtarkov sum"))?;
    }
    Ok("ln 2.5 at n=2; equalizer exact for n <= 6".into())
}

fn ac6() -> Outcome {
    let g = FamilySpec::gamma_shape(1.0).unwrap();
    let ns = [10usize, 20, 50];
    let r = laplace_asymptotics_check(&g, 1.0, Position::Interior, &ns).map_err(|e| e.to_string())?;
    for (&n, &v) in ns.iter().zip(&r.values) {
        let n = n as f64;
        let err = (v - 1.0 - 1.0 / (12.0 * n)).abs();
        ensure(err < 1.0 / (n * n), || format!("n={n}: |ratio - 1 - 1/(12n)| = {err:.3e}"))?;
    }
    let half = FamilySpec::gaussian_location(1.0)
        .unwrap()
        .with_mean_domain(Interval::new(0.0, f64::INFINITY, true, false))
        .map_err(|e| e.to_string())?;
    let b = laplace_asymptotics_check(&half, 0.0, Position::Boundary, &[100]).map_err(|e| e.to_string())?;
    ensure((b.values[0] - 0.5).abs() < 0.05, || format!("boundary ratio {}", b.values[0]))?;
    Ok(format!("Gamma ratios {:.6}, {:.6}, {:.6}; boundary {:.4}", r.values[0], r.values[1], r.values[2], b.values[0]))
}

fn ac7() -> Outcome {
    let battery = [
        ("const:2", true),
        ("power:1,2,1,2", true),
        ("power:1,2,1,1.5", true),
        ("power:1,1,0,1", false),
        ("poly:0,1,-1", false),
        ("power:1,1,0,3", false),
        ("exp:1,1", false),
    ];
    let mut matched = 0;
    let mut misses = vec![];
    for (text, exchangeable) in battery {
        let vf = VarianceFunctionSpec::parse(text).map_err(|e| e.to_string())?;
        let grid = vf.default_grid(9);
        let ode = sigma_ode_check(&vf, &grid).map_err(|e| e.to_string())?;
        let higher = higher_order_check(&vf, &grid).map_err(|e| e.to_string())?;
        let expected = if exchangeable { Verdict::Constant } else { Verdict::NonConstant };
        if ode.report.verdict == expected && higher.verdict() == expected {
            matched += 1;
        } else {
            misses.push(format!("{text}: ode {:?}, higher {:?}", ode.report.verdict, higher.verdict()));
        }
    }
    ensure(misses.is_empty(), || format!("{matched}/7; {}", misses.join("; ")))?;
    Ok("7/7 verdicts match".into())
}

fn ac8() -> Outcome {
    let levy = transform_family(&FamilySpec::gamma_shape(0.5).unwrap(), MonotoneMap::Reciprocal).map_err(|e| e.to_string())?;
    let r = exchangeability_test(&levy, 1, 3, &TestSet::RandomContinuations { count: 20, seed: 7 })
        .map_err(|e| e.to_string())?;
    ensure(r.verdict == Verdict::Constant && r.max_abs_deviation < 1e-6, || {
        format!("verdict {:?}, discrepancy {:.3e}", r.verdict, r.max_abs_deviation)
    })?;
    let mut worst = 0.0f64;
    for c in [0.5, 1.0, 3.0] {
        for z in [0.05, 0.3, 1.0, 2.5, 10.0, 40.0] {
            let closed = (c / (2.0 * PI)).sqrt() * (-c / (2.0 * z)).exp() / z.powf(1.5);
            let got = levy.log_density_at_mean(1.0 / c, z).map_err(|e| e.to_string())?.exp();
            worst = worst.max((got - closed).abs());
        }
    }
    ensure(worst < 1e-10, || format!("density error {worst:.3e}"))?;
    Ok(format!("discrepancy {:.2e}; density error {worst:.2e}", r.max_abs_deviation))
}

fn ac9() -> Outcome {
    let n = 100_000usize;
    let draws = tweedie_sample(1.0, n, 2026).map_err(|e| e.to_string())?;
    let mean = draws.iter().sum::<f64>() / n as f64;
    let zeros = draws.iter().filter(|&&x| x == 0.0).count() as f64 / n as f64;
    let mean_band = 3.0 * (2.0 / n as f64).sqrt();
    let p0 = (-1.0f64).exp();
    let zero_band = 3.0 * (p0 * (1.0 - p0) / n as f64).sqrt();
    ensure((mean - 1.0).abs() < mean_band, || format!("mean {mean} outside 1 +/- {mean_band:.4}"))?;
    ensure((zeros - p0).abs() < zero_band, || format!("zero fraction {zeros} outside e^-1 +/- {zero_band:.4}"))?;
    Ok(format!("mean {mean:.4}, zero fraction {zeros:.4}"))
}

fn ac10() -> Outcome {
    let cases: Vec<(FamilySpec, Vec<f64>, Vec<f64>)> = vec![
        (FamilySpec::gaussian_location(1.0).unwrap(), vec![0.4, -1.0], vec![-2.0, 0.7, 3.0]),
        (FamilySpec::gamma_shape(0.5).unwrap(), vec![1.3, 0.2], vec![0.2, 1.0, 5.0]),
        (FamilySpec::gamma_shape(1.0).unwrap(), vec![1.0], vec![0.1, 2.0]),
        (FamilySpec::gamma_shape(2.0).unwrap(), vec![0.5, 2.0], vec![0.3, 3.0]),
        (FamilySpec::tweedie32(), vec![1.0, 0.0], vec![0.0, 0.4, 2.5]),
        (FamilySpec::poisson(), vec![3.0, 1.0], vec![0.0, 1.0, 4.0]),
        (FamilySpec::bernoulli(), vec![1.0, 0.0], vec![0.0, 1.0]),
    ];
    let mut worst = 0.0f64;
    for (family, history, xs) in &cases {
        let m = history.len();
        let pred = snml_predictive(family, &seq(history, m)).map_err(|e| e.to_string())?;
        for &x in xs {
            let mut all = history.clone();
            all.push(x);
            let c = cnml_joint(family, &seq(&all, m), m + 1).map_err(|e| e.to_string())?;
            let err = rel(c, pred.prob(x));
            ensure(err < 1e-8, || format!("{} x={x}: {err:.3e}", family.name()))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("7 families, max relative gap {worst:.2e}"))
}

fn main() -> ExitCode {
    let checks: [Check; 10] = [
        ("AC1", "Tweedie KL closed form", ac1),
        ("AC2", "constancy of C_n", ac2),
        ("AC3", "SNML and Bayes-Jeffreys predictives", ac3),
        ("AC4", "exchangeability", ac4),
        ("AC5", "NML equalizer", ac5),
        ("AC6", "Laplace asymptotics", ac6),
        ("AC7", "ODE battery", ac7),
        ("AC8", "Levy via transformation", ac8),
        ("AC9", "Tweedie sampler", ac9),
        ("AC10", "one-step consistency", ac10),
    ];
    let mut failures = 0;
    for (id, name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("{id} FAIL {name}: {detail}");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance check(s) failed");
        ExitCode::FAILURE
    }
}
