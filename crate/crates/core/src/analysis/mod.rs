//! Numerical checks of when sequential NML is exchangeable.
//!
//! - [`condition_integral`] and [`check_constancy`]: the integral
//!   `C_n(mu0) = ∫ exp(-n D(mu0 || mu)) / sigma(mu) dmu` must not depend on `mu0`.
//! - [`exchangeability_test`]: SNML joints compared across permutations.
//! - [`bayes_cnml_agreement`]: the Jeffreys-Bayes and CNML joints coincide
//!   for the exchangeable families.
//! - [`laplace_asymptotics_check`]: `C_n / sqrt(2 pi / n) -> 1` (or `1/2` at a
//!   boundary of the mean domain).
//! - [`sigma_ode_check`], [`higher_order_check`], [`classify_family`]: the
//!   conditions on the variance function.
//! - [`transform_family`]: monotone images of a family.

pub mod jet;
mod ode;
mod report;
mod variance;

use std::collections::HashMap;

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::families::{FamilySpec, MonotoneMap, ObservationSequence, Support};
use crate::quadrature::{check_integrable, laplace_reference, Integrator, Tolerance};
use crate::strategies::{self, exact, Strategy};

pub use ode::{
    classify_family, geodesic_divergence_derivatives, higher_order_check, sigma_ode_check, Classification,
    DerivativeBundle, FailedCheck, HigherOrderReport, MorrisClass, OdeReport, CLOSED_TOLERANCE,
    FORM_MATCH_TOLERANCE, NONCONSTANT_SPREAD, TABULATED_TOLERANCE,
};
pub use report::{fmt17, AnalysisReport, Verdict, Witness, WitnessEntry};
pub use variance::{ClosedForm, Table, VarianceForm, VarianceFunctionSpec, SIGMA_ORDERS};

/// Relative tolerance of [`check_constancy`].
pub const CONSTANCY_TOLERANCE: f64 = 1e-4;
/// Largest relative permutation discrepancy accepted as exchangeable.
pub const EXCHANGEABILITY_TOLERANCE: f64 = 1e-6;
/// Relative permutation discrepancy above which joints are declared non-exchangeable.
pub const EXCHANGEABILITY_FAILURE: f64 = 1e-4;
/// Relative tolerance of [`bayes_cnml_agreement`].
pub const AGREEMENT_TOLERANCE: f64 = 1e-6;

/// `∫ exp(-n D(mu0 || mu)) / sigma(mu) dmu` over the mean domain.
pub fn condition_integral(family: &FamilySpec, mu0: f64, n: usize) -> Result<f64> {
    let dom = family.mean_domain();
    let core = family.full_mean_space();
    if !core.in_interior(mu0) || !dom.in_closure(mu0) {
        return Err(domain(format!("mean {mu0} is not a regular mean of {}", family.name())));
    }
    let lo = dom.lower.max(core.lower);
    let hi = dom.upper.min(core.upper);
    let nf = n as f64;
    let f = |mu: f64| -> f64 {
        if !core.in_interior(mu) {
            return 0.0;
        }
        match family.kl_divergence(mu0, mu) {
            Ok(d) if d.is_finite() => (-nf * d).exp() / family.sigma(mu),
            _ => 0.0,
        }
    };
    let (bp, scale) = family.parameter_hints(mu0, nf);
    check_integrable(&f, lo, hi, mu0, scale).map_err(|(tail, p)| Error::DivergentIntegral {
        tail,
        detail: format!("exp(-{n} D) / sigma behaves like |mu|^-{p:.3} at the {tail} end"),
    })?;
    let r = Integrator::new()
        .tolerance(Tolerance::strict())
        .breakpoints(&bp)
        .tail_scale(scale)
        .integrate(f, lo, hi)?;
    Ok(r.value)
}

/// Evaluates [`condition_integral`] on `grid`; the reference is the grid mean.
pub fn check_constancy(family: &FamilySpec, n: usize, grid: &[f64]) -> Result<AnalysisReport> {
    let values = grid
        .iter()
        .map(|&mu0| condition_integral(family, mu0, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalysisReport::about_mean(
        format!("C_{n}(mu0) for {}", family.name()),
        grid.to_vec(),
        values,
        CONSTANCY_TOLERANCE,
        NONCONSTANT_SPREAD,
    ))
}

/// Sequences whose permutations [`exchangeability_test`] compares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSet {
    /// Every sequence of length `n` over the support (lattice supports are
    /// cut at `n`).
    AllDiscrete,
    /// `count` sequences drawn from the family at its typical mean.
    RandomContinuations { count: usize, seed: u64 },
    /// Explicit sequences of length `n`.
    Sequences(Vec<Vec<f64>>),
}

fn support_values(family: &FamilySpec, n: usize) -> Result<Vec<f64>> {
    match family.support() {
        Support::Finite(v) => Ok(v),
        Support::Lattice => Ok((0..=n as u64).map(|k| family.lattice_point(k)).collect()),
        _ => Err(domain(format!(
            "{} is continuous; enumerate with sequences or random continuations",
            family.name()
        ))),
    }
}

fn bits_key(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

/// Sequence-valued groups: each group holds the permutations of one
/// continuation with the history fixed.
fn permutation_groups(family: &FamilySpec, m: usize, n: usize, set: &TestSet) -> Result<Vec<Vec<Vec<f64>>>> {
    let with_perms = |seq: &[f64]| -> Vec<Vec<f64>> {
        let (hist, cont) = seq.split_at(m);
        let mut perms: Vec<Vec<f64>> = cont
            .iter()
            .copied()
            .permutations(cont.len())
            .map(|p| hist.iter().copied().chain(p).collect())
            .collect();
        perms.sort_by_key(|a| bits_key(a));
        perms.dedup_by(|a, b| bits_key(a) == bits_key(b));
        perms
    };
    match set {
        TestSet::AllDiscrete => {
            let values = support_values(family, n)?;
            let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
            let mut groups: Vec<Vec<Vec<f64>>> = vec![];
            for seq in std::iter::repeat_n(values.iter().copied(), n).multi_cartesian_product() {
                let mut key = seq.clone();
                key[m..].sort_by(f64::total_cmp);
                let slot = *index.entry(bits_key(&key)).or_insert_with(|| {
                    groups.push(vec![]);
                    groups.len() - 1
                });
                groups[slot].push(seq);
            }
            Ok(groups)
        }
        TestSet::RandomContinuations { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mu = family.typical_mean();
            (0..*count)
                .map(|_| Ok(with_perms(&family.sample(mu, n, &mut rng)?)))
                .collect()
        }
        TestSet::Sequences(seqs) => seqs
            .iter()
            .map(|s| {
                if s.len() != n {
                    return Err(domain(format!("sequence of length {} where {n} was expected", s.len())));
                }
                Ok(with_perms(s))
            })
            .collect(),
    }
}

fn exact_label(family: &FamilySpec, seq: &[f64], m: usize, strategy: Strategy) -> Option<String> {
    if !strategies::exact_bernoulli(family) {
        return None;
    }
    let bits = exact::to_bits(seq).ok()?;
    let r = match strategy {
        Strategy::Snml => exact::snml_joint(&bits, m),
        Strategy::BayesJeffreys => exact::bayes_joint(&bits, m),
        Strategy::Cnml | Strategy::Nml => exact::cnml_joint(&bits, m),
    };
    r.ok().map(|r| r.to_string())
}

fn entry(family: &FamilySpec, label: &str, seq: &[f64], value: f64, m: usize, strategy: Strategy) -> WitnessEntry {
    WitnessEntry {
        label: label.into(),
        sequence: seq.to_vec(),
        value,
        exact: exact_label(family, seq, m, strategy),
    }
}

/// Compares SNML joints of `x_{m+1}^n` across permutations that fix `x^m`.
///
/// One value per permutation group: `(max - min) / max` of the joints. The
/// witness is the extreme pair of the worst group.
pub fn exchangeability_test(family: &FamilySpec, m: usize, n: usize, set: &TestSet) -> Result<AnalysisReport> {
    if m > n {
        return Err(domain(format!("conditioning length {m} exceeds n = {n}")));
    }
    let groups = permutation_groups(family, m, n, set)?;
    let mut values = Vec::with_capacity(groups.len());
    let mut worst: Option<(f64, Witness)> = None;
    for group in &groups {
        let joints = group
            .iter()
            .map(|s| strategies::strategy_joint(family, Strategy::Snml, &ObservationSequence::new(s.clone(), m)?))
            .collect::<Result<Vec<f64>>>()?;
        let (mut hi, mut lo) = (0, 0);
        for (i, &j) in joints.iter().enumerate() {
            if j > joints[hi] {
                hi = i;
            }
            if j <= joints[lo] {
                lo = i;
            }
        }
        let disc = if joints[hi] > 0.0 {
            (joints[hi] - joints[lo]) / joints[hi]
        } else {
            0.0
        };
        values.push(disc);
        if worst.as_ref().is_none_or(|(w, _)| disc >= *w) {
            let witness = Witness {
                first: entry(family, "snml", &group[hi], joints[hi], m, Strategy::Snml),
                second: entry(family, "snml", &group[lo], joints[lo], m, Strategy::Snml),
            };
            worst = Some((disc, witness));
        }
    }
    let grid = (0..values.len()).map(|i| i as f64).collect();
    let deviations = values.clone();
    Ok(AnalysisReport::new(
        format!("SNML permutation discrepancy for {} (m = {m}, n = {n})", family.name()),
        grid,
        values,
        0.0,
        deviations,
        EXCHANGEABILITY_TOLERANCE,
        EXCHANGEABILITY_FAILURE,
    )
    .with_witness(worst.map(|(_, w)| w)))
}

/// Relative difference between the Jeffreys-Bayes and CNML joints of
/// `x_{m+1}^n` given `x^m`, per sequence.
pub fn bayes_cnml_agreement(family: &FamilySpec, m: usize, n: usize, sequences: &[Vec<f64>]) -> Result<AnalysisReport> {
    let mut values = Vec::with_capacity(sequences.len());
    let mut worst: Option<(f64, Witness)> = None;
    for s in sequences {
        if s.len() != n {
            return Err(domain(format!("sequence of length {} where {n} was expected", s.len())));
        }
        let seq = ObservationSequence::new(s.clone(), m)?;
        let bayes = strategies::strategy_joint(family, Strategy::BayesJeffreys, &seq)?;
        let cnml = strategies::cnml_joint(family, &seq, n)?;
        let rel = (bayes - cnml).abs() / cnml.abs().max(f64::MIN_POSITIVE);
        values.push(rel);
        if worst.as_ref().is_none_or(|(w, _)| rel > *w) {
            let witness = Witness {
                first: entry(family, "bayes_jeffreys", s, bayes, m, Strategy::BayesJeffreys),
                second: entry(family, "cnml", s, cnml, m, Strategy::Cnml),
            };
            worst = Some((rel, witness));
        }
    }
    let grid = (0..values.len()).map(|i| i as f64).collect();
    let deviations = values.clone();
    Ok(AnalysisReport::new(
        format!("Bayes-Jeffreys vs CNML for {} (m = {m}, n = {n})", family.name()),
        grid,
        values,
        0.0,
        deviations,
        AGREEMENT_TOLERANCE,
        NONCONSTANT_SPREAD,
    )
    .with_witness(worst.map(|(_, w)| w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Interior,
    /// `mu0` is an endpoint of a restricted mean domain.
    Boundary,
}

/// Ratios `C_n(mu0) / sqrt(2 pi / n)` for each `n`, against `1` (interior)
/// or `1/2` (boundary).
///
/// Deviations are scaled by `n / n_last`, so the single tolerance `5 / n_last`
/// asks every ratio to lie within `5 / n` of its limit.
pub fn laplace_asymptotics_check(
    family: &FamilySpec,
    mu0: f64,
    position: Position,
    n_list: &[usize],
) -> Result<AnalysisReport> {
    let dom = family.mean_domain();
    match position {
        Position::Interior if !dom.in_interior(mu0) => {
            return Err(domain(format!("mean {mu0} is not interior to the mean domain")))
        }
        Position::Boundary if !dom.is_endpoint(mu0) => {
            return Err(domain(format!(
                "mean {mu0} is not an endpoint of the mean domain [{}, {}]",
                dom.lower, dom.upper
            )))
        }
        _ => {}
    }
    let n_last = *n_list.iter().max().ok_or_else(|| domain("empty list of sample sizes"))?;
    let limit = match position {
        Position::Interior => 1.0,
        Position::Boundary => 0.5,
    };
    let values = n_list
        .iter()
        .map(|&n| Ok(condition_integral(family, mu0, n)? / laplace_reference(n, false)))
        .collect::<Result<Vec<f64>>>()?;
    let deviations = values
        .iter()
        .zip(n_list)
        .map(|(r, &n)| (r - limit) * n as f64 / n_last as f64)
        .collect();
    let tol = 5.0 / n_last as f64;
    Ok(AnalysisReport::new(
        format!("C_n / sqrt(2 pi / n) for {} at mu0 = {mu0}", family.name()),
        n_list.iter().map(|&n| n as f64).collect(),
        values,
        limit,
        deviations,
        tol,
        tol,
    ))
}

/// The family of `f(X)`, `X` from `family`.
pub fn transform_family(family: &FamilySpec, map: MonotoneMap) -> Result<FamilySpec> {
    FamilySpec::transformed(family.clone(), map)
}

#[cfg(test)]
mod tests;
