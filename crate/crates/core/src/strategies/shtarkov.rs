//! Shtarkov normalizers `ln ∫ sup_theta p_theta(x^m y^k) dλ^k(y)`.
//!
//! Two routes compute the same quantity:
//!
//! * `Nested` integrates one observation at a time, recursing `k` levels.
//! * `SufficientStatistic` uses that `sup_theta` only depends on the sum of
//!   statistics, so the `k`-fold integral collapses to a single integral
//!   against the `k`-fold convolution of the base density, which is known
//!   in closed form for every built-in family.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{exact, exact_bernoulli, integrate_observations_with, integrator, log_rational, log_sup_stats};
use super::{require_len, ErrorSlot, Prefix};
use crate::error::{Error, Result, Tail};
use crate::families::{FamilyKind, FamilySpec, ObservationSequence};
use crate::quadrature::{check_integrable, sum_lattice, QuadratureError, Tolerance, FAR_DECADES};
use crate::tweedie;

pub const MAX_NESTED_HORIZON: usize = 2;
pub const MAX_CONTINUOUS_HORIZON: usize = 4;
pub const MAX_DISCRETE_HORIZON: usize = exact::MAX_HORIZON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShtarkovRoute {
    Nested,
    SufficientStatistic,
}

fn as_normalizer_error(e: Error) -> Error {
    match e {
        Error::DivergentIntegral { tail, detail } => Error::DivergentNormalizer {
            tail,
            detail: format!("Shtarkov integral diverges ({detail}); increase m"),
        },
        other => other,
    }
}

fn log_integral_from(value: f64, log_ref: f64) -> Result<f64> {
    if value.is_infinite() {
        return Err(Error::DivergentNormalizer {
            tail: Tail::Upper,
            detail: "Shtarkov integral evaluated to infinity".into(),
        });
    }
    if value.is_nan() || value <= 0.0 {
        return Err(Error::Domain(format!("Shtarkov integral evaluated to {value}")));
    }
    Ok(log_ref + value.ln())
}

/// One-step normalizer used by SNML, integrated in observation space.
pub(crate) fn one_step_log_normalizer(family: &FamilySpec, prefix: &Prefix) -> Result<f64> {
    nested(family, prefix, 1, true)
}

/// Reference point for rescaling an integrand: the best of a few central
/// candidates, so `exp(f - ref)` stays in range.
fn reference<F: Fn(f64) -> f64>(f: &F, candidates: &[f64]) -> f64 {
    let best = candidates
        .iter()
        .map(|&x| f(x))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

fn observation_candidates(family: &FamilySpec, center: f64) -> Vec<f64> {
    let (mut pts, _) = family.observation_hints(center, 1.0);
    pts.retain(|&x| family.log_base(x) > f64::NEG_INFINITY);
    match family.support() {
        crate::families::Support::Finite(p) => pts.extend(p),
        crate::families::Support::Lattice => {
            let k = center.max(0.0).round() as u64;
            pts.extend([family.lattice_point(k), family.lattice_point(k + 1)]);
        }
        crate::families::Support::ContinuousWithAtom { atom, .. } => pts.push(atom),
        crate::families::Support::Continuous(_) => {}
    }
    pts
}

/// `top` is false for inner levels, which accept a noise-limited quadrature
/// result (error estimate below `1e-3` relative): far from the data the
/// sup-likelihood loses digits to cancellation, and those points carry
/// negligible weight in the outer integral anyway.
fn nested(family: &FamilySpec, prefix: &Prefix, remaining: usize, top: bool) -> Result<f64> {
    if remaining == 0 {
        return Ok(prefix.log_sup(family));
    }
    let center = prefix.center(family);
    let slot = ErrorSlot::new();
    let inner = |y: f64| slot.capture(nested(family, &prefix.push(family, y), remaining - 1, false));
    let candidates = observation_candidates(family, center);
    let log_ref = reference(&|y| inner(y), &candidates);
    // far out, inner normalizers lose all precision to cancellation
    // and carry quadrature noise, so outer levels probe nearer and ask for less
    let (decades, tol): (&[i32], _) = if remaining > 1 {
        (&[3, 4, 5, 6], Tolerance::new(1e-13, 1e-9))
    } else {
        (&FAR_DECADES, Tolerance::strict())
    };
    let w = |y: f64| (inner(y) - log_ref).exp();
    let value = match integrate_observations_with(family, &w, center, 1.5, decades, tol) {
        Err(Error::Quadrature(QuadratureError::NonConvergence { value, abs_error, .. }))
            if !top && abs_error <= 1e-3 * value.abs() =>
        {
            Ok(value)
        }
        other => other,
    };
    let value = slot.check(value).map_err(as_normalizer_error)?;
    log_integral_from(value, log_ref)
}

/// Measure carrying the `k`-fold convolution of the base density.
enum PowerSupport {
    Line(f64, f64),
    HalfLineWithAtom,
    Lattice,
    Range(u64),
}

fn power_support(family: &FamilySpec, k: usize) -> PowerSupport {
    match family.kind() {
        FamilyKind::GaussianLocation { .. } => PowerSupport::Line(f64::NEG_INFINITY, f64::INFINITY),
        FamilyKind::GammaShape { .. } => PowerSupport::Line(0.0, f64::INFINITY),
        FamilyKind::Tweedie32 => PowerSupport::HalfLineWithAtom,
        FamilyKind::Poisson => PowerSupport::Lattice,
        FamilyKind::Bernoulli => PowerSupport::Range(k as u64),
        FamilyKind::Transformed { .. } => unreachable!("called on natural bases only"),
    }
}

/// `ln h^{*k}(s)`, the density of a sum of `k` base-measure draws.
fn log_base_power(family: &FamilySpec, k: usize, s: f64) -> f64 {
    let kf = k as f64;
    match family.kind() {
        FamilyKind::GaussianLocation { variance } => {
            let v = kf * variance;
            -s * s / (2.0 * v) - 0.5 * (2.0 * std::f64::consts::PI * v).ln()
        }
        FamilyKind::GammaShape { shape } => {
            let a = kf * shape;
            if s <= 0.0 {
                return f64::NEG_INFINITY;
            }
            (a - 1.0) * s.ln() - ln_gamma(a)
        }
        FamilyKind::Tweedie32 => {
            if s < 0.0 {
                f64::NEG_INFINITY
            } else if s == 0.0 {
                0.0
            } else {
                kf.ln() + tweedie::log_base_density(kf * s).0
            }
        }
        FamilyKind::Poisson => s * kf.ln() - ln_gamma(s + 1.0),
        FamilyKind::Bernoulli => {
            let n = kf;
            ln_gamma(n + 1.0) - ln_gamma(s + 1.0) - ln_gamma(n - s + 1.0)
        }
        FamilyKind::Transformed { .. } => unreachable!("called on natural bases only"),
    }
}

/// `ln ∫ h^{*k}(s) exp(ell(S + s)) dλ_k(s)` over the natural base family.
fn convolution(family: &FamilySpec, prefix: &Prefix, k: usize) -> Result<f64> {
    let base = family.natural_base();
    let n = prefix.count + k as f64;
    let log_f = |s: f64| {
        let lb = log_base_power(base, k, s);
        if lb == f64::NEG_INFINITY {
            return lb;
        }
        lb + log_sup_stats(base, n, prefix.sum + s)
    };
    let center = prefix.center(base);
    let kf = k as f64;
    let mid = kf * center;
    let sd = (kf.sqrt() * base.sigma(center) * 1.5).max(1e-300);
    let log_ref;
    let value = match power_support(base, k) {
        PowerSupport::Line(lo, hi) => {
            let bp: Vec<f64> = [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0]
                .iter()
                .map(|j| mid + j * sd)
                .filter(|&p| p > lo && p < hi)
                .collect();
            log_ref = reference(&log_f, &bp);
            let w = |s: f64| (log_f(s) - log_ref).exp();
            check_integrable(&w, lo, hi, mid, 4.0 * sd).map_err(|(tail, p)| divergence(tail, p))?;
            integrator().breakpoints(&bp).tail_scale(4.0 * sd).integrate(w, lo, hi)?.value
        }
        PowerSupport::HalfLineWithAtom => {
            let bp: Vec<f64> = [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0]
                .iter()
                .map(|j| mid + j * sd)
                .filter(|&p| p > 0.0)
                .collect();
            let mut cands = bp.clone();
            cands.push(0.0);
            log_ref = reference(&log_f, &cands);
            let w = |s: f64| (log_f(s) - log_ref).exp();
            check_integrable(&w, 0.0, f64::INFINITY, mid, 4.0 * sd)
                .map_err(|(tail, p)| divergence(tail, p))?;
            w(0.0)
                + integrator()
                    .breakpoints(&bp)
                    .tail_scale(4.0 * sd)
                    .integrate(|s| if s > 0.0 { w(s) } else { 0.0 }, 0.0, f64::INFINITY)?
                    .value
        }
        PowerSupport::Lattice => {
            let start = mid.max(0.0).round() as u64;
            log_ref = reference(&log_f, &[start as f64, start as f64 + 1.0]);
            let w = |j: u64| (log_f(j as f64) - log_ref).exp();
            sum_lattice(&w, start, None, 10_000_000)
                .map_err(|(tail, p)| divergence(tail, p))?
                .value
        }
        PowerSupport::Range(kmax) => {
            let pts: Vec<f64> = (0..=kmax).map(|j| j as f64).collect();
            log_ref = reference(&log_f, &pts);
            pts.iter().map(|&s| (log_f(s) - log_ref).exp()).sum()
        }
    };
    Ok(prefix.log_base() + log_integral_from(value, log_ref)?)
}

fn divergence(tail: Tail, p: f64) -> Error {
    Error::DivergentNormalizer {
        tail,
        detail: format!("Shtarkov integrand decays like |s|^-{p:.3} in the {tail} tail; increase m"),
    }
}

/// `ln ∫ sup_theta p_theta(history, y) dλ^horizon(y)`.
pub fn cnml_log_normalizer(
    family: &FamilySpec,
    history: &[f64],
    horizon: usize,
    route: ShtarkovRoute,
) -> Result<f64> {
    if horizon == 0 {
        return Ok(Prefix::of(family, history).log_sup(family));
    }
    let limit = match route {
        ShtarkovRoute::Nested => MAX_NESTED_HORIZON,
        ShtarkovRoute::SufficientStatistic if family.is_discrete() => MAX_DISCRETE_HORIZON,
        ShtarkovRoute::SufficientStatistic => MAX_CONTINUOUS_HORIZON,
    };
    if horizon > limit {
        return Err(Error::HorizonTooLarge {
            requested: horizon,
            max: limit,
        });
    }
    let prefix = Prefix::of(family, history);
    match route {
        ShtarkovRoute::Nested => nested(family, &prefix, horizon, true),
        ShtarkovRoute::SufficientStatistic => convolution(family, &prefix, horizon),
    }
}

/// CNML joint of `x_{m+1}^n` given `x^m`, with an explicit route.
pub fn cnml_joint_with(family: &FamilySpec, seq: &ObservationSequence, n: usize, route: ShtarkovRoute) -> Result<f64> {
    require_len(seq, n)?;
    seq.validate_for(family)?;
    let m = seq.m();
    let values = &seq.values()[..n];
    if n == m {
        return Ok(1.0);
    }
    let norm = cnml_log_normalizer(family, &values[..m], n - m, route)?;
    Ok((Prefix::of(family, values).log_sup(family) - norm).exp())
}

pub fn cnml_log_joint(family: &FamilySpec, seq: &ObservationSequence, n: usize) -> Result<f64> {
    require_len(seq, n)?;
    seq.validate_for(family)?;
    let m = seq.m();
    if n == m {
        return Ok(0.0);
    }
    if exact_bernoulli(family) {
        let bits = exact::to_bits(&seq.values()[..n])?;
        return Ok(log_rational(&exact::cnml_joint(&bits, m)?));
    }
    let values = &seq.values()[..n];
    let norm = cnml_log_normalizer(family, &values[..m], n - m, ShtarkovRoute::SufficientStatistic)?;
    Ok(Prefix::of(family, values).log_sup(family) - norm)
}

/// `sup p(x^n) / ∫ sup p(x^m y^{n-m})`: Bernoulli on `[0, 1]` exactly, other
/// families through the sufficient-statistic route.
pub fn cnml_joint(family: &FamilySpec, seq: &ObservationSequence, n: usize) -> Result<f64> {
    cnml_log_joint(family, seq, n).map(f64::exp)
}

/// NML joint of the first `n` observations (the conditioning length is ignored).
pub fn nml_joint(family: &FamilySpec, seq: &ObservationSequence, n: usize) -> Result<f64> {
    let whole = ObservationSequence::new(seq.values()[..n.min(seq.len())].to_vec(), 0)?;
    if n > seq.len() {
        return Err(Error::Domain(format!("horizon {n} exceeds sequence length {}", seq.len())));
    }
    cnml_joint(family, &whole, n)
}
