//! Prediction strategies: NML, conditional NML, sequential NML, and Bayes
//! with the Jeffreys prior.
//!
//! All likelihood computations go through the sufficient statistic: the
//! maximum of `theta * S - n * A(theta)` over the mean domain is attained at
//! the sample mean clipped to that domain.

pub mod exact;
mod shtarkov;

use std::cell::RefCell;

use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::families::{FamilyKind, FamilySpec, ObservationSequence, Support};
use crate::quadrature::{check_integrable, check_integrable_at, sum_lattice, Integrator, Tolerance, FAR_DECADES};

pub use shtarkov::{
    cnml_joint, cnml_joint_with, cnml_log_joint, cnml_log_normalizer, nml_joint, ShtarkovRoute,
    MAX_CONTINUOUS_HORIZON, MAX_DISCRETE_HORIZON, MAX_NESTED_HORIZON,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Snml,
    BayesJeffreys,
    Cnml,
    Nml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonTag {
    /// Sequential NML: the horizon is always the next step.
    OneStep,
    /// CNML or NML with horizon `n`.
    Horizon(usize),
    Bayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    /// `-ln q(x_{m+1}^n | x^m)`
    pub strategy_loss: f64,
    /// `ln sup_theta p_theta(x^n)`
    pub best_expert_loglik: f64,
    pub regret: f64,
    pub m: usize,
    pub n: usize,
}

/// Conditioning length that makes the Jeffreys posterior and the SNML
/// normalizer finite for the built-in families.
pub fn default_m(family: &FamilySpec) -> usize {
    match family.natural_base().kind() {
        FamilyKind::Bernoulli => 0,
        _ => 1,
    }
}

/// Integral of the normalization `1e-11` relative is plenty for the checks
/// built on top, which compare at `1e-8`.
pub(crate) fn integrator() -> Integrator {
    Integrator::new().tolerance(Tolerance::strict())
}

/// `ln sup p(x^n)` without the `ln h` terms, from `n` and the statistic sum.
pub(crate) fn log_sup_stats(family: &FamilySpec, n: f64, sum: f64) -> f64 {
    let mu = family.mean_domain().clip(sum / n);
    family.sufficient_loglik(mu, n, sum)
}

/// Sufficient summary of a prefix: count, statistic sum and running mean
/// and centered sum of squares, `sum ln h` of the base family, and the log
/// Jacobians of any transformation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Prefix {
    pub count: f64,
    pub sum: f64,
    mean: f64,
    m2: f64,
    log_h: f64,
    log_jac: f64,
}

impl Prefix {
    pub fn empty() -> Self {
        Prefix {
            count: 0.0,
            sum: 0.0,
            mean: 0.0,
            m2: 0.0,
            log_h: 0.0,
            log_jac: 0.0,
        }
    }

    pub fn of(family: &FamilySpec, values: &[f64]) -> Self {
        values.iter().fold(Self::empty(), |p, &x| p.push(family, x))
    }

    pub fn push(self, family: &FamilySpec, x: f64) -> Self {
        let t = family.statistic(x);
        let count = self.count + 1.0;
        let delta = t - self.mean;
        let mean = self.mean + delta / count;
        Prefix {
            count,
            sum: self.sum + t,
            mean,
            m2: self.m2 + delta * (t - mean),
            log_h: self.log_h + family.natural_base().log_base(t),
            log_jac: self.log_jac + family.log_jacobian(x),
        }
    }

    pub fn log_base(&self) -> f64 {
        self.log_h + self.log_jac
    }

    /// `ln sup_theta p_theta` of the prefix.
    pub fn log_sup(&self, family: &FamilySpec) -> f64 {
        if self.count == 0.0 {
            return 0.0;
        }
        if self.log_h == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let base = family.natural_base();
        if let FamilyKind::GaussianLocation { variance } = base.kind() {
            // centered form; the generic one cancels catastrophically far out
            let n = self.count;
            let mu = base.mean_domain().clip(self.mean);
            return self.log_jac
                - (self.m2 + n * (self.mean - mu).powi(2)) / (2.0 * variance)
                - 0.5 * n * (2.0 * std::f64::consts::PI * variance).ln();
        }
        self.log_base() + log_sup_stats(family, self.count, self.sum)
    }

    /// Where the next observation's statistic is expected to fall.
    pub fn center(&self, family: &FamilySpec) -> f64 {
        let mean = if self.count > 0.0 {
            family.mean_domain().clip(self.sum / self.count)
        } else {
            family.typical_mean()
        };
        family.full_mean_space().nudge_inside(family.mean_domain().nudge_inside(mean))
    }
}

fn divergent(tail: crate::error::Tail, exponent: f64, what: &str) -> Error {
    Error::DivergentIntegral {
        tail,
        detail: format!("{what} decays like |x|^-{exponent:.3} (non-integrable)"),
    }
}

/// `sum/integral of w` over the observation space with the family's base
/// measure. `center` is a mean in statistic space near which `w` has its mass.
pub(crate) fn integrate_observations<F: Fn(f64) -> f64>(
    family: &FamilySpec,
    w: &F,
    center: f64,
    spread: f64,
) -> Result<f64> {
    integrate_observations_with(family, w, center, spread, &FAR_DECADES, Tolerance::strict())
}

/// As [`integrate_observations`], probing infinite tails at `scale * 10^k`
/// for `k` in `decades`.
pub(crate) fn integrate_observations_with<F: Fn(f64) -> f64>(
    family: &FamilySpec,
    w: &F,
    center: f64,
    spread: f64,
    decades: &[i32],
    tol: Tolerance,
) -> Result<f64> {
    match family.support() {
        Support::Continuous(interval) | Support::ContinuousWithAtom { interval, .. } => {
            let (bp, scale) = family.observation_hints(center, spread);
            let anchor = if bp.is_empty() {
                interval.typical_point()
            } else {
                bp[bp.len() / 2]
            };
            check_integrable_at(w, interval.lower, interval.upper, anchor, scale, decades)
                .map_err(|(tail, p)| divergent(tail, p, "integrand"))?;
            let atom = match family.support() {
                Support::ContinuousWithAtom { atom, .. } => w(atom),
                _ => 0.0,
            };
            let r = Integrator::new()
                .tolerance(tol)
                .breakpoints(&bp)
                .tail_scale(scale)
                .integrate(w, interval.lower, interval.upper)?;
            Ok(r.value + atom)
        }
        Support::Finite(points) => Ok(points.iter().map(|&x| w(x)).sum()),
        Support::Lattice => {
            let start = center.max(0.0).round() as u64;
            let s = sum_lattice(&|k| w(family.lattice_point(k)), start, None, 10_000_000)
                .map_err(|(tail, p)| divergent(tail, p, "summand"))?;
            Ok(s.value)
        }
    }
}

pub(crate) fn exact_bernoulli(family: &FamilySpec) -> bool {
    !family.is_transformed() && matches!(family.kind(), FamilyKind::Bernoulli) && family.is_maximal()
}

enum Rule {
    /// Two-point law with `P(1) = p_one`.
    Exact { p_one: f64, log_normalizer: f64 },
    Snml { prefix: Prefix, log_normalizer: f64 },
    Bayes(Posterior),
}

/// A one-step predictive law: a density on the continuous part of the
/// support plus point masses.
pub struct PredictiveDistribution {
    family: FamilySpec,
    rule: Rule,
    horizon: HorizonTag,
}

impl std::fmt::Debug for PredictiveDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PredictiveDistribution")
            .field("family", &self.family.name())
            .field("horizon", &self.horizon)
            .field("normalizer", &self.normalizer())
            .finish()
    }
}

impl PredictiveDistribution {
    pub fn horizon(&self) -> HorizonTag {
        self.horizon
    }

    pub fn family(&self) -> &FamilySpec {
        &self.family
    }

    /// The denominator actually computed: the one-step Shtarkov integral for
    /// SNML, the posterior normalizer for Bayes. Reported in log form.
    pub fn log_normalizer(&self) -> f64 {
        match &self.rule {
            Rule::Exact { log_normalizer, .. } => *log_normalizer,
            Rule::Snml { log_normalizer, .. } => *log_normalizer,
            Rule::Bayes(p) => p.log_norm + p.log_ref,
        }
    }

    pub fn normalizer(&self) -> f64 {
        self.log_normalizer().exp()
    }

    /// Log of the density at a continuous point or the mass at an atom.
    pub fn log_prob(&self, x: f64) -> f64 {
        let f = &self.family;
        if !f.convex_core().in_closure(x) {
            return f64::NEG_INFINITY;
        }
        match &self.rule {
            Rule::Exact { p_one, .. } => {
                if x == 1.0 {
                    p_one.ln()
                } else if x == 0.0 {
                    (1.0 - p_one).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Rule::Snml {
                prefix,
                log_normalizer,
            } => prefix.push(f, x).log_sup(f) - log_normalizer,
            Rule::Bayes(post) => post.log_predictive(f, x).unwrap_or(f64::NAN),
        }
    }

    pub fn prob(&self, x: f64) -> f64 {
        self.log_prob(x).exp()
    }

    /// Continuous density; zero at atoms.
    pub fn density(&self, x: f64) -> f64 {
        if self.family.is_atom(x) {
            0.0
        } else {
            self.prob(x)
        }
    }

    /// Point mass; zero away from atoms.
    pub fn mass(&self, x: f64) -> f64 {
        if self.family.is_atom(x) {
            self.prob(x)
        } else {
            0.0
        }
    }

    /// Point masses with non-negligible weight, in increasing location order.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self.family.support() {
            Support::Continuous(_) => Vec::new(),
            Support::ContinuousWithAtom { atom, .. } => vec![(atom, self.prob(atom))],
            Support::Finite(points) => points.iter().map(|&x| (x, self.prob(x))).collect(),
            Support::Lattice => {
                let mut out = Vec::new();
                let mut total = 0.0;
                for k in 0..10_000_000u64 {
                    let x = self.family.lattice_point(k);
                    let p = self.prob(x);
                    total += p;
                    out.push((x, p));
                    if total > 1.0 - 1e-15 || (k > 20 && p < 1e-300) {
                        break;
                    }
                }
                out.sort_by(|a, b| a.0.total_cmp(&b.0));
                out
            }
        }
    }

    /// Atom masses plus the integral of the density.
    pub fn total_mass(&self) -> Result<f64> {
        let center = match &self.rule {
            Rule::Snml { prefix, .. } => prefix.center(&self.family),
            Rule::Bayes(p) => p.center,
            Rule::Exact { .. } => 0.5,
        };
        integrate_observations(&self.family, &|x| self.prob(x), center, 1.5)
    }
}

/// SNML: `p(x | history) ∝ sup_theta p_theta(history, x)`.
pub fn snml_predictive(family: &FamilySpec, history: &ObservationSequence) -> Result<PredictiveDistribution> {
    history.validate_for(family)?;
    if exact_bernoulli(family) {
        let bits = exact::to_bits(history.values())?;
        let p_one = exact::to_f64(&exact::snml_next_one(&bits));
        let k = bits.iter().filter(|&&b| b == 1).count();
        let t = bits.len() + 1;
        let norm = exact::sup_probability_counts(k + 1, t) + exact::sup_probability_counts(k, t);
        return Ok(PredictiveDistribution {
            family: family.clone(),
            rule: Rule::Exact {
                p_one,
                log_normalizer: log_rational(&norm) + Prefix::of(family, history.values()).log_base(),
            },
            horizon: HorizonTag::OneStep,
        });
    }
    let prefix = Prefix::of(family, history.values());
    let log_normalizer = shtarkov::one_step_log_normalizer(family, &prefix)?;
    Ok(PredictiveDistribution {
        family: family.clone(),
        rule: Rule::Snml {
            prefix,
            log_normalizer,
        },
        horizon: HorizonTag::OneStep,
    })
}

/// Jeffreys posterior in the mean chart: `pi(mu | x^t) ∝ p_mu(x^t) / sigma(mu)`.
struct Posterior {
    count: f64,
    sum: f64,
    log_ref: f64,
    /// `ln` of the integral of `exp(log_weight - log_ref)`.
    log_norm: f64,
    center: f64,
}

impl Posterior {
    fn new(family: &FamilySpec, values: &[f64]) -> Result<Self> {
        let prefix = Prefix::of(family, values);
        let center = prefix.center(family);
        let mut post = Posterior {
            count: prefix.count,
            sum: prefix.sum,
            log_ref: 0.0,
            log_norm: 0.0,
            center,
        };
        post.log_ref = post.log_weight(family, center);
        let d = family.mean_domain();
        let (bp, scale) = family.parameter_hints(center, prefix.count + 1.0);
        let w = |mu: f64| (post.log_weight(family, mu) - post.log_ref).exp();
        check_integrable(&w, d.lower, d.upper, center, scale).map_err(|(tail, p)| Error::ImproperPosterior {
            tail,
            detail: format!(
                "posterior weight behaves like |mu|^-{p:.3} at the {tail} end of the mean domain"
            ),
        })?;
        let r = integrator()
            .breakpoints(&bp)
            .tail_scale(scale)
            .integrate(w, d.lower, d.upper)?;
        if !(r.value > 0.0 && r.value.is_finite()) {
            return Err(Error::ImproperPosterior {
                tail: crate::error::Tail::Upper,
                detail: format!("posterior normalizer evaluated to {}", r.value),
            });
        }
        post.log_norm = r.value.ln();
        Ok(post)
    }

    fn log_weight(&self, family: &FamilySpec, mu: f64) -> f64 {
        let ll = if self.count == 0.0 {
            0.0
        } else {
            family.sufficient_loglik(mu, self.count, self.sum)
        };
        ll - family.sigma(mu).ln()
    }

    fn log_predictive(&self, family: &FamilySpec, x: f64) -> Result<f64> {
        let lb = family.log_base(x);
        if lb == f64::NEG_INFINITY {
            return Ok(lb);
        }
        let t = family.statistic(x);
        // sum of the two peaks' hints covers both the posterior and the
        // posterior updated by x
        let (mut bp, scale) = family.parameter_hints(self.center, self.count + 1.0);
        let updated = family
            .full_mean_space()
            .nudge_inside(family.mean_domain().nudge_inside(family.mean_domain().clip((self.sum + t) / (self.count + 1.0))));
        let (bp2, scale2) = family.parameter_hints(updated, self.count + 2.0);
        bp.extend(bp2);
        let lw = |mu: f64| {
            if family.is_degenerate_mean(mu) {
                return f64::NEG_INFINITY;
            }
            let theta = family.theta_of_mean(mu);
            self.log_weight(family, mu) + theta * t - family.log_partition(theta)
        };
        let shift = lw(updated).max(lw(self.center));
        let d = family.mean_domain();
        let r = integrator()
            .breakpoints(&bp)
            .tail_scale(scale.min(scale2))
            .integrate(|mu| (lw(mu) - shift).exp(), d.lower, d.upper)?;
        Ok(lb + shift + r.value.ln() - self.log_ref - self.log_norm)
    }
}

/// Posterior predictive under the Jeffreys prior, by quadrature over the mean.
pub fn bayes_jeffreys_predictive(
    family: &FamilySpec,
    history: &ObservationSequence,
) -> Result<PredictiveDistribution> {
    history.validate_for(family)?;
    if exact_bernoulli(family) {
        let bits = exact::to_bits(history.values())?;
        let p_one = exact::to_f64(&exact::bayes_next_one(&bits));
        // Beta(k + 1/2, t - k + 1/2) normalizer of the Jeffreys posterior
        let k = bits.iter().filter(|&&b| b == 1).count() as f64;
        let t = bits.len() as f64;
        let log_beta = ln_gamma(k + 0.5) + ln_gamma(t - k + 0.5) - ln_gamma(t + 1.0);
        return Ok(PredictiveDistribution {
            family: family.clone(),
            rule: Rule::Exact {
                p_one,
                log_normalizer: log_beta,
            },
            horizon: HorizonTag::Bayes,
        });
    }
    let post = Posterior::new(family, history.values())?;
    Ok(PredictiveDistribution {
        family: family.clone(),
        rule: Rule::Bayes(post),
        horizon: HorizonTag::Bayes,
    })
}

/// `ln` of the strategy's probability of `x_{m+1}^n` given `x^m`.
pub fn strategy_log_joint(family: &FamilySpec, strategy: Strategy, seq: &ObservationSequence) -> Result<f64> {
    seq.validate_for(family)?;
    let (m, n) = (seq.m(), seq.len());
    if n <= m {
        return Ok(0.0);
    }
    match strategy {
        Strategy::Cnml => cnml_log_joint(family, seq, n),
        Strategy::Nml if m == 0 => Ok(nml_joint(family, seq, n)?.ln()),
        // NML conditioned on x^m is CNML
        Strategy::Nml => cnml_log_joint(family, seq, n),
        Strategy::Snml | Strategy::BayesJeffreys if exact_bernoulli(family) => {
            let bits = exact::to_bits(seq.values())?;
            let joint = if strategy == Strategy::Snml {
                exact::snml_joint(&bits, m)?
            } else {
                exact::bayes_joint(&bits, m)?
            };
            Ok(log_rational(&joint))
        }
        Strategy::Snml | Strategy::BayesJeffreys => {
            let mut total = 0.0;
            for t in m..n {
                let history = ObservationSequence::new(seq.values()[..t].to_vec(), t)?;
                let pred = if strategy == Strategy::Snml {
                    snml_predictive(family, &history)?
                } else {
                    bayes_jeffreys_predictive(family, &history)?
                };
                total += pred.log_prob(seq.values()[t]);
            }
            Ok(total)
        }
    }
}

/// Product of one-step predictive densities/masses over `x_{m+1}^n`.
pub fn strategy_joint(family: &FamilySpec, strategy: Strategy, seq: &ObservationSequence) -> Result<f64> {
    strategy_log_joint(family, strategy, seq).map(f64::exp)
}

/// `regret = -ln q(x_{m+1}^n | x^m) + ln sup_theta p_theta(x^n)`.
pub fn conditional_regret(family: &FamilySpec, strategy: Strategy, seq: &ObservationSequence) -> Result<RegretRecord> {
    let strategy_loss = -strategy_log_joint(family, strategy, seq)?;
    let best_expert_loglik = family.log_max_likelihood(seq.values())?;
    Ok(RegretRecord {
        strategy_loss,
        best_expert_loglik,
        regret: strategy_loss + best_expert_loglik,
        m: seq.m(),
        n: seq.len(),
    })
}

pub(crate) fn log_rational(r: &num_rational::BigRational) -> f64 {
    // ln(a/b) from the big integers directly, so tiny joints do not underflow
    if r.is_one() {
        return 0.0;
    }
    fn ln_big(x: &num_bigint::BigInt) -> f64 {
        let bits = x.bits();
        if bits < 1000 {
            return x.to_f64().unwrap_or(f64::NAN).ln();
        }
        let shift = bits - 900;
        let top: num_bigint::BigInt = x >> shift;
        top.to_f64().unwrap_or(f64::NAN).ln() + shift as f64 * std::f64::consts::LN_2
    }
    ln_big(r.numer()) - ln_big(r.denom())
}

/// Captures the first error raised inside a quadrature callback.
pub(crate) struct ErrorSlot(RefCell<Option<Error>>);

impl ErrorSlot {
    pub fn new() -> Self {
        ErrorSlot(RefCell::new(None))
    }

    pub fn capture(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    }

    pub fn check<T>(self, value: Result<T>) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => value,
        }
    }
}

pub(crate) fn require_len(seq: &ObservationSequence, n: usize) -> Result<()> {
    if n < seq.m() || n > seq.len() {
        return Err(domain(format!(
            "horizon {n} must lie between m = {} and the sequence length {}",
            seq.m(),
            seq.len()
        )));
    }
    Ok(())
}
