//! One-dimensional natural exponential families `h(x) exp(theta x - A(theta))`.
//!
//! A [`FamilySpec`] fixes the cumulant function `A`, the base density `h`
//! (relative to Lebesgue, counting, or Lebesgue plus an atom at zero), and the
//! mean-value domain. Parameters travel as [`ParamValue`]s tagged with their
//! chart (natural, mean, or geodesic).

mod json;
pub mod transform;

use std::f64::consts::{PI, SQRT_2};
use std::ops::Range;

use rand::Rng;
use rand_distr::{Bernoulli as BernoulliDist, Distribution, Gamma, Normal, Poisson as PoissonDist};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::tweedie;

pub use transform::MonotoneMap;

/// Interval of the extended real line with endpoint inclusion flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub lower_included: bool,
    pub upper_included: bool,
}

/// The support interval of the base measure; an endpoint is included iff the
/// base measure puts an atom there.
pub type ConvexCore = Interval;

impl Interval {
    pub fn new(lower: f64, upper: f64, lower_included: bool, upper_included: bool) -> Self {
        Self {
            lower,
            upper,
            lower_included: lower_included && lower.is_finite(),
            upper_included: upper_included && upper.is_finite(),
        }
    }

    pub fn open(lower: f64, upper: f64) -> Self {
        Self::new(lower, upper, false, false)
    }

    pub fn closed(lower: f64, upper: f64) -> Self {
        Self::new(lower, upper, true, true)
    }

    pub fn real_line() -> Self {
        Self::open(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn has_interior(&self) -> bool {
        self.lower < self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        (x > self.lower || (self.lower_included && x == self.lower))
            && (x < self.upper || (self.upper_included && x == self.upper))
    }

    pub fn in_closure(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper && !x.is_nan()
    }

    pub fn in_interior(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    pub fn clip(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }

    pub fn is_endpoint(&self, x: f64) -> bool {
        x == self.lower || x == self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// A point comfortably inside the interval, used as a default anchor.
    pub fn typical_point(&self) -> f64 {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (true, false) => self.lower + 1.0,
            (false, true) => self.upper - 1.0,
            (false, false) => 0.0,
        }
    }

    /// Moves `x` into the interior if it sits on (or beyond) an endpoint.
    pub fn nudge_inside(&self, x: f64) -> f64 {
        if self.in_interior(x) {
            return x;
        }
        let step = if self.width().is_finite() {
            0.05 * self.width()
        } else {
            0.5
        };
        if x <= self.lower {
            self.lower + step
        } else {
            self.upper - step
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMeasure {
    Lebesgue,
    Counting,
    LebesguePlusAtomAtZero,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    GaussianLocation { variance: f64 },
    GammaShape { shape: f64 },
    /// Canonical scaling `V(mu) = 2 mu^{3/2}`.
    Tweedie32,
    Bernoulli,
    Poisson,
    /// Law of `f(X)` for `X` from `base`, indexed by the base parameters.
    Transformed { base: Box<FamilySpec>, map: MonotoneMap },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Natural,
    Mean,
    Geodesic,
}

/// A scalar parameter tagged with its chart.
///
/// `reference` is the base point `mu_0` of the geodesic chart,
/// `beta = integral_{mu_0}^{mu} dt / sigma(t)`. When absent, the family's
/// default anchor is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamValue {
    pub value: f64,
    pub chart: Chart,
    pub reference: Option<f64>,
}

impl ParamValue {
    pub fn mean(value: f64) -> Self {
        Self {
            value,
            chart: Chart::Mean,
            reference: None,
        }
    }

    pub fn natural(value: f64) -> Self {
        Self {
            value,
            chart: Chart::Natural,
            reference: None,
        }
    }

    pub fn geodesic(value: f64, reference: f64) -> Self {
        Self {
            value,
            chart: Chart::Geodesic,
            reference: Some(reference),
        }
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }
}

/// Ordered observations with a conditioning length `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSequence {
    values: Vec<f64>,
    m: usize,
}

impl ObservationSequence {
    pub fn new(values: Vec<f64>, m: usize) -> Result<Self> {
        if m > values.len() {
            return Err(domain(format!(
                "conditioning length {m} exceeds sequence length {}",
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(domain("observations must not be NaN"));
        }
        Ok(Self { values, m })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn history(&self) -> &[f64] {
        &self.values[..self.m]
    }

    pub fn continuation(&self) -> &[f64] {
        &self.values[self.m..]
    }

    /// Checks every value against the closure of the family's convex core.
    pub fn validate_for(&self, family: &FamilySpec) -> Result<()> {
        let cc = family.convex_core();
        for &x in &self.values {
            if !cc.in_closure(x) {
                return Err(Error::UnsupportedPoint {
                    x,
                    lower: cc.lower,
                    upper: cc.upper,
                });
            }
        }
        Ok(())
    }
}

/// Maximum-likelihood mean of a window of observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleEstimate {
    pub mean: f64,
    /// The estimate lies on an endpoint of the mean domain.
    pub boundary: bool,
}

/// How the observation space carries the base measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// Lebesgue measure on an interval.
    Continuous(Interval),
    /// Lebesgue measure plus a unit atom.
    ContinuousWithAtom { interval: Interval, atom: f64 },
    /// Counting measure on finitely many points.
    Finite(Vec<f64>),
    /// Counting measure on the images of `0, 1, 2, ...` (see [`FamilySpec::lattice_point`]).
    Lattice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    kind: FamilyKind,
    mean_domain: Interval,
}

impl FamilySpec {
    pub fn gaussian_location(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "Gaussian variance must be positive, got {variance}"
            )));
        }
        Ok(Self::with_default_domain(FamilyKind::GaussianLocation { variance }))
    }

    pub fn gamma_shape(shape: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "Gamma shape must be positive, got {shape}"
            )));
        }
        Ok(Self::with_default_domain(FamilyKind::GammaShape { shape }))
    }

    pub fn tweedie32() -> Self {
        Self::with_default_domain(FamilyKind::Tweedie32)
    }

    pub fn bernoulli() -> Self {
        Self::with_default_domain(FamilyKind::Bernoulli)
    }

    pub fn poisson() -> Self {
        Self::with_default_domain(FamilyKind::Poisson)
    }

    /// Family of `f(X)`; parameters stay those of the base family.
    pub fn transformed(base: FamilySpec, map: MonotoneMap) -> Result<Self> {
        map.validate_on(&base.convex_core())?;
        let mean_domain = base.mean_domain;
        Ok(Self {
            kind: FamilyKind::Transformed {
                base: Box::new(base),
                map,
            },
            mean_domain,
        })
    }

    fn with_default_domain(kind: FamilyKind) -> Self {
        let mut spec = Self {
            kind,
            mean_domain: Interval::real_line(),
        };
        spec.mean_domain = spec.convex_core();
        spec
    }

    /// Restricts the mean domain. Endpoints must lie in the closure of the
    /// convex core, and an endpoint on the convex-core boundary may only be
    /// included if the base measure has an atom there.
    pub fn with_mean_domain(self, domain: Interval) -> Result<Self> {
        if !domain.has_interior() {
            return Err(Error::InvalidSpec(format!(
                "mean domain [{}, {}] has empty interior",
                domain.lower, domain.upper
            )));
        }
        match self.kind {
            FamilyKind::Transformed { base, map } => {
                let base = base.with_mean_domain(domain)?;
                Self::transformed(base, map)
            }
            kind => {
                let core = Self::with_default_domain(kind.clone()).convex_core();
                let within = domain.lower >= core.lower && domain.upper <= core.upper;
                let bad_lower =
                    domain.lower_included && domain.lower == core.lower && !core.lower_included;
                let bad_upper =
                    domain.upper_included && domain.upper == core.upper && !core.upper_included;
                if !within || bad_lower || bad_upper {
                    return Err(Error::InvalidSpec(format!(
                        "mean domain {domain:?} is not inside the convex core {core:?}"
                    )));
                }
                Ok(Self {
                    kind,
                    mean_domain: domain,
                })
            }
        }
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn mean_domain(&self) -> Interval {
        self.mean_domain
    }

    /// The underlying natural family (itself unless transformed).
    pub fn natural_base(&self) -> &FamilySpec {
        match &self.kind {
            FamilyKind::Transformed { base, .. } => base.natural_base(),
            _ => self,
        }
    }

    pub fn is_transformed(&self) -> bool {
        matches!(self.kind, FamilyKind::Transformed { .. })
    }

    /// Mean domain equals the convex core.
    pub fn is_maximal(&self) -> bool {
        let base = self.natural_base();
        base.mean_domain == base.convex_core()
    }

    pub fn name(&self) -> String {
        match &self.kind {
            FamilyKind::GaussianLocation { variance } => format!("gaussian_location(variance={variance})"),
            FamilyKind::GammaShape { shape } => format!("gamma_shape(shape={shape})"),
            FamilyKind::Tweedie32 => "tweedie32".into(),
            FamilyKind::Bernoulli => "bernoulli".into(),
            FamilyKind::Poisson => "poisson".into(),
            FamilyKind::Transformed { base, map } => format!("transformed({}, {map:?})", base.name()),
        }
    }

    pub fn base_measure(&self) -> BaseMeasure {
        match &self.kind {
            FamilyKind::GaussianLocation { .. } | FamilyKind::GammaShape { .. } => BaseMeasure::Lebesgue,
            FamilyKind::Tweedie32 => BaseMeasure::LebesguePlusAtomAtZero,
            FamilyKind::Bernoulli | FamilyKind::Poisson => BaseMeasure::Counting,
            FamilyKind::Transformed { base, .. } => base.base_measure(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.base_measure() == BaseMeasure::Counting
    }

    pub fn convex_core(&self) -> ConvexCore {
        match &self.kind {
            FamilyKind::GaussianLocation { .. } => Interval::real_line(),
            FamilyKind::GammaShape { .. } => Interval::open(0.0, f64::INFINITY),
            FamilyKind::Tweedie32 | FamilyKind::Poisson => Interval::new(0.0, f64::INFINITY, true, false),
            FamilyKind::Bernoulli => Interval::closed(0.0, 1.0),
            FamilyKind::Transformed { base, map } => map.image(&base.convex_core()),
        }
    }

    pub fn support(&self) -> Support {
        match &self.kind {
            FamilyKind::GaussianLocation { .. } | FamilyKind::GammaShape { .. } => {
                Support::Continuous(self.convex_core())
            }
            FamilyKind::Tweedie32 => Support::ContinuousWithAtom {
                interval: Interval::open(0.0, f64::INFINITY),
                atom: 0.0,
            },
            FamilyKind::Bernoulli => Support::Finite(vec![0.0, 1.0]),
            FamilyKind::Poisson => Support::Lattice,
            FamilyKind::Transformed { base, map } => match base.support() {
                Support::Continuous(i) => Support::Continuous(map.image(&i)),
                Support::ContinuousWithAtom { interval, atom } => Support::ContinuousWithAtom {
                    interval: map.image(&interval),
                    atom: map.apply(atom),
                },
                Support::Finite(points) => {
                    let mut pts: Vec<f64> = points.iter().map(|&p| map.apply(p)).collect();
                    pts.sort_by(f64::total_cmp);
                    Support::Finite(pts)
                }
                Support::Lattice => Support::Lattice,
            },
        }
    }

    /// Observation-space image of the integer `k` for lattice supports.
    pub fn lattice_point(&self, k: u64) -> f64 {
        match &self.kind {
            FamilyKind::Transformed { base, map } => map.apply(base.lattice_point(k)),
            _ => k as f64,
        }
    }

    /// Maps an observation to the sufficient statistic of the natural base family.
    pub fn statistic(&self, x: f64) -> f64 {
        match &self.kind {
            FamilyKind::Transformed { base, map } => base.statistic(map.inverse(x)),
            _ => x,
        }
    }

    /// `ln h(x)` relative to the base measure; `-inf` off the support.
    pub fn log_base(&self, x: f64) -> f64 {
        match &self.kind {
            FamilyKind::GaussianLocation { variance } => {
                -x * x / (2.0 * variance) - 0.5 * (2.0 * PI * variance).ln()
            }
            FamilyKind::GammaShape { shape } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else if x == 0.0 {
                    if *shape < 1.0 {
                        f64::INFINITY
                    } else if *shape == 1.0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    (shape - 1.0) * x.ln() - ln_gamma(*shape)
                }
            }
            FamilyKind::Tweedie32 => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else if x == 0.0 {
                    0.0
                } else {
                    tweedie::log_base_density(x).0
                }
            }
            FamilyKind::Bernoulli => {
                if x == 0.0 || x == 1.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            FamilyKind::Poisson => {
                if x >= 0.0 && x.fract() == 0.0 {
                    -ln_gamma(x + 1.0)
                } else {
                    f64::NEG_INFINITY
                }
            }
            FamilyKind::Transformed { base, map } => {
                let u = map.inverse(x);
                let lb = base.log_base(u);
                if lb == f64::NEG_INFINITY || base.is_atom(u) {
                    lb
                } else {
                    lb + map.ln_inverse_jacobian(x)
                }
            }
        }
    }

    /// `ln |d T / dx|` accumulated through transformations; zero at atoms and
    /// for untransformed families.
    pub(crate) fn log_jacobian(&self, x: f64) -> f64 {
        match &self.kind {
            FamilyKind::Transformed { base, map } => {
                let u = map.inverse(x);
                if base.is_atom(u) {
                    0.0
                } else {
                    map.ln_inverse_jacobian(x) + base.log_jacobian(u)
                }
            }
            _ => 0.0,
        }
    }

    /// Whether `x` is a point mass of the base measure.
    pub fn is_atom(&self, x: f64) -> bool {
        match &self.kind {
            FamilyKind::GaussianLocation { .. } | FamilyKind::GammaShape { .. } => false,
            FamilyKind::Tweedie32 => x == 0.0,
            FamilyKind::Bernoulli | FamilyKind::Poisson => true,
            FamilyKind::Transformed { base, map } => base.is_atom(map.inverse(x)),
        }
    }

    fn natural_kind(&self) -> &FamilyKind {
        &self.natural_base().kind
    }

    /// Mean-value space of the full natural family (its convex core).
    pub fn full_mean_space(&self) -> Interval {
        self.natural_base().convex_core()
    }

    /// Boundary means that correspond to point masses (limits `theta -> +-inf`).
    pub fn is_degenerate_mean(&self, mu: f64) -> bool {
        let core = self.full_mean_space();
        (mu == core.lower && core.lower_included) || (mu == core.upper && core.upper_included)
    }

    /// `theta(mu)`, strictly increasing.
    pub fn theta_of_mean(&self, mu: f64) -> f64 {
        match self.natural_kind() {
            FamilyKind::GaussianLocation { variance } => mu / variance,
            FamilyKind::GammaShape { shape } => -shape / mu,
            FamilyKind::Tweedie32 => -1.0 / mu.sqrt(),
            FamilyKind::Bernoulli => (mu / (1.0 - mu)).ln(),
            FamilyKind::Poisson => mu.ln(),
            FamilyKind::Transformed { .. } => unreachable!("natural base is never transformed"),
        }
    }

    pub fn mean_of_theta(&self, theta: f64) -> f64 {
        match self.natural_kind() {
            FamilyKind::GaussianLocation { variance } => variance * theta,
            FamilyKind::GammaShape { shape } => -shape / theta,
            FamilyKind::Tweedie32 => 1.0 / (theta * theta),
            FamilyKind::Bernoulli => 1.0 / (1.0 + (-theta).exp()),
            FamilyKind::Poisson => theta.exp(),
            FamilyKind::Transformed { .. } => unreachable!("natural base is never transformed"),
        }
    }

    /// Natural parameter space of the full family.
    pub fn natural_space(&self) -> Interval {
        match self.natural_kind() {
            FamilyKind::GammaShape { .. } | FamilyKind::Tweedie32 => Interval::open(f64::NEG_INFINITY, 0.0),
            _ => Interval::real_line(),
        }
    }

    /// Cumulant function `A(theta)`.
    pub fn log_partition(&self, theta: f64) -> f64 {
        match self.natural_kind() {
            FamilyKind::GaussianLocation { variance } => 0.5 * variance * theta * theta,
            FamilyKind::GammaShape { shape } => -shape * (-theta).ln(),
            FamilyKind::Tweedie32 => -1.0 / theta,
            FamilyKind::Bernoulli => {
                // softplus
                if theta > 0.0 {
                    theta + (-theta).exp().ln_1p()
                } else {
                    theta.exp().ln_1p()
                }
            }
            FamilyKind::Poisson => theta.exp(),
            FamilyKind::Transformed { .. } => unreachable!("natural base is never transformed"),
        }
    }

    fn variance_unchecked(&self, mu: f64) -> f64 {
        match self.natural_kind() {
            FamilyKind::GaussianLocation { variance } => *variance,
            FamilyKind::GammaShape { shape } => mu * mu / shape,
            FamilyKind::Tweedie32 => 2.0 * mu.powf(1.5),
            FamilyKind::Bernoulli => mu * (1.0 - mu),
            FamilyKind::Poisson => mu,
            FamilyKind::Transformed { .. } => unreachable!("natural base is never transformed"),
        }
    }

    /// `sigma(mu) = V(mu)^{1/2}` without domain checks.
    pub(crate) fn sigma(&self, mu: f64) -> f64 {
        self.variance_unchecked(mu).sqrt()
    }

    /// Variance of the member with mean `mu` (of the base statistic for
    /// transformed families).
    pub fn variance_function(&self, mu: f64) -> Result<f64> {
        let core = self.full_mean_space();
        if !core.in_interior(mu) || !self.mean_domain.in_closure(mu) {
            return Err(domain(format!(
                "mean {mu} is not an interior mean of {}",
                self.name()
            )));
        }
        Ok(self.variance_unchecked(mu))
    }

    fn default_reference(&self) -> f64 {
        match self.natural_kind() {
            FamilyKind::GaussianLocation { .. } => 0.0,
            FamilyKind::Bernoulli => 0.5,
            _ => 1.0,
        }
    }

    /// `beta(mu) = integral_{mu0}^{mu} dt / sigma(t)`.
    fn geodesic_of_mean(&self, mu: f64, mu0: f64) -> f64 {
        match self.natural_kind() {
            FamilyKind::GaussianLocation { variance } => (mu - mu0) / variance.sqrt(),
            FamilyKind::GammaShape { shape } => shape.sqrt() * (mu / mu0).ln(),
            FamilyKind::Tweedie32 => 2.0 * SQRT_2 * (mu.powf(0.25) - mu0.powf(0.25)),
            FamilyKind::Bernoulli => 2.0 * (mu.sqrt().asin() - mu0.sqrt().asin()),
            FamilyKind::Poisson => 2.0 * (mu.sqrt() - mu0.sqrt()),
            FamilyKind::Transformed { .. } => unreachable!("natural base is never transformed"),
        }
    }

    fn mean_of_geodesic(&self, beta: f64, mu0: f64) -> f64 {
        match self.natural_kind() {
            FamilyKind::GaussianLocation { variance } => mu0 + variance.sqrt() * beta,
            FamilyKind::GammaShape { shape } => mu0 * (beta / shape.sqrt()).exp(),
            FamilyKind::Tweedie32 => {
                let r = beta / (2.0 * SQRT_2) + mu0.powf(0.25);
                if r < 0.0 {
                    f64::NAN
                } else {
                    r.powi(4)
                }
            }
            FamilyKind::Bernoulli => {
                let a = 0.5 * beta + mu0.sqrt().asin();
                if !(0.0..=PI / 2.0).contains(&a) {
                    f64::NAN
                } else {
                    a.sin().powi(2)
                }
            }
            FamilyKind::Poisson => {
                let r = 0.5 * beta + mu0.sqrt();
                if r < 0.0 {
                    f64::NAN
                } else {
                    r * r
                }
            }
            FamilyKind::Transformed { .. } => unreachable!("natural base is never transformed"),
        }
    }

    fn check_mean(&self, mu: f64) -> Result<f64> {
        if !self.mean_domain.contains(mu) {
            return Err(domain(format!(
                "mean {mu} outside the mean domain [{}, {}] of {}",
                self.mean_domain.lower,
                self.mean_domain.upper,
                self.name()
            )));
        }
        Ok(mu)
    }

    /// Mean of the distribution a parameter denotes, validated against the domain.
    pub fn mean_of(&self, param: &ParamValue) -> Result<f64> {
        if param.value.is_nan() {
            return Err(domain("parameter is NaN"));
        }
        let mu = match param.chart {
            Chart::Mean => param.value,
            Chart::Natural => {
                let space = self.natural_space();
                if !(param.value >= space.lower && param.value <= space.upper)
                    || (param.value == space.upper && space.upper.is_finite())
                {
                    return Err(domain(format!("natural parameter {} out of range", param.value)));
                }
                self.mean_of_theta(param.value)
            }
            Chart::Geodesic => {
                let mu0 = param.reference.unwrap_or_else(|| self.default_reference());
                self.check_mean(mu0)?;
                let mu = self.mean_of_geodesic(param.value, mu0);
                if mu.is_nan() {
                    return Err(domain(format!("geodesic parameter {} out of range", param.value)));
                }
                mu
            }
        };
        self.check_mean(mu)
    }

    /// Re-expresses `param` in `target`; the geodesic base point is carried along.
    pub fn convert(&self, param: &ParamValue, target: Chart) -> Result<ParamValue> {
        let mu = self.mean_of(param)?;
        let reference = param.reference;
        let value = match target {
            Chart::Mean => mu,
            Chart::Natural => self.theta_of_mean(mu),
            Chart::Geodesic => {
                let mu0 = reference.unwrap_or_else(|| self.default_reference());
                self.check_mean(mu0)?;
                self.geodesic_of_mean(mu, mu0)
            }
        };
        Ok(ParamValue {
            value,
            chart: target,
            reference: if target == Chart::Geodesic {
                Some(reference.unwrap_or_else(|| self.default_reference()))
            } else {
                reference
            },
        })
    }

    /// `ln p(x)` relative to the base measure.
    pub fn log_density(&self, param: &ParamValue, x: f64) -> Result<f64> {
        let mu = self.mean_of(param)?;
        self.log_density_at_mean(mu, x)
    }

    pub fn log_density_at_mean(&self, mu: f64, x: f64) -> Result<f64> {
        let cc = self.convex_core();
        if !cc.in_closure(x) {
            return Err(Error::UnsupportedPoint {
                x,
                lower: cc.lower,
                upper: cc.upper,
            });
        }
        Ok(self.log_density_unchecked(mu, x))
    }

    pub(crate) fn log_density_unchecked(&self, mu: f64, x: f64) -> f64 {
        let t = self.statistic(x);
        if self.is_degenerate_mean(mu) {
            return if t == mu && self.log_base(x) > f64::NEG_INFINITY {
                0.0
            } else {
                f64::NEG_INFINITY
            };
        }
        let lb = self.log_base(x);
        if lb == f64::NEG_INFINITY {
            return lb;
        }
        let theta = self.theta_of_mean(mu);
        lb + theta * t - self.log_partition(theta)
    }

    /// `theta(mu) * sum - n * A(theta(mu))`: the log-likelihood minus the
    /// `ln h` terms, for `n` observations whose statistics sum to `sum`.
    pub(crate) fn sufficient_loglik(&self, mu: f64, n: f64, sum: f64) -> f64 {
        if self.is_degenerate_mean(mu) {
            return if (sum - n * mu).abs() <= 1e-12 * (1.0 + sum.abs()) {
                0.0
            } else {
                f64::NEG_INFINITY
            };
        }
        let theta = self.theta_of_mean(mu);
        theta * sum - n * self.log_partition(theta)
    }

    /// KL divergence `D(p_{mu0} || p_{mu1})`, `+inf` where absolute
    /// continuity fails.
    pub fn kl_divergence(&self, mu0: f64, mu1: f64) -> Result<f64> {
        let dom = self.mean_domain;
        for mu in [mu0, mu1] {
            if !dom.in_closure(mu) || !self.full_mean_space().in_closure(mu) {
                return Err(domain(format!("mean {mu} outside the mean domain closure")));
            }
        }
        let xlogy = |x: f64, r: f64| if x == 0.0 { 0.0 } else { x * r.ln() };
        let d = match self.natural_kind() {
            FamilyKind::GaussianLocation { variance } => (mu0 - mu1).powi(2) / (2.0 * variance),
            FamilyKind::GammaShape { shape } => {
                if mu0 <= 0.0 || mu1 <= 0.0 {
                    return Err(domain("Gamma means must be positive"));
                }
                let r = mu0 / mu1;
                shape * (r - 1.0 - r.ln())
            }
            FamilyKind::Tweedie32 => {
                if mu1 == 0.0 {
                    if mu0 == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (mu1.sqrt() - mu0.sqrt()).powi(2) / mu1.sqrt()
                }
            }
            FamilyKind::Bernoulli => {
                if (mu1 == 0.0 && mu0 > 0.0) || (mu1 == 1.0 && mu0 < 1.0) {
                    f64::INFINITY
                } else {
                    xlogy(mu0, mu0 / mu1) + xlogy(1.0 - mu0, (1.0 - mu0) / (1.0 - mu1))
                }
            }
            FamilyKind::Poisson => {
                if mu1 == 0.0 {
                    if mu0 == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    xlogy(mu0, mu0 / mu1) - mu0 + mu1
                }
            }
            FamilyKind::Transformed { .. } => unreachable!("natural base is never transformed"),
        };
        Ok(d.max(0.0))
    }

    pub fn fisher_information(&self, param: &ParamValue) -> Result<f64> {
        let mu = self.mean_of(param)?;
        let v = self.variance_function(mu)?;
        Ok(match param.chart {
            Chart::Mean => 1.0 / v,
            Chart::Natural => v,
            Chart::Geodesic => 1.0,
        })
    }

    /// Sample mean of the window (in the base statistic), clipped to the closure
    /// of the mean domain.
    pub fn mle_mean(&self, seq: &ObservationSequence, window: Range<usize>) -> Result<MleEstimate> {
        if window.start >= window.end || window.end > seq.len() {
            return Err(Error::EmptyWindow);
        }
        self.mle_of(&seq.values()[window])
    }

    pub(crate) fn mle_of(&self, values: &[f64]) -> Result<MleEstimate> {
        if values.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let sum: f64 = values.iter().map(|&x| self.statistic(x)).sum();
        let mean = self.mean_domain.clip(sum / values.len() as f64);
        Ok(MleEstimate {
            mean,
            boundary: self.mean_domain.is_endpoint(mean),
        })
    }

    /// `ln sup_theta p_theta(x_1 .. x_n)` with the supremum over the mean domain.
    pub fn log_max_likelihood(&self, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Ok(0.0);
        }
        let mle = self.mle_of(values)?;
        let mu = mle.mean;
        if !self.full_mean_space().in_interior(mu) && !self.is_degenerate_mean(mu) {
            return Err(domain(format!(
                "maximum likelihood at {mu} is not a distribution of {}",
                self.name()
            )));
        }
        let sum: f64 = values.iter().map(|&x| self.statistic(x)).sum();
        let mut total = self.sufficient_loglik(mu, values.len() as f64, sum);
        if total == f64::NEG_INFINITY {
            return Ok(total);
        }
        for &x in values {
            total += self.log_base(x);
        }
        Ok(total)
    }

    /// Draws `n` observations from the member with mean `mu`.
    pub fn sample<R: Rng + ?Sized>(&self, mu: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.check_mean(mu)?;
        if self.is_degenerate_mean(mu) {
            return Ok(vec![mu; n]);
        }
        let err = |e: String| domain(e);
        Ok(match &self.kind {
            FamilyKind::GaussianLocation { variance } => {
                let d = Normal::new(mu, variance.sqrt()).map_err(|e| err(e.to_string()))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
            FamilyKind::GammaShape { shape } => {
                let d = Gamma::new(*shape, mu / shape).map_err(|e| err(e.to_string()))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
            FamilyKind::Tweedie32 => tweedie::tweedie_sample_with(mu, n, rng)?,
            FamilyKind::Bernoulli => {
                let d = BernoulliDist::new(mu).map_err(|e| err(e.to_string()))?;
                (0..n).map(|_| if d.sample(rng) { 1.0 } else { 0.0 }).collect()
            }
            FamilyKind::Poisson => {
                let d = PoissonDist::new(mu).map_err(|e| err(e.to_string()))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
            FamilyKind::Transformed { base, map } => base
                .sample(mu, n, rng)?
                .into_iter()
                .map(|x| map.apply(x))
                .collect(),
        })
    }

    /// A mean inside the domain for sampling test data.
    pub fn typical_mean(&self) -> f64 {
        let d = self.mean_domain;
        self.full_mean_space().nudge_inside(d.nudge_inside(d.typical_point()))
    }

    /// Breakpoints and tail scale for integrating over observations whose
    /// statistic concentrates around `mu`, with spread `sigma(mu) * spread`.
    pub(crate) fn observation_hints(&self, mu: f64, spread: f64) -> (Vec<f64>, f64) {
        match &self.kind {
            FamilyKind::Transformed { base, map } => {
                let (pts, _) = base.observation_hints(mu, spread);
                let mut mapped: Vec<f64> = pts.iter().map(|&p| map.apply(p)).filter(|p| p.is_finite()).collect();
                mapped.sort_by(f64::total_cmp);
                let width = mapped
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(0.0f64, f64::max)
                    .max(1e-300);
                (mapped, width)
            }
            _ => {
                let core = self.convex_core();
                let center = core.nudge_inside(mu);
                let sd = (self.sigma(center) * spread).max(1e-300);
                let pts: Vec<f64> = [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0]
                    .iter()
                    .map(|k| center + k * sd)
                    .filter(|&p| core.in_interior(p))
                    .collect();
                (pts, 4.0 * sd)
            }
        }
    }

    /// Breakpoints and tail scale in the mean chart around `mu` for a
    /// likelihood built from `n` observations.
    pub(crate) fn parameter_hints(&self, mu: f64, n: f64) -> (Vec<f64>, f64) {
        let dom = self.mean_domain;
        let core = self.full_mean_space();
        let center = core.nudge_inside(dom.nudge_inside(mu));
        let width = (self.sigma(center) / n.max(1.0).sqrt()).max(1e-300);
        let pts: Vec<f64> = [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0]
            .iter()
            .map(|k| center + k * width)
            .filter(|&p| dom.in_interior(p))
            .collect();
        (pts, 4.0 * width)
    }
}
