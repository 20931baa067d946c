//! Variance functions `V(mu)` given in closed form or as a table.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::jet::Jet;
use crate::error::{Error, Result};
use crate::families::{FamilyKind, FamilySpec, Interval};

/// Number of `sigma` derivatives tracked: `sigma, sigma', ..., sigma''''`.
pub const SIGMA_ORDERS: usize = 5;

/// Closed-form variance functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ClosedForm {
    Constant { value: f64 },
    /// `a * (k mu + l)^p`
    Power { a: f64, k: f64, l: f64, p: f64 },
    /// `sum_i coeffs[i] * mu^i`
    Polynomial { coeffs: Vec<f64> },
    /// `a * exp(b mu)`
    Exponential { a: f64, b: f64 },
}

impl ClosedForm {
    fn eval<const N: usize>(&self, mu: Jet<N>) -> Jet<N> {
        match self {
            ClosedForm::Constant { value } => Jet::constant(*value),
            ClosedForm::Power { a, k, l, p } => (mu * *k + *l).powf(*p) * *a,
            ClosedForm::Polynomial { coeffs } => coeffs
                .iter()
                .rev()
                .fold(Jet::constant(0.0), |acc, &c| acc * mu + c),
            ClosedForm::Exponential { a, b } => (mu * *b).exp() * *a,
        }
    }

    fn value(&self, mu: f64) -> f64 {
        self.eval(Jet::<1>::constant(mu)).value()
    }

    fn natural_domain(&self) -> Interval {
        match self {
            ClosedForm::Constant { .. } | ClosedForm::Exponential { .. } => Interval::real_line(),
            ClosedForm::Power { k, l, .. } => {
                if *k > 0.0 {
                    Interval::open(-l / k, f64::INFINITY)
                } else if *k < 0.0 {
                    Interval::open(f64::NEG_INFINITY, -l / k)
                } else {
                    Interval::real_line()
                }
            }
            ClosedForm::Polynomial { coeffs } => positive_component(coeffs),
        }
    }
}

/// Connected component of `{V > 0}` between consecutive real roots that
/// contains the first positive probe point.
fn positive_component(coeffs: &[f64]) -> Interval {
    const STARTS: [f64; 12] = [0.5, 1.0, 2.0, 0.25, 4.0, 0.1, 10.0, 0.0, -0.5, -1.0, -2.0, -10.0];
    let v = |x: f64| horner(coeffs, x);
    let Some(start) = STARTS.iter().copied().find(|&x| v(x) > 0.0) else {
        return Interval::open(0.0, 0.0);
    };
    let roots = real_roots(coeffs);
    let lower = roots.iter().copied().filter(|&r| r < start).fold(f64::NEG_INFINITY, f64::max);
    let upper = roots.iter().copied().filter(|&r| r > start).fold(f64::INFINITY, f64::min);
    Interval::open(lower, upper)
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Real roots, found between consecutive critical points (roots of the
/// derivative, recursively); double roots show up as critical points where
/// the polynomial vanishes.
fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return vec![];
    }
    if deg == 1 {
        return vec![-c[0] / c[1]];
    }
    let lead = c[deg];
    let bound = 1.0 + c[..deg].iter().map(|a| (a / lead).abs()).fold(0.0, f64::max);
    let deriv: Vec<f64> = (1..=deg).map(|i| i as f64 * c[i]).collect();
    let mut knots = vec![-bound];
    knots.extend(real_roots(&deriv).into_iter().filter(|r| r.abs() < bound));
    knots.push(bound);
    let scale = c.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let p = |x: f64| horner(&c, x);
    let mut roots = vec![];
    for w in knots.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (pa, pb) = (p(a), p(b));
        if pa.abs() <= 1e-13 * scale * (1.0 + a.abs()).powi(deg as i32) {
            roots.push(a);
            continue;
        }
        if pa.signum() == pb.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid == a || mid == b {
                break;
            }
            if p(mid).signum() == pa.signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        let r = 0.5 * (a + b);
        // Integer roots are common in user input; report them exactly.
        roots.push(if p(r.round()) == 0.0 { r.round() + 0.0 } else { r });
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    roots
}

/// A table of `(mu, V)` pairs interpolated by a Floater-Hormann rational
/// interpolant of `ln V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    mu: Vec<f64>,
    log_v: Vec<f64>,
}

/// Blending degree of the primary interpolant; one lower serves as the error estimate.
const TABLE_DEGREE: usize = 6;
/// Largest tolerated disagreement in `g` between the two interpolants.
const TABLE_G_TOLERANCE: f64 = 1e-4;

impl Table {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < TABLE_DEGREE + 2 {
            return Err(Error::Differentiation(format!(
                "a tabulated variance function needs at least {} points, got {}",
                TABLE_DEGREE + 2,
                points.len()
            )));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidSpec("duplicate mean in variance table".into()));
        }
        if let Some(&(mu, v)) = points.iter().find(|(m, v)| !(m.is_finite() && v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidSpec(format!("invalid table entry V({mu}) = {v}")));
        }
        Ok(Self {
            mu: points.iter().map(|p| p.0).collect(),
            log_v: points.iter().map(|p| p.1.ln()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.mu.iter().zip(&self.log_v).map(|(&m, &l)| (m, l.exp())).collect()
    }

    fn range(&self) -> Interval {
        Interval::closed(self.mu[0], self.mu[self.mu.len() - 1])
    }

    fn weights(&self, d: usize) -> Vec<f64> {
        let n = self.mu.len();
        let x = &self.mu;
        (0..n)
            .map(|k| {
                let lo = k.saturating_sub(d);
                let hi = k.min(n - 1 - d);
                let mut w = 0.0;
                for i in lo..=hi {
                    let prod: f64 = (i..=i + d)
                        .filter(|&j| j != k)
                        .map(|j| 1.0 / (x[k] - x[j]).abs())
                        .product();
                    w += prod;
                }
                if (k + d) % 2 == 1 {
                    -w
                } else {
                    w
                }
            })
            .collect()
    }

    fn interpolate(&self, weights: &[f64], t: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&x, &y), &w) in self.mu.iter().zip(&self.log_v).zip(weights) {
            if t == x {
                return y;
            }
            let c = w / (t - x);
            num += c * y;
            den += c;
        }
        num / den
    }

    /// `sigma` and its first four derivatives at `mu` by Richardson-extrapolated
    /// central differences of the interpolant. Steps are `width * 1e-3` for
    /// orders 1-2 and `width * 1e-2` for orders 3-4.
    fn sigma_derivatives(&self, mu: f64) -> Result<[f64; SIGMA_ORDERS]> {
        let range = self.range();
        let width = range.width();
        let big = width * 1e-2;
        if mu - 2.0 * big < range.lower || mu + 2.0 * big > range.upper {
            return Err(Error::Differentiation(format!(
                "mean {mu} is too close to the edge of the table [{}, {}]",
                range.lower, range.upper
            )));
        }
        let primary = self.weights(TABLE_DEGREE);
        let check = self.weights(TABLE_DEGREE - 1);
        let d = differentiate(&|t| (0.5 * self.interpolate(&primary, t)).exp(), mu, width);
        let e = differentiate(&|t| (0.5 * self.interpolate(&check, t)).exp(), mu, width);
        let g = |s: &[f64; SIGMA_ORDERS]| s[1] * s[1] + 3.0 * s[0] * s[2];
        let scale = g(&d).abs().max(d[1] * d[1]).max(1.0);
        if (g(&d) - g(&e)).abs() > TABLE_G_TOLERANCE * scale {
            return Err(Error::Differentiation(format!(
                "table too coarse near mean {mu}: interpolants of degree {} and {} disagree on \
                 (sigma')^2 + 3 sigma sigma'' by {:.3e}",
                TABLE_DEGREE,
                TABLE_DEGREE - 1,
                (g(&d) - g(&e)).abs()
            )));
        }
        Ok(d)
    }
}

fn differentiate(f: &dyn Fn(f64) -> f64, x: f64, width: f64) -> [f64; SIGMA_ORDERS] {
    let stencil = |h: f64, order: usize| -> f64 {
        let p1 = f(x + h);
        let m1 = f(x - h);
        match order {
            1 => (p1 - m1) / (2.0 * h),
            2 => (p1 - 2.0 * f(x) + m1) / (h * h),
            3 => (f(x + 2.0 * h) - 2.0 * p1 + 2.0 * m1 - f(x - 2.0 * h)) / (2.0 * h.powi(3)),
            _ => (f(x + 2.0 * h) - 4.0 * p1 + 6.0 * f(x) - 4.0 * m1 + f(x - 2.0 * h)) / h.powi(4),
        }
    };
    let richardson = |h: f64, order: usize| (4.0 * stencil(0.5 * h, order) - stencil(h, order)) / 3.0;
    let small = width * 1e-3;
    let big = width * 1e-2;
    [
        f(x),
        richardson(small, 1),
        richardson(small, 2),
        richardson(big, 3),
        richardson(big, 4),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    Closed(ClosedForm),
    Tabulated(Table),
}

/// A variance function together with the interval of means it is used on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceFunctionSpec {
    form: VarianceForm,
    domain: Interval,
}

impl VarianceFunctionSpec {
    fn closed(form: ClosedForm) -> Result<Self> {
        let domain = form.natural_domain();
        Self::checked(VarianceForm::Closed(form), domain)
    }

    fn checked(form: VarianceForm, domain: Interval) -> Result<Self> {
        let spec = Self { form, domain };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::closed(ClosedForm::Constant { value })
    }

    /// `a * (k mu + l)^p` on the half-line where `k mu + l > 0`.
    pub fn power(a: f64, k: f64, l: f64, p: f64) -> Result<Self> {
        Self::closed(ClosedForm::Power { a, k, l, p })
    }

    /// Polynomial with coefficients in increasing degree, on the component
    /// of `{V > 0}` found from a positive probe (usually the one meeting `(0, inf)`).
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidSpec("polynomial needs at least one coefficient".into()));
        }
        Self::closed(ClosedForm::Polynomial { coeffs })
    }

    pub fn exponential(a: f64, b: f64) -> Result<Self> {
        Self::closed(ClosedForm::Exponential { a, b })
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        let table = Table::new(points)?;
        let domain = table.range();
        Self::checked(VarianceForm::Tabulated(table), domain)
    }

    /// Reads whitespace- or comma-separated `mu V` pairs; lines that do not
    /// parse as two numbers (headers, `#` comments) are skipped.
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
        let points = text
            .lines()
            .filter_map(|line| {
                let fields: Vec<f64> = line
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .ok()?;
                (fields.len() == 2).then(|| (fields[0], fields[1]))
            })
            .collect();
        Self::tabulated(points)
    }

    /// The variance function of a built-in family (of the base statistic for
    /// transformed families), on its mean domain.
    pub fn from_family(family: &FamilySpec) -> Result<Self> {
        let base = family.natural_base();
        let spec = match base.kind() {
            FamilyKind::GaussianLocation { variance } => Self::constant(*variance)?,
            FamilyKind::GammaShape { shape } => Self::power(1.0 / shape, 1.0, 0.0, 2.0)?,
            FamilyKind::Tweedie32 => Self::power(2.0, 1.0, 0.0, 1.5)?,
            FamilyKind::Bernoulli => Self::polynomial(vec![0.0, 1.0, -1.0])?,
            FamilyKind::Poisson => Self::polynomial(vec![0.0, 1.0])?,
            FamilyKind::Transformed { .. } => unreachable!("natural base is never transformed"),
        };
        let d = family.mean_domain();
        spec.with_domain(Interval::open(d.lower, d.upper))
    }

    /// Restricts the domain; `V` must stay positive on the new interior.
    pub fn with_domain(self, domain: Interval) -> Result<Self> {
        if !domain.has_interior() {
            return Err(Error::InvalidSpec(format!(
                "domain [{}, {}] has empty interior",
                domain.lower, domain.upper
            )));
        }
        Self::checked(self.form, domain)
    }

    /// Parses `const:v`, `power:a,k,l,p`, `poly:c0,c1,...`, `exp:a,b` or
    /// `table:path`, optionally followed by `@lo,hi` (`inf` allowed).
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidSpec(msg);
        let (body, domain) = match text.split_once('@') {
            Some((body, dom)) => {
                let ends = numbers(dom)?;
                if ends.len() != 2 {
                    return Err(bad(format!("domain `{dom}` needs two endpoints")));
                }
                (body, Some(Interval::open(ends[0], ends[1])))
            }
            None => (text, None),
        };
        let (kind, args) = body
            .split_once(':')
            .ok_or_else(|| bad(format!("`{body}` is not of the form kind:arguments")))?;
        let expect = |xs: &[f64], n: usize| -> Result<()> {
            if xs.len() != n {
                return Err(bad(format!("`{kind}` takes {n} numbers, got {}", xs.len())));
            }
            Ok(())
        };
        let spec = match kind.trim() {
            "const" | "constant" => {
                let xs = numbers(args)?;
                expect(&xs, 1)?;
                Self::constant(xs[0])?
            }
            "power" => {
                let xs = numbers(args)?;
                expect(&xs, 4)?;
                Self::power(xs[0], xs[1], xs[2], xs[3])?
            }
            "poly" | "polynomial" => Self::polynomial(numbers(args)?)?,
            "exp" | "exponential" => {
                let xs = numbers(args)?;
                expect(&xs, 2)?;
                Self::exponential(xs[0], xs[1])?
            }
            "table" => Self::from_table_file(Path::new(args.trim()))?,
            other => return Err(bad(format!("unknown variance form `{other}`"))),
        };
        match domain {
            Some(d) => spec.with_domain(d),
            None => Ok(spec),
        }
    }

    pub fn form(&self) -> &VarianceForm {
        &self.form
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.form, VarianceForm::Tabulated(_))
    }

    fn validate(&self) -> Result<()> {
        for mu in interior_points(&self.domain, 33) {
            let v = self.value_unchecked(mu);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSpec(format!("V({mu}) = {v} is not positive")));
            }
        }
        Ok(())
    }

    fn value_unchecked(&self, mu: f64) -> f64 {
        match &self.form {
            VarianceForm::Closed(c) => c.value(mu),
            VarianceForm::Tabulated(t) => t.interpolate(&t.weights(TABLE_DEGREE), mu).exp(),
        }
    }

    fn check_interior(&self, mu: f64) -> Result<()> {
        if !self.domain.in_interior(mu) {
            return Err(crate::error::domain(format!(
                "mean {mu} is not inside ({}, {})",
                self.domain.lower, self.domain.upper
            )));
        }
        Ok(())
    }

    pub fn value(&self, mu: f64) -> Result<f64> {
        self.check_interior(mu)?;
        Ok(self.value_unchecked(mu))
    }

    /// `[sigma, sigma', sigma'', sigma''', sigma'''']` at `mu`, where `sigma = V^{1/2}`.
    pub fn sigma_derivatives(&self, mu: f64) -> Result<[f64; SIGMA_ORDERS]> {
        self.check_interior(mu)?;
        match &self.form {
            VarianceForm::Closed(c) => {
                let s = c.eval(Jet::<SIGMA_ORDERS>::variable(mu)).sqrt();
                let mut out = [0.0; SIGMA_ORDERS];
                for (k, o) in out.iter_mut().enumerate() {
                    *o = s.derivative_at(k);
                }
                if out.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Differentiation(format!("non-finite derivative at mean {mu}")));
                }
                Ok(out)
            }
            VarianceForm::Tabulated(t) => t.sigma_derivatives(mu),
        }
    }

    /// Evaluation grid of `count` interior points (avoiding the outer 10%
    /// of finite domains).
    pub fn default_grid(&self, count: usize) -> Vec<f64> {
        let d = self.domain;
        if d.width().is_finite() {
            let lo = d.lower + 0.1 * d.width();
            let hi = d.upper - 0.1 * d.width();
            return (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count.max(2) - 1) as f64)
                .collect();
        }
        interior_points(&d, count)
    }
}

/// `count` increasing points inside `d`, spread geometrically on infinite sides.
pub(crate) fn interior_points(d: &Interval, count: usize) -> Vec<f64> {
    let frac = |i: usize| (i as f64 + 1.0) / (count as f64 + 1.0);
    match (d.lower.is_finite(), d.upper.is_finite()) {
        (true, true) => (0..count).map(|i| d.lower + d.width() * frac(i)).collect(),
        (true, false) => {
            let w = d.lower.abs().max(1.0);
            (0..count).map(|i| d.lower + w * 4f64.powf(4.0 * frac(i) - 2.0)).collect()
        }
        (false, true) => {
            let w = d.upper.abs().max(1.0);
            (0..count).rev().map(|i| d.upper - w * 4f64.powf(4.0 * frac(i) - 2.0)).collect()
        }
        (false, false) => (0..count).map(|i| 8.0 * (frac(i) - 0.5)).collect(),
    }
}

fn numbers(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidSpec(format!("`{}` is not a number", s.trim())))
        })
        .collect()
}

impl fmt::Display for VarianceFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match &self.form {
            VarianceForm::Closed(ClosedForm::Constant { value }) => write!(f, "const:{value}")?,
            VarianceForm::Closed(ClosedForm::Power { a, k, l, p }) => write!(f, "power:{}", join(&[*a, *k, *l, *p]))?,
            VarianceForm::Closed(ClosedForm::Polynomial { coeffs }) => write!(f, "poly:{}", join(coeffs))?,
            VarianceForm::Closed(ClosedForm::Exponential { a, b }) => write!(f, "exp:{}", join(&[*a, *b]))?,
            VarianceForm::Tabulated(t) => write!(f, "table[{} points]", t.len())?,
        }
        write!(f, "@{},{}", self.domain.lower, self.domain.upper)
    }
}
