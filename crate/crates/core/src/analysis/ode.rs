//! Taylor conditions on the variance function: the second-order ODE for
//! `sigma`, the higher-order condition, and the resulting classification.

use serde::{Deserialize, Serialize};

use super::jet::{factorial, Jet};
use super::report::{AnalysisReport, Verdict};
use super::variance::{VarianceFunctionSpec, SIGMA_ORDERS};
use crate::error::Result;

/// Relative tolerance for closed-form variance functions.
pub const CLOSED_TOLERANCE: f64 = 1e-6;
/// Relative tolerance for tabulated variance functions.
pub const TABULATED_TOLERANCE: f64 = 1e-3;
/// Relative spread above which a combination is declared non-constant.
pub const NONCONSTANT_SPREAD: f64 = 1e-2;
/// Residual threshold for matching `sigma` or `V^{2/3}` to a line.
pub const FORM_MATCH_TOLERANCE: f64 = 1e-8;
const TABULATED_FORM_MATCH_TOLERANCE: f64 = 1e-4;

/// Derivatives of the divergence `D(beta0 || beta)` in `beta` at `beta = beta0`
/// (geodesic chart), with the `sigma` derivatives they come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBundle {
    pub mu: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
    pub d6: f64,
    /// `[sigma, sigma', sigma'', sigma''', sigma'''']` in the mean chart.
    pub sigma_derivs: [f64; SIGMA_ORDERS],
    /// `(sigma')^2 + 3 sigma sigma''`
    pub g: f64,
    /// The constant in `2 (sigma')^2 + 6 sigma sigma'' = 3c`, i.e. `2g/3`.
    pub c: f64,
}

impl DerivativeBundle {
    pub fn at(vf: &VarianceFunctionSpec, mu: f64) -> Result<Self> {
        Ok(Self::from_sigma(mu, vf.sigma_derivatives(mu)?))
    }

    pub fn from_sigma(mu: f64, s: [f64; SIGMA_ORDERS]) -> Self {
        let [s0, s1, s2, s3, s4] = s;
        let d3 = -s1;
        let d4 = s1 * s1 - 2.0 * s0 * s2;
        let d5 = -s1.powi(3) + 2.0 * s0 * s1 * s2 - 3.0 * s0 * s0 * s3;
        let d6 = s1.powi(4) - 4.0 * s0 * s1 * s1 * s2 - 3.0 * s0 * s0 * s1 * s3 + 4.0 * s0 * s0 * s2 * s2
            - 4.0 * s0.powi(3) * s4;
        let g = s1 * s1 + 3.0 * s0 * s2;
        Self {
            mu,
            d2: geodesic_divergence_derivatives(s)[0],
            d3,
            d4,
            d5,
            d6,
            sigma_derivs: s,
            g,
            c: 2.0 * g / 3.0,
        }
    }

    /// `5 D3^2 - 3 D4`, which equals `2g`.
    pub fn fifth_order(&self) -> f64 {
        5.0 * self.d3 * self.d3 - 3.0 * self.d4
    }

    /// `385 D3^4 + 105 D4^2 - 24 D6 - 630 D3^2 D4 + 168 D3 D5`.
    pub fn seventh_order(&self) -> f64 {
        let (d3, d4, d5, d6) = (self.d3, self.d4, self.d5, self.d6);
        385.0 * d3.powi(4) + 105.0 * d4 * d4 - 24.0 * d6 - 630.0 * d3 * d3 * d4 + 168.0 * d3 * d5
    }

    /// `-(64/3) c (sigma')^2 + 41 c^2` for a given ODE constant `c`.
    pub fn reduced(&self, c: f64) -> f64 {
        let s1 = self.sigma_derivs[1];
        -(64.0 / 3.0) * c * s1 * s1 + 41.0 * c * c
    }
}

/// `[D2, ..., D6]` obtained by expanding the geodesic `mu(beta)` as a power
/// series from `d mu / d beta = sigma(mu)` and differentiating
/// `d D / d beta = (mu - mu0) / sigma(mu)`.
pub fn geodesic_divergence_derivatives(s: [f64; SIGMA_ORDERS]) -> [f64; 5] {
    let mut poly = [0.0; SIGMA_ORDERS];
    for (k, p) in poly.iter_mut().enumerate() {
        *p = s[k] / factorial(k);
    }
    let mut u = Jet::<7>::constant(0.0);
    for _ in 0..7 {
        u = u.compose(&poly).integral(0.0);
    }
    let slope = u.derivative();
    let f = u / slope;
    let mut out = [0.0; 5];
    for (i, o) in out.iter_mut().enumerate() {
        *o = f.derivative_at(i + 1);
    }
    out
}

fn tolerance_for(vf: &VarianceFunctionSpec) -> f64 {
    if vf.is_tabulated() {
        TABULATED_TOLERANCE
    } else {
        CLOSED_TOLERANCE
    }
}

fn bundles(vf: &VarianceFunctionSpec, grid: &[f64]) -> Result<Vec<DerivativeBundle>> {
    grid.iter().map(|&mu| DerivativeBundle::at(vf, mu)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeReport {
    /// `g(mu) = (sigma')^2 + 3 sigma sigma''` over the grid.
    pub report: AnalysisReport,
    pub derivatives: Vec<DerivativeBundle>,
    /// Common value of `g` when constant.
    pub g: Option<f64>,
    /// `2g/3` when `g` is constant.
    pub c: Option<f64>,
}

/// Evaluates `(sigma')^2 + 3 sigma sigma''` on the grid.
pub fn sigma_ode_check(vf: &VarianceFunctionSpec, grid: &[f64]) -> Result<OdeReport> {
    let derivatives = bundles(vf, grid)?;
    let values: Vec<f64> = derivatives.iter().map(|b| b.g).collect();
    let report = AnalysisReport::about_mean(
        "(sigma')^2 + 3 sigma sigma''",
        grid.to_vec(),
        values,
        tolerance_for(vf),
        NONCONSTANT_SPREAD,
    );
    let g = (report.verdict == Verdict::Constant).then_some(report.reference_value);
    Ok(OdeReport {
        c: g.map(|g| 2.0 * g / 3.0),
        g,
        report,
        derivatives,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderReport {
    /// `5 D3^2 - 3 D4`
    pub fifth_order: AnalysisReport,
    /// `385 D3^4 + 105 D4^2 - 24 D6 - 630 D3^2 D4 + 168 D3 D5`
    pub seventh_order: AnalysisReport,
    /// `-(64/3) c (sigma')^2 + 41 c^2`, only when the ODE holds.
    pub reduced: Option<AnalysisReport>,
    pub derivatives: Vec<DerivativeBundle>,
}

impl HigherOrderReport {
    /// Constant only if every evaluated combination is.
    pub fn verdict(&self) -> Verdict {
        let mut all = vec![self.fifth_order.verdict, self.seventh_order.verdict];
        all.extend(self.reduced.iter().map(|r| r.verdict));
        Verdict::combine(&all)
    }
}

pub fn higher_order_check(vf: &VarianceFunctionSpec, grid: &[f64]) -> Result<HigherOrderReport> {
    let derivatives = bundles(vf, grid)?;
    let tol = tolerance_for(vf);
    let series = |label: &str, f: &dyn Fn(&DerivativeBundle) -> f64| {
        AnalysisReport::about_mean(
            label,
            grid.to_vec(),
            derivatives.iter().map(f).collect(),
            tol,
            NONCONSTANT_SPREAD,
        )
    };
    let fifth_order = series("5 D3^2 - 3 D4", &|b| b.fifth_order());
    let seventh_order = series(
        "385 D3^4 + 105 D4^2 - 24 D6 - 630 D3^2 D4 + 168 D3 D5",
        &|b| b.seventh_order(),
    );
    let ode = sigma_ode_check(vf, grid)?;
    let reduced = ode
        .c
        .map(|c| series("-(64/3) c (sigma')^2 + 41 c^2", &move |b| b.reduced(c)));
    Ok(HigherOrderReport {
        fifth_order,
        seventh_order,
        reduced,
        derivatives,
    })
}

/// Natural exponential families with quadratic variance functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorrisClass {
    Normal,
    Poisson,
    Gamma,
    Binomial,
    NegativeBinomial,
    HyperbolicSecant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailedCheck {
    Ode,
    HigherOrder,
    FormMatching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    GaussianLocation {
        variance: f64,
    },
    /// `V = (k mu + l)^2`: an affine image of a Gamma family with shape `1/k^2`.
    GammaLinearSigma {
        k: f64,
        l: f64,
        gamma_shape: f64,
    },
    /// `V = (k mu + l)^{3/2}`: an affine image of the Tweedie-3/2 family.
    Tweedie32Class {
        k: f64,
        l: f64,
    },
    NotExchangeable {
        failed: FailedCheck,
        reason: String,
        morris: Option<MorrisClass>,
    },
}

impl Classification {
    pub fn is_exchangeable(&self) -> bool {
        !matches!(self, Classification::NotExchangeable { .. })
    }
}

/// Least-squares line through `(x, y)`: `(slope, intercept, max residual / max |y|)`.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let resid = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).abs())
        .fold(0.0f64, f64::max);
    (slope, intercept, resid / scale)
}

/// Morris class of `V` if it is a quadratic in `mu` on the grid.
fn morris_class(x: &[f64], v: &[f64], tol: f64) -> Option<MorrisClass> {
    // Exact quadratic through three grid points, then check the rest.
    let (i, j, k) = (0, x.len() / 2, x.len() - 1);
    let (x0, x1, x2) = (x[i], x[j], x[k]);
    let d01 = (v[j] - v[i]) / (x1 - x0);
    let d12 = (v[k] - v[j]) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    let b = d01 - a * (x0 + x1);
    let c = v[i] - a * x0 * x0 - b * x0;
    let scale = v.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let resid = x
        .iter()
        .zip(v)
        .map(|(&t, &y)| (y - (a * t * t + b * t + c)).abs())
        .fold(0.0f64, f64::max);
    if resid > tol * scale {
        return None;
    }
    let small = |z: f64| z.abs() <= tol * scale.max(1.0);
    let disc = b * b - 4.0 * a * c;
    Some(if small(a) {
        if small(b) {
            MorrisClass::Normal
        } else {
            MorrisClass::Poisson
        }
    } else if a < 0.0 {
        MorrisClass::Binomial
    } else if small(disc) {
        MorrisClass::Gamma
    } else if disc > 0.0 {
        MorrisClass::NegativeBinomial
    } else {
        MorrisClass::HyperbolicSecant
    })
}

fn morris_note(morris: Option<MorrisClass>) -> String {
    match morris {
        Some(m @ (MorrisClass::Binomial | MorrisClass::NegativeBinomial | MorrisClass::HyperbolicSecant)) => {
            format!("; quadratic but not a perfect square, Morris-list member {m:?}")
        }
        Some(MorrisClass::Poisson) => "; linear variance, Morris-list member Poisson".into(),
        _ => String::new(),
    }
}

/// Decides which of the exchangeable classes a variance function belongs to.
///
/// Order of checks: constant `V`; the ODE; the higher-order condition;
/// finally a line fit of `sigma` and of `V^{2/3}` on the grid.
pub fn classify_family(vf: &VarianceFunctionSpec) -> Result<Classification> {
    let grid = vf.default_grid(9);
    let v: Vec<f64> = grid.iter().map(|&mu| vf.value(mu)).collect::<Result<_>>()?;
    let form_tol = if vf.is_tabulated() {
        TABULATED_FORM_MATCH_TOLERANCE
    } else {
        FORM_MATCH_TOLERANCE
    };
    let (vmin, vmax) = v.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if vmax - vmin <= form_tol * vmax {
        return Ok(Classification::GaussianLocation {
            variance: v.iter().sum::<f64>() / v.len() as f64,
        });
    }
    let morris = morris_class(&grid, &v, form_tol);
    let not = |failed, what: String| Classification::NotExchangeable {
        failed,
        reason: format!("{what}{}", morris_note(morris)),
        morris,
    };
    let ode = sigma_ode_check(vf, &grid)?;
    if ode.report.verdict != Verdict::Constant {
        return Ok(not(
            FailedCheck::Ode,
            format!(
                "(sigma')^2 + 3 sigma sigma'' is {} on the grid (max deviation {:.3e})",
                ode.report.verdict.describe(),
                ode.report.max_abs_deviation
            ),
        ));
    }
    let higher = higher_order_check(vf, &grid)?;
    if higher.verdict() != Verdict::Constant {
        return Ok(not(
            FailedCheck::HigherOrder,
            format!("higher-order combination is {}", higher.verdict().describe()),
        ));
    }
    let sigma: Vec<f64> = v.iter().map(|x| x.sqrt()).collect();
    let (k, l, resid) = fit_line(&grid, &sigma);
    if resid <= form_tol {
        return Ok(Classification::GammaLinearSigma {
            k,
            l,
            gamma_shape: 1.0 / (k * k),
        });
    }
    let v23: Vec<f64> = v.iter().map(|x| x.powf(2.0 / 3.0)).collect();
    let (k, l, resid23) = fit_line(&grid, &v23);
    if resid23 <= form_tol {
        return Ok(Classification::Tweedie32Class { k, l });
    }
    Ok(not(
        FailedCheck::FormMatching,
        format!(
            "neither sigma nor V^(2/3) is affine (residuals {resid:.3e}, {resid23:.3e})"
        ),
    ))
}
