//! The Tweedie family of order 3/2 as a compound Poisson law.
//!
//! With variance function `V(mu) = 2 mu^{3/2}`, a draw is `Z = X_1 + ... + X_N`
//! where `N ~ Poisson(sqrt(mu))` and the `X_i` are exponential with mean
//! `sqrt(mu)`. `Z` has an atom `exp(-sqrt(mu))` at zero and a density on
//! `(0, inf)`:
//!
//! ```text
//! p(z) = exp(-sqrt(mu) - z / sqrt(mu)) * h(z),   h(z) = sum_{j>=1} z^{j-1} / (j! (j-1)!)
//! ```
//!
//! `h` does not depend on `mu`; it equals `I_1(2 sqrt z) / sqrt z`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};

/// Relative truncation target for the series.
const SERIES_REL_TOL: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TweedieDensityValue {
    pub atom_mass_at_zero: f64,
    /// `ln p(z)` for `z > 0`; `-inf` at `z = 0` where only the atom carries mass.
    pub continuous_log_density: f64,
    pub series_terms_used: usize,
    /// Upper bound on the neglected part of the series, in the same units as
    /// the (non-logged) density.
    pub truncation_bound: f64,
}

/// `ln h(z)` together with the number of terms used and the tail bound
/// relative to the sum.
pub(crate) fn log_base_density(z: f64) -> (f64, usize, f64) {
    debug_assert!(z > 0.0);
    if z >= ASYMPTOTIC_FROM {
        return log_base_asymptotic(z);
    }
    let ln_z = z.ln();
    let log_term = |j: f64| (j - 1.0) * ln_z - ln_gamma(j + 1.0) - ln_gamma(j);
    // terms peak near j = sqrt(z)
    let j_star = z.sqrt().round().max(1.0);
    let peak = log_term(j_star);
    let mut sum = 1.0;
    let mut terms = 1usize;

    let mut j = j_star - 1.0;
    while j >= 1.0 {
        let r = (log_term(j) - peak).exp();
        sum += r;
        terms += 1;
        if r < SERIES_REL_TOL * sum {
            break;
        }
        j -= 1.0;
    }
    // Below the mode successive ratios shrink, so whatever was skipped is at
    // most the last term times j (a crude but safe bound).
    let lower_tail = if j >= 1.0 {
        (log_term(j) - peak).exp() * j
    } else {
        0.0
    };

    let mut j = j_star + 1.0;
    let mut upper_tail;
    loop {
        let r = (log_term(j) - peak).exp();
        sum += r;
        terms += 1;
        // ratio of consecutive terms z / (j (j + 1)) decreases in j
        let ratio = z / (j * (j + 1.0));
        upper_tail = if ratio < 1.0 {
            r * ratio / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
        if upper_tail < SERIES_REL_TOL * sum {
            break;
        }
        j += 1.0;
    }
    (peak + sum.ln(), terms, (lower_tail + upper_tail) / sum)
}

/// Beyond this point `h` is evaluated from the large-argument expansion of
/// `I_1`, whose terms at `x = 2 sqrt z >= 2000` fall below `1e-17` within a
/// handful of steps.
const ASYMPTOTIC_FROM: f64 = 1e6;

/// `I_1(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k / x^k` with
/// `a_k = prod_{i<=k} (4 - (2i - 1)^2) / (8 i)`.
fn log_base_asymptotic(z: f64) -> (f64, usize, f64) {
    let x = 2.0 * z.sqrt();
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut terms = 1;
    for i in 1..30 {
        let i = i as f64;
        term *= -(4.0 - (2.0 * i - 1.0).powi(2)) / (8.0 * i * x);
        sum += term;
        terms += 1;
        if term.abs() < SERIES_REL_TOL * sum.abs() {
            break;
        }
    }
    let log_i1 = x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln();
    (log_i1 - 0.5 * z.ln(), terms, term.abs() / sum)
}

/// Mixed density of the canonical Tweedie-3/2 law with mean `mu` at `z`.
pub fn tweedie_log_density(mu: f64, z: f64) -> Result<TweedieDensityValue> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(domain(format!("Tweedie mean must be positive, got {mu}")));
    }
    if !(z.is_finite() && z >= 0.0) {
        return Err(domain(format!("Tweedie support is [0, inf), got z = {z}")));
    }
    let nu = mu.sqrt();
    let atom = (-nu).exp();
    if z == 0.0 {
        return Ok(TweedieDensityValue {
            atom_mass_at_zero: atom,
            continuous_log_density: f64::NEG_INFINITY,
            series_terms_used: 0,
            truncation_bound: 0.0,
        });
    }
    let (log_h, terms, rel_tail) = log_base_density(z);
    let log_p = log_h - z / nu - nu;
    Ok(TweedieDensityValue {
        atom_mass_at_zero: atom,
        continuous_log_density: log_p,
        series_terms_used: terms,
        truncation_bound: rel_tail * log_p.exp(),
    })
}

/// Mean and variance `(mu, 2 mu^{3/2})`.
pub fn tweedie_moments(mu: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(domain(format!("Tweedie mean must be positive, got {mu}")));
    }
    Ok((mu, 2.0 * mu.powf(1.5)))
}

/// `n` independent draws; identical seeds give identical streams.
pub fn tweedie_sample(mu: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tweedie_sample_with(mu, n, &mut rng)
}

pub(crate) fn tweedie_sample_with<R: rand::Rng + ?Sized>(
    mu: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(domain(format!("Tweedie mean must be positive, got {mu}")));
    }
    if n == 0 {
        return Err(domain("sample size must be at least 1"));
    }
    let nu = mu.sqrt();
    let count = Poisson::new(nu).map_err(|e| domain(e.to_string()))?;
    let jump = Exp::new(1.0 / nu).map_err(|e| domain(e.to_string()))?;
    Ok((0..n)
        .map(|_| {
            let k = count.sample(rng) as u64;
            (0..k).fold(0.0, |acc, _| acc + jump.sample(rng))
        })
        .collect())
}
