use serde::{Deserialize, Serialize};

use super::Interval;
use crate::error::{Error, Result};

/// Smooth strictly monotone map `y = f(x)` with known inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MonotoneMap {
    /// `y = scale * x + shift`
    Affine { scale: f64, shift: f64 },
    /// `y = 1 / x`, on one side of zero
    Reciprocal,
    /// `y = exp(x)`
    Exp,
    /// `y = ln(x)` on `x > 0`
    Log,
    /// `y = x^exponent` on `x > 0`
    Power { exponent: f64 },
}

impl MonotoneMap {
    pub fn identity() -> Self {
        MonotoneMap::Affine {
            scale: 1.0,
            shift: 0.0,
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            MonotoneMap::Affine { scale, shift } => scale * x + shift,
            MonotoneMap::Reciprocal => 1.0 / x,
            MonotoneMap::Exp => x.exp(),
            MonotoneMap::Log => x.ln(),
            MonotoneMap::Power { exponent } => x.powf(exponent),
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            MonotoneMap::Affine { scale, shift } => (y - shift) / scale,
            MonotoneMap::Reciprocal => 1.0 / y,
            MonotoneMap::Exp => y.ln(),
            MonotoneMap::Log => y.exp(),
            MonotoneMap::Power { exponent } => y.powf(1.0 / exponent),
        }
    }

    /// `|d f^{-1}(y) / dy|`
    pub fn inverse_jacobian(&self, y: f64) -> f64 {
        match *self {
            MonotoneMap::Affine { scale, .. } => 1.0 / scale.abs(),
            MonotoneMap::Reciprocal => 1.0 / (y * y),
            MonotoneMap::Exp => 1.0 / y,
            MonotoneMap::Log => y.exp(),
            MonotoneMap::Power { exponent } => (y.powf(1.0 / exponent - 1.0) / exponent).abs(),
        }
    }

    pub fn ln_inverse_jacobian(&self, y: f64) -> f64 {
        match *self {
            MonotoneMap::Affine { scale, .. } => -scale.abs().ln(),
            MonotoneMap::Reciprocal => -2.0 * y.abs().ln(),
            MonotoneMap::Exp => -y.ln(),
            MonotoneMap::Log => y,
            MonotoneMap::Power { exponent } => {
                (1.0 / exponent - 1.0) * y.ln() - exponent.abs().ln()
            }
        }
    }

    pub fn is_increasing(&self) -> bool {
        match *self {
            MonotoneMap::Affine { scale, .. } => scale > 0.0,
            MonotoneMap::Reciprocal => false,
            MonotoneMap::Exp | MonotoneMap::Log => true,
            MonotoneMap::Power { exponent } => exponent > 0.0,
        }
    }

    /// Checks that the map is smooth and strictly monotone on `domain`.
    pub fn validate_on(&self, domain: &Interval) -> Result<()> {
        let bad = |msg: &str| Err(Error::NonMonotone(format!("{self:?}: {msg}")));
        match *self {
            MonotoneMap::Affine { scale, shift } => {
                if !(scale.is_finite() && shift.is_finite()) || scale == 0.0 {
                    return bad("scale must be finite and non-zero");
                }
            }
            MonotoneMap::Reciprocal => {
                if domain.lower < 0.0 && domain.upper > 0.0 {
                    return bad("reciprocal is not monotone across zero");
                }
            }
            MonotoneMap::Exp => {}
            MonotoneMap::Log => {
                if domain.lower < 0.0 {
                    return bad("log needs a non-negative support");
                }
            }
            MonotoneMap::Power { exponent } => {
                if !exponent.is_finite() || exponent == 0.0 {
                    return bad("exponent must be finite and non-zero");
                }
                if domain.lower < 0.0 {
                    return bad("power maps need a non-negative support");
                }
            }
        }
        Ok(())
    }

    /// Image of an interval; inclusion flags follow the endpoints.
    pub fn image(&self, interval: &Interval) -> Interval {
        let a = self.apply(interval.lower);
        let b = self.apply(interval.upper);
        // limits at the ends of (0, inf) for the reciprocal
        let fix = |v: f64, x: f64| {
            if v.is_nan() {
                if x == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                v
            }
        };
        let (a, b) = (fix(a, interval.lower), fix(b, interval.upper));
        if self.is_increasing() {
            Interval {
                lower: a,
                upper: b,
                lower_included: interval.lower_included && a.is_finite(),
                upper_included: interval.upper_included && b.is_finite(),
            }
        } else {
            Interval {
                lower: b,
                upper: a,
                lower_included: interval.upper_included && b.is_finite(),
                upper_included: interval.lower_included && a.is_finite(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_and_jacobians() {
        let maps = [
            MonotoneMap::Affine { scale: -2.0, shift: 3.0 },
            MonotoneMap::Reciprocal,
            MonotoneMap::Exp,
            MonotoneMap::Log,
            MonotoneMap::Power { exponent: 0.5 },
        ];
        for m in maps {
            for x in [0.3, 1.0, 2.7] {
                let y = m.apply(x);
                assert!((m.inverse(y) - x).abs() < 1e-12);
                // finite-difference check of the inverse derivative
                let h = 1e-6 * y.abs().max(1e-3);
                let fd = ((m.inverse(y + h) - m.inverse(y - h)) / (2.0 * h)).abs();
                assert!((fd / m.inverse_jacobian(y) - 1.0).abs() < 1e-6, "{m:?}");
                assert!((m.ln_inverse_jacobian(y) - m.inverse_jacobian(y).ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_monotone_rejected() {
        let line = Interval::open(f64::NEG_INFINITY, f64::INFINITY);
        assert!(MonotoneMap::Affine { scale: 0.0, shift: 1.0 }.validate_on(&line).is_err());
        assert!(MonotoneMap::Reciprocal.validate_on(&line).is_err());
        assert!(MonotoneMap::Reciprocal
            .validate_on(&Interval::open(0.0, f64::INFINITY))
            .is_ok());
    }

    #[test]
    fn reciprocal_image_of_half_line() {
        let img = MonotoneMap::Reciprocal.image(&Interval::open(0.0, f64::INFINITY));
        assert_eq!((img.lower, img.upper), (0.0, f64::INFINITY));
    }
}
