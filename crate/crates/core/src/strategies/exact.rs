//! Exact rational arithmetic for the Bernoulli family on `[0, 1]`.
//!
//! Sequences are slices of `0`/`1`. The maximum-likelihood probability of a
//! sequence with `k` ones among `n` is `k^k (n-k)^{n-k} / n^n` (with `0^0 = 1`).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{domain, Error, Result};

/// Longest continuation handled by enumeration.
pub const MAX_HORIZON: usize = 12;

pub fn to_bits(values: &[f64]) -> Result<Vec<u8>> {
    values
        .iter()
        .map(|&v| {
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::UnsupportedPoint {
                    x: v,
                    lower: 0.0,
                    upper: 1.0,
                })
            }
        })
        .collect()
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn ones(bits: &[u8]) -> usize {
    bits.iter().filter(|&&b| b == 1).count()
}

fn pow(base: usize, exp: usize) -> BigInt {
    num_traits::pow(BigInt::from(base), exp)
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

/// `sup_mu mu^k (1 - mu)^{n-k}`.
pub fn sup_probability_counts(k: usize, n: usize) -> BigRational {
    if n == 0 {
        return BigRational::one();
    }
    BigRational::new(pow(k, k) * pow(n - k, n - k), pow(n, n))
}

pub fn sup_probability(bits: &[u8]) -> BigRational {
    sup_probability_counts(ones(bits), bits.len())
}

/// `sum over y in {0,1}^horizon of sup p(history, y)`.
pub fn cnml_normalizer(history: &[u8], horizon: usize) -> BigRational {
    let k = ones(history);
    let n = history.len() + horizon;
    (0..=horizon)
        .map(|j| BigRational::from_integer(binomial(horizon, j)) * sup_probability_counts(k + j, n))
        .fold(BigRational::zero(), |a, b| a + b)
}

pub fn shtarkov_sum(n: usize) -> BigRational {
    cnml_normalizer(&[], n)
}

/// CNML probability of `bits[m..]` given `bits[..m]`.
pub fn cnml_joint(bits: &[u8], m: usize) -> Result<BigRational> {
    if m > bits.len() {
        return Err(domain("conditioning length exceeds sequence length"));
    }
    let horizon = bits.len() - m;
    if horizon > MAX_HORIZON {
        return Err(Error::HorizonTooLarge {
            requested: horizon,
            max: MAX_HORIZON,
        });
    }
    Ok(sup_probability(bits) / cnml_normalizer(&bits[..m], horizon))
}

pub fn nml_joint(bits: &[u8]) -> Result<BigRational> {
    cnml_joint(bits, 0)
}

/// SNML probability that the next outcome is `1`.
pub fn snml_next_one(history: &[u8]) -> BigRational {
    let k = ones(history);
    let t = history.len() + 1;
    let one = sup_probability_counts(k + 1, t);
    let zero = sup_probability_counts(k, t);
    one.clone() / (one + zero)
}

pub fn snml_joint(bits: &[u8], m: usize) -> Result<BigRational> {
    sequential(bits, m, snml_next_one)
}

/// Jeffreys-posterior probability of a `1`: `(k + 1/2) / (t + 1)` after `t` outcomes.
pub fn bayes_next_one(history: &[u8]) -> BigRational {
    let k = ones(history);
    BigRational::new(BigInt::from(2 * k + 1), BigInt::from(2 * history.len() + 2))
}

pub fn bayes_joint(bits: &[u8], m: usize) -> Result<BigRational> {
    sequential(bits, m, bayes_next_one)
}

fn sequential(bits: &[u8], m: usize, next_one: fn(&[u8]) -> BigRational) -> Result<BigRational> {
    if m > bits.len() {
        return Err(domain("conditioning length exceeds sequence length"));
    }
    let mut joint = BigRational::one();
    for t in m..bits.len() {
        let p1 = next_one(&bits[..t]);
        joint *= if bits[t] == 1 { p1 } else { BigRational::one() - p1 };
    }
    Ok(joint)
}

/// `sup p(x^n) / q(x^n)`, whose logarithm is the regret of `q`.
pub fn regret_ratio(bits: &[u8], joint: &BigRational) -> BigRational {
    sup_probability(bits) / joint
}

/// All sequences of length `n` in lexicographic order.
pub fn all_sequences(n: usize) -> Vec<Vec<u8>> {
    (0..1u32 << n)
        .map(|code| (0..n).map(|i| ((code >> (n - 1 - i)) & 1) as u8).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn snml_after_a_single_one() {
        assert_eq!(snml_next_one(&[1]), r(4, 5));
        assert_eq!(bayes_next_one(&[1]), r(3, 4));
    }

    #[test]
    fn snml_joints_are_not_exchangeable() {
        assert_eq!(snml_joint(&[1, 1, 0], 0).unwrap(), r(8, 155));
        assert_eq!(snml_joint(&[1, 0, 1], 0).unwrap(), r(1, 20));
    }

    #[test]
    fn shtarkov_sums() {
        assert_eq!(shtarkov_sum(1), r(2, 1));
        assert_eq!(shtarkov_sum(2), r(5, 2));
        assert_eq!(nml_joint(&[1, 1]).unwrap(), r(2, 5));
        assert_eq!(nml_joint(&[1, 0]).unwrap(), r(1, 10));
    }

    #[test]
    fn nml_is_an_equalizer() {
        for n in 1..=6 {
            let c = shtarkov_sum(n);
            for s in all_sequences(n) {
                let q = nml_joint(&s).unwrap();
                assert_eq!(regret_ratio(&s, &q), c);
            }
        }
    }

    #[test]
    fn cnml_sums_to_one() {
        let history = [1, 0, 0];
        for h in 1..=4 {
            let total = all_sequences(h)
                .into_iter()
                .map(|y| {
                    let mut s = history.to_vec();
                    s.extend(y);
                    cnml_joint(&s, history.len()).unwrap()
                })
                .fold(BigRational::zero(), |a, b| a + b);
            assert_eq!(total, BigRational::one());
        }
    }

    #[test]
    fn bayes_marginal_is_exchangeable() {
        for n in 1..=5 {
            for s in all_sequences(n) {
                let mut sorted = s.clone();
                sorted.sort();
                assert_eq!(bayes_joint(&s, 0).unwrap(), bayes_joint(&sorted, 0).unwrap());
            }
        }
    }

    #[test]
    fn horizon_limit() {
        let bits = vec![0u8; 14];
        assert!(matches!(cnml_joint(&bits, 1), Err(Error::HorizonTooLarge { .. })));
        assert!(to_bits(&[0.5]).is_err());
    }
}
