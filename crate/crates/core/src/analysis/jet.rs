//! Truncated Taylor series ("jets") for exact derivatives of closed forms.
//!
//! A `Jet<N>` holds the normalized Taylor coefficients `f^(k)(t0) / k!` for
//! `k < N`. Arithmetic propagates them with the usual recurrences.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub coeffs: [f64; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(c: f64) -> Self {
        let mut coeffs = [0.0; N];
        coeffs[0] = c;
        Self { coeffs }
    }

    /// The independent variable `t0 + t`.
    pub fn variable(t0: f64) -> Self {
        let mut coeffs = [0.0; N];
        coeffs[0] = t0;
        if N > 1 {
            coeffs[1] = 1.0;
        }
        Self { coeffs }
    }

    pub fn from_coeffs(coeffs: [f64; N]) -> Self {
        Self { coeffs }
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `k`-th derivative at the expansion point.
    pub fn derivative_at(&self, k: usize) -> f64 {
        self.coeffs[k] * factorial(k)
    }

    /// Termwise derivative; the top coefficient becomes zero.
    pub fn derivative(&self) -> Self {
        let mut out = [0.0; N];
        for k in 1..N {
            out[k - 1] = k as f64 * self.coeffs[k];
        }
        Self { coeffs: out }
    }

    /// Antiderivative with constant term `c0`; the top coefficient is dropped.
    pub fn integral(&self, c0: f64) -> Self {
        let mut out = [0.0; N];
        out[0] = c0;
        for (k, o) in out.iter_mut().enumerate().skip(1) {
            *o = self.coeffs[k - 1] / k as f64;
        }
        Self { coeffs: out }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.map(|c| c * s),
        }
    }

    pub fn exp(&self) -> Self {
        let mut e = [0.0; N];
        e[0] = self.coeffs[0].exp();
        for k in 1..N {
            let s: f64 = (1..=k).map(|j| j as f64 * self.coeffs[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Self { coeffs: e }
    }

    pub fn ln(&self) -> Self {
        let a = &self.coeffs;
        let mut l = [0.0; N];
        l[0] = a[0].ln();
        for k in 1..N {
            let s: f64 = (1..k).map(|j| j as f64 * l[j] * a[k - j]).sum();
            l[k] = (a[k] - s / k as f64) / a[0];
        }
        Self { coeffs: l }
    }

    pub fn powf(&self, p: f64) -> Self {
        let a = &self.coeffs;
        let mut y = [0.0; N];
        y[0] = a[0].powf(p);
        for k in 1..N {
            let s: f64 = (1..=k)
                .map(|i| ((p + 1.0) * i as f64 - k as f64) * a[i] * y[k - i])
                .sum();
            y[k] = s / (k as f64 * a[0]);
        }
        Self { coeffs: y }
    }

    pub fn powi(&self, p: u32) -> Self {
        let mut out = Self::constant(1.0);
        for _ in 0..p {
            out = out * *self;
        }
        out
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let a = &self.coeffs;
        let mut s = [0.0; N];
        let mut c = [0.0; N];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..N {
            let (mut ss, mut cc) = (0.0, 0.0);
            for j in 1..=k {
                ss += j as f64 * a[j] * c[k - j];
                cc += j as f64 * a[j] * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = -cc / k as f64;
        }
        (Self { coeffs: s }, Self { coeffs: c })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    pub fn asin(&self) -> Self {
        let one = Self::constant(1.0);
        let d = self.derivative() / (one - *self * *self).sqrt();
        d.integral(self.coeffs[0].asin())
    }

    /// `sum_k poly[k] * (self - self(0))^k`, i.e. a Taylor polynomial
    /// composed with this jet.
    pub fn compose(&self, poly: &[f64]) -> Self {
        let mut shift = *self;
        shift.coeffs[0] = 0.0;
        let mut out = Self::constant(0.0);
        for &p in poly.iter().rev() {
            out = out * shift + Self::constant(p);
        }
        out
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut c = self.coeffs;
        for (a, b) in c.iter_mut().zip(rhs.coeffs) {
            *a += b;
        }
        Self { coeffs: c }
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut c = [0.0; N];
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = (0..=k).map(|j| self.coeffs[j] * rhs.coeffs[k - j]).sum();
        }
        Self { coeffs: c }
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let b = &rhs.coeffs;
        let mut c = [0.0; N];
        for k in 0..N {
            let s: f64 = (1..=k).map(|j| b[j] * c[k - j]).sum();
            c[k] = (self.coeffs[k] - s) / b[0];
        }
        Self { coeffs: c }
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        let mut c = self.coeffs;
        c[0] += rhs;
        Self { coeffs: c }
    }
}

impl<const N: usize> Sub<f64> for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self + (-rhs)
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}
