//! Truncated Taylor arithmetic.
//!
//! A [`Jet`] carries the normalized Taylor coefficients `f^(k)(t0) / k!` of a
//! scalar function at a point, up to a fixed capacity. Every operation tracks
//! the highest coefficient index that is still exact (`order`), so quantities
//! built from a curve sampled with a finite number of derivatives report how
//! many of their own derivatives are trustworthy.
//!
//! Geometric code in this crate is written once against [`Scalar`] and runs on
//! plain `f64` values or on jets, which is how covariant derivatives along a
//! curve are obtained without finite differences.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Number of stored Taylor coefficients.
pub const JET_LEN: usize = 8;

/// Highest representable order.
pub const MAX_ORDER: i32 = JET_LEN as i32 - 1;

/// Numeric type the geometric kernels are generic over.
pub trait Scalar:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn cst(v: f64) -> Self;
    /// Constant term.
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn scale(self, k: f64) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    coeffs: [f64; JET_LEN],
    order: i32,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = (self.order.max(-1) + 1) as usize;
        write!(f, "Jet{:?}", &self.coeffs[..n])
    }
}

const FACTORIAL: [f64; JET_LEN] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0];

impl Jet {
    /// Exact constant.
    pub fn constant(v: f64) -> Self {
        let mut coeffs = [0.0; JET_LEN];
        coeffs[0] = v;
        Jet { coeffs, order: MAX_ORDER }
    }

    /// Independent variable `t0 + τ`.
    pub fn variable(t0: f64) -> Self {
        let mut coeffs = [0.0; JET_LEN];
        coeffs[0] = t0;
        coeffs[1] = 1.0;
        Jet { coeffs, order: MAX_ORDER }
    }

    /// Builds a jet from derivative values `[f, f', f'', ...]`.
    pub fn from_derivatives(derivs: &[f64]) -> Self {
        assert!(!derivs.is_empty() && derivs.len() <= JET_LEN);
        let mut coeffs = [0.0; JET_LEN];
        for (k, d) in derivs.iter().enumerate() {
            coeffs[k] = d / FACTORIAL[k];
        }
        Jet { coeffs, order: derivs.len() as i32 - 1 }
    }

    /// Builds a jet from normalized Taylor coefficients.
    pub fn from_taylor(coeffs_in: &[f64], order: i32) -> Self {
        let mut coeffs = [0.0; JET_LEN];
        for (k, c) in coeffs_in.iter().take(JET_LEN).enumerate() {
            coeffs[k] = *c;
        }
        Jet { coeffs, order: order.min(MAX_ORDER) }
    }

    /// Highest exact coefficient index; negative when nothing is exact.
    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn is_valid(&self) -> bool {
        self.order >= 0
    }

    pub fn with_order(mut self, order: i32) -> Self {
        self.order = order.min(MAX_ORDER);
        self
    }

    pub fn taylor(&self, k: usize) -> f64 {
        self.coeffs[k]
    }

    pub fn set_taylor(&mut self, k: usize, v: f64) {
        self.coeffs[k] = v;
    }

    /// `n`-th derivative, if it is still exact.
    pub fn deriv(&self, n: usize) -> Option<f64> {
        if (n as i32) <= self.order {
            Some(self.coeffs[n] * FACTORIAL[n])
        } else {
            None
        }
    }

    /// All exact derivatives `[f, f', ...]`.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order.max(-1))
            .map(|k| self.coeffs[k as usize] * FACTORIAL[k as usize])
            .collect()
    }

    /// Derivative with respect to the expansion variable; loses one order.
    pub fn derivative(&self) -> Self {
        let mut coeffs = [0.0; JET_LEN];
        for k in 0..JET_LEN - 1 {
            coeffs[k] = (k as f64 + 1.0) * self.coeffs[k + 1];
        }
        Jet { coeffs, order: self.order - 1 }
    }

    /// Evaluates the truncated series at offset `tau`.
    pub fn eval(&self, tau: f64) -> f64 {
        let n = self.order.max(0) as usize;
        let mut acc = 0.0;
        for k in (0..=n).rev() {
            acc = acc * tau + self.coeffs[k];
        }
        acc
    }

    fn top(&self) -> usize {
        self.order.clamp(0, MAX_ORDER) as usize
    }

    pub fn recip(self) -> Self {
        Jet::constant(1.0) / self
    }

    /// `self^p` for a positive base.
    pub fn powf(self, p: f64) -> Self {
        let a = &self.coeffs;
        let mut f = [0.0; JET_LEN];
        f[0] = a[0].powf(p);
        for k in 1..=self.top() {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (p * j as f64 - (k - j) as f64) * a[j] * f[k - j];
            }
            f[k] = acc / (k as f64 * a[0]);
        }
        Jet { coeffs: f, order: self.order }
    }

    pub fn powi(self, n: i32) -> Self {
        let mut acc = Jet::constant(1.0);
        for _ in 0..n.unsigned_abs() {
            acc = acc * self;
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }

    pub fn sin_cos(self) -> (Self, Self) {
        let a = &self.coeffs;
        let mut s = [0.0; JET_LEN];
        let mut c = [0.0; JET_LEN];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..=self.top() {
            let (mut sk, mut ck) = (0.0, 0.0);
            for j in 1..=k {
                sk += j as f64 * a[j] * c[k - j];
                ck -= j as f64 * a[j] * s[k - j];
            }
            s[k] = sk / k as f64;
            c[k] = ck / k as f64;
        }
        (
            Jet { coeffs: s, order: self.order },
            Jet { coeffs: c, order: self.order },
        )
    }

    pub fn sinh_cosh(self) -> (Self, Self) {
        let a = &self.coeffs;
        let mut s = [0.0; JET_LEN];
        let mut c = [0.0; JET_LEN];
        s[0] = a[0].sinh();
        c[0] = a[0].cosh();
        for k in 1..=self.top() {
            let (mut sk, mut ck) = (0.0, 0.0);
            for j in 1..=k {
                sk += j as f64 * a[j] * c[k - j];
                ck += j as f64 * a[j] * s[k - j];
            }
            s[k] = sk / k as f64;
            c[k] = ck / k as f64;
        }
        (
            Jet { coeffs: s, order: self.order },
            Jet { coeffs: c, order: self.order },
        )
    }

    pub fn sin(self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(self) -> Self {
        self.sin_cos().1
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut coeffs = self.coeffs;
        for (c, r) in coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *c += r;
        }
        Jet { coeffs, order: self.order.min(rhs.order) }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let mut coeffs = self.coeffs;
        for (c, r) in coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *c -= r;
        }
        Jet { coeffs, order: self.order.min(rhs.order) }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut coeffs = [0.0; JET_LEN];
        if order >= 0 {
            for k in 0..=order as usize {
                let mut acc = 0.0;
                for j in 0..=k {
                    acc += self.coeffs[j] * rhs.coeffs[k - j];
                }
                coeffs[k] = acc;
            }
        }
        Jet { coeffs, order }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut q = [0.0; JET_LEN];
        if order >= 0 {
            let b0 = rhs.coeffs[0];
            for k in 0..=order as usize {
                let mut acc = self.coeffs[k];
                for j in 1..=k {
                    acc -= rhs.coeffs[j] * q[k - j];
                }
                q[k] = acc / b0;
            }
        }
        Jet { coeffs: q, order }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        let mut coeffs = self.coeffs;
        for c in coeffs.iter_mut() {
            *c = -*c;
        }
        Jet { coeffs, order: self.order }
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, k: f64) -> Jet {
        self.scale(k)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, k: f64) -> Jet {
        self.coeffs[0] += k;
        self
    }
}

impl Scalar for Jet {
    fn cst(v: f64) -> Self {
        Jet::constant(v)
    }

    fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn sqrt(self) -> Self {
        let a = &self.coeffs;
        let mut s = [0.0; JET_LEN];
        s[0] = a[0].sqrt();
        for k in 1..=self.top() {
            let mut acc = a[k];
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc / (2.0 * s[0]);
        }
        Jet { coeffs: s, order: self.order }
    }

    fn scale(self, k: f64) -> Self {
        let mut coeffs = self.coeffs;
        for c in coeffs.iter_mut() {
            *c *= k;
        }
        Jet { coeffs, order: self.order }
    }
}

/// Lifts a vector of jets to its componentwise derivative.
pub fn derivative_vec(v: &[Jet]) -> Vec<Jet> {
    v.iter().map(Jet::derivative).collect()
}

/// Constant terms of a vector of jets.
pub fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(|j| j.value()).collect()
}

/// Smallest order among a set of jets.
pub fn min_order(v: &[Jet]) -> i32 {
    v.iter().map(Jet::order).min().unwrap_or(MAX_ORDER)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn product_and_quotient_match_closed_forms() {
        // f(t) = 1/(2+t^2) at t0 = 0.7
        let t = Jet::variable(0.7);
        let f = (t * t + 2.0).recip();
        let d = 2.0 + 0.49;
        assert!(close(f.deriv(0).unwrap(), 1.0 / d, 1e-15));
        assert!(close(f.deriv(1).unwrap(), -2.0 * 0.7 / (d * d), 1e-14));
        let f2 = (6.0 * 0.49 - 4.0) / (d * d * d);
        assert!(close(f.deriv(2).unwrap(), f2, 1e-13));
    }

    #[test]
    fn sqrt_pow_trig_are_consistent() {
        let t = Jet::variable(0.3);
        let x = t * t + 1.5;
        let s = x.sqrt();
        let p = x.powf(0.5);
        for k in 0..JET_LEN {
            assert!(close(s.taylor(k), p.taylor(k), 1e-13));
        }
        let (sn, cs) = t.sin_cos();
        let one = sn * sn + cs * cs;
        assert!(close(one.taylor(0), 1.0, 1e-15));
        for k in 1..JET_LEN {
            assert!(one.taylor(k).abs() < 1e-14);
        }
        let (sh, ch) = t.sinh_cosh();
        let one = ch * ch - sh * sh;
        for k in 1..JET_LEN {
            assert!(one.taylor(k).abs() < 1e-14);
        }
    }

    #[test]
    fn order_is_tracked_through_derivatives() {
        let j = Jet::from_derivatives(&[1.0, 2.0, 3.0]);
        assert_eq!(j.order(), 2);
        let d = j.derivative();
        assert_eq!(d.order(), 1);
        assert_eq!(d.deriv(0), Some(2.0));
        assert_eq!(d.deriv(1), Some(3.0));
        assert_eq!(d.deriv(2), None);
        let prod = d * Jet::constant(2.0);
        assert_eq!(prod.order(), 1);
        assert!(!d.derivative().derivative().is_valid());
    }

    #[test]
    fn eval_reproduces_polynomial() {
        let t = Jet::variable(1.0);
        let p = t * t * t;
        // (1+τ)^3 at τ = 0.5
        assert!(close(p.eval(0.5), 3.375, 1e-15));
    }
}
