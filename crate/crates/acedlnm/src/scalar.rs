//! Scalar abstraction over `f64` and forward-mode dual numbers.
//!
//! The likelihood, its Hessian assembly, and the special functions are
//! written against [`Real`] so that the same code path can be evaluated with
//! plain floats or with [`Dual`] numbers. Evaluating the negative Hessian
//! with dual scalars and factoring it with a dual Cholesky yields the exact
//! directional derivative of `log det H`, which the marginal-likelihood
//! gradient needs.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Primal (value) part.
    fn value(self) -> f64;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn is_finite(self) -> bool {
        self.value().is_finite()
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// First-order dual number `re + eps * dx` with a single tangent direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub dx: f64,
}

impl Dual {
    #[inline]
    pub fn new(re: f64, dx: f64) -> Self {
        Dual { re, dx }
    }
    /// Constant (zero tangent).
    #[inline]
    pub fn c(re: f64) -> Self {
        Dual { re, dx: 0.0 }
    }
    /// Variable seeded with unit tangent.
    #[inline]
    pub fn var(re: f64) -> Self {
        Dual { re, dx: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.dx + o.dx)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.dx - o.dx)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.re * o.dx + self.dx * o.re)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        Dual::new(self.re / o.re, (self.dx * o.re - self.re * o.dx) / (o.re * o.re))
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.dx)
    }
}

// Ordering on the primal part only; tangents do not affect branches.
impl PartialOrd for Dual {
    #[inline]
    fn partial_cmp(&self, o: &Dual) -> Option<std::cmp::Ordering> {
        self.re.partial_cmp(&o.re)
    }
}

impl Real for Dual {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Dual::c(x)
    }
    #[inline]
    fn value(self) -> f64 {
        self.re
    }
    #[inline]
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.dx / self.re)
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, e * self.dx)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, 0.5 * self.dx / s)
    }
    #[inline]
    fn abs(self) -> Self {
        if self.re < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powi(self, n: i32) -> Self {
        let mut out = Dual::c(1.0);
        let mut base = self;
        let mut k = n;
        if k < 0 {
            base = Dual::c(1.0) / base;
            k = -k;
        }
        for _ in 0..k {
            out = out * base;
        }
        out
    }
}
