//! Scalar abstraction and hyper-dual numbers.
//!
//! A hyper-dual number `a + b e1 + c e2 + d e1e2` with `e1² = e2² = 0`
//! carries a value, two directional first derivatives and the mixed second
//! derivative through any composition of the supported primitives.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed to evaluate a defining function.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn re(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn atan(self) -> Self;

    fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::cst(1.0);
        }
        let mut acc = self;
        for _ in 1..k.abs() {
            acc = acc * self;
        }
        if k < 0 {
            Self::cst(1.0) / acc
        } else {
            acc
        }
    }

    fn sq(self) -> Self {
        self * self
    }

    fn scale(self, s: f64) -> Self {
        self * Self::cst(s)
    }

    fn add_f(self, s: f64) -> Self {
        self + Self::cst(s)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDual {
    pub v: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub fn new(v: f64, e1: f64, e2: f64, e12: f64) -> Self {
        Self { v, e1, e2, e12 }
    }

    /// Variable seeded in the given directions.
    pub fn var(v: f64, d1: f64, d2: f64) -> Self {
        Self::new(v, d1, d2, 0.0)
    }

    // f(a) lifted with derivatives f', f''.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        Self {
            v: f0,
            e1: f1 * self.e1,
            e2: f1 * self.e2,
            e12: f1 * self.e12 + f2 * self.e1 * self.e2,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.v + o.v, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.v - o.v, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.v * o.v,
            self.v * o.e1 + self.e1 * o.v,
            self.v * o.e2 + self.e2 * o.v,
            self.v * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.v,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        self * o.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.v, -self.e1, -self.e2, -self.e12)
    }
}

impl Scalar for HyperDual {
    fn cst(v: f64) -> Self {
        Self::new(v, 0.0, 0.0, 0.0)
    }
    fn re(&self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let inv = 1.0 / self.v;
        self.chain(self.v.ln(), inv, -inv * inv)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn atan(self) -> Self {
        let d = 1.0 / (1.0 + self.v * self.v);
        self.chain(self.v.atan(), d, -2.0 * self.v * d * d)
    }
    fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::cst(1.0);
        }
        let kf = k as f64;
        let p2 = if k == 1 { 0.0 } else { kf * (kf - 1.0) * self.v.powi(k - 2) };
        self.chain(self.v.powi(k), kf * self.v.powi(k - 1), p2)
    }
}
