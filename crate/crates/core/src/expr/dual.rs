//! Dual numbers carrying one derivative slot.

use core::ops::{Add, Div, Mul, Neg, Sub};

/// `value + deriv·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
}

impl Dual {
    pub const fn new(value: f64, deriv: f64) -> Self {
        Dual { value, deriv }
    }

    pub const fn constant(value: f64) -> Self {
        Dual { value, deriv: 0.0 }
    }

    pub const fn variable(value: f64) -> Self {
        Dual { value, deriv: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.value + o.value, self.deriv + o.deriv)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.value - o.value, self.deriv - o.deriv)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.value * o.value, self.deriv * o.value + self.value * o.deriv)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let q = self.value / o.value;
        Dual::new(q, (self.deriv - q * o.deriv) / o.value)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.deriv)
    }
}

/// Arithmetic the evaluator needs. Domain checks happen in the evaluator,
/// so these assume their arguments are admissible.
pub(crate) trait Number:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(self) -> f64;
    fn has_tangent(self) -> bool;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// `self^e` for a positive base.
    fn pow_positive(self, e: Self) -> Self;
    /// `self^e` for an integer-valued exponent with no tangent, any base.
    fn pow_integer(self, e: f64) -> Self;
    fn is_finite(self) -> bool;
}

impl Number for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn has_tangent(self) -> bool {
        false
    }
    fn exp(self) -> Self {
        libm::exp(self)
    }
    fn ln(self) -> Self {
        libm::log(self)
    }
    fn pow_positive(self, e: Self) -> Self {
        libm::pow(self, e)
    }
    fn pow_integer(self, e: f64) -> Self {
        libm::pow(self, e)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Number for Dual {
    fn constant(v: f64) -> Self {
        Dual::constant(v)
    }
    fn value(self) -> f64 {
        self.value
    }
    fn has_tangent(self) -> bool {
        self.deriv != 0.0
    }
    fn exp(self) -> Self {
        let e = libm::exp(self.value);
        Dual::new(e, e * self.deriv)
    }
    fn ln(self) -> Self {
        Dual::new(libm::log(self.value), self.deriv / self.value)
    }
    fn pow_positive(self, e: Self) -> Self {
        let v = libm::pow(self.value, e.value);
        let mut d = 0.0;
        if self.deriv != 0.0 {
            d += e.value * libm::pow(self.value, e.value - 1.0) * self.deriv;
        }
        if e.deriv != 0.0 {
            d += v * libm::log(self.value) * e.deriv;
        }
        Dual::new(v, d)
    }
    fn pow_integer(self, e: f64) -> Self {
        let v = libm::pow(self.value, e);
        let d = if e == 0.0 || self.deriv == 0.0 {
            0.0
        } else {
            e * libm::pow(self.value, e - 1.0) * self.deriv
        };
        Dual::new(v, d)
    }
    fn is_finite(self) -> bool {
        self.value.is_finite() && self.deriv.is_finite()
    }
}
