//! Forward-mode scalar tower: plain floats plus nestable dual numbers.
//!
//! First derivatives come from `Dual<f64>`, second derivatives from
//! `Dual<Dual<f64>>` (one epsilon per nesting level plus the cross term),
//! and deeper nestings give higher mixed partials. All arithmetic applies
//! the chain rule exactly; the value part of a dual computation is
//! bit-identical to the plain real computation.

use num_traits::{Float, One, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numbers the expression evaluator can run on.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Floating-point type at the bottom of the tower.
    type Real: Float + Debug;

    fn from_real(r: Self::Real) -> Self;

    /// Innermost value part.
    fn re(&self) -> Self::Real;

    fn zero() -> Self {
        Self::from_real(Self::Real::zero())
    }

    fn one() -> Self {
        Self::from_real(Self::Real::one())
    }

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn asin(self) -> Self;
    fn acosh(self) -> Self;

    /// Integer power by repeated multiplication, so the chain rule stays
    /// exact through every nesting level.
    fn powi(self, n: i32) -> Self {
        if n < 0 {
            return Self::one() / self.powi(-n);
        }
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }

    /// General power; the caller must ensure a positive base.
    fn powf(self, e: Self) -> Self {
        (e * self.ln()).exp()
    }

    /// sinh(x)/x extended continuously by 1 at x = 0.
    ///
    /// Taylor series below |x| < 1e-2 keeps full double precision across
    /// the switchover to the direct quotient.
    fn sinhc(self) -> Self {
        fn cast<R: Float>(v: f64) -> R {
            num_traits::cast(v).expect("f64 constant fits the real type")
        }
        let cut: Self::Real = cast(1e-2);
        if self.re().abs() < cut {
            let c2 = Self::from_real(cast(1.0 / 6.0));
            let c4 = Self::from_real(cast(1.0 / 120.0));
            let c6 = Self::from_real(cast(1.0 / 5040.0));
            let x2 = self * self;
            Self::one() + x2 * (c2 + x2 * (c4 + x2 * c6))
        } else {
            self.sinh() / self
        }
    }
}

macro_rules! impl_scalar_for_float {
    ($t:ty) => {
        impl Scalar for $t {
            type Real = $t;

            fn from_real(r: $t) -> Self {
                r
            }

            fn re(&self) -> $t {
                *self
            }

            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            fn sin(self) -> Self {
                <$t>::sin(self)
            }
            fn cos(self) -> Self {
                <$t>::cos(self)
            }
            fn sinh(self) -> Self {
                <$t>::sinh(self)
            }
            fn cosh(self) -> Self {
                <$t>::cosh(self)
            }
            fn tanh(self) -> Self {
                <$t>::tanh(self)
            }
            fn asin(self) -> Self {
                <$t>::asin(self)
            }
            fn acosh(self) -> Self {
                <$t>::acosh(self)
            }
        }
    };
}

impl_scalar_for_float!(f32);
impl_scalar_for_float!(f64);

/// Dual number `re + eps·ε` with `ε² = 0`. `S` may itself be a `Dual`,
/// which yields hyper-dual (second-derivative) arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<S> {
    pub re: S,
    pub eps: S,
}

impl<S: Scalar> Dual<S> {
    pub fn new(re: S, eps: S) -> Self {
        Dual { re, eps }
    }

    /// Lift a value as the differentiation variable (unit seed).
    pub fn var(re: S) -> Self {
        Dual { re, eps: S::one() }
    }

    /// Lift a value as a constant (zero seed).
    pub fn con(re: S) -> Self {
        Dual { re, eps: S::zero() }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let v = self.re / o.re;
        Dual::new(v, (self.eps - v * o.eps) / o.re)
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    type Real = S::Real;

    fn from_real(r: S::Real) -> Self {
        Dual::con(S::from_real(r))
    }

    fn re(&self) -> S::Real {
        self.re.re()
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.eps * e)
    }

    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.eps / self.re)
    }

    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / (s + s))
    }

    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.eps * self.re.cos())
    }

    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.eps * self.re.sin()))
    }

    fn sinh(self) -> Self {
        Dual::new(self.re.sinh(), self.eps * self.re.cosh())
    }

    fn cosh(self) -> Self {
        Dual::new(self.re.cosh(), self.eps * self.re.sinh())
    }

    fn tanh(self) -> Self {
        let t = self.re.tanh();
        Dual::new(t, self.eps * (S::one() - t * t))
    }

    fn asin(self) -> Self {
        let d = (S::one() - self.re * self.re).sqrt();
        Dual::new(self.re.asin(), self.eps / d)
    }

    fn acosh(self) -> Self {
        let d = ((self.re - S::one()) * (self.re + S::one())).sqrt();
        Dual::new(self.re.acosh(), self.eps / d)
    }
}
