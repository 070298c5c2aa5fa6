//! Second-order jets in the counting field χ.
//!
//! A [`Jet2`] carries a complex value together with its first and second
//! plain derivatives with respect to χ at χ = 0, and propagates them through
//! ring arithmetic exactly (truncated Taylor rules).  A counting phase
//! `e^{iνχ}` is the jet `(1, iν, −ν²)`.

use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{QcertError, Result};
use crate::scalar::Field;

/// Value and first two χ-derivatives of a complex function at χ = 0.
///
/// `v1 = ∂χ f(0)` and `v2 = ∂²χ f(0)`.  The derivatives customarily written
/// with primes in the counting-statistics literature are `i·v1` and `−v2`;
/// see [`Jet2::prime`] and [`Jet2::double_prime`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<T> {
    pub v0: Complex<T>,
    pub v1: Complex<T>,
    pub v2: Complex<T>,
}

impl<T: Field> Jet2<T> {
    pub fn new(v0: Complex<T>, v1: Complex<T>, v2: Complex<T>) -> Self {
        Jet2 { v0, v1, v2 }
    }

    /// A χ-independent real value.
    pub fn constant(x: T) -> Self {
        Jet2::from_complex(Complex::new(x, T::zero()))
    }

    pub fn from_complex(z: Complex<T>) -> Self {
        Jet2 {
            v0: z,
            v1: Complex::zero(),
            v2: Complex::zero(),
        }
    }

    /// The jet of `e^{i w χ}`.
    pub fn phase(winding: i32) -> Self {
        let w = T::from_f64(winding as f64);
        Jet2 {
            v0: Complex::one(),
            v1: Complex::new(T::zero(), w),
            v2: Complex::new(-(w * w), T::zero()),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.v1.is_zero() && self.v2.is_zero()
    }

    pub fn scale(self, s: Complex<T>) -> Self {
        Jet2 {
            v0: self.v0 * s,
            v1: self.v1 * s,
            v2: self.v2 * s,
        }
    }

    pub fn scale_real(self, s: T) -> Self {
        Jet2 {
            v0: self.v0.scale(s),
            v1: self.v1.scale(s),
            v2: self.v2.scale(s),
        }
    }

    /// `i·∂χ` at zero.
    pub fn prime(&self) -> Complex<T> {
        Complex::new(-self.v1.im, self.v1.re)
    }

    /// `(i∂χ)²` at zero, i.e. `−∂²χ`.
    pub fn double_prime(&self) -> Complex<T> {
        -self.v2
    }

    /// Truncated-Taylor reciprocal.  Fails when the value part vanishes.
    pub fn recip(self) -> Result<Self> {
        if self.v0.is_zero() {
            return Err(QcertError::Conditioning(
                "jet reciprocal of a vanishing value".into(),
            ));
        }
        let r0 = Complex::<T>::one() / self.v0;
        let r0sq = r0 * r0;
        let two = T::from_f64(2.0);
        let r1 = -(self.v1 * r0sq);
        let r2 = -(self.v2 * r0sq) + (self.v1 * self.v1 * r0sq * r0).scale(two);
        Ok(Jet2 {
            v0: r0,
            v1: r1,
            v2: r2,
        })
    }

    pub fn checked_div(self, rhs: Self) -> Result<Self> {
        Ok(self * rhs.recip()?)
    }
}

impl<T: Field> Zero for Jet2<T> {
    fn zero() -> Self {
        Jet2::from_complex(Complex::zero())
    }
    fn is_zero(&self) -> bool {
        self.v0.is_zero() && self.is_constant()
    }
}

impl<T: Field> One for Jet2<T> {
    fn one() -> Self {
        Jet2::from_complex(Complex::one())
    }
}

impl<T: Field> Add for Jet2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Jet2 {
            v0: self.v0 + rhs.v0,
            v1: self.v1 + rhs.v1,
            v2: self.v2 + rhs.v2,
        }
    }
}

impl<T: Field> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Jet2 {
            v0: self.v0 - rhs.v0,
            v1: self.v1 - rhs.v1,
            v2: self.v2 - rhs.v2,
        }
    }
}

impl<T: Field> Neg for Jet2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet2 {
            v0: -self.v0,
            v1: -self.v1,
            v2: -self.v2,
        }
    }
}

impl<T: Field> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let two = T::from_f64(2.0);
        Jet2 {
            v0: self.v0 * rhs.v0,
            v1: self.v0 * rhs.v1 + self.v1 * rhs.v0,
            v2: self.v0 * rhs.v2 + (self.v1 * rhs.v1).scale(two) + self.v2 * rhs.v0,
        }
    }
}

impl<T: Field> AddAssign for Jet2<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Field> SubAssign for Jet2<T> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Field> MulAssign for Jet2<T> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(a: f64, b: f64, c: f64) -> Jet2<f64> {
        Jet2::new(
            Complex::new(a, 0.0),
            Complex::new(b, 0.0),
            Complex::new(c, 0.0),
        )
    }

    #[test]
    fn opposite_phases_cancel() {
        let p = Jet2::<f64>::phase(1) * Jet2::phase(-1);
        assert_eq!(p, Jet2::one());
        let q = Jet2::<f64>::phase(1) * Jet2::phase(1);
        assert_eq!(q, Jet2::phase(2));
    }

    #[test]
    fn product_rule_matches_polynomials() {
        // f = 1 + 2χ + 3χ², g = 4 − χ + χ²/2 (as Taylor data: v2 = 2·coeff)
        let f = j(1.0, 2.0, 6.0);
        let g = j(4.0, -1.0, 1.0);
        let h = f * g;
        // fg = 4 + 7χ + (0.5 − 2 + 12)χ² + …
        assert_eq!(h.v0.re, 4.0);
        assert_eq!(h.v1.re, 7.0);
        assert!((h.v2.re - 2.0 * 10.5).abs() < 1e-14);
    }

    #[test]
    fn reciprocal_round_trips() {
        let f = j(2.0, -0.5, 3.0);
        let r = f.recip().unwrap();
        let one = f * r;
        assert!((one.v0.re - 1.0).abs() < 1e-15);
        assert!(one.v1.norm() < 1e-15);
        assert!(one.v2.norm() < 1e-15);
        assert!(j(0.0, 1.0, 1.0).recip().is_err());
    }

    #[test]
    fn scalar_products_reduce_to_plain_multiplication() {
        let a = Jet2::constant(3.0);
        let b = Jet2::constant(-2.5);
        assert_eq!(a * b, Jet2::constant(-7.5));
    }

    #[test]
    fn primes_follow_the_counting_convention() {
        let p = Jet2::<f64>::phase(-1);
        // i∂χ e^{−iχ} = 1, (i∂χ)² e^{−iχ} = 1
        assert_eq!(p.prime(), Complex::new(1.0, 0.0));
        assert_eq!(p.double_prime(), Complex::new(1.0, 0.0));
    }
}
