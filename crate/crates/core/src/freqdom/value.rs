use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// A complex number carried as the real pair `(re, im)`.
///
/// Products and quotients are evaluated exactly as the 2×2 operator
/// `M(z) = [[re, -im], [im, re]]` acting on the other operand, so the scalar
/// fast path and [`FreqValue::operator`] agree bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FreqValue {
    pub re: f64,
    pub im: f64,
}

impl FreqValue {
    pub const ZERO: FreqValue = FreqValue { re: 0.0, im: 0.0 };
    pub const ONE: FreqValue = FreqValue { re: 1.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        FreqValue { re, im }
    }

    pub const fn real(re: f64) -> Self {
        FreqValue { re, im: 0.0 }
    }

    /// The unit-circle frequency `z = e^{-iθ}` for angle `θ`.
    pub fn from_angle(theta: f64) -> Self {
        FreqValue {
            re: theta.cos(),
            im: -theta.sin(),
        }
    }

    /// Inverse of [`FreqValue::from_angle`], in `(-π, π]`.
    pub fn angle(self) -> f64 {
        -self.im.atan2(self.re)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        FreqValue { re: v[0], im: v[1] }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.re, self.im)
    }

    /// Operator representation `M(z)`.
    pub fn operator(self) -> Matrix2<f64> {
        Matrix2::new(self.re, -self.im, self.im, self.re)
    }

    pub fn conj(self) -> Self {
        FreqValue {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// `z^{-1} = conj(z) / |z|^2`.
    pub fn inv(self) -> Self {
        let d = self.norm_sqr();
        FreqValue {
            re: self.re / d,
            im: -self.im / d,
        }
    }

    pub fn scale(self, s: f64) -> Self {
        FreqValue {
            re: self.re * s,
            im: self.im * s,
        }
    }

    pub fn powi(self, k: usize) -> Self {
        let mut acc = FreqValue::ONE;
        for _ in 0..k {
            acc = acc * self;
        }
        acc
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Add for FreqValue {
    type Output = FreqValue;
    fn add(self, o: FreqValue) -> FreqValue {
        FreqValue {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
}

impl AddAssign for FreqValue {
    fn add_assign(&mut self, o: FreqValue) {
        self.re += o.re;
        self.im += o.im;
    }
}

impl Sub for FreqValue {
    type Output = FreqValue;
    fn sub(self, o: FreqValue) -> FreqValue {
        FreqValue {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }
}

impl Neg for FreqValue {
    type Output = FreqValue;
    fn neg(self) -> FreqValue {
        FreqValue {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Mul for FreqValue {
    type Output = FreqValue;
    /// `M(self) · (o.re, o.im)ᵀ`.
    fn mul(self, o: FreqValue) -> FreqValue {
        FreqValue {
            re: self.re * o.re + -self.im * o.im,
            im: self.im * o.re + self.re * o.im,
        }
    }
}

impl Div for FreqValue {
    type Output = FreqValue;
    fn div(self, o: FreqValue) -> FreqValue {
        o.inv() * self
    }
}

impl std::iter::Sum for FreqValue {
    fn sum<I: Iterator<Item = FreqValue>>(iter: I) -> FreqValue {
        iter.fold(FreqValue::ZERO, |a, b| a + b)
    }
}

impl std::iter::Product for FreqValue {
    fn product<I: Iterator<Item = FreqValue>>(iter: I) -> FreqValue {
        iter.fold(FreqValue::ONE, |a, b| a * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Matrix2<f64>, b: Matrix2<f64>) -> bool {
        (a - b).abs().max() < 1e-12
    }

    #[test]
    fn operator_applied_to_e1_is_the_value() {
        let z = FreqValue::new(0.3, -1.7);
        assert_eq!(FreqValue::from_vector(z.operator() * Vector2::x()), z);
    }

    #[test]
    fn scalar_product_matches_operator_product_bitwise() {
        let a = FreqValue::new(0.123456789, -2.5);
        let b = FreqValue::new(-1.1, 0.777);
        assert_eq!(a * b, FreqValue::from_vector(a.operator() * b.to_vector()));
    }

    #[test]
    fn quarter_turn() {
        let z = FreqValue::from_angle(std::f64::consts::FRAC_PI_2);
        assert!((z.re).abs() < 1e-15 && (z.im + 1.0).abs() < 1e-15);
        assert!((z.angle() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn operator_laws(t1 in -3.2f64..3.2, t2 in -3.2f64..3.2) {
            let z = FreqValue::from_angle(t1);
            let w = FreqValue::from_angle(t2);
            prop_assert!(close((z * w).operator(), z.operator() * w.operator()));
            prop_assert!(close(z.conj().operator(), z.operator().transpose()));
            prop_assert!(close(z.inv().operator(), z.operator().try_inverse().unwrap()));
        }
    }
}
