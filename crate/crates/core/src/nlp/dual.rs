//! Forward-mode dual numbers.
//!
//! [`Dual<T>`] carries a value and a vector of partial derivatives. Nesting
//! (`Dual<Dual<f64>>`) gives exact second derivatives by forward-over-forward
//! differentiation. An empty partials vector means "all partials zero", so
//! constants never allocate.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Real-like scalar type that problem functions are written against.
///
/// Every evaluator in this crate is generic over `Scalar`, which lets the same
/// code run on plain `f64`, first-order duals, and nested duals.
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn from_f64(v: f64) -> Self;
    /// The underlying real value, dropping all derivative information.
    fn value(&self) -> f64;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn tanh(&self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }

    /// Exact zero, including all derivative parts.
    fn is_zero(&self) -> bool {
        self.value() == 0.0
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn square(&self) -> Self {
        self * self
    }
}

/// Forward-mode dual number over an inner scalar `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual<T> {
    pub value: T,
    pub partials: Vec<T>,
}

impl<T: Scalar> Dual<T> {
    pub fn constant(value: T) -> Self {
        Dual {
            value,
            partials: Vec::new(),
        }
    }

    /// Independent variable number `index` out of `width` seeded directions.
    pub fn variable(value: T, index: usize, width: usize) -> Self {
        let mut partials = vec![T::zero(); width];
        partials[index] = T::from_f64(1.0);
        Dual { value, partials }
    }

    /// Partial derivative in direction `i`, zero when not stored.
    pub fn partial(&self, i: usize) -> T {
        self.partials.get(i).cloned().unwrap_or_else(T::zero)
    }

    /// Applies `f` with derivative `df` (both evaluated at `self.value`).
    fn chain(&self, f: T, df: T) -> Self {
        Dual {
            value: f,
            // untouched directions stay exactly zero even where df is infinite
            partials: self
                .partials
                .iter()
                .map(|p| if p.is_zero() { T::zero() } else { p.clone() * df.clone() })
                .collect(),
        }
    }
}

fn zip_partials<T: Scalar>(a: &[T], b: &[T], f: impl Fn(&T, &T) -> T, only_a: impl Fn(&T) -> T, only_b: impl Fn(&T) -> T) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => f(x, y),
            (Some(x), None) => only_a(x),
            (None, Some(y)) => only_b(y),
            (None, None) => unreachable!(),
        })
        .collect()
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let partials = if rhs.partials.is_empty() {
            self.partials
        } else if self.partials.is_empty() {
            rhs.partials
        } else {
            zip_partials(&self.partials, &rhs.partials, |x, y| x.clone() + y.clone(), |x| x.clone(), |y| y.clone())
        };
        Dual {
            value: self.value + rhs.value,
            partials,
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let partials = if rhs.partials.is_empty() {
            self.partials
        } else {
            zip_partials(&self.partials, &rhs.partials, |x, y| x.clone() - y.clone(), |x| x.clone(), |y| -y.clone())
        };
        Dual {
            value: self.value - rhs.value,
            partials,
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let partials = match (self.partials.is_empty(), rhs.partials.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => self.partials.iter().map(|p| p.clone() * rhs.value.clone()).collect(),
            (true, false) => rhs.partials.iter().map(|p| p.clone() * self.value.clone()).collect(),
            (false, false) => zip_partials(
                &self.partials,
                &rhs.partials,
                |x, y| x.clone() * rhs.value.clone() + y.clone() * self.value.clone(),
                |x| x.clone() * rhs.value.clone(),
                |y| y.clone() * self.value.clone(),
            ),
        };
        Dual {
            value: self.value * rhs.value,
            partials,
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = T::from_f64(1.0) / rhs.value.clone();
        let q = self.value.clone() * inv.clone();
        let partials = if rhs.partials.is_empty() {
            self.partials.iter().map(|p| p.clone() * inv.clone()).collect()
        } else {
            zip_partials(
                &self.partials,
                &rhs.partials,
                |x, y| (x.clone() - q.clone() * y.clone()) * inv.clone(),
                |x| x.clone() * inv.clone(),
                |y| -(q.clone() * y.clone()) * inv.clone(),
            )
        };
        Dual { value: q, partials }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            value: -self.value,
            partials: self.partials.into_iter().map(|p| -p).collect(),
        }
    }
}

impl<T: Scalar> Add<f64> for Dual<T> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        Dual {
            value: self.value + rhs,
            partials: self.partials,
        }
    }
}

impl<T: Scalar> Sub<f64> for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        Dual {
            value: self.value - rhs,
            partials: self.partials,
        }
    }
}

impl<T: Scalar> Mul<f64> for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Dual {
            value: self.value * rhs,
            partials: self.partials.into_iter().map(|p| p * rhs).collect(),
        }
    }
}

impl<T: Scalar> Div<f64> for Dual<T> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        Dual {
            value: self.value / rhs,
            partials: self.partials.into_iter().map(|p| p / rhs).collect(),
        }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Dual::constant(T::from_f64(v))
    }
    fn value(&self) -> f64 {
        self.value.value()
    }
    fn is_zero(&self) -> bool {
        self.value.is_zero() && self.partials.iter().all(|p| p.is_zero())
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e.clone(), e)
    }
    fn ln(&self) -> Self {
        self.chain(self.value.ln(), T::from_f64(1.0) / self.value.clone())
    }
    fn sin(&self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }
    fn sqrt(&self) -> Self {
        let r = self.value.sqrt();
        self.chain(r.clone(), T::from_f64(0.5) / r)
    }
    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Dual::from_f64(1.0);
        }
        let d = self.value.powi(n - 1) * (n as f64);
        self.chain(self.value.powi(n), d)
    }
    fn powf(&self, p: f64) -> Self {
        let d = self.value.powf(p - 1.0) * p;
        self.chain(self.value.powf(p), d)
    }
    fn tanh(&self) -> Self {
        let t = self.value.tanh();
        let d = -(t.clone() * t.clone()) + 1.0;
        self.chain(t, d)
    }
    fn square(&self) -> Self {
        let d = self.value.clone() * 2.0;
        self.chain(self.value.square(), d)
    }
}

/// First-order dual over `f64`.
pub type Dual1 = Dual<f64>;
/// Second-order (forward-over-forward) dual.
pub type Dual2 = Dual<Dual<f64>>;

/// Seeds `z` as `width`-wide first-order duals for directions `start..start+width`.
pub fn seed_first(z: &[f64], start: usize, width: usize) -> Vec<Dual1> {
    z.iter()
        .enumerate()
        .map(|(i, &v)| {
            if i >= start && i < start + width {
                Dual::variable(v, i - start, width)
            } else {
                Dual::constant(v)
            }
        })
        .collect()
}

/// Seeds every entry of `z` for a full second-order evaluation.
pub fn seed_second(z: &[f64]) -> Vec<Dual2> {
    let n = z.len();
    z.iter()
        .enumerate()
        .map(|(i, &v)| Dual::variable(Dual::variable(v, i, n), i, n))
        .collect()
}

/// Extracts the Hessian (row-major, `n`×`n`) from a second-order result.
pub fn hessian_of(out: &Dual2, n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        let row = out.partial(i);
        for j in 0..n {
            h[i * n + j] = row.partial(j);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::variable(3.0, 0, 2);
        let y = Dual::variable(4.0, 1, 2);
        let p = x * y;
        assert_eq!(p.value, 12.0);
        assert_eq!(p.partials, vec![4.0, 3.0]);
    }

    #[test]
    fn constants_stay_sparse() {
        let c = Dual1::from_f64(2.0) * Dual1::from_f64(5.0) + 1.0;
        assert!(c.partials.is_empty());
        assert_eq!(c.value, 11.0);
    }

    #[test]
    fn quotient_with_constant_numerator() {
        let x = Dual::variable(2.0, 0, 1);
        let q = Dual1::from_f64(1.0) / x;
        assert!((q.partial(0) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn nested_second_derivative() {
        // d²/dx² of x³ at 2 is 12
        let z = seed_second(&[2.0]);
        let out = z[0].powi(3);
        assert_eq!(hessian_of(&out, 1), vec![12.0]);
        assert_eq!(out.value.partial(0), 12.0);
    }
}
