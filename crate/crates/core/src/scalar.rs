//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point scalar the lattice code is generic over: `f32` or `f64`.
///
/// Random variates are always drawn in `f64` and narrowed with [`Real::lit`],
/// so an `f32` run follows the same trajectory as the `f64` run of the same
/// seed.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// `x^e` with the fast integer path when `e` is integral.
#[inline]
pub fn pow<T: Real>(x: T, e: T) -> T {
    if e == e.round() && e.abs() < T::lit(64.0) {
        x.powi(e.to_i32().unwrap_or(0))
    } else {
        x.powf(e)
    }
}

/// Sign-preserving power `sign(x)|x|^e`.
#[inline]
pub fn signed_pow<T: Real>(x: T, e: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x.signum() * pow(x.abs(), e)
    }
}

/// Neumaier compensated sum.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

/// Running Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Accumulator<T> {
    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp = self.comp + ((self.sum - t) + v);
        } else {
            self.comp = self.comp + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

/// Supports above this size are summed with compensation.
pub const COMPENSATION_THRESHOLD: usize = 100_000;

/// Sum that switches to compensated accumulation for long inputs.
pub fn adaptive_sum<T: Real>(values: &[T]) -> T {
    if values.len() > COMPENSATION_THRESHOLD {
        compensated_sum(values.iter().copied())
    } else {
        values.iter().copied().sum()
    }
}
