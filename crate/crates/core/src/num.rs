//! Scalar abstraction and small numeric helpers shared by every module.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real floating point scalar: `f32` or `f64`.
///
/// The array-processing core (geometry, beamformer design, SRP, dip statistic)
/// is written against this trait; the rest of the crate is `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Lossy conversion from `f64` (exact for `f64`).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;

#[inline]
pub fn logistic<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Wraps an angle to `[0, 2π)`.
#[inline]
pub fn wrap_angle<T: Real>(a: T) -> T {
    let tau = T::TAU();
    let r = a % tau;
    let r = if r < T::zero() { r + tau } else { r };
    // `r + tau` can round up to exactly tau for tiny negative inputs
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Smallest angular distance between two directions, in `[0, π]`.
#[inline]
pub fn circular_distance<T: Real>(a: T, b: T) -> T {
    let d = wrap_angle(a - b);
    d.min(T::TAU() - d)
}

/// Weighted circular mean of angles. Returns `None` when the resultant
/// vector vanishes.
pub fn circular_mean<T: Real>(angles: impl IntoIterator<Item = (T, T)>) -> Option<T> {
    let (mut s, mut c) = (T::zero(), T::zero());
    for (a, w) in angles {
        s += w * a.sin();
        c += w * a.cos();
    }
    let r = (s * s + c * c).sqrt();
    if r <= T::epsilon() {
        None
    } else {
        Some(wrap_angle(s.atan2(c)))
    }
}

/// Circular standard deviation `sqrt(-2 ln R)` of equally weighted angles.
pub fn circular_std(angles: &[f64]) -> f64 {
    if angles.is_empty() {
        return 0.0;
    }
    let n = angles.len() as f64;
    let s: f64 = angles.iter().map(|a| a.sin()).sum::<f64>() / n;
    let c: f64 = angles.iter().map(|a| a.cos()).sum::<f64>() / n;
    let r = (s * s + c * c).sqrt().min(1.0);
    if r <= 0.0 {
        return f64::INFINITY;
    }
    (-2.0 * r.ln()).max(0.0).sqrt()
}

pub fn db10<T: Real>(x: T) -> T {
    T::of(10.0) * x.log10()
}

pub fn deg(x: f64) -> f64 {
    x.to_radians()
}
