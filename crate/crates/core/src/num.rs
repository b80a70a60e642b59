//! Scalar abstractions and the handful of special functions the model needs.
//!
//! Densities and prior-predictive formulas are written against [`Real`], so
//! they run on `f32` or `f64`. The urn module only needs field arithmetic and
//! is written against [`Field`], which also covers exact rationals.

use std::fmt::Debug;

use num_rational::{BigRational, Ratio};
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Floating point scalar used by the model densities.
pub trait Real: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Arithmetic needed by the enriched Polya urn: a field with counts embedded.
///
/// Rationals make every urn identity checkable with `==`.
pub trait Field: Num + Clone + PartialOrd + Debug {
    fn from_count(n: usize) -> Self;
    fn to_f64(&self) -> f64;
}

impl Field for f64 {
    fn from_count(n: usize) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Field for f32 {
    fn from_count(n: usize) -> Self {
        n as f32
    }
    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }
}

impl Field for Ratio<i64> {
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(n as i64)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Field for BigRational {
    fn from_count(n: usize) -> Self {
        BigRational::from_integer(n.into())
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn ln_gamma<T: Real>(x: T) -> T {
    T::of(statrs::function::gamma::ln_gamma(x.as_f64()))
}

/// Standard normal CDF.
pub fn norm_cdf<T: Real>(x: T) -> T {
    T::of(0.5 * statrs::function::erf::erfc(-x.as_f64() / std::f64::consts::SQRT_2))
}

/// `log Φ(x)`, accurate far into the lower tail.
pub fn log_norm_cdf<T: Real>(x: T) -> T {
    let x = x.as_f64();
    let v = if x > -20.0 {
        (0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio asymptotic series.
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + series.ln()
    };
    T::of(v)
}

/// Inverse standard normal CDF.
pub fn norm_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

pub fn normal_log_pdf<T: Real>(x: T, mean: T, variance: T) -> T {
    let z = x - mean;
    -T::of(LN_SQRT_2PI) - T::of(0.5) * variance.ln() - z * z / (T::of(2.0) * variance)
}

/// `ln Γ(x + 1/2) − ln Γ(x)`, with an asymptotic series for large `x`.
fn ln_gamma_half_ratio<T: Real>(x: T) -> T {
    if x.as_f64() > 1e4 {
        let inv = T::one() / x;
        T::of(0.5) * x.ln() - inv / T::of(8.0) + inv * inv * inv / T::of(192.0)
    } else {
        ln_gamma(x + T::of(0.5)) - ln_gamma(x)
    }
}

/// Log density of a location-scale Student-t; `scale2` is the squared scale.
pub fn student_t_log_pdf<T: Real>(x: T, dof: T, loc: T, scale2: T) -> T {
    let half = T::of(0.5);
    let z = x - loc;
    ln_gamma_half_ratio(half * dof)
        - half * (dof * T::of(std::f64::consts::PI) * scale2).ln()
        - half * (dof + T::one()) * (z * z / (dof * scale2)).ln_1p()
}

/// `log Σ exp(v)` with max subtraction.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Rising factorial `x (x+1) ... (x+n-1)`.
pub fn rising<T: Field>(x: &T, n: usize) -> T {
    let mut acc = T::one();
    let mut k = T::zero();
    for _ in 0..n {
        acc = acc * (x.clone() + k.clone());
        k = k + T::one();
    }
    acc
}
