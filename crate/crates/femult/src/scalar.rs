//! Scalar abstraction for the numeric core.
//!
//! Everything downstream of the device model is written against [`Real`]
//! so the same code runs at `f32` or `f64` precision. The toolkit-level
//! tolerances (symmetry to 1e-9, mirror identity to 1e-12) assume `f64`.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar usable by the whole toolkit: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + LowerExp + rustfft::FftNum
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for pulling an `f64` constant into the working scalar type.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// `n` evenly spaced samples over `[a, b]`, endpoints exact.
pub fn linspace<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    assert!(n >= 2, "linspace needs at least two samples");
    let step = (b - a) / T::from_usize(n - 1).expect("grid size fits scalar");
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                a + step * T::from_usize(i).expect("grid index fits scalar")
            }
        })
        .collect()
}

/// Numerically stable softplus, `ln(1 + exp(x))`.
///
/// Equals `x` for large positive `x` and decays like `exp(x)` for large
/// negative `x` without overflowing either way.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    let zero = T::zero();
    if x > zero {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_matches_naive_form_in_safe_range() {
        // the naive form itself loses accuracy below roughly x = -10
        for i in -10..=120 {
            let x = i as f64 * 0.5;
            let naive = (1.0 + x.exp()).ln();
            let stable = softplus(x);
            assert!(
                (stable - naive).abs() <= 1e-12 * naive.abs().max(1e-300),
                "x={x}: {stable} vs {naive}"
            );
        }
    }

    #[test]
    fn softplus_asymptotic_tail() {
        // softplus(x) -> exp(x) as x -> -inf; the first correction term is
        // exp(2x)/2, far below 1e-12 relative at x = -40
        let x = -40.0f64;
        assert!((softplus(x) / x.exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softplus_survives_extreme_arguments() {
        assert_eq!(softplus(1e4_f64), 1e4);
        assert!(softplus(-1e4_f64) >= 0.0);
        assert!(softplus(-1e4_f64) < 1e-300);
    }

    #[test]
    fn works_at_f32() {
        let y: f32 = softplus(2.0f32);
        assert!((y - 2.126928f32).abs() < 1e-5);
    }
}
