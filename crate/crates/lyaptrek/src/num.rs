//! Scalar helpers: float math routed through std or libm, and binomial
//! coefficients in the exact and log-space regimes used by the series
//! evaluators.

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("building without `std` requires the `libm` feature for float math");

#[cfg(feature = "std")]
mod float {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
    #[inline]
    pub fn powi(x: f64, n: i32) -> f64 {
        x.powi(n)
    }
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
mod float {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    /// Exponentiation by squaring; exact for powers of two bases like
    /// the 2^{-l-1} trek prefactors.
    pub fn powi(x: f64, n: i32) -> f64 {
        let mut base = if n < 0 { 1.0 / x } else { x };
        let mut e = n.unsigned_abs();
        let mut acc = 1.0;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }
}

pub(crate) use float::{abs, exp, ln, powi, sqrt};

/// Largest `l` for which `binom(l, n)` is computed as an exact u128
/// integer; beyond it the paired log-space form is used instead.
pub(crate) const BINOM_EXACT_MAX: usize = 60;

/// Exact binomial coefficient for `l <= BINOM_EXACT_MAX`, converted to
/// f64 (every value fits in the 53-bit significand for l <= 56, and the
/// single final conversion is correctly rounded beyond that).
///
/// Panics if `n > l` or `l > BINOM_EXACT_MAX`; callers gate on the
/// constant.
pub(crate) fn binom_exact(l: usize, n: usize) -> f64 {
    debug_assert!(l <= BINOM_EXACT_MAX);
    binom_u128(l, n) as f64
}

/// Exact integer binomial via multiply-then-divide; every intermediate
/// prefix product is itself a binomial coefficient, so the division is
/// exact and nothing overflows u128 for l <= 120.
pub(crate) fn binom_u128(l: usize, n: usize) -> u128 {
    debug_assert!(n <= l);
    let n = n.min(l - n);
    let mut acc: u128 = 1;
    for i in 1..=n {
        acc = acc * (l - n + i) as u128 / i as u128;
    }
    acc
}

/// Natural log of `binom(l, n)`, summed term by term (no lgamma
/// dependency; l stays in the low thousands in practice).
pub(crate) fn ln_binom(l: usize, n: usize) -> f64 {
    debug_assert!(n <= l);
    let n = n.min(l - n);
    let mut acc = 0.0;
    for i in 1..=n {
        acc += ln((l - n + i) as f64) - ln(i as f64);
    }
    acc
}

/// Binomial coefficient as f64 over the full range: exact-integer
/// route up to the exact threshold, log-space beyond it.
pub(crate) fn binom_f64(l: usize, n: usize) -> f64 {
    debug_assert!(n <= l);
    if l <= BINOM_EXACT_MAX {
        binom_exact(l, n)
    } else {
        exp(ln_binom(l, n))
    }
}

/// The paired form `2^{-l-1} * binom(l, n)`, which is always <= 1/2.
/// Exact-integer route for small l; log-space for l above the exact
/// threshold so neither factor overflows on its own.
pub(crate) fn half_pow_binom(l: usize, n: usize) -> f64 {
    if l <= BINOM_EXACT_MAX {
        binom_exact(l, n) * powi(0.5, l as i32 + 1)
    } else {
        exp(ln_binom(l, n) - (l as f64 + 1.0) * core::f64::consts::LN_2)
    }
}
