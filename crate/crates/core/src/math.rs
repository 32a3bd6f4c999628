//! `f64` transcendental functions that work without `std`.
//!
//! With `std` available the inherent `f64` methods take precedence and this
//! trait goes unused; in `no_std` builds the calls resolve here and forward to
//! `libm`.

pub trait FloatMath: Sized {
    fn sqrt(self) -> Self;
    fn powf(self, p: Self) -> Self;
    fn ln(self) -> Self;
    fn log10(self) -> Self;
    fn floor(self) -> Self;
    fn round(self) -> Self;
}

impl FloatMath for f64 {
    #[inline]
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    #[inline]
    fn powf(self, p: f64) -> f64 {
        libm::pow(self, p)
    }
    #[inline]
    fn ln(self) -> f64 {
        libm::log(self)
    }
    #[inline]
    fn log10(self) -> f64 {
        libm::log10(self)
    }
    #[inline]
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    #[inline]
    fn round(self) -> f64 {
        libm::round(self)
    }
}
