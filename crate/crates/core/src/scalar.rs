use nalgebra::ComplexField;
use num_complex::Complex64;

/// Field of state values: `f64` for real problems, `Complex64` for time-harmonic ones.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync {
    const IS_COMPLEX: bool;

    fn from_parts(re: f64, im: f64) -> Self;

    fn re(self) -> f64 {
        self.real()
    }

    fn im(self) -> f64 {
        self.imaginary()
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
}
