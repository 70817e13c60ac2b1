//! Dense 2×2 complex matrices for spin-1/2 operator algebra.

use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
#[allow(unused_imports)] // f64 methods are inherent when std is linked
use num_traits::Float;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    pub const fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    /// `I_x = σ_x / 2`
    pub fn spin_x() -> Self {
        Mat2::new(ZERO, ONE * 0.5, ONE * 0.5, ZERO)
    }

    /// `I_y = σ_y / 2`
    pub fn spin_y() -> Self {
        Mat2::new(ZERO, -I * 0.5, I * 0.5, ZERO)
    }

    /// `I_z = σ_z / 2`
    pub fn spin_z() -> Self {
        Mat2::new(ONE * 0.5, ZERO, ZERO, -ONE * 0.5)
    }

    /// `I_+ = I_x + i I_y`
    pub fn raising() -> Self {
        Mat2::new(ZERO, ONE, ZERO, ZERO)
    }

    /// `I_- = I_x - i I_y`
    pub fn lowering() -> Self {
        Mat2::new(ZERO, ZERO, ONE, ZERO)
    }

    /// `diag(a, b)`
    pub fn diagonal(a: Complex64, b: Complex64) -> Self {
        Mat2::new(a, ZERO, ZERO, b)
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn commutator(&self, other: &Mat2) -> Mat2 {
        *self * *other - *other * *self
    }

    pub fn scale(&self, c: Complex64) -> Mat2 {
        let m = &self.0;
        Mat2::new(m[0][0] * c, m[0][1] * c, m[1][0] * c, m[1][1] * c)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Expectation value `Tr(self · rho)`.
    pub fn expectation(&self, rho: &Mat2) -> Complex64 {
        (*self * *rho).trace()
    }

    /// Largest entry modulus of `self - self†`.
    pub fn hermiticity_defect(&self) -> f64 {
        (*self - self.dagger()).max_abs()
    }

    /// Eigenvalues of a Hermitian matrix, ascending. Uses only the Hermitian part.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let m = &self.0;
        let a = m[0][0].re;
        let d = m[1][1].re;
        let b = (m[0][1] + m[1][0].conj()) * 0.5;
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - radius, mean + radius]
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, rhs: Mat2) {
        *self = *self + rhs;
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        self + (-rhs)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-ONE)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: f64) -> Mat2 {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

impl Mul<Complex64> for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Complex64) -> Mat2 {
        self.scale(rhs)
    }
}
