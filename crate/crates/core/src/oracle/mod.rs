//! Brute-force cross-checks of the closed-form theory: a Monte-Carlo memory
//! kernel, numerical `Γ(Ω)` with a Kramers-Kronig test, the coarse-grained
//! double-commutator propagator and co-rotating operator algebra.
//!
//! The drive-only propagator omits the spin-lattice coupling; the finite
//! coarse-graining window `τc ≪ Δt ≪ 1/ω₁` stands in for it.

mod algebra;
mod gamma;
mod kernel;
mod propagator;

use alloc::format;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::Mat2;

pub use algebra::{commutator_identity_check, corotating_observables};
pub use gamma::{gamma_quadrature, hilbert_transform_at, kramers_kronig_check, KramersKronigReport};
pub use kernel::{closed_form_kernel, mc_memory_kernel, FluctuationTrajectory, KernelEstimate};
pub use propagator::{
    coarse_grained_increment, coarse_grained_step, generator_rates, secular_crossterm_magnitude,
    CoarseGrainedIncrement, Component, GeneratorRates, QuadratureGrid, KERNEL_CUTOFF,
    MIN_QUAD_POINTS, WINDOW_LIMIT,
};

/// Spin-1/2 density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2(Mat2);

impl DensityMatrix2 {
    pub fn new(m: Mat2) -> Result<Self> {
        let herm = m.hermiticity_defect();
        if herm > 1e-12 {
            return Err(Error::Precondition(format!(
                "density matrix is not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::Precondition(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let ev = m.hermitian_eigenvalues();
        if ev[0] < -1e-10 {
            return Err(Error::Precondition(format!(
                "density matrix has negative eigenvalue {:.3e}",
                ev[0]
            )));
        }
        Ok(Self(m))
    }

    /// `½(1 + m·σ)` for a Bloch vector with `|m| ≤ 1`.
    pub fn from_bloch(m: [f64; 3]) -> Result<Self> {
        let half = Complex64::new(0.5, 0.0);
        let mat = Mat2::IDENTITY * half
            + (Mat2::spin_x() * m[0] + Mat2::spin_y() * m[1] + Mat2::spin_z() * m[2]);
        Self::new(mat)
    }

    /// `diag(1, 0)`, the fully polarized state along `+z`.
    pub fn spin_up() -> Self {
        Self(Mat2::diagonal(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    /// Bloch vector `2 Tr(ρ I_α)`.
    pub fn bloch_vector(&self) -> [f64; 3] {
        [Mat2::spin_x(), Mat2::spin_y(), Mat2::spin_z()].map(|op| 2.0 * op.expectation(&self.0).re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bloch_round_trip() {
        let rho = DensityMatrix2::from_bloch([0.3, -0.4, 0.5]).unwrap();
        let v = rho.bloch_vector();
        assert!((v[0] - 0.3).abs() < 1e-15 && (v[1] + 0.4).abs() < 1e-15 && (v[2] - 0.5).abs() < 1e-15);
        assert_eq!(DensityMatrix2::from_bloch([0.0, 0.0, 1.0]).unwrap(), DensityMatrix2::spin_up());
    }

    #[test]
    fn rejects_unphysical() {
        assert!(DensityMatrix2::from_bloch([0.0, 0.0, 1.5]).is_err());
        let not_herm = Mat2::new(
            Complex64::new(0.5, 0.0),
            Complex64::new(0.1, 0.0),
            Complex64::new(0.2, 0.0),
            Complex64::new(0.5, 0.0),
        );
        assert!(DensityMatrix2::new(not_herm).is_err());
        assert!(DensityMatrix2::new(Mat2::IDENTITY).is_err());
    }
}
