use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{require_positive, Result};
use crate::model::{compute_gamma, ComplexLorentzian};
use crate::quadrature::integrate;

/// Truncation of the `Γ` integral, in units of `τc`.
pub const GAMMA_CUTOFF: f64 = 40.0;
const GAMMA_REL_TOL: f64 = 1e-10;

/// `∫₀^{40τc} e^{iΩτ} e^{−τ/τc} dτ` by adaptive quadrature, real and imaginary
/// parts separately.
pub fn gamma_quadrature(omega: f64, tau_c: f64) -> Result<ComplexLorentzian> {
    require_positive("tau_c", tau_c)?;
    let upper = GAMMA_CUTOFF * tau_c;
    let absorptive = integrate(|t| (-t / tau_c).exp() * (omega * t).cos(), 0.0, upper, GAMMA_REL_TOL)?;
    let dispersive = if omega == 0.0 {
        0.0
    } else {
        integrate(|t| (-t / tau_c).exp() * (omega * t).sin(), 0.0, upper, GAMMA_REL_TOL)?
    };
    Ok(ComplexLorentzian {
        absorptive,
        dispersive,
    })
}

/// Discrete Hilbert transform `(1/π) PV∫ u(x')/(x − x') dx'` at sample `i` by
/// the Maclaurin odd-offset rule on a uniform grid of spacing `h`.
pub fn hilbert_transform_at(u: &[f64], i: usize) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    let mut k = 1;
    while k <= i || i + k < n {
        let left = if k <= i { u[i - k] } else { 0.0 };
        let right = if i + k < n { u[i + k] } else { 0.0 };
        acc += (left - right) / k as f64;
        k += 2;
    }
    2.0 / PI * acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KramersKronigReport {
    /// Largest relative gap between the transform and the closed-form dispersive part.
    pub max_rel_deviation: f64,
    pub grid_points: usize,
    pub evaluated_points: usize,
}

/// Samples the absorptive part on `|Ωτc| ≤ half_span` with `points` grid
/// points and compares its Hilbert transform with the dispersive part at
/// `evaluated` points inside `|Ωτc| ≤ check_span`.
pub fn kramers_kronig_check(
    tau_c: f64,
    half_span: f64,
    points: usize,
    check_span: f64,
    evaluated: usize,
) -> Result<KramersKronigReport> {
    require_positive("tau_c", tau_c)?;
    let n = points | 1;
    let h = 2.0 * half_span / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|k| -half_span + k as f64 * h).collect();
    let u = x
        .iter()
        .map(|&x| compute_gamma(x / tau_c, tau_c).map(|g| g.absorptive / tau_c))
        .collect::<Result<Vec<_>>>()?;
    let centre = n / 2;
    let reach = ((check_span / h).floor() as usize).min(centre);
    let stride = (2 * reach / evaluated.max(1)).max(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut idx = centre - reach;
    while idx <= centre + reach {
        if idx != centre {
            let expected = compute_gamma(x[idx] / tau_c, tau_c)?.dispersive / tau_c;
            let got = hilbert_transform_at(&u, idx);
            worst = worst.max(((got - expected) / expected).abs());
            count += 1;
        }
        idx += stride;
    }
    Ok(KramersKronigReport {
        max_rel_deviation: worst,
        grid_points: n,
        evaluated_points: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zero_frequency() {
        let g = gamma_quadrature(0.0, 1e-12).unwrap();
        assert!(rel(g.absorptive, 1e-12) < 1e-9);
        assert_eq!(g.dispersive, 0.0);
    }

    #[test]
    fn unit_product() {
        let tau = 1e-12;
        let g = gamma_quadrature(1.0 / tau, tau).unwrap();
        assert!(rel(g.absorptive, tau / 2.0) < 1e-9);
        assert!(rel(g.dispersive, tau / 2.0) < 1e-9);
    }

    #[test]
    fn high_frequency_asymptote() {
        let tau = 1e-12;
        let omega = 100.0 / tau;
        let g = gamma_quadrature(omega, tau).unwrap();
        assert!(rel(g.dispersive, 1.0 / omega) < 1e-4);
    }

    #[test]
    fn agrees_with_closed_form() {
        let tau = 1e-12;
        for x in [0.0, 0.01, 0.3, 1.0, 2.5, 10.0, 37.0, 100.0] {
            let q = gamma_quadrature(x / tau, tau).unwrap();
            let c = compute_gamma(x / tau, tau).unwrap();
            assert!(rel(q.absorptive, c.absorptive) < 1e-9, "x = {x}");
            if x > 0.0 {
                assert!(rel(q.dispersive, c.dispersive) < 1e-9, "x = {x}");
            }
        }
        let q = gamma_quadrature(6.283e9, 1e-12).unwrap();
        let c = compute_gamma(6.283e9, 1e-12).unwrap();
        assert!(rel(q.absorptive, c.absorptive) < 1e-9);
        assert!(rel(q.dispersive, c.dispersive) < 1e-9);
    }

    #[test]
    fn hilbert_of_lorentzian() {
        let report = kramers_kronig_check(1e-12, 1000.0, 100_001, 50.0, 400).unwrap();
        assert!(report.grid_points >= 10_000);
        assert!(report.evaluated_points >= 300);
        assert!(report.max_rel_deviation < 1e-3, "{report:?}");
    }
}
