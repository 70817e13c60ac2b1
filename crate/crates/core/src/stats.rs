//! Small statistics helpers shared by the fitting and oracle code.

use alloc::format;

#[allow(unused_imports)]
use num_traits::Float;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Ordinary least squares fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Root-mean-square residual, `sqrt(SSE / n)`.
    pub residual_rms: f64,
    pub n: usize,
}

impl LineFit {
    pub fn dof(&self) -> usize {
        self.n - 2
    }
}

/// Least-squares straight line. Needs at least three points and two distinct
/// abscissae so that a standard error exists.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Precondition(format!(
            "x and y lengths differ ({} vs {})",
            n,
            y.len()
        )));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 points for a line with an error estimate, got {n}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite value in regression data".into()));
    }
    let nf = n as f64;
    let x_mean = x.iter().sum::<f64>() / nf;
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - x_mean;
        sxx += dx * dx;
        sxy += dx * (yi - y_mean);
    }
    let x_scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(sxx > 1e-24 * x_scale * x_scale * nf) {
        return Err(Error::RankDeficient(
            "abscissae are (numerically) identical".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let mut sse = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let r = yi - (intercept + slope * xi);
        sse += r * r;
    }
    let s2 = sse / (nf - 2.0);
    let slope_se = (s2 / sxx).sqrt();
    let intercept_se = (s2 * (1.0 / nf + x_mean * x_mean / sxx)).sqrt();
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        intercept_se,
        residual_rms: (sse / nf).sqrt(),
        n,
    })
}

/// Two-sided 95% Student-t critical value.
pub fn t_critical_95(dof: usize) -> f64 {
    let dof = dof.max(1) as f64;
    StudentsT::new(0.0, 1.0, dof)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(1.959_963_984_540_054)
}

/// Pairwise (cascade) summation, accurate to O(log n) ulps.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let fit = fit_line(&x, &y).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 3.0).abs() < 1e-14);
        assert!(fit.residual_rms < 1e-14);
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let x = [1.0e8, 2.0e8, 3.0e8, 4.0e8];
        let y = [0.7; 4];
        let fit = fit_line(&x, &y).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.intercept, 0.7);
    }

    #[test]
    fn degenerate_abscissae() {
        assert!(matches!(
            fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::RankDeficient(_))
        ));
        assert!(matches!(
            fit_line(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn t_values() {
        assert!((t_critical_95(1) - 12.706_204_736).abs() < 1e-6);
        assert!((t_critical_95(10) - 2.228_138_852).abs() < 1e-6);
        assert!((t_critical_95(1000) - 1.962_339).abs() < 1e-5);
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
    }
}
