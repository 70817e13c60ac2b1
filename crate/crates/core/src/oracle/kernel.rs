use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{require_positive, Error, Result};
use crate::stats::{fit_line, pairwise_sum};

/// White-noise frequency fluctuations sampled on a uniform grid: each sample
/// is an independent normal with variance `κ²/dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationTrajectory {
    pub seed: u64,
    pub dt: f64,
    /// `samples[level][step]`, rad/s.
    pub samples: Vec<Vec<f64>>,
}

impl FluctuationTrajectory {
    pub fn generate(kappa: f64, dt: f64, steps: usize, levels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = kappa / dt.sqrt();
        let samples = (0..levels)
            .map(|_| {
                (0..steps)
                    .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Self { seed, dt, samples }
    }

    /// Accumulated phase `∫₀^τ f dt` of one level, with the last partial step
    /// taken at its sample value.
    pub fn phase(&self, level: usize, tau: f64) -> f64 {
        let f = &self.samples[level];
        let (m, rem) = split_lag(tau, self.dt);
        let mut acc = 0.0;
        for v in &f[..m] {
            acc += v * self.dt;
        }
        if rem > 0.0 {
            acc += f[m] * rem;
        }
        acc
    }
}

fn split_lag(tau: f64, dt: f64) -> (usize, f64) {
    let ratio = tau / dt;
    let m = (ratio + 1e-9).floor();
    let rem = tau - m * dt;
    (m as usize, if rem > 1e-9 * dt { rem } else { 0.0 })
}

/// Monte-Carlo estimate of `⟨exp(−i∫f dt)⟩` on a lag grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEstimate {
    pub lags: Vec<f64>,
    pub kernel: Vec<Complex64>,
    /// Standard error of the estimate along its own phase.
    pub std_errors: Vec<f64>,
    pub n_traj: usize,
}

/// `exp(−κ²τ/2)`
pub fn closed_form_kernel(kappa: f64, tau: f64) -> f64 {
    (-0.5 * kappa * kappa * tau.abs()).exp()
}

impl KernelEstimate {
    /// Largest `|estimate − reference| / SE` over lags with a non-zero error.
    pub fn max_z_score<F: Fn(f64) -> f64>(&self, reference: F) -> f64 {
        self.lags
            .iter()
            .zip(&self.kernel)
            .zip(&self.std_errors)
            .filter(|(_, &se)| se > 0.0)
            .map(|((&tau, k), se)| (k.norm() - reference(tau)).abs() / se)
            .fold(0.0, f64::max)
    }

    /// Decay time from a log-linear fit of `|kernel|` over lags where it
    /// exceeds `floor`.
    pub fn fitted_decay_time(&self, floor: f64) -> Result<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .lags
            .iter()
            .zip(&self.kernel)
            .filter(|(_, k)| k.norm() > floor)
            .map(|(&t, k)| (t, k.norm().ln()))
            .unzip();
        let line = fit_line(&x, &y)?;
        if !(line.slope < 0.0) {
            return Err(Error::Precondition(format!(
                "kernel does not decay (log slope {:e})",
                line.slope
            )));
        }
        Ok(-1.0 / line.slope)
    }
}

pub const MIN_TRAJECTORIES: usize = 100;

/// Averages `exp(−iφ(τ))` over `n_traj` independently seeded trajectories
/// (`seed + index`).
pub fn mc_memory_kernel(
    kappa: f64,
    tau_grid: &[f64],
    n_traj: usize,
    dt: f64,
    seed: u64,
) -> Result<KernelEstimate> {
    require_positive("kappa", kappa)?;
    require_positive("dt", dt)?;
    if tau_grid.is_empty() {
        return Err(Error::InsufficientData("empty lag grid".into()));
    }
    if tau_grid.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::Precondition("lags must be finite and non-negative".into()));
    }
    if n_traj < MIN_TRAJECTORIES {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_TRAJECTORIES} trajectories, got {n_traj}"
        )));
    }
    let min_lag = tau_grid
        .iter()
        .copied()
        .filter(|&t| t > 0.0)
        .fold(f64::INFINITY, f64::min);
    if min_lag.is_finite() && dt > min_lag / 20.0 * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge {
            step: dt,
            bound: "dt <= min(lag)/20",
            limit: min_lag / 20.0,
        });
    }
    let max_lag = tau_grid.iter().copied().fold(0.0, f64::max);
    let steps = split_lag(max_lag, dt).0 + 1;
    let splits: Vec<(usize, f64)> = tau_grid.iter().map(|&t| split_lag(t, dt)).collect();

    let mut values: Vec<Vec<Complex64>> = vec![Vec::with_capacity(n_traj); tau_grid.len()];
    let mut cumulative = vec![0.0; steps + 1];
    for i in 0..n_traj {
        let traj = FluctuationTrajectory::generate(kappa, dt, steps, 1, seed.wrapping_add(i as u64));
        let f = &traj.samples[0];
        for k in 0..steps {
            cumulative[k + 1] = cumulative[k] + f[k] * dt;
        }
        for (slot, &(m, rem)) in values.iter_mut().zip(&splits) {
            let phase = cumulative[m] + if rem > 0.0 { f[m] * rem } else { 0.0 };
            slot.push(Complex64::from_polar(1.0, -phase));
        }
    }

    let n = n_traj as f64;
    let mut kernel = Vec::with_capacity(tau_grid.len());
    let mut std_errors = Vec::with_capacity(tau_grid.len());
    for vals in &values {
        let re: Vec<f64> = vals.iter().map(|z| z.re).collect();
        let im: Vec<f64> = vals.iter().map(|z| z.im).collect();
        let mean = Complex64::new(pairwise_sum(&re) / n, pairwise_sum(&im) / n);
        let dir = if mean.norm() > 0.0 {
            mean / mean.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let proj: Vec<f64> = vals.iter().map(|z| (z * dir.conj()).re).collect();
        let proj_mean = pairwise_sum(&proj) / n;
        let dev: Vec<f64> = proj.iter().map(|p| (p - proj_mean) * (p - proj_mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1.0);
        kernel.push(mean);
        std_errors.push((var / n).sqrt());
    }
    Ok(KernelEstimate {
        lags: tau_grid.to_vec(),
        kernel,
        std_errors,
        n_traj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lag_is_exactly_one() {
        let est = mc_memory_kernel(10.0, &[0.0, 1e-2], 200, 1e-4, 7).unwrap();
        assert_eq!(est.kernel[0], Complex64::new(1.0, 0.0));
        assert_eq!(est.std_errors[0], 0.0);
        assert!(est.kernel.iter().all(|k| k.norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn desk_scale_decay() {
        let tau_c = 1e-3;
        let kappa = (2.0 / tau_c).sqrt();
        let est = mc_memory_kernel(kappa, &[tau_c], 10_000, tau_c / 20.0, 42).unwrap();
        let z = (est.kernel[0].norm() - (-1.0f64).exp()).abs() / est.std_errors[0];
        assert!(z < 3.0, "z = {z}");
    }

    #[test]
    fn deterministic_for_seed() {
        let a = mc_memory_kernel(30.0, &[1e-3, 2e-3], 150, 5e-5, 9).unwrap();
        let b = mc_memory_kernel(30.0, &[1e-3, 2e-3], 150, 5e-5, 9).unwrap();
        assert_eq!(a, b);
        let c = mc_memory_kernel(30.0, &[1e-3, 2e-3], 150, 5e-5, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(
            mc_memory_kernel(10.0, &[1e-3], 100, 1e-4, 0),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(matches!(
            mc_memory_kernel(10.0, &[1e-3], 99, 1e-5, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn trajectory_statistics() {
        let (kappa, dt) = (3.0, 1e-3);
        let traj = FluctuationTrajectory::generate(kappa, dt, 200_000, 1, 5);
        let f = &traj.samples[0];
        let n = f.len() as f64;
        let mean = f.iter().sum::<f64>() / n;
        let var = f.iter().map(|v| v * v).sum::<f64>() / n;
        let lag1 = f.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1.0);
        let expected = kappa * kappa / dt;
        // Sample moments of 2e5 normals: relative errors of a few 1e-3.
        assert!(mean.abs() < 4.0 * expected.sqrt() / n.sqrt());
        assert!((var / expected - 1.0).abs() < 0.02);
        assert!(lag1.abs() / expected < 0.02);
        assert!((traj.phase(0, 2.5 * dt) - (f[0] + f[1] + 0.5 * f[2]) * dt).abs() < 1e-12);
    }

    #[test]
    fn doubling_kappa_quarters_decay_time() {
        let tau_c = 1e-3;
        let kappa = (2.0 / tau_c).sqrt();
        let decay = |k: f64, scale: f64| {
            let lags: Vec<f64> = (1..=20).map(|i| scale * tau_c * i as f64 / 10.0).collect();
            mc_memory_kernel(k, &lags, 4000, scale * tau_c / 200.0, 3)
                .unwrap()
                .fitted_decay_time(0.05)
                .unwrap()
        };
        let slow = decay(kappa, 1.0);
        let fast = decay(2.0 * kappa, 0.25);
        assert!((slow / tau_c - 1.0).abs() < 0.1);
        assert!((slow / fast / 4.0 - 1.0).abs() < 0.1, "{}", slow / fast);
    }
}
