use std::f64::consts::PI;

use anyhow::Result;
use drivesus_core::model::{compute_coefficients, compute_gamma, BathSpec, SpinSystemParams};
use drivesus_core::oracle::{
    closed_form_kernel, commutator_identity_check, gamma_quadrature, generator_rates, kramers_kronig_check,
    mc_memory_kernel, secular_crossterm_magnitude, QuadratureGrid,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{CommandOutput, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub tolerance: f64,
    pub deviation: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn new(name: impl Into<String>, tolerance: f64, deviation: f64) -> Self {
        Self {
            name: name.into(),
            tolerance,
            deviation,
            passed: deviation.is_finite() && deviation <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub checks: Vec<OracleCheck>,
    pub all_passed: bool,
}

/// Negative-control switches for the batch runner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleOptions {
    /// Compare the Monte-Carlo kernel against `exp(−κ²τ)` instead of
    /// `exp(−κ²τ/2)`.
    pub corrupt_kernel: bool,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

/// Drive-only system and window for a given `Ωτc`: `τc = 1 ns`, window an
/// integer number of sum-frequency periods of at least 2000 `τc` (for
/// `Ωτc < 1`) or 100 `τc`, and `ω₁Δt = 0.01`.
pub fn regime_params(omega_tau: f64) -> Result<(SpinSystemParams, f64)> {
    let tau = 1e-9;
    let omega0 = 0.5 * omega_tau / tau;
    let period = 2.0 * PI / (2.0 * omega0);
    let span = if omega_tau < 1.0 { 2000.0 } else { 100.0 } * tau;
    let dt = (span / period).ceil() * period;
    let p = SpinSystemParams::builder(omega0, 0.01 / dt, BathSpec::CorrelationTime(tau)).build()?;
    Ok((p, dt))
}

fn gamma_check(tau_c: f64, points: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..points {
        let x = if k == 0 {
            0.0
        } else {
            10f64.powf(-3.0 + 5.0 * (k - 1) as f64 / (points - 2).max(1) as f64)
        };
        let q = gamma_quadrature(x / tau_c, tau_c)?;
        let c = compute_gamma(x / tau_c, tau_c)?;
        worst = worst.max(rel(q.absorptive, c.absorptive)).max(rel(q.dispersive, c.dispersive));
    }
    Ok(worst)
}

/// Every brute-force comparison with its tolerance.
pub fn run_oracle(cfg: &ExperimentConfig, options: OracleOptions) -> Result<OracleReport> {
    let o = &cfg.oracle;
    let mut checks = Vec::new();

    checks.push(OracleCheck::new(
        "gamma_quadrature_vs_closed_form",
        1e-9,
        gamma_check(cfg.system.tau_c, o.gamma_points)?,
    ));
    let kk = kramers_kronig_check(cfg.system.tau_c, 1000.0, 100_001, 50.0, 400)?;
    checks.push(OracleCheck::new("kramers_kronig", 1e-3, kk.max_rel_deviation));

    let tau_k = o.kernel_tau_c;
    let kappa = (2.0 / tau_k).sqrt();
    let lags: Vec<f64> = (0..o.kernel_lags)
        .map(|i| tau_k * (0.1 + 1.9 * i as f64 / (o.kernel_lags - 1) as f64))
        .collect();
    let dt = lags[0] / 20.0;
    let est = mc_memory_kernel(kappa, &lags, o.kernel_trajectories, dt, cfg.seed)?;
    let z = if options.corrupt_kernel {
        est.max_z_score(|tau| closed_form_kernel(kappa, 2.0 * tau))
    } else {
        est.max_z_score(|tau| closed_form_kernel(kappa, tau))
    };
    checks.push(OracleCheck::new("memory_kernel_max_z", 3.0, z));
    let slow = est.fitted_decay_time(0.05)?;
    let fast_lags: Vec<f64> = lags.iter().map(|t| 0.25 * t).collect();
    let fast = mc_memory_kernel(2.0 * kappa, &fast_lags, o.kernel_trajectories, 0.25 * dt, cfg.seed.wrapping_add(1))?
        .fitted_decay_time(0.05)?;
    checks.push(OracleCheck::new("kernel_decay_scaling", 0.1, (slow / fast / 4.0 - 1.0).abs()));

    for x in [0.1, 1.0, 10.0] {
        let (p, dt) = regime_params(x)?;
        let r = generator_rates(&p, 0.0, dt, QuadratureGrid::resolving(&p, dt))?;
        let c = compute_coefficients(&p);
        let dev = [
            rel(r.eta_x, c.eta_x),
            rel(r.eta_y, c.eta_y),
            rel(r.eta_z, c.eta_z),
            rel(r.omega_bs_from_x, c.omega_bs),
            rel(r.omega_bs_from_y, c.omega_bs),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        checks.push(OracleCheck::new(format!("generator_rates_omega_tau_{x}"), 0.05, dev));
    }

    let gigahertz = SpinSystemParams::builder(PI * 1e9, 1e4, BathSpec::CorrelationTime(1e-12)).build()?;
    checks.push(OracleCheck::new(
        "secular_crossterm_ratio",
        1e-3,
        secular_crossterm_magnitude(&gigahertz, 1e-6)?,
    ));

    let comm = (0..100)
        .map(|k| commutator_identity_check(2.0 * PI * 100.0, 0.0137 * k as f64))
        .fold(0.0, f64::max);
    checks.push(OracleCheck::new("corotating_commutators", 1e-13, comm));

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(OracleReport {
        seed: cfg.seed,
        checks,
        all_passed,
    })
}

pub fn oracle(cfg: &ExperimentConfig, options: OracleOptions) -> Result<CommandOutput> {
    let report = run_oracle(cfg, options)?;
    let mut table = Table::new(vec!["check", "tolerance", "deviation", "passed"]);
    for c in &report.checks {
        table.push_text(vec![
            c.name.clone(),
            c.tolerance.to_string(),
            c.deviation.to_string(),
            c.passed.to_string(),
        ]);
    }
    let mut out = CommandOutput::new("oracle", &report, Some(table))?;
    if !report.all_passed {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        out.failure = Some(failed.join(", "));
    }
    Ok(out)
}
