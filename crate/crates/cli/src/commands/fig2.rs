use anyhow::{Context, Result};
use drivesus_core::fit::{fit_decay_curve, fit_parabola, ParabolaFit};
use drivesus_core::sequence::DecaySeries;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_noise, decay_mode_name, pool, refocused_series};
use crate::config::ExperimentConfig;
use crate::output::{CommandOutput, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Point {
    pub drive_hz: f64,
    pub n_max: u32,
    pub rz: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolaReport {
    pub a1: f64,
    pub b1: f64,
    /// `b1` read directly as the correlation time.
    pub tau_c_estimate: f64,
    pub a1_ci95: f64,
    pub b1_ci95: f64,
    pub residual_rms: f64,
    /// Correlation time from inverting the refocused curvature law.
    pub tau_c_model: TauReport,
}

impl ParabolaReport {
    pub fn new(fit: &ParabolaFit, omega_sum: f64) -> Result<Self> {
        let tau = fit.model_tau_c(omega_sum)?;
        Ok(Self {
            a1: fit.a1,
            b1: fit.b1,
            tau_c_estimate: fit.tau_c_estimate,
            a1_ci95: fit.a1_ci95,
            b1_ci95: fit.b1_ci95,
            residual_rms: fit.residual_rms,
            tau_c_model: TauReport {
                value: tau.value,
                lower: tau.lower,
                upper: tau.upper,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Report {
    pub seed: u64,
    pub noise: f64,
    pub asymptote_mode: String,
    pub points: Vec<Fig2Point>,
    pub parabola: ParabolaReport,
}

/// Simulates every drive strength of the sweep (in parallel, in sweep
/// order), then adds noise and fits. Member failures name the drive.
pub fn run_fig2(cfg: &ExperimentConfig, workers: usize) -> Result<Fig2Report> {
    let drives = cfg.drive_sweep_hz()?;
    let series: Vec<DecaySeries> = pool(workers)?.install(|| {
        drives
            .par_iter()
            .map(|&hz| refocused_series(cfg, hz, None).with_context(|| format!("drive {hz} Hz")))
            .collect::<Result<Vec<_>>>()
    })?;
    let mode = cfg.analysis.mode();
    let sigma = cfg.analysis.noise * cfg.system.m0;
    let mut points = Vec::with_capacity(series.len());
    let mut pairs = Vec::with_capacity(series.len());
    for (i, (s, &hz)) in series.iter().zip(&drives).enumerate() {
        let mz = add_noise(&s.mz(), sigma, cfg.seed, i as u64);
        let fit = fit_decay_curve(&s.times(), &mz, mode).with_context(|| format!("fitting drive {hz} Hz"))?;
        pairs.push((s.params.omega1(), fit.rate));
        points.push(Fig2Point {
            drive_hz: hz,
            n_max: s.points.last().map_or(0, |p| p.n),
            rz: fit.rate,
            ci95: fit.ci95_halfwidth,
        });
    }
    let parabola = fit_parabola(&pairs)?;
    Ok(Fig2Report {
        seed: cfg.seed,
        noise: cfg.analysis.noise,
        asymptote_mode: decay_mode_name(mode).to_owned(),
        points,
        parabola: ParabolaReport::new(&parabola, cfg.params()?.omega_sum())?,
    })
}

pub fn fig2(cfg: &ExperimentConfig, workers: usize) -> Result<CommandOutput> {
    let report = run_fig2(cfg, workers)?;
    let mut table = Table::new(vec!["omega1_hz", "n_max", "rz", "ci"]);
    for p in &report.points {
        table.push(vec![p.drive_hz, f64::from(p.n_max), p.rz, p.ci95]);
    }
    CommandOutput::new("fig2", &report, Some(table))
}
