mod fig2;
mod oracle;

use std::path::Path;

use anyhow::{bail, Context, Result};
use drivesus_core::bloch::{integrate, simulate_cw_nutation, DriveProgram, DriveSegment, MagnetizationState, Sampling};
use drivesus_core::fit::{fit_decay_curve, fit_parabola, AsymptoteMode, RateFit};
use drivesus_core::model::{
    asymptotic_bs_shift, compute_coefficients, nutation_damping_approx, nutation_decay_rate, nutation_eigen,
    nutation_frequency_approx, refocused_curvature,
};
use drivesus_core::sequence::{combine_members, simulate_member, DecaySeries};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{hz_to_rad, ExperimentConfig};
use crate::output::{CommandOutput, Table};

pub use fig2::{fig2, run_fig2, Fig2Point, Fig2Report, ParabolaReport, TauReport};
pub use oracle::{oracle, regime_params, run_oracle, OracleCheck, OracleOptions, OracleReport};

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")
}

/// Adds `N(0, sigma²)` noise from an independent ChaCha stream per series.
pub fn add_noise(mz: &[f64], sigma: f64, seed: u64, stream: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return mz.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    mz.iter().map(|m| m + noise.sample(&mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rate: f64,
    pub ci95_halfwidth: f64,
    pub intercept: f64,
    pub asymptote: f64,
    pub residual_rms: f64,
    pub points: usize,
}

impl From<RateFit> for RateReport {
    fn from(f: RateFit) -> Self {
        Self {
            rate: f.rate,
            ci95_halfwidth: f.ci95_halfwidth,
            intercept: f.intercept,
            asymptote: f.asymptote,
            residual_rms: f.residual_rms,
            points: f.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochSiegertReport {
    pub field_shift_tesla: f64,
    pub omega_bs_asymptotic: f64,
    pub asymptotic_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffsReport {
    pub omega1: f64,
    pub omega_sum: f64,
    pub tau_c: f64,
    pub omega_bs: f64,
    pub delta_omega_shift: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub eta_z: f64,
    /// Absent off resonance.
    pub bloch_siegert: Option<BlochSiegertReport>,
    pub nutation_decay_rate: f64,
    pub refocused_curvature: f64,
}

pub fn coeffs(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let p = cfg.params()?;
    let c = compute_coefficients(&p);
    let bloch_siegert = if p.delta_omega() == 0.0 {
        let bs = asymptotic_bs_shift(&p)?;
        Some(BlochSiegertReport {
            field_shift_tesla: bs.field_shift,
            omega_bs_asymptotic: bs.omega_bs_asymptotic,
            asymptotic_valid: bs.asymptotic_valid,
        })
    } else {
        None
    };
    let report = CoeffsReport {
        omega1: p.omega1(),
        omega_sum: p.omega_sum(),
        tau_c: p.tau_c(),
        omega_bs: c.omega_bs,
        delta_omega_shift: c.delta_omega_shift,
        eta_x: c.eta_x,
        eta_y: c.eta_y,
        eta_z: c.eta_z,
        bloch_siegert,
        nutation_decay_rate: nutation_decay_rate(&p),
        refocused_curvature: refocused_curvature(p.tau_c(), p.omega_sum(), p.delta_omega())?,
    };
    let mut table = Table::new(vec!["omega1", "omega_bs", "delta_omega_shift", "eta_x", "eta_y", "eta_z"]);
    table.push(vec![p.omega1(), c.omega_bs, c.delta_omega_shift, c.eta_x, c.eta_y, c.eta_z]);
    CommandOutput::new("coeffs", &report, Some(table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutationReport {
    pub omega1: f64,
    pub duration: f64,
    pub nutation_frequency: f64,
    pub damping_rate: f64,
    pub fit_residual: f64,
    pub exact_frequency: f64,
    pub exact_damping_rate: f64,
    pub approx_frequency: f64,
    pub approx_damping_rate: f64,
}

pub fn nutation(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let p = cfg.params()?;
    let w1 = p.omega1();
    let step = cfg.step_for(w1);
    let duration = cfg.integrator.cw_periods * 2.0 * std::f64::consts::PI / w1;
    let m = simulate_cw_nutation(&p, duration, step)?;
    let exact = nutation_eigen(&p);
    let report = NutationReport {
        omega1: w1,
        duration,
        nutation_frequency: m.nutation_frequency,
        damping_rate: m.damping_rate,
        fit_residual: m.fit_residual,
        exact_frequency: exact.frequency,
        exact_damping_rate: exact.damping_rate,
        approx_frequency: nutation_frequency_approx(&p),
        approx_damping_rate: nutation_damping_approx(&p),
    };
    let program = DriveProgram::from_segments([DriveSegment::new(w1, duration, p.delta_omega())?]);
    let traj = integrate(
        &MagnetizationState::equilibrium(p.m0()),
        &program,
        &p,
        step,
        Sampling::Every(cfg.integrator.sample_every),
    )?;
    let mut table = Table::new(vec!["t", "mx", "my", "mz"]);
    for s in traj {
        table.push(vec![s.t, s.mx, s.my, s.mz]);
    }
    CommandOutput::new("nutation", &report, Some(table))
}

/// Refocused decay series at `drive_hz`, ensemble members on `pool`.
pub fn refocused_series(cfg: &ExperimentConfig, drive_hz: f64, pool: Option<&rayon::ThreadPool>) -> Result<DecaySeries> {
    let p = cfg.params_at(drive_hz)?;
    let sc = cfg.supercycle()?;
    let inh = cfg.ensemble()?;
    let counts = cfg.guarded_counts(sc.period(p.omega1()))?;
    let step = cfg.step_for(p.omega1());
    let member = |scale: f64| simulate_member(&p, &sc, scale, &counts, step);
    let traces = match pool {
        Some(pool) => pool.install(|| {
            inh.members()
                .par_iter()
                .map(|m| member(m.scale))
                .collect::<drivesus_core::Result<Vec<_>>>()
        })?,
        None => inh
            .members()
            .iter()
            .map(|m| member(m.scale))
            .collect::<drivesus_core::Result<Vec<_>>>()?,
    };
    Ok(combine_members(&p, &sc, &inh, &counts, &traces)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefocusReport {
    pub omega1: f64,
    pub period: f64,
    pub fit: RateReport,
    pub closed_form_rate: f64,
}

pub fn refocus(cfg: &ExperimentConfig, workers: usize) -> Result<CommandOutput> {
    let series = refocused_series(cfg, cfg.system.drive_hz, Some(&pool(workers)?))?;
    let mz = add_noise(&series.mz(), cfg.analysis.noise * cfg.system.m0, cfg.seed, 0);
    let fit = fit_decay_curve(&series.times(), &mz, cfg.analysis.mode())?;
    let report = RefocusReport {
        omega1: series.params.omega1(),
        period: series.period,
        fit: fit.into(),
        closed_form_rate: nutation_decay_rate(&series.params),
    };
    let mut table = Table::new(vec!["n", "t", "mz", "my"]);
    for (pt, m) in series.points.iter().zip(&mz) {
        table.push(vec![f64::from(pt.n), pt.t, *m, pt.my]);
    }
    CommandOutput::new("refocus", &report, Some(table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FitReport {
    Decay(RateReport),
    Parabola(ParabolaReport),
}

fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            col.push(
                field
                    .parse::<f64>()
                    .with_context(|| format!("{}: data row {}: `{field}` is not a number", path.display(), line + 1))?,
            );
        }
    }
    Ok((header, columns))
}

/// Fits a decay series (`t`, `mz` columns) or a rate sweep (`omega1_hz`,
/// `rz` columns) read from CSV.
pub fn fit_file(cfg: &ExperimentConfig, path: &Path) -> Result<CommandOutput> {
    let (header, columns) = read_columns(path)?;
    let col = |name: &str| header.iter().position(|h| h == name).map(|i| &columns[i]);
    let report = if let (Some(t), Some(mz)) = (col("t"), col("mz")) {
        FitReport::Decay(fit_decay_curve(t, mz, cfg.analysis.mode())?.into())
    } else if let (Some(hz), Some(rz)) = (col("omega1_hz"), col("rz")) {
        let pts: Vec<(f64, f64)> = hz.iter().zip(rz).map(|(&h, &r)| (hz_to_rad(h), r)).collect();
        let fit = fit_parabola(&pts)?;
        let omega_sum = cfg.params()?.omega_sum();
        ParabolaReport::new(&fit, omega_sum).map(FitReport::Parabola)?
    } else {
        bail!(
            "{}: expected columns (t, mz) or (omega1_hz, rz), found {:?}",
            path.display(),
            header
        );
    };
    CommandOutput::new("fit", &report, None)
}

pub(crate) fn decay_mode_name(mode: AsymptoteMode) -> &'static str {
    match mode {
        AsymptoteMode::SubtractFitted => "subtract-fitted",
        AsymptoteMode::SubtractKnown(_) => "subtract-known",
        AsymptoteMode::RawLog => "raw-log",
    }
}
