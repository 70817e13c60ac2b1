//! Experiment manifests. Frequencies are entered in Hz and converted to
//! rad/s here; everything past this module works in rad/s.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use drivesus_core::fit::AsymptoteMode;
use drivesus_core::model::{BathSpec, SpinSystemParams};
use drivesus_core::sequence::{parse_sequence, InhomogeneitySpec, Supercycle, WALTZ_S};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn hz_to_rad(hz: f64) -> f64 {
    2.0 * PI * hz
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub system: SystemConfig,
    pub sequence: SequenceConfig,
    pub inhomogeneity: InhomogeneityConfig,
    pub sweep: SweepConfig,
    pub integrator: IntegratorConfig,
    pub analysis: AnalysisConfig,
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub larmor_hz: f64,
    /// Drive strength for single-point commands.
    pub drive_hz: f64,
    pub detuning_hz: f64,
    pub t1: f64,
    pub t2: f64,
    pub tau_c: f64,
    pub m0: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            larmor_hz: 500e6,
            drive_hz: 20e3,
            detuning_hz: 0.0,
            t1: 1.34,
            t2: 0.81,
            tau_c: 1.32e-11,
            m0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    /// Supercycle in the block DSL; ignored when `file` is set.
    pub supercycle: String,
    pub file: Option<PathBuf>,
    pub flip_angle_deg: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            supercycle: WALTZ_S.to_owned(),
            file: None,
            flip_angle_deg: 180.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InhomogeneityKind {
    Homogeneous,
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InhomogeneityConfig {
    pub kind: InhomogeneityKind,
    /// Half-width (uniform) or standard deviation (gaussian) of the
    /// relative drive scale.
    pub width: f64,
    /// Ensemble members for the uniform kind.
    pub points: usize,
}

impl Default for InhomogeneityConfig {
    fn default() -> Self {
        Self {
            kind: InhomogeneityKind::Homogeneous,
            width: 0.0,
            points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub drive_start_hz: f64,
    pub drive_stop_hz: f64,
    pub drive_step_hz: f64,
    pub n_start: u32,
    pub n_stop: u32,
    pub n_step: u32,
    /// Longest total drive time per series, s; counts beyond it are
    /// dropped. `inf` disables the guard.
    pub max_drive_time: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            drive_start_hz: 3e3,
            drive_stop_hz: 20e3,
            drive_step_hz: 1e3,
            n_start: 1,
            n_stop: 121,
            n_step: 5,
            max_drive_time: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// Nutation angle per RK4 step, rad.
    pub rotation_per_step: f64,
    /// Length of the CW nutation run, in nutation periods.
    pub cw_periods: f64,
    /// Interior stride of exported trajectories.
    pub sample_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rotation_per_step: 0.01,
            cw_periods: 8.5,
            sample_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoteChoice {
    SubtractFitted,
    SubtractKnown,
    RawLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub asymptote: AsymptoteChoice,
    /// Used by `subtract-known`.
    pub asymptote_value: f64,
    /// Gaussian measurement noise on each `M_z` sample, in units of `M₀`.
    pub noise: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            asymptote: AsymptoteChoice::RawLog,
            asymptote_value: 0.0,
            noise: 0.0,
        }
    }
}

impl AnalysisConfig {
    pub fn mode(&self) -> AsymptoteMode {
        match self.asymptote {
            AsymptoteChoice::SubtractFitted => AsymptoteMode::SubtractFitted,
            AsymptoteChoice::SubtractKnown => AsymptoteMode::SubtractKnown(self.asymptote_value),
            AsymptoteChoice::RawLog => AsymptoteMode::RawLog,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Desk-scale correlation time for the Monte-Carlo kernel, s.
    pub kernel_tau_c: f64,
    pub kernel_trajectories: usize,
    pub kernel_lags: usize,
    pub gamma_points: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kernel_tau_c: 1e-3,
            kernel_trajectories: 10_000,
            kernel_lags: 20,
            gamma_points: 50,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing config")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        if let Some(file) = &cfg.sequence.file {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.sequence.file = Some(dir.join(file));
                }
            }
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Checks every derived quantity once so that commands fail before any
    /// work is done.
    pub fn validate(&self) -> Result<()> {
        self.params_at(self.system.drive_hz).context("system")?;
        self.supercycle().context("sequence")?;
        self.ensemble().context("inhomogeneity")?;
        let drives = self.drive_sweep_hz().context("sweep")?;
        for &hz in &drives {
            self.params_at(hz).with_context(|| format!("sweep: drive {hz} Hz"))?;
        }
        self.counts().context("sweep")?;
        ensure!(self.sweep.max_drive_time > 0.0, "sweep.max_drive_time must be > 0");
        let r = self.integrator.rotation_per_step;
        ensure!(r > 0.0 && r <= 0.05, "integrator.rotation_per_step must be in (0, 0.05] rad, got {r}");
        ensure!(
            self.integrator.cw_periods >= 8.0,
            "integrator.cw_periods must be at least 8, got {}",
            self.integrator.cw_periods
        );
        ensure!(
            self.analysis.noise >= 0.0 && self.analysis.noise.is_finite(),
            "analysis.noise must be a finite non-negative fraction, got {}",
            self.analysis.noise
        );
        ensure!(self.oracle.kernel_tau_c > 0.0, "oracle.kernel_tau_c must be > 0");
        ensure!(self.oracle.kernel_lags >= 3, "oracle.kernel_lags must be at least 3");
        ensure!(self.oracle.gamma_points >= 2, "oracle.gamma_points must be at least 2");
        Ok(())
    }

    pub fn params_at(&self, drive_hz: f64) -> Result<SpinSystemParams> {
        let s = &self.system;
        SpinSystemParams::builder(hz_to_rad(s.larmor_hz), hz_to_rad(drive_hz), BathSpec::CorrelationTime(s.tau_c))
            .detuning(hz_to_rad(s.detuning_hz))
            .relaxation(s.t1, s.t2)
            .equilibrium_magnetization(s.m0)
            .build()
            .map_err(anyhow::Error::from)
    }

    pub fn params(&self) -> Result<SpinSystemParams> {
        self.params_at(self.system.drive_hz)
    }

    pub fn supercycle(&self) -> Result<Supercycle> {
        let text = match &self.sequence.file {
            Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            None => self.sequence.supercycle.clone(),
        };
        let theta = self.sequence.flip_angle_deg.to_radians();
        Ok(parse_sequence(text.trim())?.with_flip_angle(theta)?)
    }

    pub fn ensemble(&self) -> Result<InhomogeneitySpec> {
        let c = &self.inhomogeneity;
        Ok(match c.kind {
            InhomogeneityKind::Homogeneous => InhomogeneitySpec::homogeneous(),
            InhomogeneityKind::Uniform => InhomogeneitySpec::uniform(c.width, c.points)?,
            InhomogeneityKind::Gaussian => InhomogeneitySpec::gaussian(c.width)?,
        })
    }

    /// Drive strengths of the sweep, Hz, from an integer step count so that
    /// the end point is hit exactly.
    pub fn drive_sweep_hz(&self) -> Result<Vec<f64>> {
        let s = &self.sweep;
        ensure!(s.drive_step_hz > 0.0, "drive_step_hz must be > 0, got {}", s.drive_step_hz);
        ensure!(
            s.drive_stop_hz >= s.drive_start_hz && s.drive_start_hz > 0.0,
            "need 0 < drive_start_hz <= drive_stop_hz"
        );
        let steps = ((s.drive_stop_hz - s.drive_start_hz) / s.drive_step_hz + 1e-9).floor() as usize;
        Ok((0..=steps).map(|k| s.drive_start_hz + k as f64 * s.drive_step_hz).collect())
    }

    /// Requested supercycle counts before the drive-time guard.
    pub fn counts(&self) -> Result<Vec<u32>> {
        let s = &self.sweep;
        if s.n_step == 0 || s.n_start == 0 || s.n_stop < s.n_start {
            bail!("need 1 <= n_start <= n_stop and n_step >= 1");
        }
        Ok((s.n_start..=s.n_stop).step_by(s.n_step as usize).collect())
    }

    /// Counts that fit under the drive-time guard for supercycle period `period`.
    pub fn guarded_counts(&self, period: f64) -> Result<Vec<u32>> {
        let all = self.counts()?;
        let limit = self.sweep.max_drive_time;
        Ok(all
            .into_iter()
            .filter(|&n| f64::from(n) * period <= limit * (1.0 + 1e-12))
            .collect())
    }

    pub fn step_for(&self, omega1: f64) -> f64 {
        self.integrator.rotation_per_step / omega1
    }
}
