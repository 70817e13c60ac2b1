//! Decay-rate extraction from magnetization series and the quadratic
//! drive-strength fit `R(ω₁) = a₁ + b₁ω₁²`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{require_positive, Error, Result};
use crate::model::tau_c_from_refocused_curvature;
use crate::sequence::DecaySeries;
use crate::stats::{fit_line, t_critical_95, LineFit};

pub const MIN_DECAY_POINTS: usize = 5;

/// How the long-time asymptote `a` of `M_z = a + b e^{−Rt}` is handled
/// before the log-linear fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AsymptoteMode {
    /// Estimate `a` jointly with `R` by a three-parameter least-squares fit.
    SubtractFitted,
    SubtractKnown(f64),
    RawLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// 1/s
    pub rate: f64,
    /// Intercept of `ln(M_z − a)`.
    pub intercept: f64,
    pub residual_rms: f64,
    pub ci95_halfwidth: f64,
    /// Asymptote that was subtracted.
    pub asymptote: f64,
    pub n: usize,
}

fn rate_from_line(line: &LineFit, asymptote: f64) -> RateFit {
    RateFit {
        rate: -line.slope,
        intercept: line.intercept,
        residual_rms: line.residual_rms,
        ci95_halfwidth: t_critical_95(line.dof()) * line.slope_se,
        asymptote,
        n: line.n,
    }
}

fn log_line(t: &[f64], mz: &[f64], asymptote: f64) -> Result<LineFit> {
    let mut y = Vec::with_capacity(mz.len());
    for (&ti, &m) in t.iter().zip(mz) {
        let v = m - asymptote;
        if !(v > 0.0) {
            return Err(Error::NonPositiveLog { t: ti, value: v });
        }
        y.push(v.ln());
    }
    fit_line(t, &y)
}

/// Least-squares `(a, b)` of `a + b e^{−Rt}` at fixed `R`, and its SSE.
fn project(t: &[f64], mz: &[f64], rate: f64) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for (&ti, &m) in t.iter().zip(mz) {
        let e = (-rate * ti).exp();
        se += e;
        see += e * e;
        sy += m;
        sey += e * m;
    }
    let det = n * see - se * se;
    if !(det.abs() > 0.0) {
        return (sy / n, 0.0, f64::INFINITY);
    }
    let a = (see * sy - se * sey) / det;
    let b = (n * sey - se * sy) / det;
    let sse = t
        .iter()
        .zip(mz)
        .map(|(&ti, &m)| {
            let r = m - a - b * (-rate * ti).exp();
            r * r
        })
        .sum();
    (a, b, sse)
}

/// Variable-projection fit over `ln R`: a log-spaced scan followed by
/// golden-section refinement.
fn fitted_asymptote(t: &[f64], mz: &[f64], guess: f64) -> Result<f64> {
    let span = t.iter().copied().fold(f64::NEG_INFINITY, f64::max) - t.iter().copied().fold(f64::INFINITY, f64::min);
    require_positive("time span", span)?;
    let centre = if guess > 0.0 && guess.is_finite() { guess } else { 1.0 / span };
    let sse = |u: f64| project(t, mz, u.exp()).2;
    let (lo, hi) = (centre.ln() - 9.0, centre.ln() + 9.0);
    const SCAN: usize = 361;
    let grid: Vec<f64> = (0..SCAN).map(|k| lo + (hi - lo) * k as f64 / (SCAN - 1) as f64).collect();
    let best = (0..SCAN)
        .min_by(|&i, &j| sse(grid[i]).total_cmp(&sse(grid[j])))
        .unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(SCAN - 1)]);
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = sse(d);
        }
    }
    Ok(project(t, mz, (0.5 * (a + b)).exp()).0)
}

/// Log-linear decay rate of `mz(t)` after asymptote handling, with a 95%
/// Student-t interval on the slope.
pub fn fit_decay_curve(t: &[f64], mz: &[f64], mode: AsymptoteMode) -> Result<RateFit> {
    if t.len() != mz.len() {
        return Err(Error::Precondition(format!(
            "time and magnetization lengths differ ({} vs {})",
            t.len(),
            mz.len()
        )));
    }
    if t.len() < MIN_DECAY_POINTS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_DECAY_POINTS} decay points, got {}",
            t.len()
        )));
    }
    match mode {
        AsymptoteMode::RawLog => Ok(rate_from_line(&log_line(t, mz, 0.0)?, 0.0)),
        AsymptoteMode::SubtractKnown(a) => Ok(rate_from_line(&log_line(t, mz, a)?, a)),
        AsymptoteMode::SubtractFitted => {
            let guess = log_line(t, mz, 0.0).map(|l| -l.slope).unwrap_or(0.0);
            let a = fitted_asymptote(t, mz, guess)?;
            Ok(rate_from_line(&log_line(t, mz, a)?, a))
        }
    }
}

pub fn fit_decay_rate(series: &DecaySeries, mode: AsymptoteMode) -> Result<RateFit> {
    fit_decay_curve(&series.times(), &series.mz(), mode)
}

/// `R = a₁ + b₁ω₁²` with `ω₁` in rad/s, so `b₁` has units of seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaFit {
    pub a1: f64,
    pub b1: f64,
    /// Reads the curvature as the correlation time directly.
    pub tau_c_estimate: f64,
    pub a1_ci95: f64,
    pub b1_ci95: f64,
    pub residual_rms: f64,
    pub n: usize,
}

/// A correlation time with its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TauEstimate {
    pub fn contains(&self, tau: f64) -> bool {
        self.lower <= tau && tau <= self.upper
    }
}

impl ParabolaFit {
    /// Correlation time from the curvature through the refocused decay law
    /// (zero for a non-positive curvature),
    /// with the curvature interval mapped through the same (monotone)
    /// inversion.
    pub fn model_tau_c(&self, omega_sum: f64) -> Result<TauEstimate> {
        let invert = |b: f64| if b > 0.0 { tau_c_from_refocused_curvature(b, omega_sum) } else { Ok(0.0) };
        Ok(TauEstimate {
            value: invert(self.b1)?,
            lower: invert(self.b1 - self.b1_ci95)?,
            upper: invert(self.b1 + self.b1_ci95)?,
        })
    }
}

/// Least squares in the basis `{1, ω₁²}`; needs three distinct drive strengths.
pub fn fit_parabola(points: &[(f64, f64)]) -> Result<ParabolaFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0.abs()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::RankDeficient(format!(
            "need at least 3 distinct drive strengths, got {}",
            distinct.len()
        )));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0 * p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let line = fit_line(&x, &y)?;
    let t = t_critical_95(line.dof());
    Ok(ParabolaFit {
        a1: line.intercept,
        b1: line.slope,
        tau_c_estimate: line.slope,
        a1_ci95: t * line.intercept_se,
        b1_ci95: t * line.slope_se,
        residual_rms: line.residual_rms,
        n: line.n,
    })
}
