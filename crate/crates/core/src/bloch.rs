//! Modified Bloch equations for piecewise-constant drive programs.
//!
//! Under constant drive `M_z` relaxes toward `M₀/(1 + η_z T₁)` rather than
//! `M₀`, because the longitudinal drive damping pulls toward zero while `T₁`
//! restores toward equilibrium.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{require_finite, Error, Result};
use crate::model::{DriveCoefficients, SpinSystemParams};
use crate::stats::fit_line;

/// Co-rotating-frame magnetization at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetizationState {
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
    pub t: f64,
}

impl MagnetizationState {
    pub fn new(mx: f64, my: f64, mz: f64) -> Self {
        Self { mx, my, mz, t: 0.0 }
    }

    /// `(0, 0, M₀)` at `t = 0`.
    pub fn equilibrium(m0: f64) -> Self {
        Self::new(0.0, 0.0, m0)
    }

    pub fn norm(&self) -> f64 {
        (self.mx * self.mx + self.my * self.my + self.mz * self.mz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.mx.is_finite() && self.my.is_finite() && self.mz.is_finite() && self.t.is_finite()
    }

    fn vector(&self) -> [f64; 3] {
        [self.mx, self.my, self.mz]
    }
}

/// Time derivative of `(M_x, M_y, M_z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetizationRate {
    pub dmx: f64,
    pub dmy: f64,
    pub dmz: f64,
}

/// Constant drive for `duration` seconds. The sign of `amplitude` selects the
/// `±x` phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSegment {
    amplitude: f64,
    duration: f64,
    offset: f64,
}

impl DriveSegment {
    pub fn new(amplitude: f64, duration: f64, offset: f64) -> Result<Self> {
        require_finite("amplitude", amplitude)?;
        require_finite("offset", offset)?;
        require_finite("duration", duration)?;
        if !(duration >= 0.0) {
            return Err(Error::Domain {
                name: "duration",
                requirement: ">= 0",
                value: duration,
            });
        }
        Ok(Self {
            amplitude,
            duration,
            offset,
        })
    }

    /// Drive-free evolution.
    pub fn free(duration: f64) -> Result<Self> {
        Self::new(0.0, duration, 0.0)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn duration(&self) -> f64 {
        self.duration
    }
    pub fn offset(&self) -> f64 {
        self.offset
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriveProgram {
    segments: Vec<DriveSegment>,
    total_duration: f64,
}

impl DriveProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_segments(segments: impl IntoIterator<Item = DriveSegment>) -> Self {
        let mut program = Self::new();
        for s in segments {
            program.push(s);
        }
        program
    }

    pub fn push(&mut self, segment: DriveSegment) {
        self.total_duration += segment.duration;
        self.segments.push(segment);
    }

    pub fn segments(&self) -> &[DriveSegment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    /// Copy of the program with every segment at drive offset `offset`.
    pub fn with_offset(&self, offset: f64) -> Self {
        Self::from_segments(self.segments.iter().map(|s| DriveSegment { offset, ..*s }))
    }

    pub fn max_amplitude(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.amplitude.abs())
            .fold(0.0, f64::max)
    }
}

/// Right-hand side of the modified Bloch equations. `c` must be evaluated for
/// `|amplitude|` and the segment's offset.
pub fn bloch_derivative(
    s: &MagnetizationState,
    p: &SpinSystemParams,
    c: &DriveCoefficients,
    amplitude: f64,
    offset: f64,
) -> MagnetizationRate {
    let (r1, r2) = (1.0 / p.t1(), 1.0 / p.t2());
    MagnetizationRate {
        dmx: (offset - c.omega_bs) * s.my - s.mx * r2 - c.eta_x * s.mx,
        dmy: -(offset - c.omega_bs - c.delta_omega_shift) * s.mx
            - amplitude * s.mz
            - s.my * r2
            - c.eta_y * s.my,
        dmz: amplitude * s.my - (s.mz - p.m0()) * r1 - c.eta_z * s.mz,
    }
}

/// Coefficients for one segment, recomputed from `|amplitude|`.
pub fn segment_coefficients(p: &SpinSystemParams, segment: &DriveSegment) -> Result<DriveCoefficients> {
    if segment.amplitude == 0.0 {
        return Ok(DriveCoefficients::ZERO);
    }
    DriveCoefficients::evaluate(
        segment.amplitude.abs(),
        segment.offset,
        2.0 * p.omega0() + segment.offset,
        p.tau_c(),
    )
}

/// Step-size bound on rotation per step.
pub const MAX_ROTATION_PER_STEP: f64 = 0.05;
/// Minimum number of steps per (non-empty) segment.
pub const MIN_STEPS_PER_SEGMENT: f64 = 10.0;

pub fn validate_step(program: &DriveProgram, step: f64) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain {
            name: "step",
            requirement: "> 0 and finite",
            value: step,
        });
    }
    let shortest = program
        .segments
        .iter()
        .map(|s| s.duration)
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if shortest.is_finite() {
        let limit = shortest / MIN_STEPS_PER_SEGMENT;
        if step > limit * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge {
                step,
                bound: "step <= min(segment duration)/10",
                limit,
            });
        }
    }
    let amp = program.max_amplitude();
    if amp > 0.0 {
        let limit = MAX_ROTATION_PER_STEP / amp;
        if step > limit * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge {
                step,
                bound: "step*omega1 <= 0.05 rad",
                limit,
            });
        }
    }
    Ok(())
}

/// Where a visited sample sits in the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Interior,
    SegmentEnd,
}

/// Which states [`integrate`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    #[default]
    Boundaries,
    /// Segment boundaries plus every n-th interior step.
    Every(usize),
}

fn rk4_step(
    s: &MagnetizationState,
    p: &SpinSystemParams,
    c: &DriveCoefficients,
    seg: &DriveSegment,
    h: f64,
) -> [f64; 3] {
    let f = |v: [f64; 3]| {
        let st = MagnetizationState::new(v[0], v[1], v[2]);
        let r = bloch_derivative(&st, p, c, seg.amplitude, seg.offset);
        [r.dmx, r.dmy, r.dmz]
    };
    let y = s.vector();
    let add = |a: [f64; 3], b: [f64; 3], k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]];
    let k1 = f(y);
    let k2 = f(add(y, k1, 0.5 * h));
    let k3 = f(add(y, k2, 0.5 * h));
    let k4 = f(add(y, k3, h));
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Runs `program` from `s0`, calling `visit` after every step. Returns the
/// final state. Segment ends land exactly on the program's segment times.
pub fn propagate_with<F>(
    s0: &MagnetizationState,
    program: &DriveProgram,
    p: &SpinSystemParams,
    step: f64,
    mut visit: F,
) -> Result<MagnetizationState>
where
    F: FnMut(&MagnetizationState, SampleKind),
{
    validate_step(program, step)?;
    let mut s = *s0;
    let mut seg_start = s0.t;
    for seg in &program.segments {
        let c = segment_coefficients(p, seg)?;
        let seg_end = seg_start + seg.duration;
        if seg.duration > 0.0 {
            let n = (seg.duration / step * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            for k in 0..n {
                let h = if k + 1 == n {
                    seg.duration - step * (n - 1) as f64
                } else {
                    step
                };
                let v = rk4_step(&s, p, &c, seg, h);
                s = MagnetizationState {
                    mx: v[0],
                    my: v[1],
                    mz: v[2],
                    t: if k + 1 == n {
                        seg_end
                    } else {
                        seg_start + step * (k + 1) as f64
                    },
                };
                visit(
                    &s,
                    if k + 1 == n {
                        SampleKind::SegmentEnd
                    } else {
                        SampleKind::Interior
                    },
                );
            }
        } else {
            s.t = seg_end;
            visit(&s, SampleKind::SegmentEnd);
        }
        seg_start = seg_end;
    }
    if !s.is_finite() {
        return Err(Error::Precondition(format!(
            "integration produced a non-finite state at t = {:e} s",
            s.t
        )));
    }
    Ok(s)
}

/// Final state only.
pub fn propagate(
    s0: &MagnetizationState,
    program: &DriveProgram,
    p: &SpinSystemParams,
    step: f64,
) -> Result<MagnetizationState> {
    propagate_with(s0, program, p, step, |_, _| {})
}

/// One pass of a program as the affine map `m ↦ A m + b` on `(mx, my, mz)`.
/// The Bloch equations are affine with time-independent coefficients and
/// RK4 preserves that, so repeated application reproduces step-by-step
/// integration up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub matrix: [[f64; 3]; 3],
    pub offset: [f64; 3],
    /// Program length, s.
    pub duration: f64,
}

impl AffineMap {
    pub fn of_program(program: &DriveProgram, p: &SpinSystemParams, step: f64) -> Result<Self> {
        let run = |v: [f64; 3]| -> Result<[f64; 3]> {
            let s = propagate(&MagnetizationState::new(v[0], v[1], v[2]), program, p, step)?;
            Ok([s.mx, s.my, s.mz])
        };
        let offset = run([0.0; 3])?;
        let mut matrix = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut e = [0.0; 3];
            e[j] = 1.0;
            let col = run(e)?;
            for i in 0..3 {
                matrix[i][j] = col[i] - offset[i];
            }
        }
        Ok(Self {
            matrix,
            offset,
            duration: program.total_duration(),
        })
    }

    pub fn apply(&self, s: &MagnetizationState) -> MagnetizationState {
        let v = [s.mx, s.my, s.mz];
        let row = |i: usize| {
            self.offset[i] + self.matrix[i][0] * v[0] + self.matrix[i][1] * v[1] + self.matrix[i][2] * v[2]
        };
        MagnetizationState {
            mx: row(0),
            my: row(1),
            mz: row(2),
            t: s.t + self.duration,
        }
    }
}

/// Trajectory starting with `s0`, then every segment end and, optionally,
/// every n-th interior step.
pub fn integrate(
    s0: &MagnetizationState,
    program: &DriveProgram,
    p: &SpinSystemParams,
    step: f64,
    sampling: Sampling,
) -> Result<Vec<MagnetizationState>> {
    let mut out = Vec::with_capacity(program.segments.len() + 1);
    out.push(*s0);
    let mut counter = 0usize;
    propagate_with(s0, program, p, step, |s, kind| {
        counter += 1;
        let keep = match (kind, sampling) {
            (SampleKind::SegmentEnd, _) => true,
            (SampleKind::Interior, Sampling::Every(n)) => n > 0 && counter.is_multiple_of(n),
            (SampleKind::Interior, Sampling::Boundaries) => false,
        };
        if kind == SampleKind::SegmentEnd {
            counter = 0;
        }
        if keep {
            out.push(*s);
        }
    })?;
    Ok(out)
}

/// Fixed point of the Bloch equations under a constant segment, or `None`
/// when the system has no unique one (no damping at all).
pub fn steady_state(p: &SpinSystemParams, segment: &DriveSegment) -> Result<Option<[f64; 3]>> {
    let c = segment_coefficients(p, segment)?;
    let (r1, r2) = (1.0 / p.t1(), 1.0 / p.t2());
    let w = segment.amplitude;
    let a = [
        [-(r2 + c.eta_x), segment.offset - c.omega_bs, 0.0],
        [
            -(segment.offset - c.omega_bs - c.delta_omega_shift),
            -(r2 + c.eta_y),
            -w,
        ],
        [0.0, w, -(r1 + c.eta_z)],
    ];
    let b = [0.0, 0.0, -p.m0() * r1];
    Ok(solve3(a, b))
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let d = det3(&a);
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(d.abs() > f64::EPSILON * scale * scale * scale) {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xi) in x.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *xi = det3(&m) / d;
    }
    Some(x)
}

/// Streaming detector of zero crossings and extrema of a sampled signal.
#[derive(Debug, Default, Clone)]
pub(crate) struct OscillationTracker {
    prev: Option<(f64, f64)>,
    prev2: Option<(f64, f64)>,
    pub crossings: Vec<f64>,
    pub extrema: Vec<(f64, f64)>,
}

impl OscillationTracker {
    pub fn push(&mut self, t: f64, y: f64) {
        if let Some((t1, y1)) = self.prev {
            if (y1 < 0.0 && y >= 0.0) || (y1 > 0.0 && y <= 0.0) {
                self.crossings.push(t1 + (t - t1) * y1 / (y1 - y));
            }
            if let Some((t0, y0)) = self.prev2 {
                if (y1 - y0) * (y - y1) < 0.0 {
                    self.extrema.push(parabola_vertex((t0, y0), (t1, y1), (t, y)));
                }
            }
        }
        self.prev2 = self.prev;
        self.prev = Some((t, y));
    }
}

fn parabola_vertex(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> (f64, f64) {
    // Newton form around b.
    let (ha, hc) = (a.0 - b.0, c.0 - b.0);
    let da = (a.1 - b.1) / ha;
    let dc = (c.1 - b.1) / hc;
    let curv = (dc - da) / (hc - ha);
    let lin = da - curv * ha;
    if curv == 0.0 {
        return b;
    }
    let dt = -lin / (2.0 * curv);
    (b.0 + dt, b.1 + lin * dt + curv * dt * dt)
}

/// Frequency (rad/s), envelope decay rate and log-fit residual of an
/// oscillating signal with its asymptote already removed.
pub(crate) fn oscillation_metrics(tracker: &OscillationTracker, min_periods: usize) -> Result<NutationMetrics> {
    let half_periods = tracker.crossings.len().saturating_sub(1);
    if half_periods < 2 * min_periods || tracker.extrema.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "detected {:.1} oscillation periods, need at least {}",
            half_periods as f64 / 2.0,
            min_periods
        )));
    }
    let idx: Vec<f64> = (0..tracker.crossings.len()).map(|i| i as f64).collect();
    let line = fit_line(&idx, &tracker.crossings)?;
    let frequency = core::f64::consts::PI / line.slope;
    let t: Vec<f64> = tracker.extrema.iter().map(|e| e.0).collect();
    let ln: Vec<f64> = tracker.extrema.iter().map(|e| e.1.abs().ln()).collect();
    let env = fit_line(&t, &ln)?;
    Ok(NutationMetrics {
        nutation_frequency: frequency,
        damping_rate: -env.slope,
        fit_residual: env.residual_rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutationMetrics {
    /// rad/s
    pub nutation_frequency: f64,
    /// 1/s
    pub damping_rate: f64,
    /// RMS residual of the log-envelope fit.
    pub fit_residual: f64,
}

/// Minimum number of nutation periods for a CW analysis.
pub const MIN_NUTATION_PERIODS: usize = 8;

/// Constant resonant drive from equilibrium; frequency from zero crossings of
/// `M_z` about its steady state, damping from the extrema envelope.
pub fn simulate_cw_nutation(p: &SpinSystemParams, duration: f64, step: f64) -> Result<NutationMetrics> {
    if p.delta_omega() != 0.0 {
        return Err(Error::Precondition(format!(
            "CW nutation analysis needs a resonant drive, got delta_omega = {:e} rad/s",
            p.delta_omega()
        )));
    }
    let w1 = p.omega1();
    if !(w1 > 1.0 / p.t1() && w1 > 1.0 / p.t2()) {
        return Err(Error::Precondition(format!(
            "omega1 = {w1:e} rad/s must exceed 1/T1 and 1/T2 for underdamped nutation"
        )));
    }
    let seg = DriveSegment::new(w1, duration, 0.0)?;
    let program = DriveProgram::from_segments([seg]);
    let asymptote = steady_state(p, &seg)?.map_or(0.0, |v| v[2]);
    let mut tracker = OscillationTracker::default();
    tracker.push(0.0, p.m0() - asymptote);
    propagate_with(&MagnetizationState::equilibrium(p.m0()), &program, p, step, |s, _| {
        tracker.push(s.t, s.mz - asymptote)
    })?;
    oscillation_metrics(&tracker, MIN_NUTATION_PERIODS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compute_coefficients, nutation_damping_approx, BathSpec};
    use core::f64::consts::{LN_2, PI};
    use proptest::prelude::*;

    const TINY_TAU: f64 = 1e-20;

    #[test]
    fn affine_map_matches_stepping() {
        let p = params(2.0 * PI * 1e4, 1e-7, 0.02, 0.01);
        let w = p.omega1();
        let program = DriveProgram::from_segments([
            DriveSegment::new(w, 0.5 * PI / w, 300.0).unwrap(),
            DriveSegment::new(-w, PI / w, 300.0).unwrap(),
            DriveSegment::free(2e-5).unwrap(),
        ]);
        let step = 0.01 / w;
        let map = AffineMap::of_program(&program, &p, step).unwrap();
        let mut stepped = MagnetizationState::new(0.2, -0.3, 0.9);
        let mut mapped = stepped;
        for _ in 0..20 {
            stepped = propagate(&stepped, &program, &p, step).unwrap();
            mapped = map.apply(&mapped);
        }
        assert!((stepped.mx - mapped.mx).abs() < 1e-12);
        assert!((stepped.my - mapped.my).abs() < 1e-12);
        assert!((stepped.mz - mapped.mz).abs() < 1e-12);
        assert!((stepped.t - mapped.t).abs() < 1e-15);
    }

    fn params(omega1: f64, tau_c: f64, t1: f64, t2: f64) -> SpinSystemParams {
        SpinSystemParams::builder(2.0 * PI * 5e4, omega1, BathSpec::CorrelationTime(tau_c))
            .relaxation(t1, t2)
            .build()
            .unwrap()
    }

    fn deriv(s: MagnetizationState, p: &SpinSystemParams, amp: f64) -> MagnetizationRate {
        let seg = DriveSegment::new(amp, 1.0, 0.0).unwrap();
        let c = segment_coefficients(p, &seg).unwrap();
        bloch_derivative(&s, p, &c, amp, 0.0)
    }

    #[test]
    fn equilibrium_is_fixed() {
        let p = params(0.0, 1e-9, 1.34, 0.81);
        let r = deriv(MagnetizationState::equilibrium(1.0), &p, 0.0);
        assert_eq!(r, MagnetizationRate { dmx: 0.0, dmy: 0.0, dmz: 0.0 });
    }

    #[test]
    fn free_transverse_decay() {
        let p = params(0.0, 1e-9, 1.34, 0.81);
        let r = deriv(MagnetizationState::new(0.3, 0.0, 1.0), &p, 0.0);
        assert_eq!(r.dmx, -0.3 / 0.81);
        assert_eq!(r.dmy, 0.0);
        assert_eq!(r.dmz, 0.0);
    }

    #[test]
    fn driven_longitudinal_damping() {
        let p = SpinSystemParams::builder(2.0 * PI * 5e8, 1e4, BathSpec::CorrelationTime(1e-6))
            .build()
            .unwrap();
        let r = deriv(MagnetizationState::equilibrium(1.0), &p, 1e4);
        let omega = 2.0 * p.omega0();
        let eta_z = 1e8 * (1e-6 / (1.0 + omega * omega * 1e-12) + 1e-6);
        assert!(((r.dmz + eta_z) / eta_z).abs() < 1e-14);
    }

    #[test]
    fn quarter_period_nutation() {
        let w1 = 2.0 * PI * 1e3;
        let p = params(w1, TINY_TAU, f64::INFINITY, f64::INFINITY);
        let program = DriveProgram::from_segments([DriveSegment::new(w1, 0.25e-3, 0.0).unwrap()]);
        let end = propagate(&MagnetizationState::equilibrium(1.0), &program, &p, 0.01 / w1).unwrap();
        assert!(end.mx.abs() < 1e-12);
        assert!((end.my + 1.0).abs() < 1e-9);
        assert!(end.mz.abs() < 1e-9);
        assert_eq!(end.t, 0.25e-3);
    }

    #[test]
    fn longitudinal_recovery() {
        let t1 = 1.34;
        let p = params(0.0, 1e-9, t1, 0.81);
        let program = DriveProgram::from_segments([DriveSegment::free(t1 * LN_2).unwrap()]);
        let end = propagate(&MagnetizationState::new(0.0, 0.0, 0.0), &program, &p, 1e-3).unwrap();
        assert!((end.mz - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fourth_order_convergence() {
        // Equal T1 and T2 with M0 = 0 has the exact solution e^{-t/T} (0, -sin, cos).
        let w1 = 2.0 * PI * 1e3;
        let t2 = 2e-3;
        let p = SpinSystemParams::builder(2.0 * PI * 5e4, w1, BathSpec::CorrelationTime(TINY_TAU))
            .relaxation(t2, t2)
            .equilibrium_magnetization(0.0)
            .build()
            .unwrap();
        let duration = 3e-3;
        let program = DriveProgram::from_segments([DriveSegment::new(w1, duration, 0.0).unwrap()]);
        let exact = [0.0, -(w1 * duration).sin(), (w1 * duration).cos()].map(|v| v * (-duration / t2).exp());
        let err = |step: f64| {
            let s = propagate(&MagnetizationState::new(0.0, 0.0, 1.0), &program, &p, step).unwrap();
            ((s.my - exact[1]).powi(2) + (s.mz - exact[2]).powi(2)).sqrt()
        };
        let coarse = err(0.04 / w1);
        let fine = err(0.02 / w1);
        let ratio = coarse / fine;
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn step_bounds_are_named() {
        let w1 = 1e4;
        let p = params(w1, TINY_TAU, 1.0, 1.0);
        let program = DriveProgram::from_segments([DriveSegment::new(w1, 1e-3, 0.0).unwrap()]);
        let s0 = MagnetizationState::equilibrium(1.0);
        match propagate(&s0, &program, &p, 2e-4) {
            Err(Error::StepTooLarge { bound, .. }) => assert!(bound.contains("segment duration")),
            other => panic!("{other:?}"),
        }
        match propagate(&s0, &program, &p, 1e-5) {
            Err(Error::StepTooLarge { bound, .. }) => assert!(bound.contains("0.05")),
            other => panic!("{other:?}"),
        }
        assert!(propagate(&s0, &program, &p, 5e-6).is_ok());
    }

    #[test]
    fn trajectory_sampling() {
        let p = params(1e3, TINY_TAU, 1.0, 1.0);
        let program = DriveProgram::from_segments([
            DriveSegment::new(1e3, 1e-3, 0.0).unwrap(),
            DriveSegment::free(0.5e-3).unwrap(),
        ]);
        let s0 = MagnetizationState::equilibrium(1.0);
        let b = integrate(&s0, &program, &p, 1e-5, Sampling::Boundaries).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[1].t, 1e-3);
        assert_eq!(b[2].t, 1.5e-3);
        let e = integrate(&s0, &program, &p, 1e-5, Sampling::Every(10)).unwrap();
        assert_eq!(e.len(), 1 + 10 + 5);
        assert_eq!(e.last().unwrap().t, program.total_duration());
    }

    #[test]
    fn total_duration_is_segment_sum() {
        let program = DriveProgram::from_segments(
            [0.1, 0.2, 0.3].map(|d| DriveSegment::free(d).unwrap()),
        );
        assert_eq!(program.total_duration(), 0.1 + 0.2 + 0.3);
    }

    #[test]
    fn cw_nutation_with_drive_damping() {
        let w1 = 2.0 * PI * 10e3;
        let p = params(w1, 1e-7, 1.34, 0.81);
        let period = 2.0 * PI / w1;
        let m = simulate_cw_nutation(&p, 8.5 * period, 0.01 / w1).unwrap();
        let expected = nutation_damping_approx(&p);
        assert!(((m.damping_rate - expected) / expected).abs() < 0.02, "{} vs {expected}", m.damping_rate);
        assert!(((m.nutation_frequency - w1) / w1).abs() < 1e-3);
    }

    #[test]
    fn cw_nutation_without_drive_damping() {
        let w1 = 2.0 * PI * 10e3;
        let p = params(w1, TINY_TAU, 1.34, 0.81);
        let period = 2.0 * PI / w1;
        let m = simulate_cw_nutation(&p, 8.5 * period, 0.01 / w1).unwrap();
        let expected = (1.34 + 0.81) / (2.0 * 1.34 * 0.81);
        assert!(((m.damping_rate - expected) / expected).abs() < 0.02, "{} vs {expected}", m.damping_rate);
        assert!(((m.nutation_frequency - w1) / w1).abs() < 1e-3);
    }

    #[test]
    fn cw_nutation_needs_eight_periods() {
        let w1 = 2.0 * PI * 10e3;
        let p = params(w1, TINY_TAU, 1.34, 0.81);
        let r = simulate_cw_nutation(&p, 5.0 * 2.0 * PI / w1, 0.01 / w1);
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn cw_nutation_preconditions() {
        let p = SpinSystemParams::builder(1e6, 1e3, BathSpec::CorrelationTime(TINY_TAU))
            .detuning(10.0)
            .build()
            .unwrap();
        assert!(matches!(simulate_cw_nutation(&p, 1.0, 1e-5), Err(Error::Precondition(_))));
        let p = params(0.5, TINY_TAU, 1.34, 0.81);
        assert!(matches!(simulate_cw_nutation(&p, 1.0, 1e-3), Err(Error::Precondition(_))));
    }

    #[test]
    fn steady_state_is_below_equilibrium_under_drive() {
        let w1 = 2.0 * PI * 1e3;
        let p = params(w1, 1e-7, 1.34, 0.81);
        let seg = DriveSegment::new(w1, 1.0, 0.0).unwrap();
        let ss = steady_state(&p, &seg).unwrap().unwrap();
        let r = deriv(MagnetizationState::new(ss[0], ss[1], ss[2]), &p, w1);
        assert!(r.dmx.abs() < 1e-12 && r.dmy.abs() < 1e-9 && r.dmz.abs() < 1e-9);
        assert!(ss[2] < 1.0);
        let free = DriveSegment::free(1.0).unwrap();
        let ss = steady_state(&p, &free).unwrap().unwrap();
        assert!(ss[0].abs() < 1e-15 && ss[1].abs() < 1e-15 && (ss[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn free_segments_have_no_drive_terms() {
        let p = params(2e4, 1e-7, 1.0, 1.0);
        let c = segment_coefficients(&p, &DriveSegment::free(1.0).unwrap()).unwrap();
        assert_eq!(c, DriveCoefficients::ZERO);
    }

    #[test]
    fn norm_conserved_without_damping() {
        let w1 = 2.0 * PI * 5e3;
        let p = params(w1, TINY_TAU, f64::INFINITY, f64::INFINITY);
        let step = 0.01 / w1;
        let program = DriveProgram::from_segments([
            DriveSegment::new(w1, 4e3 * step, 0.0).unwrap(),
            DriveSegment::new(-w1, 3e3 * step, 37.0).unwrap(),
            DriveSegment::new(w1, 3e3 * step, -20.0).unwrap(),
        ]);
        let s0 = MagnetizationState::new(0.3, -0.4, 0.8);
        let end = propagate(&s0, &program, &p, step).unwrap();
        assert!(((end.norm() - s0.norm()) / s0.norm()).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn opposite_phase_undoes_rotation(
            mx in -1.0f64..1.0, my in -1.0f64..1.0, mz in -1.0f64..1.0,
            theta in 0.1f64..7.0,
        ) {
            let w1 = 2.0 * PI * 1e4;
            let p = params(w1, TINY_TAU, f64::INFINITY, f64::INFINITY);
            let d = theta / w1;
            let program = DriveProgram::from_segments([
                DriveSegment::new(w1, d, 0.0).unwrap(),
                DriveSegment::new(-w1, d, 0.0).unwrap(),
            ]);
            let s0 = MagnetizationState::new(mx, my, mz);
            let end = propagate(&s0, &program, &p, (d / 10.0).min(0.01 / w1)).unwrap();
            prop_assert!((end.mx - mx).abs() < 1e-9);
            prop_assert!((end.my - my).abs() < 1e-9);
            prop_assert!((end.mz - mz).abs() < 1e-9);
        }

        #[test]
        fn drive_terms_ignore_phase(w1 in 1.0f64..1e5, offset in -1e4f64..1e4) {
            let p = params(1e3, 1e-7, 1.0, 1.0);
            let a = segment_coefficients(&p, &DriveSegment::new(w1, 1.0, offset).unwrap()).unwrap();
            let b = segment_coefficients(&p, &DriveSegment::new(-w1, 1.0, offset).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn drive_free_relaxation_is_exponential(
            t in 0.01f64..3.0, mx in -1.0f64..1.0, mz in -1.0f64..1.0,
        ) {
            let (t1, t2) = (1.34, 0.81);
            let p = params(0.0, 1e-9, t1, t2);
            let program = DriveProgram::from_segments([DriveSegment::free(t).unwrap()]);
            let end = propagate(&MagnetizationState::new(mx, 0.0, mz), &program, &p, t / 400.0).unwrap();
            prop_assert!((end.mx - mx * (-t / t2).exp()).abs() < 1e-10);
            prop_assert!((end.mz - (1.0 + (mz - 1.0) * (-t / t1).exp())).abs() < 1e-10);
        }
    }

    #[test]
    fn coefficients_used_per_segment_match_model() {
        let p = params(2.0 * PI * 1e3, 1e-7, 1.0, 1.0);
        let seg = DriveSegment::new(-2.0 * PI * 1e3, 1.0, 0.0).unwrap();
        assert_eq!(segment_coefficients(&p, &seg).unwrap(), compute_coefficients(&p));
    }
}
