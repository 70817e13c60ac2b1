//! Second-order coarse-grained increment of the spin density matrix under
//! the drive, by direct trapezoid quadrature of the double commutator.
//!
//! In the interaction frame the drive splits into a counter-rotating part
//! oscillating at the sum frequency `Ω` and a co-rotating part at `−Δω`:
//! `H_X(t) = (ω₁/2) [[0, e^{iν_X t}], [e^{−iν_X t}, 0]]`. The inner integral
//! runs over the lag `s = t₁ − t₂ ∈ [0, min(t₁ − t, 40τc)]` with kernel
//! `e^{−s/τc}`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use super::DensityMatrix2;
use crate::error::{require_positive, Error, Result};
use crate::linalg::Mat2;
use crate::model::SpinSystemParams;

/// Both coarse-graining ratios `τc/Δt` and `ω₁Δt` must stay below this.
pub const WINDOW_LIMIT: f64 = 0.05;
/// Minimum trapezoid points per dimension.
pub const MIN_QUAD_POINTS: usize = 64;
/// Kernel truncation, in units of `τc`.
pub const KERNEL_CUTOFF: f64 = 40.0;
const MIN_POINTS_PER_PERIOD: f64 = 20.0;
const MIN_POINTS_PER_TAU: f64 = 8.0;

/// Drive component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    CounterRotating,
    CoRotating,
}

impl Component {
    const ALL: [Component; 2] = [Component::CounterRotating, Component::CoRotating];

    fn frequency(self, p: &SpinSystemParams) -> f64 {
        match self {
            Component::CounterRotating => p.omega_sum(),
            Component::CoRotating => -p.delta_omega(),
        }
    }
}

/// Trapezoid intervals for the outer time and inner lag integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureGrid {
    pub outer: usize,
    pub inner: usize,
}

impl QuadratureGrid {
    /// A grid with 32 points per period of the fastest oscillation on the
    /// outer axis and 64 per period (and 32 per `τc`) on the inner axis.
    pub fn resolving(p: &SpinSystemParams, delta_t: f64) -> Self {
        let fastest = p.omega_sum().abs().max(p.delta_omega().abs());
        let span = delta_t.min(KERNEL_CUTOFF * p.tau_c());
        let outer = if fastest > 0.0 {
            (delta_t * fastest / (2.0 * PI) * 32.0).ceil() as usize
        } else {
            0
        };
        let mut inner_h = p.tau_c() / 32.0;
        if p.omega_sum() != 0.0 {
            inner_h = inner_h.min(2.0 * PI / p.omega_sum().abs() / 64.0);
        }
        let inner = (span / inner_h).ceil() as usize;
        Self {
            outer: outer.max(MIN_QUAD_POINTS),
            inner: inner.max(MIN_QUAD_POINTS),
        }
    }

    fn check(&self, p: &SpinSystemParams, delta_t: f64) -> Result<()> {
        if self.outer < MIN_QUAD_POINTS || self.inner < MIN_QUAD_POINTS {
            return Err(Error::Resolution(format!(
                "need at least {MIN_QUAD_POINTS} points per dimension, got {}x{}",
                self.outer, self.inner
            )));
        }
        let h1 = delta_t / self.outer as f64;
        let span = delta_t.min(KERNEL_CUTOFF * p.tau_c());
        let h2 = span / self.inner as f64;
        let fastest = p.omega_sum().abs().max(p.delta_omega().abs());
        if fastest > 0.0 {
            let per_period = 2.0 * PI / fastest;
            if h1 > per_period / MIN_POINTS_PER_PERIOD * (1.0 + 1e-12) {
                return Err(Error::Resolution(format!(
                    "outer spacing {h1:.3e} s gives {:.1} points per period of {fastest:.3e} rad/s, need {MIN_POINTS_PER_PERIOD}",
                    per_period / h1
                )));
            }
            if p.omega_sum() != 0.0 && h2 > 2.0 * PI / p.omega_sum().abs() / MIN_POINTS_PER_PERIOD * (1.0 + 1e-12) {
                return Err(Error::Resolution(format!(
                    "inner spacing {h2:.3e} s does not resolve the sum frequency"
                )));
            }
        }
        if h2 > p.tau_c() / MIN_POINTS_PER_TAU * (1.0 + 1e-12) && span > p.tau_c() / MIN_POINTS_PER_TAU {
            return Err(Error::Resolution(format!(
                "inner spacing {h2:.3e} s exceeds tau_c/{MIN_POINTS_PER_TAU}"
            )));
        }
        Ok(())
    }
}

/// Drive-induced change of `ρ` over one window, kept split by component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseGrainedIncrement {
    /// `−i ∫ [H(t₁), ρ] dt₁`
    pub first_order: Mat2,
    /// `second_order[a][b] = −∫dt₁ [H_a(t₁), ∫ds e^{−s/τc} [H_b(t₁ − s), ρ]]`,
    /// indexed counter-rotating = 0, co-rotating = 1.
    pub second_order: [[Mat2; 2]; 2],
}

impl CoarseGrainedIncrement {
    pub fn second_order_total(&self) -> Mat2 {
        let s = &self.second_order;
        s[0][0] + s[0][1] + s[1][0] + s[1][1]
    }

    pub fn total(&self) -> Mat2 {
        self.first_order + self.second_order_total()
    }

    pub fn self_terms(&self) -> [Mat2; 2] {
        [self.second_order[0][0], self.second_order[1][1]]
    }

    pub fn cross_terms(&self) -> Mat2 {
        self.second_order[0][1] + self.second_order[1][0]
    }
}

fn check_window(p: &SpinSystemParams, delta_t: f64) -> Result<()> {
    let tau_ratio = p.tau_c() / delta_t;
    let drive_ratio = p.omega1() * delta_t;
    if !(tau_ratio < WINDOW_LIMIT && drive_ratio < WINDOW_LIMIT) {
        return Err(Error::EmptyWindow {
            tau_ratio,
            tau_limit: WINDOW_LIMIT,
            drive_ratio,
            drive_limit: WINDOW_LIMIT,
        });
    }
    Ok(())
}

fn off_diagonal(upper: Complex64, lower: Complex64) -> Mat2 {
    let z = Complex64::new(0.0, 0.0);
    Mat2::new(z, upper, lower, z)
}

/// Trapezoid prefix sums of `e^{−s/τc} e^{∓iνs}` on the inner grid.
struct LagTable {
    h: f64,
    tau_c: f64,
    nu: f64,
    /// `∫₀^{k h} e^{−s/τc} e^{−iνs} ds` and the same with `e^{+iνs}`.
    minus: Vec<Complex64>,
    plus: Vec<Complex64>,
}

impl LagTable {
    fn new(nu: f64, tau_c: f64, span: f64, inner: usize) -> Self {
        let h = span / inner as f64;
        let g = |s: f64, sign: f64| Complex64::from_polar((-s / tau_c).exp(), sign * nu * s);
        let mut minus = Vec::with_capacity(inner + 1);
        let mut plus = Vec::with_capacity(inner + 1);
        let (mut am, mut ap) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        minus.push(am);
        plus.push(ap);
        for k in 0..inner {
            let (s0, s1) = (k as f64 * h, (k + 1) as f64 * h);
            am += (g(s0, -1.0) + g(s1, -1.0)) * (0.5 * h);
            ap += (g(s0, 1.0) + g(s1, 1.0)) * (0.5 * h);
            minus.push(am);
            plus.push(ap);
        }
        Self {
            h,
            tau_c,
            nu,
            minus,
            plus,
        }
    }

    /// Integrals up to lag `avail`, finishing with a partial panel.
    fn integral(&self, avail: f64) -> (Complex64, Complex64) {
        let last = self.minus.len() - 1;
        let m = ((avail / self.h + 1e-9).floor() as usize).min(last);
        let rest = avail - m as f64 * self.h;
        let (mut am, mut ap) = (self.minus[m], self.plus[m]);
        if rest > 1e-12 * self.h {
            let g = |s: f64, sign: f64| Complex64::from_polar((-s / self.tau_c).exp(), sign * self.nu * s);
            let s0 = m as f64 * self.h;
            am += (g(s0, -1.0) + g(avail, -1.0)) * (0.5 * rest);
            ap += (g(s0, 1.0) + g(avail, 1.0)) * (0.5 * rest);
        }
        (am, ap)
    }
}

/// Same as [`coarse_grained_step`] without the coarse-graining window check,
/// for studying the `Δt → 0` limit.
pub fn coarse_grained_increment(
    rho: &DensityMatrix2,
    p: &SpinSystemParams,
    t: f64,
    delta_t: f64,
    grid: QuadratureGrid,
) -> Result<CoarseGrainedIncrement> {
    require_positive("delta_t", delta_t)?;
    grid.check(p, delta_t)?;
    let rho = *rho.matrix();
    let half = 0.5 * p.omega1();
    let span = delta_t.min(KERNEL_CUTOFF * p.tau_c());
    let tables = Component::ALL.map(|c| LagTable::new(c.frequency(p), p.tau_c(), span, grid.inner));
    let nus = Component::ALL.map(|c| c.frequency(p));
    let h1 = delta_t / grid.outer as f64;
    let minus_i = Complex64::new(0.0, -1.0);

    let mut first = Mat2::ZERO;
    let mut second = [[Mat2::ZERO; 2]; 2];
    for i in 0..=grid.outer {
        let w = if i == 0 || i == grid.outer { 0.5 * h1 } else { h1 };
        let r = i as f64 * h1;
        let t1 = t + r;
        let avail = r.min(span);
        let mut h = [Mat2::ZERO; 2];
        let mut k = [Mat2::ZERO; 2];
        for c in 0..2 {
            let phase = Complex64::from_polar(1.0, nus[c] * t1);
            h[c] = off_diagonal(phase * half, phase.conj() * half);
            let (am, ap) = tables[c].integral(avail);
            k[c] = off_diagonal(phase * am * half, phase.conj() * ap * half);
        }
        first += (h[0] + h[1]).commutator(&rho) * (minus_i * w);
        for a in 0..2 {
            for b in 0..2 {
                second[a][b] += h[a].commutator(&k[b].commutator(&rho)) * (-w);
            }
        }
    }
    Ok(CoarseGrainedIncrement {
        first_order: first,
        second_order: second,
    })
}

/// Drive-induced `Δρ` over `[t, t + Δt]` from the full (unfiltered)
/// double-commutator integrand. Requires `τc/Δt < 0.05` and `ω₁Δt < 0.05`.
pub fn coarse_grained_step(
    rho: &DensityMatrix2,
    p: &SpinSystemParams,
    t: f64,
    delta_t: f64,
    grid: QuadratureGrid,
) -> Result<CoarseGrainedIncrement> {
    require_positive("delta_t", delta_t)?;
    check_window(p, delta_t)?;
    coarse_grained_increment(rho, p, t, delta_t, grid)
}

/// Effective second-order rates read off the coarse-grained generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorRates {
    pub eta_x: f64,
    pub eta_y: f64,
    pub eta_z: f64,
    /// Phase rate of a coherence starting along `x`.
    pub omega_bs_from_x: f64,
    /// Phase rate of a coherence starting along `y`.
    pub omega_bs_from_y: f64,
}

fn bloch_rate(op: Mat2, delta: &Mat2, delta_t: f64) -> f64 {
    2.0 * op.expectation(delta).re / delta_t
}

/// Rates from three fully polarized states along `z`, `x` and `y`.
pub fn generator_rates(p: &SpinSystemParams, t: f64, delta_t: f64, grid: QuadratureGrid) -> Result<GeneratorRates> {
    generator_rates_with(p, t, delta_t, grid, coarse_grained_step)
}

pub(crate) fn generator_rates_with(
    p: &SpinSystemParams,
    t: f64,
    delta_t: f64,
    grid: QuadratureGrid,
    step: fn(&DensityMatrix2, &SpinSystemParams, f64, f64, QuadratureGrid) -> Result<CoarseGrainedIncrement>,
) -> Result<GeneratorRates> {
    let rz = DensityMatrix2::spin_up();
    let rx = DensityMatrix2::from_bloch([1.0, 0.0, 0.0])?;
    let ry = DensityMatrix2::from_bloch([0.0, 1.0, 0.0])?;
    let dz = step(&rz, p, t, delta_t, grid)?.second_order_total();
    let dx = step(&rx, p, t, delta_t, grid)?.second_order_total();
    let dy = step(&ry, p, t, delta_t, grid)?.second_order_total();
    Ok(GeneratorRates {
        eta_z: -bloch_rate(Mat2::spin_z(), &dz, delta_t),
        eta_x: -bloch_rate(Mat2::spin_x(), &dx, delta_t),
        eta_y: -bloch_rate(Mat2::spin_y(), &dy, delta_t),
        omega_bs_from_x: bloch_rate(Mat2::spin_y(), &dx, delta_t),
        omega_bs_from_y: -bloch_rate(Mat2::spin_x(), &dy, delta_t),
    })
}

/// Largest cross-term entry over the largest self-term entry, for a generic
/// state with all Bloch components populated.
pub fn secular_crossterm_magnitude(p: &SpinSystemParams, delta_t: f64) -> Result<f64> {
    let c = 1.0 / 3.0f64.sqrt();
    let rho = DensityMatrix2::from_bloch([0.9 * c, 0.9 * c, 0.9 * c])?;
    let inc = coarse_grained_step(&rho, p, 0.0, delta_t, QuadratureGrid::resolving(p, delta_t))?;
    let [cc, rr] = inc.self_terms();
    let denom = cc.max_abs().max(rr.max_abs());
    if denom == 0.0 {
        return Err(Error::Precondition("no secular second-order term (omega1 = 0?)".into()));
    }
    Ok(inc.cross_terms().max_abs() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compute_coefficients, BathSpec};

    fn params(omega0: f64, omega1: f64, tau_c: f64) -> SpinSystemParams {
        SpinSystemParams::builder(omega0, omega1, BathSpec::CorrelationTime(tau_c))
            .build()
            .unwrap()
    }

    #[test]
    fn undriven_increment_vanishes() {
        let p = params(1e9, 0.0, 1e-12);
        let rho = DensityMatrix2::from_bloch([0.1, 0.2, 0.3]).unwrap();
        let dt = 1e-9;
        let inc = coarse_grained_step(&rho, &p, 0.0, dt, QuadratureGrid::resolving(&p, dt)).unwrap();
        assert_eq!(inc.total(), Mat2::ZERO);
    }

    #[test]
    fn window_errors_report_both_ratios() {
        let p = params(1e9, 1e5, 1e-12);
        let err = coarse_grained_step(&DensityMatrix2::spin_up(), &p, 0.0, 1e-11, QuadratureGrid { outer: 64, inner: 64 })
            .unwrap_err();
        match err {
            Error::EmptyWindow { tau_ratio, drive_ratio, .. } => {
                assert!((tau_ratio - 0.1).abs() < 1e-12);
                assert!((drive_ratio - 1e-6).abs() < 1e-18);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let p = params(1e9, 1e3, 1e-12);
        let dt = 1e-8;
        let r = coarse_grained_step(&DensityMatrix2::spin_up(), &p, 0.0, dt, QuadratureGrid { outer: 64, inner: 64 });
        assert!(matches!(r, Err(Error::Resolution(_))));
        let r = coarse_grained_step(&DensityMatrix2::spin_up(), &p, 0.0, dt, QuadratureGrid { outer: 640, inner: 32 });
        assert!(matches!(r, Err(Error::Resolution(_))));
    }

    #[test]
    fn trace_and_hermiticity() {
        let p = params(5e8, 1e5, 1e-9);
        let rho = DensityMatrix2::from_bloch([0.3, -0.5, 0.6]).unwrap();
        let dt = 1e-7;
        let inc = coarse_grained_step(&rho, &p, 3e-8, dt, QuadratureGrid::resolving(&p, dt)).unwrap();
        let total = inc.total();
        assert!(total.trace().norm() < 1e-15);
        assert!(total.hermiticity_defect() < 1e-12 * total.max_abs().max(1e-300) + 1e-18);
    }

    #[test]
    fn longitudinal_rate_matches_closed_form() {
        // Omega*tau_c = 1, window aligned to whole periods of Omega.
        let tau = 1e-9;
        let omega0 = 0.5 / tau;
        let period = 2.0 * PI / (2.0 * omega0);
        let dt = (100.0 * tau / period).ceil() * period;
        let p = params(omega0, 0.01 / dt, tau);
        let rates = generator_rates(&p, 0.0, dt, QuadratureGrid::resolving(&p, dt)).unwrap();
        let c = compute_coefficients(&p);
        assert!(((rates.eta_z - c.eta_z) / c.eta_z).abs() < 0.05, "{} vs {}", rates.eta_z, c.eta_z);
        assert!(((rates.eta_x - c.eta_x) / c.eta_x).abs() < 0.05);
        assert!(((rates.eta_y - c.eta_y) / c.eta_y).abs() < 0.05);
        assert!(((rates.omega_bs_from_x - c.omega_bs) / c.omega_bs).abs() < 0.05);
        assert!(((rates.omega_bs_from_y - c.omega_bs) / c.omega_bs).abs() < 0.05);
    }

    fn aligned_window(p: &SpinSystemParams, min_window: f64) -> f64 {
        let period = 2.0 * PI / p.omega_sum();
        (min_window / period).ceil() * period
    }

    #[test]
    fn rates_across_correlation_regimes() {
        let tau = 1e-9;
        for (x, span) in [(0.1, 2000.0), (10.0, 100.0)] {
            let probe = params(0.5 * x / tau, 0.0, tau);
            let dt = aligned_window(&probe, span * tau);
            let p = probe.with_omega1(0.01 / dt).unwrap();
            let rates = generator_rates(&p, 0.0, dt, QuadratureGrid::resolving(&p, dt)).unwrap();
            let c = compute_coefficients(&p);
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            assert!(rel(rates.eta_z, c.eta_z) < 0.05, "x={x}: {} vs {}", rates.eta_z, c.eta_z);
            assert!(rel(rates.omega_bs_from_x, c.omega_bs) < 0.05, "x={x}");
        }
    }

    #[test]
    fn short_window_rates_vanish_linearly() {
        // Much shorter than tau_c the kernel is flat and H(t) ~ 2 omega1 Ix,
        // so eta_z -> 2 omega1^2 dt.
        let tau = 1e-9;
        let p = params(0.5 / tau, 1e5, tau);
        let rz = DensityMatrix2::spin_up();
        let mut prev: Option<f64> = None;
        for dt in [tau / 1000.0, tau / 2000.0, tau / 4000.0] {
            let inc = coarse_grained_increment(&rz, &p, 0.0, dt, QuadratureGrid::resolving(&p, dt)).unwrap();
            let eta_z = -2.0 * Mat2::spin_z().expectation(&inc.second_order_total()).re / dt;
            let expected = 2.0 * p.omega1() * p.omega1() * dt;
            assert!((eta_z / expected - 1.0).abs() < 0.01, "{eta_z} vs {expected}");
            if let Some(last) = prev {
                assert!((last / eta_z - 2.0f64).abs() < 0.01);
            }
            prev = Some(eta_z);
        }
    }

    #[test]
    fn crossterms_negligible_at_gigahertz() {
        let p = params(PI * 1e9, 1e4, 1e-12);
        let ratio = secular_crossterm_magnitude(&p, 1e-6).unwrap();
        assert!(ratio < 1.6e-4, "{ratio}");
    }

    #[test]
    fn corotating_self_term_survives_on_resonance() {
        let p = params(PI * 1e9, 1e4, 1e-12);
        let rho = DensityMatrix2::from_bloch([0.5, 0.5, 0.5]).unwrap();
        let dt = 1e-8;
        let inc = coarse_grained_step(&rho, &p, 0.0, dt, QuadratureGrid::resolving(&p, dt)).unwrap();
        let [cc, rr] = inc.self_terms();
        assert!(rr.max_abs() > 0.0);
        assert!(rr.max_abs() > cc.max_abs());
    }

    #[test]
    fn crossterm_ratio_falls_with_window() {
        let tau = 1e-11;
        let p = params(PI * 1e9, 1e4, tau);
        let period = 2.0 * PI / p.omega_sum();
        let mut last = f64::INFINITY;
        for m in [20.0, 40.0, 80.0, 160.0, 320.0] {
            let r = secular_crossterm_magnitude(&p, (m + 0.25) * period).unwrap();
            assert!(r < last, "m={m}: {r} >= {last}");
            last = r;
        }
    }
}
