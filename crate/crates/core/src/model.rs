//! Physical parameters and the closed-form second-order drive susceptibility.
//!
//! All frequencies are angular (rad/s) and all times are seconds.

use alloc::format;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{require_finite, require_positive, Error, Result};

/// `τc·ω₁` or `τc·|Δω|` above this is rejected outright.
pub const TIMESCALE_HARD_LIMIT: f64 = 0.1;
/// `τc·ω₁` or `τc·|Δω|` above this is accepted with a logged warning.
pub const TIMESCALE_WARN_LIMIT: f64 = 0.01;
/// Proton gyromagnetic ratio, rad/s/T.
pub const PROTON_GYROMAGNETIC_RATIO: f64 = 2.675_221_874_4e8;

/// Every physical constant of the driven spin model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSystemParams {
    omega0: f64,
    omega1: f64,
    delta_omega: f64,
    tau_c: f64,
    kappa: f64,
    t1: f64,
    t2: f64,
    m0: f64,
    gamma: f64,
}

/// How the bath correlation time was specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BathSpec {
    CorrelationTime(f64),
    /// Fluctuation strength κ; the correlation time is `2/κ²`.
    Strength(f64),
}

/// Builder for [`SpinSystemParams`]. `omega0`, the drive amplitude and the bath
/// are required; relaxation defaults to none (`T₁ = T₂ = ∞`), `M₀ = 1`, resonant
/// drive and the proton γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSystemBuilder {
    omega0: f64,
    omega1: f64,
    delta_omega: f64,
    bath: BathSpec,
    t1: f64,
    t2: f64,
    m0: f64,
    gamma: f64,
}

impl SpinSystemBuilder {
    pub fn new(omega0: f64, omega1: f64, bath: BathSpec) -> Self {
        Self {
            omega0,
            omega1,
            delta_omega: 0.0,
            bath,
            t1: f64::INFINITY,
            t2: f64::INFINITY,
            m0: 1.0,
            gamma: PROTON_GYROMAGNETIC_RATIO,
        }
    }

    /// Drive offset `Δω = ω − ω₀`.
    pub fn detuning(mut self, delta_omega: f64) -> Self {
        self.delta_omega = delta_omega;
        self
    }

    pub fn relaxation(mut self, t1: f64, t2: f64) -> Self {
        self.t1 = t1;
        self.t2 = t2;
        self
    }

    pub fn equilibrium_magnetization(mut self, m0: f64) -> Self {
        self.m0 = m0;
        self
    }

    pub fn gyromagnetic_ratio(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn build(self) -> Result<SpinSystemParams> {
        require_finite("omega0", self.omega0)?;
        require_finite("omega1", self.omega1)?;
        if !(self.omega1 >= 0.0) {
            return Err(Error::Domain {
                name: "omega1",
                requirement: ">= 0",
                value: self.omega1,
            });
        }
        require_finite("delta_omega", self.delta_omega)?;
        let (tau_c, kappa) = match self.bath {
            BathSpec::CorrelationTime(tau_c) => {
                require_positive("tau_c", tau_c)?;
                require_finite("tau_c", tau_c)?;
                (tau_c, (2.0 / tau_c).sqrt())
            }
            BathSpec::Strength(kappa) => {
                require_positive("kappa", kappa)?;
                require_finite("kappa", kappa)?;
                (2.0 / (kappa * kappa), kappa)
            }
        };
        require_positive("T1", self.t1)?;
        require_positive("T2", self.t2)?;
        require_finite("M0", self.m0)?;
        if !(self.m0 >= 0.0) {
            return Err(Error::Domain {
                name: "M0",
                requirement: ">= 0",
                value: self.m0,
            });
        }
        require_finite("gamma", self.gamma)?;
        if self.gamma == 0.0 {
            return Err(Error::Domain {
                name: "gamma",
                requirement: "non-zero",
                value: self.gamma,
            });
        }
        check_timescale("tau_c*omega1", tau_c * self.omega1)?;
        check_timescale("tau_c*|delta_omega|", tau_c * self.delta_omega.abs())?;
        Ok(SpinSystemParams {
            omega0: self.omega0,
            omega1: self.omega1,
            delta_omega: self.delta_omega,
            tau_c,
            kappa,
            t1: self.t1,
            t2: self.t2,
            m0: self.m0,
            gamma: self.gamma,
        })
    }
}

fn check_timescale(which: &'static str, value: f64) -> Result<()> {
    if value > TIMESCALE_HARD_LIMIT {
        return Err(Error::TimescaleSeparation {
            which,
            value,
            limit: TIMESCALE_HARD_LIMIT,
        });
    }
    if value > TIMESCALE_WARN_LIMIT {
        log::warn!(
            "{which} = {value:.3e} is above {TIMESCALE_WARN_LIMIT}; second-order truncation may be inaccurate"
        );
    }
    Ok(())
}

impl SpinSystemParams {
    pub fn builder(omega0: f64, omega1: f64, bath: BathSpec) -> SpinSystemBuilder {
        SpinSystemBuilder::new(omega0, omega1, bath)
    }

    fn to_builder(self) -> SpinSystemBuilder {
        SpinSystemBuilder {
            omega0: self.omega0,
            omega1: self.omega1,
            delta_omega: self.delta_omega,
            bath: BathSpec::CorrelationTime(self.tau_c),
            t1: self.t1,
            t2: self.t2,
            m0: self.m0,
            gamma: self.gamma,
        }
    }

    /// Same system at a different drive amplitude.
    pub fn with_omega1(self, omega1: f64) -> Result<Self> {
        let mut b = self.to_builder();
        b.omega1 = omega1;
        let mut p = b.build()?;
        p.kappa = self.kappa;
        Ok(p)
    }

    /// Same system at a different drive offset.
    pub fn with_detuning(self, delta_omega: f64) -> Result<Self> {
        let mut p = self.to_builder().detuning(delta_omega).build()?;
        p.kappa = self.kappa;
        Ok(p)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn omega1(&self) -> f64 {
        self.omega1
    }
    pub fn omega_drive(&self) -> f64 {
        self.omega0 + self.delta_omega
    }
    /// `Δω = ω − ω₀`
    pub fn delta_omega(&self) -> f64 {
        self.delta_omega
    }
    /// `Ω = ω + ω₀`
    pub fn omega_sum(&self) -> f64 {
        2.0 * self.omega0 + self.delta_omega
    }
    pub fn tau_c(&self) -> f64 {
        self.tau_c
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn t1(&self) -> f64 {
        self.t1
    }
    pub fn t2(&self) -> f64 {
        self.t2
    }
    pub fn m0(&self) -> f64 {
        self.m0
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `Γ(Ω) = ∫₀^∞ e^{iΩτ} e^{−τ/τc} dτ`, split into its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexLorentzian {
    pub absorptive: f64,
    pub dispersive: f64,
}

impl ComplexLorentzian {
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.absorptive, self.dispersive)
    }
}

pub fn compute_gamma(omega: f64, tau_c: f64) -> Result<ComplexLorentzian> {
    require_positive("tau_c", tau_c)?;
    require_finite("Omega", omega)?;
    let x = omega * tau_c;
    let absorptive = tau_c / (1.0 + x * x);
    Ok(ComplexLorentzian {
        absorptive,
        dispersive: absorptive * x,
    })
}

/// Second-order drive susceptibility: frequency shifts and extra damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCoefficients {
    /// Bloch-Siegert shift from the counter-rotating component, rad/s.
    pub omega_bs: f64,
    /// Offset-dependent shift from the co-rotating component, rad/s.
    pub delta_omega_shift: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub eta_z: f64,
}

impl DriveCoefficients {
    pub const ZERO: DriveCoefficients = DriveCoefficients {
        omega_bs: 0.0,
        delta_omega_shift: 0.0,
        eta_x: 0.0,
        eta_y: 0.0,
        eta_z: 0.0,
    };

    /// Coefficients for amplitude `omega1`, offset `delta_omega` and sum frequency `omega_sum`.
    pub fn evaluate(omega1: f64, delta_omega: f64, omega_sum: f64, tau_c: f64) -> Result<Self> {
        let counter = compute_gamma(omega_sum, tau_c)?;
        let co = compute_gamma(delta_omega, tau_c)?;
        let w2 = omega1 * omega1;
        let eta_x = 0.5 * w2 * counter.absorptive;
        let co_damping = w2 * co.absorptive;
        Ok(DriveCoefficients {
            omega_bs: 0.5 * w2 * counter.dispersive,
            // No ½ here, unlike omega_bs.
            delta_omega_shift: w2 * co.dispersive,
            eta_x,
            eta_y: eta_x + co_damping,
            eta_z: 2.0 * eta_x + co_damping,
        })
    }
}

pub fn compute_coefficients(p: &SpinSystemParams) -> DriveCoefficients {
    DriveCoefficients::evaluate(p.omega1, p.delta_omega(), p.omega_sum(), p.tau_c)
        .expect("validated parameters always give finite coefficients")
}

/// Asymptotic Bloch-Siegert resonance-field shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochSiegertShift {
    /// Field shift, tesla.
    pub field_shift: f64,
    /// `ω₁²/(2Ω)` at resonance, rad/s.
    pub omega_bs_asymptotic: f64,
    /// Whether `Ωτc > 1`, i.e. whether the asymptote is a fair approximation.
    pub asymptotic_valid: bool,
}

pub fn asymptotic_bs_shift(p: &SpinSystemParams) -> Result<BlochSiegertShift> {
    if p.delta_omega() != 0.0 {
        return Err(Error::Precondition(format!(
            "resonance-field shift needs an on-resonance drive, got delta_omega = {:e} rad/s",
            p.delta_omega()
        )));
    }
    if p.omega0 == 0.0 {
        return Err(Error::Domain {
            name: "omega0",
            requirement: "non-zero",
            value: p.omega0,
        });
    }
    let w2 = p.omega1 * p.omega1;
    Ok(BlochSiegertShift {
        field_shift: -(w2 / (4.0 * p.omega0)) / p.gamma,
        omega_bs_asymptotic: bloch_siegert_limit(p.omega1, p.omega_sum()),
        asymptotic_valid: p.omega_sum().abs() * p.tau_c > 1.0,
    })
}

/// `ω₁²/(2Ω)`, the `Ωτc → ∞` limit of the Bloch-Siegert shift.
pub fn bloch_siegert_limit(omega1: f64, omega_sum: f64) -> f64 {
    omega1 * omega1 / (2.0 * omega_sum)
}

/// `B₁²/(16B₀)` with `B₁ = −2ω₁/γ` and `B₀ = −ω₀/γ`.
pub fn field_shift_from_fields(omega0: f64, omega1: f64, gamma: f64) -> f64 {
    let b1 = -2.0 * omega1 / gamma;
    let b0 = -omega0 / gamma;
    b1 * b1 / (16.0 * b0)
}

/// Linear and quadratic damping of a longitudinal state under constant
/// drive; the real part of the nutation eigenvalue. A phase-alternating
/// refocused train decays at the same rate.
pub fn nutation_decay_rate(p: &SpinSystemParams) -> f64 {
    let c = compute_coefficients(p);
    0.5 * (1.0 / p.t1 + 1.0 / p.t2 + c.eta_z + c.eta_y)
}

/// Quadratic coefficient of [`nutation_decay_rate`] in `ω₁²`.
pub fn refocused_curvature(tau_c: f64, omega_sum: f64, delta_omega: f64) -> Result<f64> {
    let counter = compute_gamma(omega_sum, tau_c)?;
    let co = compute_gamma(delta_omega, tau_c)?;
    Ok(0.75 * counter.absorptive + co.absorptive)
}

/// Inverts [`refocused_curvature`] at `Δω = 0` for `τc`. The curvature is
/// strictly increasing in `τc`, so bisection on a growing bracket suffices.
pub fn tau_c_from_refocused_curvature(curvature: f64, omega_sum: f64) -> Result<f64> {
    require_positive("curvature", curvature)?;
    require_finite("curvature", curvature)?;
    require_finite("Omega", omega_sum)?;
    let f = |tau: f64| 0.75 * tau / (1.0 + omega_sum * omega_sum * tau * tau) + tau;
    // Small-τc solution, exact as Ωτc → 0, and always an upper bound.
    let mut hi = curvature / 1.75;
    let mut lo = curvature / 1.75 / 2.0;
    while f(hi) < curvature {
        hi *= 2.0;
    }
    while f(lo) > curvature {
        lo *= 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < curvature {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact frequency and damping of a resonant constant-drive nutation, from
/// the eigenvalues of the longitudinal/transverse block of the Bloch matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutationEigen {
    pub frequency: f64,
    pub damping_rate: f64,
}

pub fn nutation_eigen(p: &SpinSystemParams) -> NutationEigen {
    let c = compute_coefficients(p);
    let rz = 1.0 / p.t1 + c.eta_z;
    let ry = 1.0 / p.t2 + c.eta_y;
    let half_gap = 0.5 * (rz - ry);
    NutationEigen {
        frequency: (p.omega1 * p.omega1 - half_gap * half_gap).max(0.0).sqrt(),
        damping_rate: 0.5 * (rz + ry),
    }
}

/// Small `Ωτc` approximation of the nutation frequency, with the gap term entering
/// with a positive sign.
pub fn nutation_frequency_approx(p: &SpinSystemParams) -> f64 {
    let w2 = p.omega1 * p.omega1;
    let gap = 1.0 / p.t2 - 1.0 / p.t1 - 0.5 * w2 * p.tau_c;
    (w2 + 0.25 * gap * gap).sqrt()
}

/// Small `Ωτc` approximation of the nutation damping.
pub fn nutation_damping_approx(p: &SpinSystemParams) -> f64 {
    0.5 * (1.0 / p.t1 + 1.0 / p.t2) + 1.75 * p.omega1 * p.omega1 * p.tau_c
}
