//! Phase-alternating pulse blocks, supercycles and refocused nutation.

mod dsl;
mod ensemble;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;

use crate::bloch::{
    AffineMap,
    oscillation_metrics, propagate, propagate_with, steady_state, DriveProgram, DriveSegment,
    MagnetizationState, NutationMetrics, OscillationTracker, MIN_NUTATION_PERIODS,
};
use crate::error::{require_positive, Error, Result};
use crate::model::SpinSystemParams;

pub use dsl::MAX_EXPANDED_BLOCKS;
pub use ensemble::{EnsembleMember, InhomogeneitySpec};

/// Ordered signed flip angles; a negative angle is a pulse along `−x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseBlock {
    flips: Vec<f64>,
}

impl PulseBlock {
    pub fn new(flips: Vec<f64>) -> Result<Self> {
        if flips.is_empty() {
            return Err(Error::Precondition("a pulse block needs at least one pulse".into()));
        }
        for &f in &flips {
            if f == 0.0 || !f.is_finite() {
                return Err(Error::Domain {
                    name: "flip angle",
                    requirement: "non-zero and finite",
                    value: f,
                });
            }
        }
        Ok(Self { flips })
    }

    pub fn flips(&self) -> &[f64] {
        &self.flips
    }

    /// Same block with every pulse on the opposite axis.
    pub fn inverted(&self) -> Self {
        Self {
            flips: self.flips.iter().map(|f| -f).collect(),
        }
    }

    /// Sum of signed flip angles.
    pub fn net_rotation(&self) -> f64 {
        self.flips.iter().sum()
    }

    /// Sum of unsigned flip angles; the block lasts this over `ω₁`.
    pub fn nominal_angle(&self) -> f64 {
        self.flips.iter().map(|f| f.abs()).sum()
    }
}

/// `{θ, −2θ, θ}`
pub fn build_r3(theta: f64) -> Result<PulseBlock> {
    require_positive("theta", theta)?;
    PulseBlock::new(vec![theta, -2.0 * theta, theta])
}

/// `{θ, −θ}`
pub fn build_r2(theta: f64) -> Result<PulseBlock> {
    require_positive("theta", theta)?;
    PulseBlock::new(vec![theta, -theta])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    R2,
    R3,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::R2 => "R2",
            BlockKind::R3 => "R3",
        }
    }

    pub fn build(self, theta: f64) -> Result<PulseBlock> {
        match self {
            BlockKind::R2 => build_r2(theta),
            BlockKind::R3 => build_r3(theta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockRef {
    pub kind: BlockKind,
    pub inverted: bool,
}

/// Flat list of block references, realized with flip angle `θ` (nominally π).
#[derive(Debug, Clone, PartialEq)]
pub struct Supercycle {
    entries: Vec<BlockRef>,
    theta: f64,
}

/// Canonical text of the eight-block phase-alternating supercycle.
pub const WALTZ_S: &str = "R3 ~R3 ~R3 R3 ~R3 R3 R3 ~R3";

impl Supercycle {
    pub fn new(entries: Vec<BlockRef>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Precondition("a supercycle needs at least one block".into()));
        }
        Ok(Self { entries, theta: PI })
    }

    /// The eight-block supercycle built from R3 and its inverse.
    pub fn waltz() -> Self {
        parse_sequence(WALTZ_S).expect("built-in supercycle parses")
    }

    pub fn with_flip_angle(mut self, theta: f64) -> Result<Self> {
        self.theta = require_positive("theta", theta)?;
        Ok(self)
    }

    pub fn entries(&self) -> &[BlockRef] {
        &self.entries
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Blocks with inversions applied.
    pub fn blocks(&self) -> Vec<PulseBlock> {
        self.entries
            .iter()
            .map(|e| {
                let b = e.kind.build(self.theta).expect("theta validated");
                if e.inverted {
                    b.inverted()
                } else {
                    b
                }
            })
            .collect()
    }

    /// Duration of one pass at nominal amplitude `omega1`.
    pub fn period(&self, omega1: f64) -> f64 {
        self.blocks().iter().map(PulseBlock::nominal_angle).sum::<f64>() / omega1
    }
}

impl fmt::Display for Supercycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if e.inverted {
                f.write_str("~")?;
            }
            f.write_str(e.kind.name())?;
        }
        Ok(())
    }
}

impl FromStr for Supercycle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_sequence(s)
    }
}

pub fn parse_sequence(text: &str) -> Result<Supercycle> {
    Supercycle::new(dsl::parse_blocks(text)?)
}

/// One pass of `sc` as drive segments. Durations follow the nominal
/// `omega1`; amplitudes are scaled by `scale`, so a scale other than one
/// shows up as a flip-angle error.
pub fn expand_to_program(sc: &Supercycle, omega1: f64, scale: f64) -> Result<DriveProgram> {
    require_positive("omega1", omega1)?;
    require_positive("scale", scale)?;
    let mut program = DriveProgram::new();
    for block in sc.blocks() {
        for &flip in block.flips() {
            program.push(DriveSegment::new(
                flip.signum() * omega1 * scale,
                flip.abs() / omega1,
                0.0,
            )?);
        }
    }
    Ok(program)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    /// Number of completed supercycles.
    pub n: u32,
    /// `n · T`, s
    pub t: f64,
    pub mz: f64,
    /// Residual transverse magnetization left by imperfect refocusing.
    pub my: f64,
}

/// Ensemble-averaged magnetization after each requested supercycle count.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySeries {
    pub points: Vec<DecayPoint>,
    /// Supercycle length, s.
    pub period: f64,
    pub params: SpinSystemParams,
}

impl DecaySeries {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn mz(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mz).collect()
    }
}

fn validate_counts(n_values: &[u32]) -> Result<()> {
    if n_values.is_empty() {
        return Err(Error::InsufficientData("no supercycle counts requested".into()));
    }
    if n_values[0] == 0 {
        return Err(Error::Precondition("supercycle counts start at 1".into()));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(
            "supercycle counts must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `(M_z, M_y)` of a single ensemble member after each count in `n_values`.
pub fn simulate_member(
    p: &SpinSystemParams,
    sc: &Supercycle,
    scale: f64,
    n_values: &[u32],
    step: f64,
) -> Result<Vec<(f64, f64)>> {
    validate_counts(n_values)?;
    let program = expand_to_program(sc, p.omega1(), scale)?.with_offset(p.delta_omega());
    let mut s = MagnetizationState::equilibrium(p.m0());
    let mut out = Vec::with_capacity(n_values.len());
    let map = AffineMap::of_program(&program, p, step)?;
    let mut cycle = 0u32;
    for &n in n_values {
        while cycle < n {
            s = map.apply(&s);
            cycle += 1;
        }
        out.push((s.mz, s.my));
    }
    Ok(out)
}

/// Weighted reduction of per-member traces, in member order.
pub fn combine_members(
    p: &SpinSystemParams,
    sc: &Supercycle,
    inh: &InhomogeneitySpec,
    n_values: &[u32],
    traces: &[Vec<(f64, f64)>],
) -> Result<DecaySeries> {
    validate_counts(n_values)?;
    if traces.len() != inh.len() || traces.iter().any(|t| t.len() != n_values.len()) {
        return Err(Error::Precondition(
            "member traces do not match the ensemble and count list".into(),
        ));
    }
    let period = sc.period(p.omega1());
    let points = n_values
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let (mut mz, mut my) = (0.0, 0.0);
            for (m, trace) in inh.members().iter().zip(traces) {
                mz += m.weight * trace[k].0;
                my += m.weight * trace[k].1;
            }
            DecayPoint {
                n,
                t: f64::from(n) * period,
                mz,
                my,
            }
        })
        .collect();
    Ok(DecaySeries {
        points,
        period,
        params: *p,
    })
}

/// Repeats `sc` from equilibrium for every ensemble member and records the
/// weighted magnetization after each count in `n_values`.
pub fn simulate_refocused_nutation(
    p: &SpinSystemParams,
    sc: &Supercycle,
    inh: &InhomogeneitySpec,
    n_values: &[u32],
    step: f64,
) -> Result<DecaySeries> {
    require_positive("omega1", p.omega1())?;
    let traces = inh
        .members()
        .iter()
        .map(|m| simulate_member(p, sc, m.scale, n_values, step))
        .collect::<Result<Vec<_>>>()?;
    combine_members(p, sc, inh, n_values, &traces)
}

/// Closed-form ratio of transverse leakage after one R3 to that after two
/// R2 blocks of the same total length.
pub fn leakage_ratio(p: &SpinSystemParams) -> Result<f64> {
    let w1 = require_positive("omega1", p.omega1())?;
    let rates = 1.0 / p.t1() + 1.0 / p.t2() + 3.5 * w1 * w1 * p.tau_c();
    Ok(-(PI * rates / (2.0 * w1)).tanh())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageComparison {
    /// `M_y` after one R3.
    pub r3: f64,
    /// `M_y` after two R2.
    pub r2_twice: f64,
}

impl LeakageComparison {
    pub fn ratio(&self) -> f64 {
        self.r3 / self.r2_twice
    }
}

/// Integrates one R3 and two R2 blocks (θ = π) from equilibrium.
pub fn simulate_leakage(p: &SpinSystemParams, step: f64) -> Result<LeakageComparison> {
    let w1 = require_positive("omega1", p.omega1())?;
    let run = |text: &str| -> Result<f64> {
        let program = expand_to_program(&parse_sequence(text)?, w1, 1.0)?.with_offset(p.delta_omega());
        Ok(propagate(&MagnetizationState::equilibrium(p.m0()), &program, p, step)?.my)
    };
    Ok(LeakageComparison {
        r3: run("R3")?,
        r2_twice: run("R2 2")?,
    })
}

/// Constant-drive nutation of the whole ensemble; metrics of the
/// weighted `M_z` about its weighted steady state.
pub fn cw_ensemble_envelope(
    p: &SpinSystemParams,
    inh: &InhomogeneitySpec,
    duration: f64,
    step: f64,
) -> Result<NutationMetrics> {
    let w1 = require_positive("omega1", p.omega1())?;
    let mut sum: Vec<f64> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut asymptote = 0.0;
    for (i, m) in inh.members().iter().enumerate() {
        let seg = DriveSegment::new(w1 * m.scale, duration, p.delta_omega())?;
        asymptote += m.weight * steady_state(p, &seg)?.map_or(0.0, |v| v[2]);
        let program = DriveProgram::from_segments([seg]);
        let mut k = 0usize;
        propagate_with(&MagnetizationState::equilibrium(p.m0()), &program, p, step, |s, _| {
            if i == 0 {
                sum.push(m.weight * s.mz);
                times.push(s.t);
            } else {
                sum[k] += m.weight * s.mz;
            }
            k += 1;
        })?;
    }
    let mut tracker = OscillationTracker::default();
    tracker.push(0.0, p.m0() - asymptote);
    for (t, v) in times.iter().zip(&sum) {
        tracker.push(*t, v - asymptote);
    }
    oscillation_metrics(&tracker, MIN_NUTATION_PERIODS).map_err(|e| match e {
        Error::InsufficientData(msg) => Error::InsufficientData(format!("ensemble envelope: {msg}")),
        other => other,
    })
}
