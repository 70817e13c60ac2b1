use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One member of a drive-inhomogeneous ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleMember {
    /// Multiplier on the nominal drive amplitude.
    pub scale: f64,
    pub weight: f64,
}

/// Discrete distribution of drive-amplitude scales, sorted by scale, with
/// weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct InhomogeneitySpec {
    members: Vec<EnsembleMember>,
}

// Physicists' Gauss-Hermite nodes and weights, 7 points.
const GH_NODES: [f64; 7] = [
    -2.651_961_356_835_233,
    -1.673_551_628_767_471,
    -0.816_287_882_858_965,
    0.0,
    0.816_287_882_858_965,
    1.673_551_628_767_471,
    2.651_961_356_835_233,
];
const GH_WEIGHTS: [f64; 7] = [
    0.000_971_781_245_099_519,
    0.054_515_582_819_127,
    0.425_607_252_610_128,
    0.810_264_617_556_808,
    0.425_607_252_610_128,
    0.054_515_582_819_127,
    0.000_971_781_245_099_519,
];

impl InhomogeneitySpec {
    /// Normalizes the weights and sorts by scale.
    pub fn new(members: impl IntoIterator<Item = EnsembleMember>) -> Result<Self> {
        let mut members: Vec<_> = members.into_iter().collect();
        if members.is_empty() {
            return Err(Error::Precondition("ensemble needs at least one member".into()));
        }
        for m in &members {
            if !(m.scale > 0.0) || !m.scale.is_finite() {
                return Err(Error::Domain {
                    name: "scale",
                    requirement: "> 0 and finite",
                    value: m.scale,
                });
            }
            if !(m.weight >= 0.0) || !m.weight.is_finite() {
                return Err(Error::Domain {
                    name: "weight",
                    requirement: ">= 0 and finite",
                    value: m.weight,
                });
            }
        }
        let total: f64 = members.iter().map(|m| m.weight).sum();
        if !(total > 0.0) {
            return Err(Error::Precondition("ensemble weights sum to zero".into()));
        }
        for m in &mut members {
            m.weight /= total;
        }
        members.sort_by(|a, b| a.scale.total_cmp(&b.scale));
        Ok(Self { members })
    }

    pub fn homogeneous() -> Self {
        Self {
            members: alloc::vec![EnsembleMember {
                scale: 1.0,
                weight: 1.0
            }],
        }
    }

    /// `points` equally weighted scales spread evenly over `1 ± half_width`.
    pub fn uniform(half_width: f64, points: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&half_width) {
            return Err(Error::Domain {
                name: "half_width",
                requirement: "in [0, 1)",
                value: half_width,
            });
        }
        if points == 0 {
            return Err(Error::Precondition("uniform ensemble needs at least one point".into()));
        }
        if points == 1 || half_width == 0.0 {
            return Ok(Self::homogeneous());
        }
        let n = points as f64 - 1.0;
        Self::new((0..points).map(|i| EnsembleMember {
            scale: 1.0 - half_width + 2.0 * half_width * i as f64 / n,
            weight: 1.0,
        }))
    }

    /// Seven-point Gauss-Hermite discretization of a normal distribution of
    /// scales with mean 1 and standard deviation `sigma`.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let widest = core::f64::consts::SQRT_2 * GH_NODES[6];
        if !(sigma >= 0.0 && sigma * widest < 1.0) {
            return Err(Error::Domain {
                name: "sigma",
                requirement: "small enough that every node scale stays positive",
                value: sigma,
            });
        }
        if sigma == 0.0 {
            return Ok(Self::homogeneous());
        }
        Self::new(GH_NODES.iter().zip(GH_WEIGHTS).map(|(&x, w)| EnsembleMember {
            scale: 1.0 + sigma * core::f64::consts::SQRT_2 * x,
            weight: w,
        }))
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Weighted mean of `values`, one per member, in member order.
    pub fn weighted_mean(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.members.len() {
            return Err(Error::Precondition(format!(
                "{} values for {} ensemble members",
                values.len(),
                self.members.len()
            )));
        }
        Ok(self
            .members
            .iter()
            .zip(values)
            .map(|(m, v)| m.weight * v)
            .sum())
    }
}
