//! Globally adaptive Gauss-Kronrod (7, 15) integration on a finite interval.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;


use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]` until the summed error estimate drops below
/// `rel_tol * |integral|`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    const MAX_PANELS: usize = 4096;
    let mut heap = BinaryHeap::new();
    let first = gk15(&f, a, b);
    let (mut value, mut error) = (first.value, first.error);
    heap.push(first);
    while error > (rel_tol * value.abs()).max(f64::MIN_POSITIVE) {
        if heap.len() >= MAX_PANELS {
            return Err(Error::QuadratureTolerance { value, error });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum from the panels so the running update does not leak rounding.
    let total = heap.iter().map(|p| p.value).sum();
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 0.0).abs() < 1e-13);
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_exponential() {
        // ∫₀^40 e^{-t} cos(10 t) dt = (1 - e^{-40}(cos 400 - 10 sin 400)) / 101
        let v = integrate(|t| (-t).exp() * (10.0 * t).cos(), 0.0, 40.0, 1e-12).unwrap();
        let exact = (1.0 - (-40.0f64).exp() * (400.0f64.cos() - 10.0 * 400.0f64.sin())) / 101.0;
        assert!(((v - exact) / exact).abs() < 1e-11, "{v} vs {exact}");
    }
}
