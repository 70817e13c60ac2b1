use num_complex::Complex64;

use crate::linalg::Mat2;

/// `(F_x, F_y, F_z)` of the frame co-rotating at offset `delta_omega`:
/// `U I_α U†` with `U = exp(−iΔω t I_z)`.
pub fn corotating_observables(delta_omega: f64, t: f64) -> [Mat2; 3] {
    let half = 0.5 * delta_omega * t;
    let u = Mat2::diagonal(Complex64::from_polar(1.0, -half), Complex64::from_polar(1.0, half));
    let ud = u.dagger();
    [Mat2::spin_x(), Mat2::spin_y(), Mat2::spin_z()].map(|op| u * op * ud)
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Largest entry of `[F_k, F_m] − i Σ_p ε_{pkm} F_p` over all index pairs.
pub fn commutator_identity_check(delta_omega: f64, t: f64) -> f64 {
    let f = corotating_observables(delta_omega, t);
    let i = Complex64::new(0.0, 1.0);
    let mut worst: f64 = 0.0;
    for k in 0..3 {
        for m in 0..3 {
            let mut rhs = Mat2::ZERO;
            for (p, fp) in f.iter().enumerate() {
                rhs += *fp * (i * levi_civita(p, k, m));
            }
            worst = worst.max((f[k].commutator(&f[m]) - rhs).max_abs());
        }
    }
    worst
}
