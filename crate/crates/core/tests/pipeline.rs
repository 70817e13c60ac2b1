use std::f64::consts::PI;

use drivesus_core::fit::{fit_decay_curve, fit_decay_rate, fit_parabola, AsymptoteMode};
use drivesus_core::model::{nutation_decay_rate, BathSpec, SpinSystemParams};
use drivesus_core::sequence::{simulate_refocused_nutation, DecaySeries, InhomogeneitySpec, Supercycle};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const T1: f64 = 1.34;
const T2: f64 = 0.81;
const TAU_C: f64 = 1.32e-11;
const LARMOR: f64 = 2.0 * PI * 500e6;

fn params(khz: f64) -> SpinSystemParams {
    SpinSystemParams::builder(LARMOR, 2.0 * PI * 1e3 * khz, BathSpec::CorrelationTime(TAU_C))
        .relaxation(T1, T2)
        .build()
        .unwrap()
}

fn series(khz: f64, inh: &InhomogeneitySpec) -> DecaySeries {
    let p = params(khz);
    let sc = Supercycle::waltz();
    let period = sc.period(p.omega1());
    let counts: Vec<u32> = (1..=121).step_by(5).filter(|&n| f64::from(n) * period <= 0.5).collect();
    simulate_refocused_nutation(&p, &sc, inh, &counts, 0.01 / p.omega1()).unwrap()
}

fn noisy(mz: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    mz.iter().map(|m| m + noise.sample(&mut rng)).collect()
}

#[test]
fn refocused_rate_at_twenty_khz() {
    let s = series(20.0, &InhomogeneitySpec::homogeneous());
    let fit = fit_decay_rate(&s, AsymptoteMode::SubtractFitted).unwrap();
    let expected = nutation_decay_rate(&s.params);
    assert!((fit.rate / expected - 1.0).abs() < 0.05, "{} vs {expected}", fit.rate);
    // The linear-in-tau_c reading of the same curve is off by more than 10%.
    let w1 = s.params.omega1();
    let linear = (T1 + T2) / (2.0 * T1 * T2) + w1 * w1 * TAU_C;
    assert!((fit.rate / linear - 1.0).abs() > 0.1);
}

#[test]
fn refocused_asymptote_vanishes() {
    let s = series(10.0, &InhomogeneitySpec::homogeneous());
    let fit = fit_decay_rate(&s, AsymptoteMode::SubtractFitted).unwrap();
    let raw = fit_decay_rate(&s, AsymptoteMode::RawLog).unwrap();
    assert!(fit.asymptote.abs() < 1e-6, "{}", fit.asymptote);
    assert!((raw.rate / fit.rate - 1.0).abs() < 1e-5);
}

#[test]
fn noisy_rate_coverage() {
    let s = series(20.0, &InhomogeneitySpec::homogeneous());
    let truth = nutation_decay_rate(&s.params);
    let (t, mz) = (s.times(), s.mz());
    let covered = (0..100)
        .filter(|&seed| {
            let fit = fit_decay_curve(&t, &noisy(&mz, 0.01, seed), AsymptoteMode::RawLog).unwrap();
            (fit.rate - truth).abs() <= fit.ci95_halfwidth
        })
        .count();
    assert!(covered >= 93, "{covered}/100");
}

#[test]
fn sweep_recovers_correlation_time() {
    let inh = InhomogeneitySpec::homogeneous();
    let sweep: Vec<DecaySeries> = (3..=20).map(|k| series(f64::from(k), &inh)).collect();
    let recover = |sigma: f64| {
        let pts: Vec<(f64, f64)> = sweep
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mz = if sigma > 0.0 { noisy(&s.mz(), sigma, i as u64) } else { s.mz() };
                (s.params.omega1(), fit_decay_curve(&s.times(), &mz, AsymptoteMode::RawLog).unwrap().rate)
            })
            .collect();
        let tau = fit_parabola(&pts).unwrap().model_tau_c(sweep[0].params.omega_sum()).unwrap();
        (tau.value / TAU_C - 1.0).abs()
    };
    assert!(recover(0.0) < 1e-6, "{}", recover(0.0));
    let errors: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|&s| recover(s)).collect();
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
    assert!(errors[2] < 1e-5);
}

#[test]
fn drive_inhomogeneity_is_refocused() {
    let narrow = series(20.0, &InhomogeneitySpec::homogeneous());
    let wide = series(20.0, &InhomogeneitySpec::gaussian(0.05).unwrap());
    let a = fit_decay_rate(&narrow, AsymptoteMode::RawLog).unwrap().rate;
    let b = fit_decay_rate(&wide, AsymptoteMode::RawLog).unwrap().rate;
    assert!((b / a - 1.0).abs() < 0.02, "{a} vs {b}");
}
