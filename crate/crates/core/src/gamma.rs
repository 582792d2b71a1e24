//! Gamma function via the Lanczos approximation (g = 607/128, 15 coefficients).
//!
//! Relative accuracy is around 1e-14 on the positive real axis, comfortably
//! inside the 1e-12 target for the closed-form constants. `ln_gamma` is the
//! workhorse: ratios of huge Gamma values (arguments in the hundreds) must be
//! computed in log space to avoid overflow.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_746,
    -0.491_913_816_097_620_2,
    3.399_464_998_481_189e-5,
    4.652_362_892_704_858e-5,
    -9.837_447_530_487_956e-5,
    1.580_887_032_249_125e-4,
    -0.210_264_441_724_104_88e-3,
    0.217_439_618_115_212_64e-3,
    -1.643_181_065_367_639e-4,
    8.441_822_398_385_274e-5,
    -0.261_908_384_015_814_09e-4,
    0.368_991_826_595_316_23e-5,
];

/// Natural log of Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires a positive argument, got {x}");
    if x < 0.5 {
        // reflection keeps the series argument away from zero
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let mut series = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        series += c / (x + k as f64 - 1.0);
    }
    let t = x + LANCZOS_G - 0.5;
    0.5 * (2.0 * PI).ln() + (x - 0.5) * t.ln() - t + series.ln()
}

/// Gamma(x) for real x away from the non-positive integers.
pub fn gamma(x: f64) -> f64 {
    if x > 0.0 {
        ln_gamma(x).exp()
    } else {
        // Euler reflection
        PI / ((PI * x).sin() * ln_gamma(1.0 - x).exp())
    }
}
