//! Closed-form reference models used to check the numerical code.
//!
//! Nothing here calls into `blackbox-core`; each function is the textbook
//! expression written out directly.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Parallel RLC impedance `R / (1 + jQ(f/f₀ - f₀/f))`.
pub fn parallel_rlc_impedance(f0_hz: f64, q: f64, r: f64, f_hz: f64) -> Complex64 {
    let detune = f_hz / f0_hz - f0_hz / f_hz;
    Complex64::new(r, 0.0) / Complex64::new(1.0, q * detune)
}

/// Upper-half-plane pole of a parallel RLC resonator, rad/s.
pub fn parallel_rlc_pole(f0_hz: f64, q: f64) -> Complex64 {
    let w0 = 2.0 * PI * f0_hz;
    Complex64::new(-w0 / (2.0 * q), w0 * (1.0 - 1.0 / (4.0 * q * q)).sqrt())
}

/// Residue of `Z(s) = (s/C) / (s² + sω₀/Q + ω₀²)` at the upper pole.
pub fn parallel_rlc_residue(f0_hz: f64, q: f64, r: f64) -> Complex64 {
    let w0 = 2.0 * PI * f0_hz;
    let c = q / (w0 * r);
    let p = parallel_rlc_pole(f0_hz, q);
    p / (c * Complex64::new(0.0, 2.0 * p.im))
}

/// Time-averaged voltage of an overdamped junction, `R√(I² - I_c²)` above
/// `I_c` and zero below.
pub fn overdamped_voltage(i: f64, i_c: f64, r: f64) -> f64 {
    if i.abs() <= i_c {
        0.0
    } else {
        i.signum() * r * (i * i - i_c * i_c).sqrt()
    }
}
