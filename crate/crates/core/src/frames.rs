//! Amplitude-invariant Park transform.
//!
//! The d axis sits at angle `theta` from phase a and the q axis leads it by
//! 90 degrees. A balanced set `cos(theta + phi)`, `cos(theta + phi - 2pi/3)`, ...
//! maps to `(cos phi, sin phi, 0)`, so the complex number `d + jq` is the
//! peak phasor of phase a expressed in the rotating frame.

use std::f64::consts::PI;

use num_complex::Complex64;

const TWO_PI_3: f64 = 2.0 * PI / 3.0;

pub fn abc_to_dq0(abc: [f64; 3], theta: f64) -> [f64; 3] {
    let (sa, ca) = theta.sin_cos();
    let (sb, cb) = (theta - TWO_PI_3).sin_cos();
    let (sc, cc) = (theta + TWO_PI_3).sin_cos();
    let [a, b, c] = abc;
    [
        2.0 / 3.0 * (a * ca + b * cb + c * cc),
        -2.0 / 3.0 * (a * sa + b * sb + c * sc),
        (a + b + c) / 3.0,
    ]
}

pub fn dq0_to_abc(dq0: [f64; 3], theta: f64) -> [f64; 3] {
    let [d, q, z] = dq0;
    let phase = |th: f64| {
        let (s, c) = th.sin_cos();
        d * c - q * s + z
    };
    [
        phase(theta),
        phase(theta - TWO_PI_3),
        phase(theta + TWO_PI_3),
    ]
}

/// `d + jq` of an abc triple in the frame at `theta`.
pub fn abc_to_complex(abc: [f64; 3], theta: f64) -> Complex64 {
    let [d, q, _] = abc_to_dq0(abc, theta);
    Complex64::new(d, q)
}

/// Instantaneous values of the balanced set whose phase-a peak phasor is `x`
/// in a frame at angle `theta`.
pub fn complex_to_abc(x: Complex64, theta: f64) -> [f64; 3] {
    dq0_to_abc([x.re, x.im, 0.0], theta)
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Symmetrical components `(zero, positive, negative)` of phase phasors.
pub fn sequence_components(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 3] {
    let op = Complex64::from_polar(1.0, TWO_PI_3);
    let op2 = op * op;
    [
        (a + b + c) / 3.0,
        (a + op * b + op2 * c) / 3.0,
        (a + op2 * b + op * c) / 3.0,
    ]
}

/// Phase phasors `(a, b, c)` from `(zero, positive, negative)` sequence values.
pub fn phase_components(z: Complex64, p: Complex64, n: Complex64) -> [Complex64; 3] {
    let op = Complex64::from_polar(1.0, TWO_PI_3);
    let op2 = op * op;
    [z + p + n, z + op2 * p + op * n, z + op * p + op2 * n]
}
