//! Inertia-only generator: internal EMF behind an impedance, swing equation
//! for speed and a first-order field lag for the EMF magnitude.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedSgParams {
    /// Inertia constant (s).
    pub h: f64,
    /// Field circuit time constant (s).
    pub tau_f: f64,
    pub x_s: f64,
    pub r_s: f64,
}

impl SimplifiedSgParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.tau_f > 0.0 && self.x_s > 0.0 && self.r_s >= 0.0) {
            return Err(SimError::config(format!(
                "invalid simplified SG parameters {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifiedState {
    pub omega: f64,
    pub delta: f64,
    pub e_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifiedDerivs {
    pub d_omega: f64,
    pub d_e_s: f64,
    pub d_delta: f64,
    /// Electrical power delivered by the internal EMF.
    pub p_e: f64,
}

/// Derivatives given the stator current `i` (machine base, EMF-aligned frame,
/// generator convention).
pub fn simplified_derivs_from_current(
    s: &SimplifiedState,
    i: Complex64,
    p_m: f64,
    v_f: f64,
    params: &SimplifiedSgParams,
    omega_b: f64,
) -> SimplifiedDerivs {
    let p_e = s.e_s * i.re;
    SimplifiedDerivs {
        d_omega: (p_m - p_e) / (2.0 * params.h),
        d_e_s: (v_f - s.e_s) / params.tau_f,
        d_delta: omega_b * (s.omega - 1.0),
        p_e,
    }
}

/// Derivatives given the terminal voltage; the stator current follows from
/// the EMF-behind-impedance circuit.
pub fn simplified_sg_derivs(
    s: &SimplifiedState,
    v_terminal: Complex64,
    p_m: f64,
    v_f: f64,
    params: &SimplifiedSgParams,
    omega_b: f64,
) -> SimplifiedDerivs {
    let z = Complex64::new(params.r_s, params.x_s);
    let i = (Complex64::new(s.e_s, 0.0) - v_terminal) / z;
    simplified_derivs_from_current(s, i, p_m, v_f, params, omega_b)
}

/// Steady state from terminal phasors (synchronous frame, machine base).
/// Returns the state and the field voltage that holds it.
pub fn simplified_init(
    v: Complex64,
    i: Complex64,
    params: &SimplifiedSgParams,
) -> (SimplifiedState, f64) {
    let e = v + Complex64::new(params.r_s, params.x_s) * i;
    let state = SimplifiedState {
        omega: 1.0,
        delta: e.arg(),
        e_s: e.norm(),
    };
    (state, e.norm())
}
