//! Excitation and speed-governor controls shared by every generator variant.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvrParams {
    /// Voltage transducer time constant (s).
    pub t_r: f64,
    pub k_a: f64,
    /// Exciter time constant (s).
    pub t_a: f64,
    pub v_f_min: f64,
    pub v_f_max: f64,
}

impl Default for AvrParams {
    fn default() -> Self {
        Self {
            t_r: 0.02,
            k_a: 50.0,
            t_a: 0.05,
            v_f_min: -3.0,
            v_f_max: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExciterState {
    pub v_meas: f64,
    pub v_f: f64,
    pub v_ref: f64,
    /// Field voltage bias that holds the initial operating point.
    pub v_f0: f64,
}

impl ExciterState {
    pub fn steady(v_term: f64, v_f: f64) -> Self {
        Self {
            v_meas: v_term,
            v_f,
            v_ref: v_term,
            v_f0: v_f,
        }
    }

    /// `(d v_meas/dt, d v_f/dt)`; the field derivative is zeroed when it would
    /// push further into a ceiling.
    pub fn derivs(&self, p: &AvrParams, v_term: f64) -> (f64, f64) {
        let dv_meas = (v_term - self.v_meas) / p.t_r;
        let target = self.v_f0 + p.k_a * (self.v_ref - self.v_meas);
        let mut dv_f = (target - self.v_f) / p.t_a;
        if (self.v_f >= p.v_f_max && dv_f > 0.0) || (self.v_f <= p.v_f_min && dv_f < 0.0) {
            dv_f = 0.0;
        }
        (dv_meas, dv_f)
    }

    pub fn clamp(v_f: f64, p: &AvrParams) -> f64 {
        v_f.clamp(p.v_f_min, p.v_f_max)
    }
}

/// One Euler step of the exciter.
pub fn avr_step(state: ExciterState, v_term: f64, p: &AvrParams, h: f64) -> ExciterState {
    let (dm, df) = state.derivs(p, v_term);
    ExciterState {
        v_meas: state.v_meas + h * dm,
        v_f: ExciterState::clamp(state.v_f + h * df, p),
        ..state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorParams {
    /// Permanent droop (pu speed per pu power).
    pub r_droop: f64,
    /// Servo/turbine lag (s).
    pub t_servo: f64,
    pub p_max: f64,
}

impl Default for GovernorParams {
    fn default() -> Self {
        Self {
            r_droop: 0.05,
            t_servo: 0.5,
            p_max: 1.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorState {
    pub p_m: f64,
    pub p_ref: f64,
}

impl GovernorState {
    pub fn droop_target(&self, p: &GovernorParams, omega: f64) -> f64 {
        self.p_ref + (1.0 - omega) / p.r_droop
    }

    pub fn deriv(&self, p: &GovernorParams, omega: f64) -> f64 {
        let target = self.droop_target(p, omega).clamp(0.0, p.p_max);
        (target - self.p_m) / p.t_servo
    }
}

pub fn governor_step(
    state: GovernorState,
    omega: f64,
    p: &GovernorParams,
    h: f64,
) -> GovernorState {
    GovernorState {
        p_m: (state.p_m + h * state.deriv(p, omega)).clamp(0.0, p.p_max),
        ..state
    }
}
