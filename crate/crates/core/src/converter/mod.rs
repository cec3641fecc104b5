//! Grid-side voltage-source converter: PLL, outer power loops with frequency
//! droop, fault ride-through current limiting, inner current loop (EMT only)
//! and DC-link dynamics.
//!
//! Control currents use the PLL frame with `i_q` positive for reactive power
//! injection: with the PLL locked, `P = V i_d` and `Q = V i_q`, and the
//! injected phasor is `(i_d - j i_q) e^{j theta}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConverterModel {
    EmtAvg,
    Phasor,
}

impl ConverterModel {
    pub const ALL: [ConverterModel; 2] = [ConverterModel::EmtAvg, ConverterModel::Phasor];

    pub fn name(&self) -> &'static str {
        match self {
            ConverterModel::EmtAvg => "emt_avg",
            ConverterModel::Phasor => "phasor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VscParams {
    pub s_rated_mva: f64,
    /// Filter resistance and reactance (pu, converter base).
    pub r_f: f64,
    pub x_f: f64,
    /// DC-link energy constant: stored energy at rated voltage over rated power, times two (s).
    pub c_dc: f64,
    pub i_max: f64,
    /// Droop gain (pu power per pu frequency).
    pub droop_gain: f64,
    pub deadband_hz: f64,
    pub frt_threshold: f64,
    /// Reactive current per pu voltage dip, in units of `i_max`.
    pub frt_gain: f64,
    pub pll_kp: f64,
    pub pll_ki: f64,
    /// Frequency measurement filter (s).
    pub t_freq: f64,
    /// Power and voltage measurement filter (s).
    pub t_meas: f64,
    pub outer_kp: f64,
    pub outer_ki: f64,
    /// Closed-loop time constant of the current loop (s).
    pub tau_c: f64,
    pub dc_kp: f64,
    pub dc_ki: f64,
    /// DC voltage above which the chopper dissipates power.
    pub chopper_v: f64,
    pub chopper_gain: f64,
}

impl Default for VscParams {
    fn default() -> Self {
        Self {
            s_rated_mva: 100.0,
            r_f: 0.003,
            x_f: 0.15,
            c_dc: 0.05,
            i_max: 1.1,
            droop_gain: 20.0,
            deadband_hz: 0.1,
            frt_threshold: 0.9,
            frt_gain: 2.0,
            pll_kp: 70.0,
            pll_ki: 2500.0,
            t_freq: 0.02,
            t_meas: 0.01,
            outer_kp: 0.2,
            outer_ki: 20.0,
            tau_c: 0.005,
            dc_kp: 2.0,
            dc_ki: 20.0,
            chopper_v: 1.1,
            chopper_gain: 50.0,
        }
    }
}

impl VscParams {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let all = [
            self.s_rated_mva,
            self.r_f,
            self.x_f,
            self.c_dc,
            self.i_max,
            self.droop_gain,
            self.deadband_hz,
            self.frt_threshold,
            self.frt_gain,
            self.pll_kp,
            self.pll_ki,
            self.t_freq,
            self.t_meas,
            self.outer_kp,
            self.outer_ki,
            self.tau_c,
            self.dc_kp,
            self.dc_ki,
            self.chopper_v,
            self.chopper_gain,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            errors.push("converter parameters must be finite".to_string());
        }
        if self.i_max < 1.0 {
            errors.push(format!(
                "converter current limit {} must be at least 1 pu",
                self.i_max
            ));
        }
        if !(self.c_dc > 0.0) {
            errors.push("DC-link capacitance must be positive".to_string());
        }
        if !(self.x_f > 0.0 && self.r_f >= 0.0 && self.s_rated_mva > 0.0) {
            errors.push("converter filter and rating must be positive".to_string());
        }
        if !(self.t_freq > 0.0 && self.t_meas > 0.0 && self.tau_c > 0.0) {
            errors.push("converter time constants must be positive".to_string());
        }
        if self.droop_gain < 0.0 || self.deadband_hz < 0.0 {
            errors.push("droop gain and deadband must be nonnegative".to_string());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(errors))
        }
    }
}

/// Synchronous-reference-frame PLL. `theta` is the angle relative to the
/// nominal-frequency frame; the PI output is the frequency deviation (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PllState {
    pub theta: f64,
    pub x_i: f64,
}

impl PllState {
    /// q-axis voltage in the PLL frame.
    pub fn v_q(&self, v: Complex64) -> f64 {
        (v * Complex64::from_polar(1.0, -self.theta)).im
    }

    /// Frequency deviation (rad/s) for the measured voltage.
    pub fn d_omega(&self, v: Complex64, p: &VscParams) -> f64 {
        p.pll_kp * self.v_q(v) + self.x_i
    }
}

/// One Euler step of the PLL for terminal voltage `v` (nominal-frequency frame).
/// Returns the new state and the measured frequency (Hz).
pub fn pll_step(s: PllState, v: Complex64, p: &VscParams, h: f64, f_nom: f64) -> (PllState, f64) {
    let dw = s.d_omega(v, p);
    let next = PllState {
        theta: s.theta + h * dw,
        x_i: s.x_i + h * p.pll_ki * s.v_q(v),
    };
    (next, f_nom + dw / (2.0 * PI))
}

/// Power change requested by the frequency droop (pu). The deadband is
/// subtracted so the response is continuous at its edges.
pub fn droop(f_meas: f64, f_nom: f64, p: &VscParams) -> f64 {
    let df = f_meas - f_nom;
    let excess = (df.abs() - p.deadband_hz).max(0.0) * df.signum();
    -p.droop_gain * excess / f_nom
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OuterState {
    pub x_p: f64,
    pub x_q: f64,
}

/// Current references from the power setpoints at measured voltage, before
/// limiting. `p_ref` already includes any droop correction.
pub fn outer_references(
    s: &OuterState,
    p_ref: f64,
    q_ref: f64,
    v: f64,
    p_meas: f64,
    q_meas: f64,
    p: &VscParams,
) -> (f64, f64) {
    let v = v.max(0.1);
    (
        p_ref / v + p.outer_kp * (p_ref - p_meas) + s.x_p,
        q_ref / v + p.outer_kp * (q_ref - q_meas) + s.x_q,
    )
}

/// Outer loop step: returns the updated integrators and the (unlimited)
/// current references. Integrators hold while `frozen`.
pub fn outer_loop_step(
    s: OuterState,
    p_ref: f64,
    q_ref: f64,
    meas: (f64, f64, f64),
    frozen: bool,
    p: &VscParams,
    h: f64,
) -> (OuterState, (f64, f64)) {
    let (v, p_meas, q_meas) = meas;
    let refs = outer_references(&s, p_ref, q_ref, v, p_meas, q_meas, p);
    let next = if frozen {
        s
    } else {
        OuterState {
            x_p: s.x_p + h * p.outer_ki * (p_ref - p_meas),
            x_q: s.x_q + h * p.outer_ki * (q_ref - q_meas),
        }
    };
    (next, refs)
}

/// Limit current references. Below the FRT threshold reactive current is
/// set by the voltage-support rule and active current gets the remainder;
/// otherwise the reference is scaled down proportionally if above `i_max`.
/// Returns the limited references and whether any limiting applied.
pub fn frt_limit(i_ref: (f64, f64), v: f64, p: &VscParams) -> ((f64, f64), bool) {
    let (i_d, i_q) = i_ref;
    if v < p.frt_threshold {
        let iq = (p.frt_gain * (p.frt_threshold - v) * p.i_max).clamp(0.0, p.i_max);
        let room = (p.i_max * p.i_max - iq * iq).max(0.0).sqrt();
        return ((i_d.clamp(-room, room), iq), true);
    }
    let mag = i_d.hypot(i_q);
    if mag > p.i_max {
        let k = p.i_max / mag;
        ((i_d * k, i_q * k), true)
    } else {
        ((i_d, i_q), false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CurrentLoopState {
    pub u_d: f64,
    pub u_q: f64,
}

/// Proportional and integral gains of the current loop (per-unit inductance
/// `x_f / omega_b`), placing the closed-loop pole at `-1/tau_c`.
pub fn current_loop_gains(p: &VscParams, omega_b: f64) -> (f64, f64) {
    (p.x_f / omega_b / p.tau_c, p.r_f / p.tau_c)
}

/// Converter voltage command in the PLL frame (actual dq, not the control
/// sign convention for q) and the updated integrators. `i_ref` and `i_meas`
/// use the control convention; `v` is the terminal voltage in the PLL frame.
pub fn current_loop_step(
    s: CurrentLoopState,
    i_ref: (f64, f64),
    i_meas: (f64, f64),
    v: Complex64,
    p: &VscParams,
    omega_b: f64,
    h: f64,
) -> (CurrentLoopState, Complex64) {
    let (kp, ki) = current_loop_gains(p, omega_b);
    // Actual dq currents.
    let (id_ref, iq_ref) = (i_ref.0, -i_ref.1);
    let (id, iq) = (i_meas.0, -i_meas.1);
    let (ed, eq) = (id_ref - id, iq_ref - iq);
    let v_c = Complex64::new(
        v.re - p.x_f * iq + kp * ed + s.u_d,
        v.im + p.x_f * id + kp * eq + s.u_q,
    );
    let next = CurrentLoopState {
        u_d: s.u_d + h * ki * ed,
        u_q: s.u_q + h * ki * eq,
    };
    (next, v_c)
}

/// Injected current phasor for control-convention references at PLL angle `theta`.
pub fn phasor_injection(theta: f64, i_ref: (f64, f64)) -> Complex64 {
    Complex64::new(i_ref.0, -i_ref.1) * Complex64::from_polar(1.0, theta)
}

/// Control-convention currents of an actual current phasor.
pub fn control_currents(theta: f64, i: Complex64) -> (f64, f64) {
    let r = i * Complex64::from_polar(1.0, -theta);
    (r.re, -r.im)
}

/// Chopper power drawn from the DC link.
pub fn chopper_power(v_dc: f64, p: &VscParams) -> f64 {
    (p.chopper_gain * (v_dc - p.chopper_v)).max(0.0)
}

/// DC-link voltage derivative.
pub fn dc_link_deriv(v_dc: f64, p_in: f64, p_out: f64, p: &VscParams) -> f64 {
    (p_in - p_out - chopper_power(v_dc, p)) / (p.c_dc * v_dc)
}

pub fn dc_link_step(
    v_dc: f64,
    p_in: f64,
    p_out: f64,
    p: &VscParams,
    h: f64,
    time: f64,
) -> Result<f64> {
    let next = v_dc + h * dc_link_deriv(v_dc, p_in, p_out, p);
    if !(next > 0.0) {
        return Err(SimError::DcLinkCollapse { v_dc: next, time });
    }
    Ok(next)
}

/// Whether the converter has a DC link of its own or is fed by a stiff DC source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcSide {
    Stiff,
    Link,
}

// State slot layout.
const THETA: usize = 0;
const X_PLL: usize = 1;
const F_FILT: usize = 2;
const V_MEAS: usize = 3;
const P_MEAS: usize = 4;
const Q_MEAS: usize = 5;
const X_P: usize = 6;
const X_Q: usize = 7;
const U_D: usize = 8;
const U_Q: usize = 9;
const V_DC: usize = 10;
const X_DC: usize = 11;

pub const VSC_SLOTS: [&str; 12] = [
    "pll_theta",
    "pll_integrator",
    "freq_filtered",
    "v_meas",
    "p_meas",
    "q_meas",
    "outer_p_integrator",
    "outer_q_integrator",
    "current_d_integrator",
    "current_q_integrator",
    "v_dc",
    "dc_integrator",
];

/// Converter instance during a run. Powers and currents are on converter base.
#[derive(Debug, Clone)]
pub struct Vsc {
    pub name: String,
    pub bus: String,
    pub params: VscParams,
    pub model: ConverterModel,
    pub dc: DcSide,
    pub omega_b: f64,
    pub f_nom: f64,
    pub p_set: f64,
    pub q_set: f64,
    /// Converter base over system base.
    pub base_ratio: f64,
    pub offset: usize,
    /// Last measured terminal voltage and current (nominal frame).
    v_last: Complex64,
    i_last: Complex64,
    /// Last evaluated references and outputs.
    pub i_ref: (f64, f64),
    pub limited: bool,
    pub p_out: f64,
    pub q_out: f64,
    pub f_meas: f64,
}

impl Vsc {
    pub fn new(
        name: &str,
        bus: &str,
        params: VscParams,
        model: ConverterModel,
        dc: DcSide,
        f_nom: f64,
        s_base_mva: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            bus: bus.to_string(),
            params,
            model,
            dc,
            omega_b: 2.0 * PI * f_nom,
            f_nom,
            p_set: 0.0,
            q_set: 0.0,
            base_ratio: params.s_rated_mva / s_base_mva,
            offset: 0,
            v_last: Complex64::new(1.0, 0.0),
            i_last: Complex64::new(0.0, 0.0),
            i_ref: (0.0, 0.0),
            limited: false,
            p_out: 0.0,
            q_out: 0.0,
            f_meas: f_nom,
        }
    }

    pub fn filter_impedance_sys(&self) -> Complex64 {
        Complex64::new(self.params.r_f, self.params.x_f) / self.base_ratio
    }

    /// Steady state delivering `s` (converter base) at terminal voltage `v`.
    pub fn initial_state(&mut self, v: Complex64, s: Complex64) -> Vec<f64> {
        self.p_set = s.re;
        self.q_set = s.im;
        let theta = v.arg();
        let i = (s / v).conj();
        self.v_last = v;
        self.i_last = i;
        let (id, iq) = control_currents(theta, i);
        self.i_ref = (id, iq);
        self.p_out = s.re;
        self.q_out = s.im;
        let vm = v.norm();
        // Integrators absorb the feedforward error at the operating point.
        let x_p = id - s.re / vm;
        let x_q = iq - s.im / vm;
        let mut x = vec![0.0; VSC_SLOTS.len()];
        x[THETA] = theta;
        x[F_FILT] = self.f_nom;
        x[V_MEAS] = vm;
        x[P_MEAS] = s.re;
        x[Q_MEAS] = s.im;
        x[X_P] = x_p;
        x[X_Q] = x_q;
        x[V_DC] = 1.0;
        // Current loop integrators hold the resistive drop.
        let v_c = self.steady_emf(v, i);
        let v_pll = v * Complex64::from_polar(1.0, -theta);
        let i_pll = i * Complex64::from_polar(1.0, -theta);
        let dec = Complex64::new(
            v_pll.re - self.params.x_f * i_pll.im,
            v_pll.im + self.params.x_f * i_pll.re,
        );
        let u = v_c * Complex64::from_polar(1.0, -theta) - dec;
        x[U_D] = u.re;
        x[U_Q] = u.im;
        x
    }

    fn steady_emf(&self, v: Complex64, i: Complex64) -> Complex64 {
        v + Complex64::new(self.params.r_f, self.params.x_f) * i
    }

    /// Power demanded from the source: setpoint plus droop.
    pub fn demand(&self, x: &[f64]) -> f64 {
        self.p_set + droop(x[F_FILT], self.f_nom, &self.params)
    }

    /// Grid-side active power reference for a given source power.
    pub fn grid_power_ref(&self, x: &[f64], p_source: f64) -> f64 {
        match self.dc {
            DcSide::Stiff => p_source,
            DcSide::Link => p_source + self.params.dc_kp * (x[V_DC] - 1.0) + x[X_DC],
        }
    }

    /// Limited current references for this step.
    pub fn references(&mut self, x: &[f64], p_source: f64) -> (f64, f64) {
        let s = OuterState {
            x_p: x[X_P],
            x_q: x[X_Q],
        };
        let p_ref = self.grid_power_ref(x, p_source);
        let raw = outer_references(
            &s,
            p_ref,
            self.q_set,
            x[V_MEAS],
            x[P_MEAS],
            x[Q_MEAS],
            &self.params,
        );
        let (lim, limited) = frt_limit(raw, x[V_MEAS], &self.params);
        self.i_ref = lim;
        self.limited = limited;
        lim
    }

    /// Converter EMF in the nominal frame (converter base) for EMT mode.
    pub fn emf(&self, x: &[f64]) -> Complex64 {
        let theta = x[THETA];
        let rot = Complex64::from_polar(1.0, -theta);
        let s = CurrentLoopState {
            u_d: x[U_D],
            u_q: x[U_Q],
        };
        let i_meas = control_currents(theta, self.i_last);
        let (_, v_c) = current_loop_step(
            s,
            self.i_ref,
            i_meas,
            self.v_last * rot,
            &self.params,
            self.omega_b,
            0.0,
        );
        v_c * Complex64::from_polar(1.0, theta)
    }

    /// Injected current phasor (converter base) for phasor mode.
    pub fn injection(&self, x: &[f64]) -> Complex64 {
        phasor_injection(x[THETA], self.i_ref)
    }

    /// Derivatives given this step's terminal voltage and current (nominal
    /// frame, converter base) and the source power.
    pub fn derivs(&mut self, x: &[f64], v: Complex64, i: Complex64, p_source: f64, dx: &mut [f64]) {
        let p = self.params;
        let s = v * i.conj();
        self.v_last = v;
        self.i_last = i;
        self.p_out = s.re;
        self.q_out = s.im;
        let pll = PllState {
            theta: x[THETA],
            x_i: x[X_PLL],
        };
        let dw = pll.d_omega(v, &p);
        self.f_meas = self.f_nom + dw / (2.0 * PI);
        dx[THETA] = dw;
        dx[X_PLL] = p.pll_ki * pll.v_q(v);
        dx[F_FILT] = (self.f_meas - x[F_FILT]) / p.t_freq;
        dx[V_MEAS] = (v.norm() - x[V_MEAS]) / p.t_meas;
        dx[P_MEAS] = (s.re - x[P_MEAS]) / p.t_meas;
        dx[Q_MEAS] = (s.im - x[Q_MEAS]) / p.t_meas;
        let p_ref = self.grid_power_ref(x, p_source);
        if self.limited {
            dx[X_P] = 0.0;
            dx[X_Q] = 0.0;
        } else {
            dx[X_P] = p.outer_ki * (p_ref - x[P_MEAS]);
            dx[X_Q] = p.outer_ki * (self.q_set - x[Q_MEAS]);
        }
        match self.model {
            ConverterModel::EmtAvg => {
                let (_, ki) = current_loop_gains(&p, self.omega_b);
                let meas = control_currents(x[THETA], i);
                dx[U_D] = ki * (self.i_ref.0 - meas.0);
                dx[U_Q] = -ki * (self.i_ref.1 - meas.1);
            }
            ConverterModel::Phasor => {
                dx[U_D] = 0.0;
                dx[U_Q] = 0.0;
            }
        }
        match self.dc {
            DcSide::Stiff => {
                dx[V_DC] = 0.0;
                dx[X_DC] = 0.0;
            }
            DcSide::Link => {
                dx[V_DC] = dc_link_deriv(x[V_DC], p_source, s.re, &p);
                dx[X_DC] = if self.limited {
                    0.0
                } else {
                    p.dc_ki * (x[V_DC] - 1.0)
                };
            }
        }
    }

    /// Reject a collapsed DC link after a step.
    pub fn check(&self, x: &[f64], time: f64) -> Result<()> {
        if !(x[V_DC] > 0.0) {
            return Err(SimError::DcLinkCollapse {
                v_dc: x[V_DC],
                time,
            });
        }
        Ok(())
    }

    pub fn v_dc(x: &[f64]) -> f64 {
        x[V_DC]
    }

    pub fn filtered_frequency(x: &[f64]) -> f64 {
        x[F_FILT]
    }
}
