//! Synchronous generator variants behind a common network interface.
//!
//! Every variant is seen by the network as an EMF behind a fixed series
//! impedance (Norton source). The inertia-only model uses its internal
//! impedance; Model 2.2 uses the unsaturated d-axis subtransient reactance and
//! folds saliency and saturation changes into the EMF using the previous-step
//! stator current.

pub mod controls;
pub mod model22;
pub mod saturation;
pub mod simplified;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use controls::{
    avr_step, governor_step, AvrParams, ExciterState, GovernorParams, GovernorState,
};
pub use model22::{model22_derivs, model22_init, Model22Params, Model22State, RotorFluxes};
pub use saturation::{apply_saturation, SaturationParams};
pub use simplified::{simplified_sg_derivs, SimplifiedSgParams, SimplifiedState};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgVariant {
    Simplified,
    Model22,
    Model22Sat,
}

impl SgVariant {
    pub const ALL: [SgVariant; 3] = [
        SgVariant::Simplified,
        SgVariant::Model22,
        SgVariant::Model22Sat,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SgVariant::Simplified => "simplified",
            SgVariant::Model22 => "model22",
            SgVariant::Model22Sat => "model22_sat",
        }
    }
}

/// One generator entry of the machine parameter file. Both the detailed and
/// the simplified parameter sets are given so that any variant can be built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineSpec {
    pub name: String,
    /// Terminal bus id.
    pub bus: String,
    /// Rated apparent power (MVA).
    pub s_rated_mva: f64,
    pub model22: Model22Params,
    pub simplified: SimplifiedSgParams,
    #[serde(default)]
    pub saturation: SaturationParams,
    #[serde(default)]
    pub avr: AvrParams,
    #[serde(default)]
    pub governor: GovernorParams,
}

impl MachineSpec {
    pub fn validate(&self) -> Result<()> {
        self.model22.validate()?;
        self.simplified.validate()?;
        self.saturation.validate()?;
        if !(self.s_rated_mva > 0.0) {
            return Err(crate::error::SimError::config(format!(
                "{}: rated power must be positive",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SgModel {
    Simplified(SimplifiedSgParams),
    Model22 {
        params: Model22Params,
        saturation: Option<SaturationParams>,
    },
}

// State slot layout shared by all variants.
const OMEGA: usize = 0;
const DELTA: usize = 1;
const V_MEAS: usize = 2;
const V_F: usize = 3;
const P_M: usize = 4;
const ELEC: usize = 5;

/// A generator instance during a run.
#[derive(Debug, Clone)]
pub struct Machine {
    pub name: String,
    pub bus: String,
    pub model: SgModel,
    pub avr: AvrParams,
    pub gov: GovernorParams,
    /// Machine base over system base.
    pub base_ratio: f64,
    pub v_ref: f64,
    pub v_f0: f64,
    pub p_ref: f64,
    pub tripped: bool,
    /// Offset of the first slot in the run's state vector.
    pub offset: usize,
    k_sat: f64,
    i_prev: Complex64,
    dpsi_pp: Complex64,
    /// Last evaluated outputs (machine base).
    pub p_e: f64,
    pub s_term: Complex64,
    pub v_term: f64,
}

impl Machine {
    pub fn new(spec: &MachineSpec, variant: SgVariant, s_base_mva: f64) -> Self {
        let model = match variant {
            SgVariant::Simplified => SgModel::Simplified(spec.simplified),
            SgVariant::Model22 => SgModel::Model22 {
                params: spec.model22,
                saturation: None,
            },
            SgVariant::Model22Sat => SgModel::Model22 {
                params: spec.model22,
                saturation: Some(spec.saturation),
            },
        };
        Self {
            name: spec.name.clone(),
            bus: spec.bus.clone(),
            model,
            avr: spec.avr,
            gov: spec.governor,
            base_ratio: spec.s_rated_mva / s_base_mva,
            v_ref: 1.0,
            v_f0: 1.0,
            p_ref: 0.0,
            tripped: false,
            offset: 0,
            k_sat: 1.0,
            i_prev: Complex64::new(0.0, 0.0),
            dpsi_pp: Complex64::new(0.0, 0.0),
            p_e: 0.0,
            s_term: Complex64::new(0.0, 0.0),
            v_term: 0.0,
        }
    }

    pub fn n_slots(&self) -> usize {
        match self.model {
            SgModel::Simplified(_) => ELEC + 1,
            SgModel::Model22 { .. } => ELEC + 4,
        }
    }

    pub fn slot_names(&self) -> Vec<&'static str> {
        let mut v = vec!["omega", "delta", "v_meas", "v_f", "p_m"];
        match self.model {
            SgModel::Simplified(_) => v.push("e_s"),
            SgModel::Model22 { .. } => v.extend(["psi_fd", "psi_1d", "psi_1q", "psi_2q"]),
        }
        v
    }

    pub fn inertia(&self) -> f64 {
        match &self.model {
            SgModel::Simplified(p) => p.h,
            SgModel::Model22 { params, .. } => params.h,
        }
    }

    /// Series impedance stamped into the network (machine base).
    pub fn stamp_impedance(&self) -> Complex64 {
        match &self.model {
            SgModel::Simplified(p) => Complex64::new(p.r_s, p.x_s),
            SgModel::Model22 { params, .. } => Complex64::new(params.r_s, params.x_dpp()),
        }
    }

    /// Stamp impedance on system base.
    pub fn stamp_impedance_sys(&self) -> Complex64 {
        self.stamp_impedance() / self.base_ratio
    }

    /// Steady state for terminal phasors in the synchronous frame (machine
    /// base, current out of the machine). Sets the control references.
    pub fn initial_state(&mut self, v: Complex64, i: Complex64) -> Vec<f64> {
        let (omega, delta, v_f, p_m, elec, i_rot) = match &self.model {
            SgModel::Simplified(p) => {
                let (s, v_f) = simplified::simplified_init(v, i, p);
                let e = Complex64::from_polar(s.e_s, s.delta);
                let p_m = (e * i.conj()).re;
                let i_rot = i * Complex64::from_polar(1.0, -s.delta);
                (s.omega, s.delta, v_f, p_m, vec![s.e_s], i_rot)
            }
            SgModel::Model22 { params, saturation } => {
                let init = model22_init(v, i, params, saturation.as_ref());
                self.k_sat = init.k_sat;
                let r = init.state.rotor;
                (
                    1.0,
                    init.state.delta,
                    init.e_fd,
                    init.p_m,
                    vec![r.fd, r.d1, r.q1, r.q2],
                    init.i_rotor,
                )
            }
        };
        self.i_prev = i_rot;
        self.dpsi_pp = Complex64::new(0.0, 0.0);
        self.v_ref = v.norm();
        self.v_f0 = v_f;
        self.p_ref = p_m;
        self.p_e = p_m;
        self.v_term = v.norm();
        self.s_term = v * i.conj();
        let mut x = vec![omega, delta, v.norm(), v_f, p_m];
        x.extend(elec);
        x
    }

    fn rotor(x: &[f64]) -> RotorFluxes {
        RotorFluxes {
            fd: x[ELEC],
            d1: x[ELEC + 1],
            q1: x[ELEC + 2],
            q2: x[ELEC + 3],
        }
    }

    /// Rotor angle relative to the synchronous frame.
    pub fn delta(x: &[f64]) -> f64 {
        x[DELTA]
    }

    pub fn omega(x: &[f64]) -> f64 {
        x[OMEGA]
    }

    /// Internal EMF in the rotor frame, machine base. `with_transformer_emf`
    /// adds the rotor-flux rate terms, which are dropped when stator
    /// transients are neglected.
    pub fn emf(&self, x: &[f64], with_transformer_emf: bool) -> Complex64 {
        match &self.model {
            SgModel::Simplified(_) => Complex64::new(x[ELEC], 0.0),
            SgModel::Model22 { params, .. } => {
                let sub = params.subtransient(self.k_sat);
                let psi_pp = model22::subtransient_flux(params, &sub, &Self::rotor(x));
                let x_stamp = params.x_dpp();
                let corr_d = (params.x_l + sub.ladpp) - x_stamp;
                let corr_q = (params.x_l + sub.laqpp) - x_stamp;
                let eff = Complex64::new(
                    psi_pp.re - corr_d * self.i_prev.re,
                    psi_pp.im - corr_q * self.i_prev.im,
                );
                let speed = Complex64::new(0.0, x[OMEGA]) * eff;
                if with_transformer_emf {
                    speed + self.dpsi_pp
                } else {
                    speed
                }
            }
        }
    }

    /// Evaluate derivatives for rotor-frame stator current `i` and terminal
    /// voltage `v` (both machine base). Writes into `dx` (this machine's slots).
    pub fn derivs(&mut self, x: &[f64], i: Complex64, v: Complex64, omega_b: f64, dx: &mut [f64]) {
        if self.tripped {
            dx.iter_mut().for_each(|d| *d = 0.0);
            return;
        }
        let omega = x[OMEGA];
        let v_f = x[V_F];
        let p_m = x[P_M];
        let p_e = match &self.model {
            SgModel::Simplified(p) => {
                let s = SimplifiedState {
                    omega,
                    delta: x[DELTA],
                    e_s: x[ELEC],
                };
                let d = simplified::simplified_derivs_from_current(&s, i, p_m, v_f, p, omega_b);
                dx[ELEC] = d.d_e_s;
                d.p_e
            }
            SgModel::Model22 { params, saturation } => {
                let rot = Self::rotor(x);
                let (k, sub, ag) = match saturation {
                    Some(sat) => model22::solve_saturation(params, sat, &rot, i, self.k_sat),
                    None => {
                        let sub = params.subtransient(1.0);
                        (1.0, sub, model22::air_gap(params, &sub, &rot, i))
                    }
                };
                let rd = model22::rotor_derivs(params, &ag, v_f, omega_b);
                dx[ELEC] = rd.fd;
                dx[ELEC + 1] = rd.d1;
                dx[ELEC + 2] = rd.q1;
                dx[ELEC + 3] = rd.q2;
                self.k_sat = k;
                self.dpsi_pp = Complex64::new(
                    sub.ladpp * (rd.fd / params.x_fd + rd.d1 / params.x_1d),
                    sub.laqpp * (rd.q1 / params.x_1q + rd.q2 / params.x_2q),
                ) / omega_b;
                omega * model22::torque(params, &ag, i)
            }
        };
        self.i_prev = i;
        self.p_e = p_e;
        self.v_term = v.norm();
        self.s_term = v * i.conj();
        dx[OMEGA] = (p_m - p_e) / (2.0 * self.inertia());
        dx[DELTA] = omega_b * (omega - 1.0);
        let exc = ExciterState {
            v_meas: x[V_MEAS],
            v_f,
            v_ref: self.v_ref,
            v_f0: self.v_f0,
        };
        let (dm, df) = exc.derivs(&self.avr, self.v_term);
        dx[V_MEAS] = dm;
        dx[V_F] = df;
        let gov = GovernorState {
            p_m,
            p_ref: self.p_ref,
        };
        dx[P_M] = gov.deriv(&self.gov, omega);
    }

    /// Enforce control limits after a step.
    pub fn clamp(&self, x: &mut [f64]) {
        x[V_F] = ExciterState::clamp(x[V_F], &self.avr);
        x[P_M] = x[P_M].clamp(0.0, self.gov.p_max);
    }

    pub fn field_voltage(x: &[f64]) -> f64 {
        x[V_F]
    }

    pub fn mech_power(x: &[f64]) -> f64 {
        x[P_M]
    }
}
