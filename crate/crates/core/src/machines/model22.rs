//! Two-rotor-circuits-per-axis synchronous machine (field + one damper on d,
//! two dampers on q) in the rotor frame.
//!
//! Per-unit reactances equal inductances at nominal frequency; time is in
//! seconds so flux equations carry the base angular frequency. Generator
//! convention: stator current flows out of the machine.
//!
//! ```text
//! psi_ad = L_ad (-i_d + i_fd + i_1d)      psi_d  = psi_ad - L_l i_d
//! psi_fd = L_fd i_fd + psi_ad             psi_1d = L_1d i_1d + psi_ad
//! v_d = (1/w_b) dpsi_d/dt - w psi_q - R_s i_d
//! v_q = (1/w_b) dpsi_q/dt + w psi_d - R_s i_q
//! ```
//! and likewise on q with two damper circuits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::saturation::SaturationParams;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model22Params {
    pub r_s: f64,
    /// Stator leakage reactance.
    pub x_l: f64,
    pub x_ad: f64,
    pub x_aq: f64,
    /// Field leakage reactance and resistance.
    pub x_fd: f64,
    pub r_fd: f64,
    pub x_1d: f64,
    pub r_1d: f64,
    pub x_1q: f64,
    pub r_1q: f64,
    pub x_2q: f64,
    pub r_2q: f64,
    /// Inertia constant (s).
    pub h: f64,
}

impl Default for Model22Params {
    /// Fundamental parameters of a 555 MVA, 24 kV thermal unit.
    fn default() -> Self {
        Self {
            r_s: 0.003,
            x_l: 0.15,
            x_ad: 1.66,
            x_aq: 1.61,
            x_fd: 0.165,
            r_fd: 0.0006,
            x_1d: 0.1713,
            r_1d: 0.0284,
            x_1q: 0.7252,
            r_1q: 0.00619,
            x_2q: 0.125,
            r_2q: 0.02368,
            h: 3.5,
        }
    }
}

impl Model22Params {
    pub fn validate(&self) -> Result<()> {
        let reactances = [
            ("x_l", self.x_l),
            ("x_ad", self.x_ad),
            ("x_aq", self.x_aq),
            ("x_fd", self.x_fd),
            ("x_1d", self.x_1d),
            ("x_1q", self.x_1q),
            ("x_2q", self.x_2q),
        ];
        let resistances = [
            ("r_s", self.r_s),
            ("r_fd", self.r_fd),
            ("r_1d", self.r_1d),
            ("r_1q", self.r_1q),
            ("r_2q", self.r_2q),
        ];
        let mut bad = Vec::new();
        for (n, v) in reactances {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!(
                    "{n} = {v} (must be > 0, flux-current matrix would be singular)"
                ));
            }
        }
        for (n, v) in resistances {
            if !(v >= 0.0 && v.is_finite()) {
                bad.push(format!("{n} = {v} (must be >= 0)"));
            }
        }
        if !(self.h > 0.0) {
            bad.push(format!("h = {} (must be > 0)", self.h));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SimError::config(format!(
                "Model 2.2 parameters: {}",
                bad.join(", ")
            )))
        }
    }

    pub fn x_d(&self) -> f64 {
        self.x_l + self.x_ad
    }

    pub fn x_q(&self) -> f64 {
        self.x_l + self.x_aq
    }

    pub fn subtransient(&self, k: f64) -> Subtransient {
        let lad = self.x_ad / k;
        let laq = self.x_aq / k;
        let ladpp = 1.0 / (1.0 / lad + 1.0 / self.x_fd + 1.0 / self.x_1d);
        let laqpp = 1.0 / (1.0 / laq + 1.0 / self.x_1q + 1.0 / self.x_2q);
        Subtransient {
            lad,
            laq,
            ladpp,
            laqpp,
        }
    }

    /// Unsaturated d-axis subtransient reactance.
    pub fn x_dpp(&self) -> f64 {
        self.x_l + self.subtransient(1.0).ladpp
    }

    pub fn x_qpp(&self) -> f64 {
        self.x_l + self.subtransient(1.0).laqpp
    }

    /// Open-circuit field time constant (s) at base frequency `omega_b`.
    pub fn t_do_prime(&self, omega_b: f64) -> f64 {
        (self.x_ad + self.x_fd) / (omega_b * self.r_fd)
    }
}

/// Magnetizing and subtransient mutual inductances for a saturation factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subtransient {
    pub lad: f64,
    pub laq: f64,
    pub ladpp: f64,
    pub laqpp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorFluxes {
    pub fd: f64,
    pub d1: f64,
    pub q1: f64,
    pub q2: f64,
}

/// Algebraic quantities of the magnetic circuit for one operating instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirGap {
    pub psi_ad: f64,
    pub psi_aq: f64,
    pub i_fd: f64,
    pub i_1d: f64,
    pub i_1q: f64,
    pub i_2q: f64,
    /// Subtransient flux `psi''_d + j psi''_q` set by the rotor circuits.
    pub psi_pp: Complex64,
}

impl AirGap {
    pub fn magnitude(&self) -> f64 {
        self.psi_ad.hypot(self.psi_aq)
    }
}

pub fn subtransient_flux(p: &Model22Params, sub: &Subtransient, rot: &RotorFluxes) -> Complex64 {
    Complex64::new(
        sub.ladpp * (rot.fd / p.x_fd + rot.d1 / p.x_1d),
        sub.laqpp * (rot.q1 / p.x_1q + rot.q2 / p.x_2q),
    )
}

pub fn air_gap(p: &Model22Params, sub: &Subtransient, rot: &RotorFluxes, i: Complex64) -> AirGap {
    let psi_pp = subtransient_flux(p, sub, rot);
    let psi_ad = psi_pp.re - sub.ladpp * i.re;
    let psi_aq = psi_pp.im - sub.laqpp * i.im;
    AirGap {
        psi_ad,
        psi_aq,
        i_fd: (rot.fd - psi_ad) / p.x_fd,
        i_1d: (rot.d1 - psi_ad) / p.x_1d,
        i_1q: (rot.q1 - psi_aq) / p.x_1q,
        i_2q: (rot.q2 - psi_aq) / p.x_2q,
        psi_pp,
    }
}

/// Saturation factor consistent with the air-gap flux, found by fixed-point
/// iteration starting from `k0`.
pub fn solve_saturation(
    p: &Model22Params,
    sat: &SaturationParams,
    rot: &RotorFluxes,
    i: Complex64,
    k0: f64,
) -> (f64, Subtransient, AirGap) {
    let mut k = k0;
    let mut sub = p.subtransient(k);
    let mut ag = air_gap(p, &sub, rot, i);
    for _ in 0..12 {
        let psi_s = ag.magnitude();
        let k_new = if psi_s > 0.0 {
            1.0 + sat.excess(psi_s) / psi_s
        } else {
            1.0
        };
        if k_new == k {
            break;
        }
        let converged = (k_new - k).abs() < 1e-13;
        k = k_new;
        sub = p.subtransient(k);
        ag = air_gap(p, &sub, rot, i);
        if converged {
            break;
        }
    }
    (k, sub, ag)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorDerivs {
    pub fd: f64,
    pub d1: f64,
    pub q1: f64,
    pub q2: f64,
}

pub fn rotor_derivs(p: &Model22Params, ag: &AirGap, e_fd: f64, omega_b: f64) -> RotorDerivs {
    // Field voltage in the Xad-base convention: E_fd = 1 gives 1 pu open-circuit voltage.
    let v_fd = p.r_fd / p.x_ad * e_fd;
    RotorDerivs {
        fd: omega_b * (v_fd - p.r_fd * ag.i_fd),
        d1: -omega_b * p.r_1d * ag.i_1d,
        q1: -omega_b * p.r_1q * ag.i_1q,
        q2: -omega_b * p.r_2q * ag.i_2q,
    }
}

/// Electromagnetic torque `psi_d i_q - psi_q i_d`.
pub fn torque(p: &Model22Params, ag: &AirGap, i: Complex64) -> f64 {
    let psi_d = ag.psi_ad - p.x_l * i.re;
    let psi_q = ag.psi_aq - p.x_l * i.im;
    psi_d * i.im - psi_q * i.re
}

/// Full machine state including stator fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Model22State {
    pub psi_d: f64,
    pub psi_q: f64,
    pub rotor: RotorFluxes,
    pub omega: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model22Derivs {
    pub psi_d: f64,
    pub psi_q: f64,
    pub rotor: RotorDerivs,
    pub omega: f64,
    pub delta: f64,
    pub i: Complex64,
    pub torque: f64,
}

/// Derivatives of the full machine (stator and rotor fluxes, speed, angle)
/// for a rotor-frame terminal voltage. Stator currents come from the
/// flux-current relation `psi = psi'' - x'' i` on each axis.
pub fn model22_derivs(
    s: &Model22State,
    v: Complex64,
    e_fd: f64,
    p_m: f64,
    p: &Model22Params,
    sat: Option<&SaturationParams>,
    omega_b: f64,
) -> Model22Derivs {
    let currents = |sub: &Subtransient| {
        let psi_pp = subtransient_flux(p, sub, &s.rotor);
        Complex64::new(
            (psi_pp.re - s.psi_d) / (p.x_l + sub.ladpp),
            (psi_pp.im - s.psi_q) / (p.x_l + sub.laqpp),
        )
    };
    let mut sub = p.subtransient(1.0);
    let mut i = currents(&sub);
    let mut ag = air_gap(p, &sub, &s.rotor, i);
    if let Some(sat) = sat {
        let mut k = 1.0;
        for _ in 0..50 {
            let psi_s = ag.magnitude();
            let k_new = if psi_s > 0.0 {
                1.0 + sat.excess(psi_s) / psi_s
            } else {
                1.0
            };
            if (k_new - k).abs() < 1e-14 {
                break;
            }
            k = k_new;
            sub = p.subtransient(k);
            i = currents(&sub);
            ag = air_gap(p, &sub, &s.rotor, i);
        }
    }
    let te = torque(p, &ag, i);
    let p_e = s.omega * te;
    Model22Derivs {
        psi_d: omega_b * (v.re + p.r_s * i.re + s.omega * s.psi_q),
        psi_q: omega_b * (v.im + p.r_s * i.im - s.omega * s.psi_d),
        rotor: rotor_derivs(p, &ag, e_fd, omega_b),
        omega: (p_m - p_e) / (2.0 * p.h),
        delta: omega_b * (s.omega - 1.0),
        i,
        torque: te,
    }
}

/// Steady-state operating point for terminal phasors `v`, `i` given in the
/// synchronous frame on machine base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model22Init {
    pub state: Model22State,
    pub e_fd: f64,
    pub p_m: f64,
    pub k_sat: f64,
    /// Rotor-frame stator current.
    pub i_rotor: Complex64,
}

pub fn model22_init(
    v: Complex64,
    i: Complex64,
    p: &Model22Params,
    sat: Option<&SaturationParams>,
) -> Model22Init {
    let mut k = 1.0;
    let mut out = None;
    for _ in 0..100 {
        let x_q = p.x_l + p.x_aq / k;
        let e_q = v + Complex64::new(p.r_s, x_q) * i;
        let delta = e_q.arg() - std::f64::consts::FRAC_PI_2;
        let rot = Complex64::from_polar(1.0, -delta);
        let vr = v * rot;
        let ir = i * rot;
        let psi_d = vr.im + p.r_s * ir.im;
        let psi_q = -(vr.re + p.r_s * ir.re);
        let psi_ad = psi_d + p.x_l * ir.re;
        let psi_aq = psi_q + p.x_l * ir.im;
        let psi_s = psi_ad.hypot(psi_aq);
        let k_new = match sat {
            Some(sat) if psi_s > 0.0 => 1.0 + sat.excess(psi_s) / psi_s,
            _ => 1.0,
        };
        out = Some((delta, ir, psi_d, psi_q, psi_ad, psi_aq));
        if (k_new - k).abs() < 1e-15 {
            break;
        }
        k = k_new;
    }
    let (delta, ir, psi_d, psi_q, psi_ad, psi_aq) = out.expect("at least one iteration");
    let lad = p.x_ad / k;
    let i_fd = psi_ad / lad + ir.re;
    let rotor = RotorFluxes {
        fd: p.x_fd * i_fd + psi_ad,
        d1: psi_ad,
        q1: psi_aq,
        q2: psi_aq,
    };
    let te = psi_d * ir.im - psi_q * ir.re;
    Model22Init {
        state: Model22State {
            psi_d,
            psi_q,
            rotor,
            omega: 1.0,
            delta,
        },
        e_fd: p.x_ad * i_fd,
        p_m: te,
        k_sat: k,
        i_rotor: ir,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use std::f64::consts::PI;

    const WB: f64 = 2.0 * PI * 50.0;

    fn max_flux_deriv(d: &Model22Derivs) -> f64 {
        [
            d.psi_d, d.psi_q, d.rotor.fd, d.rotor.d1, d.rotor.q1, d.rotor.q2,
        ]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn subtransient_reactances() {
        let p = Model22Params::default();
        assert!((p.x_dpp() - 0.23).abs() < 1e-3);
        assert!((p.x_qpp() - 0.25).abs() < 1e-3);
    }

    #[test]
    fn rated_steady_state_is_equilibrium() {
        let p = Model22Params::default();
        let v = Complex64::from_polar(1.0, 0.2);
        // Rated output at 0.9 power factor lagging.
        let s = Complex64::new(0.9, 0.436);
        let i = (s / v).conj();
        for sat in [None, Some(SaturationParams::default())] {
            let init = model22_init(v, i, &p, sat.as_ref());
            let vr = v * Complex64::from_polar(1.0, -init.state.delta);
            let d = model22_derivs(&init.state, vr, init.e_fd, init.p_m, &p, sat.as_ref(), WB);
            assert!(max_flux_deriv(&d) < 1e-9, "{d:?}");
            assert!(d.omega.abs() < 1e-12);
            assert!((d.i - init.i_rotor).norm() < 1e-9);
        }
    }

    /// Oracle: Newton with a finite-difference Jacobian on the six flux
    /// derivatives, for fixed terminal voltage, field voltage and speed.
    fn newton_steady_state(
        p: &Model22Params,
        vr: Complex64,
        e_fd: f64,
        guess: [f64; 6],
    ) -> [f64; 6] {
        let f = |x: &[f64]| -> DVector<f64> {
            let s = Model22State {
                psi_d: x[0],
                psi_q: x[1],
                rotor: RotorFluxes {
                    fd: x[2],
                    d1: x[3],
                    q1: x[4],
                    q2: x[5],
                },
                omega: 1.0,
                delta: 0.0,
            };
            let d = model22_derivs(&s, vr, e_fd, 0.0, p, None, WB);
            DVector::from_vec(vec![
                d.psi_d, d.psi_q, d.rotor.fd, d.rotor.d1, d.rotor.q1, d.rotor.q2,
            ])
        };
        let mut x = guess.to_vec();
        for _ in 0..50 {
            let f0 = f(&x);
            if f0.amax() < 1e-13 {
                break;
            }
            let mut jac = DMatrix::zeros(6, 6);
            for j in 0..6 {
                let mut xp = x.clone();
                let dx = 1e-7 * x[j].abs().max(1.0);
                xp[j] += dx;
                let fp = f(&xp);
                for r in 0..6 {
                    jac[(r, j)] = (fp[r] - f0[r]) / dx;
                }
            }
            let step = jac.lu().solve(&(-f0)).expect("nonsingular jacobian");
            for j in 0..6 {
                x[j] += step[j];
            }
        }
        [x[0], x[1], x[2], x[3], x[4], x[5]]
    }

    #[test]
    fn analytic_init_matches_root_solve() {
        let p = Model22Params::default();
        let v = Complex64::from_polar(1.0, 0.0);
        let i = (Complex64::new(0.8, 0.3) / v).conj();
        let init = model22_init(v, i, &p, None);
        let vr = v * Complex64::from_polar(1.0, -init.state.delta);
        let root = newton_steady_state(&p, vr, init.e_fd, [1.0, -0.5, 1.5, 1.0, -0.5, -0.5]);
        let s = init.state;
        let analytic = [
            s.psi_d, s.psi_q, s.rotor.fd, s.rotor.d1, s.rotor.q1, s.rotor.q2,
        ];
        for (a, b) in analytic.iter().zip(root) {
            assert!((a - b).abs() < 1e-8, "{analytic:?} vs {root:?}");
        }
    }

    #[test]
    fn open_circuit_voltage_is_xad_times_field_current() {
        let p = Model22Params::default();
        let i_fd = 0.6;
        // Zero stator current: rotor fluxes of a pure field excitation.
        let psi_ad = p.x_ad * i_fd;
        let rotor = RotorFluxes {
            fd: (p.x_ad + p.x_fd) * i_fd,
            d1: psi_ad,
            q1: 0.0,
            q2: 0.0,
        };
        let sub = p.subtransient(1.0);
        let psi_pp = subtransient_flux(&p, &sub, &rotor);
        let s = Model22State {
            psi_d: psi_pp.re,
            psi_q: psi_pp.im,
            rotor,
            omega: 1.0,
            delta: 0.0,
        };
        // Stator equilibrium fixes v = (-w psi_q, w psi_d) at zero current.
        let v = Complex64::new(-s.psi_q, s.psi_d);
        let d = model22_derivs(&s, v, p.x_ad * i_fd, 0.0, &p, None, WB);
        assert!(d.i.norm() < 1e-12);
        assert!(max_flux_deriv(&d) < 1e-9);
        assert!((v.norm() - p.x_ad * i_fd).abs() < 1e-12);
    }

    #[test]
    fn zero_excitation_is_dead() {
        let p = Model22Params::default();
        let s = Model22State {
            omega: 1.0,
            ..Default::default()
        };
        let d = model22_derivs(&s, Complex64::new(0.0, 0.0), 0.0, 0.0, &p, None, WB);
        assert_eq!(d.i, Complex64::new(0.0, 0.0));
        assert_eq!(max_flux_deriv(&d), 0.0);
        assert_eq!(d.omega, 0.0);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = Model22Params {
            x_fd: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(Model22Params::default().validate().is_ok());
    }

    #[test]
    fn saturation_factor_iteration_is_consistent() {
        let p = Model22Params::default();
        let sat = SaturationParams::default();
        let v = Complex64::from_polar(1.05, 0.0);
        let i = (Complex64::new(0.9, 0.4) / v).conj();
        let init = model22_init(v, i, &p, Some(&sat));
        assert!(init.k_sat > 1.0);
        let (k, _, ag) = solve_saturation(&p, &sat, &init.state.rotor, init.i_rotor, 1.0);
        assert!((k - init.k_sat).abs() < 1e-10);
        assert!((1.0 + sat.excess(ag.magnitude()) / ag.magnitude() - k).abs() < 1e-10);
    }
}
