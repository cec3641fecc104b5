//! Per-unit bases.
//!
//! One three-phase power base is shared by the whole system; voltage bases are
//! per zone. Voltages are line-to-line RMS.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerUnitBase {
    /// Three-phase power base (VA).
    pub s_base: f64,
    /// Line-to-line RMS voltage base (V).
    pub v_base: f64,
    /// Nominal frequency (Hz).
    pub f_nom: f64,
}

impl PerUnitBase {
    pub fn new(s_base: f64, v_base: f64, f_nom: f64) -> Result<Self> {
        for (name, v) in [("s_base", s_base), ("v_base", v_base), ("f_nom", f_nom)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            s_base,
            v_base,
            f_nom,
        })
    }

    pub fn z_base(&self) -> f64 {
        self.v_base * self.v_base / self.s_base
    }

    /// RMS line current base (A).
    pub fn i_base(&self) -> f64 {
        self.s_base / (3f64.sqrt() * self.v_base)
    }

    pub fn omega_nom(&self) -> f64 {
        2.0 * PI * self.f_nom
    }

    pub fn ohm_to_pu(&self, ohm: f64) -> f64 {
        ohm / self.z_base()
    }

    pub fn pu_to_ohm(&self, pu: f64) -> f64 {
        pu * self.z_base()
    }

    pub fn watt_to_pu(&self, w: f64) -> f64 {
        w / self.s_base
    }

    pub fn pu_to_watt(&self, pu: f64) -> f64 {
        pu * self.s_base
    }

    pub fn volt_to_pu(&self, v: f64) -> f64 {
        v / self.v_base
    }

    pub fn pu_to_volt(&self, pu: f64) -> f64 {
        pu * self.v_base
    }

    /// Inductance (H) to per-unit reactance at nominal frequency.
    pub fn henry_to_pu(&self, l: f64) -> f64 {
        self.omega_nom() * l / self.z_base()
    }

    /// Capacitance (F) to per-unit susceptance at nominal frequency.
    pub fn farad_to_pu(&self, c: f64) -> f64 {
        self.omega_nom() * c * self.z_base()
    }

    /// Rescale a per-unit impedance from `self` onto `other` (same voltage level).
    pub fn rebase_impedance(&self, z_pu: f64, other: &PerUnitBase) -> f64 {
        z_pu * self.z_base() / other.z_base()
    }
}
