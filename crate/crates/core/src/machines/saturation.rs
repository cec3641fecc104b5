//! Magnetizing-path saturation.
//!
//! The law is written on the saturated flux: an unsaturated flux `psi_u`
//! (magnetizing current times unsaturated inductance) maps to the saturated
//! flux `psi_s` solving `psi_u = psi_s + S(psi_s)` with
//! `S(psi) = a * (exp(b * (psi - knee)) - 1)` above the knee and zero below.
//! Because `S` is nondecreasing the map is monotone and never exceeds the
//! identity.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationParams {
    pub knee: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for SaturationParams {
    /// Knee at 0.8 pu, 3% extra magnetizing demand at 1.0 pu and 10% at 1.2 pu.
    fn default() -> Self {
        Self {
            knee: 0.8,
            a: 0.015,
            b: 5.0 * 3f64.ln(),
        }
    }
}

impl SaturationParams {
    /// Parameters that keep the machine linear everywhere.
    pub fn linear() -> Self {
        Self {
            knee: f64::INFINITY,
            a: 0.0,
            b: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.knee > 0.0) || self.a < 0.0 || self.b < 0.0 || self.a.is_nan() || self.b.is_nan()
        {
            return Err(SimError::config(format!(
                "invalid saturation parameters {self:?}"
            )));
        }
        Ok(())
    }

    /// Extra magnetizing demand at saturated flux `psi_s`.
    pub fn excess(&self, psi_s: f64) -> f64 {
        if psi_s <= self.knee {
            0.0
        } else {
            self.a * ((self.b * (psi_s - self.knee)).exp() - 1.0)
        }
    }

    /// Saturated flux for an unsaturated flux `psi_u >= 0`.
    pub fn saturate(&self, psi_u: f64) -> f64 {
        if psi_u <= self.knee {
            return psi_u;
        }
        // f(psi) = psi + S(psi) - psi_u is increasing and convex; Newton from
        // the right converges monotonically.
        let mut psi = psi_u;
        for _ in 0..60 {
            let e = (self.b * (psi - self.knee)).exp();
            let f = psi + self.a * (e - 1.0) - psi_u;
            let df = 1.0 + self.a * self.b * e;
            let next = (psi - f / df).max(self.knee);
            if (next - psi).abs() <= 1e-15 * psi_u {
                return next;
            }
            psi = next;
        }
        psi
    }

    /// Saturation factor `k = psi_u / psi_s >= 1`.
    pub fn factor(&self, psi_u: f64) -> f64 {
        if psi_u <= self.knee {
            return 1.0;
        }
        psi_u / self.saturate(psi_u)
    }
}

/// Saturated flux for an unsaturated magnetizing flux.
pub fn apply_saturation(psi_unsat: f64, params: &SaturationParams) -> f64 {
    params.saturate(psi_unsat.max(0.0))
}
