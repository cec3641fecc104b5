//! Single-diode PV cell, series/parallel array scaling, boost conversion ratio
//! and perturb-and-observe duty-cycle tracking.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

const Q_E: f64 = 1.602_176_634e-19;
const K_B: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvCellParams {
    /// Photon current at standard test conditions (A).
    pub i_ph_stc: f64,
    /// Diode saturation current (A).
    pub i_s: f64,
    /// Diode ideality factor.
    pub a_n: f64,
    /// Shunt resistance (ohm).
    pub r_h: f64,
    /// Photon current temperature coefficient (A/K).
    pub alpha_t: f64,
    /// Cell temperature (K).
    pub t_c: f64,
    /// Irradiance at standard test conditions (W/m2).
    pub s_stc: f64,
}

impl Default for PvCellParams {
    fn default() -> Self {
        Self {
            i_ph_stc: 8.21,
            i_s: 1e-7,
            a_n: 1.3,
            r_h: 10.0,
            alpha_t: 0.0032,
            t_c: 298.15,
            s_stc: 1000.0,
        }
    }
}

impl PvCellParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_ph_stc > 0.0
            && self.i_s > 0.0
            && (1.0..=2.0).contains(&self.a_n)
            && self.r_h > 0.0
            && self.t_c > 0.0
            && self.s_stc > 0.0
            && self.alpha_t.is_finite())
        {
            return Err(SimError::config(format!(
                "invalid PV cell parameters {self:?}"
            )));
        }
        Ok(())
    }

    /// Thermal voltage times the ideality factor (V).
    pub fn v_t(&self) -> f64 {
        self.a_n * K_B * self.t_c / Q_E
    }

    /// Photon current at irradiance `s`; the cell stays at the rated temperature.
    pub fn photon_current(&self, s: f64) -> f64 {
        (self.i_ph_stc + self.alpha_t * (self.t_c - 298.15)) * s / self.s_stc
    }
}

/// Cell current for cell voltage `v` and irradiance `s`.
pub fn pv_cell_current(v: f64, s: f64, p: &PvCellParams) -> f64 {
    p.photon_current(s) - p.i_s * (v / p.v_t()).exp_m1() - v / p.r_h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvArrayParams {
    pub cell: PvCellParams,
    pub n_series: f64,
    /// Parallel strings; zero means sized so that the STC maximum power equals the rating.
    pub n_parallel: f64,
    /// DC-link voltage at 1 pu (V).
    pub v_dc_base: f64,
    pub d_max: f64,
    /// P&O sampling period (s) and duty step.
    pub po_period: f64,
    pub po_step: f64,
}

impl Default for PvArrayParams {
    fn default() -> Self {
        Self {
            cell: PvCellParams::default(),
            n_series: 1600.0,
            n_parallel: 0.0,
            v_dc_base: 1200.0,
            d_max: 0.9,
            po_period: 0.01,
            po_step: 0.002,
        }
    }
}

/// PV array: cells in series strings, strings in parallel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvArray {
    pub p: PvArrayParams,
}

impl PvArray {
    /// Build the array, sizing the parallel count to `rated_w` if unset.
    pub fn new(mut p: PvArrayParams, rated_w: f64) -> Result<Self> {
        p.cell.validate()?;
        if !(p.n_series > 0.0
            && p.v_dc_base > 0.0
            && (0.0..1.0).contains(&p.d_max)
            && p.po_period > 0.0
            && p.po_step > 0.0)
        {
            return Err(SimError::config("invalid PV array parameters"));
        }
        if p.n_parallel <= 0.0 {
            let one = PvArray {
                p: PvArrayParams {
                    n_parallel: 1.0,
                    ..p
                },
            };
            let (_, p1) = one.mpp(p.cell.s_stc);
            p.n_parallel = rated_w / p1;
        }
        Ok(Self { p })
    }

    pub fn current(&self, v: f64, s: f64) -> f64 {
        self.p.n_parallel * pv_cell_current(v / self.p.n_series, s, &self.p.cell)
    }

    pub fn power(&self, v: f64, s: f64) -> f64 {
        v * self.current(v, s)
    }

    /// Open-circuit voltage by bisection.
    pub fn v_oc(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let cell = &self.p.cell;
        let mut lo = 0.0;
        let mut hi = cell.v_t() * (cell.photon_current(s) / cell.i_s + 1.0).ln() * 1.01;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if pv_cell_current(mid, s, cell) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi) * self.p.n_series
    }

    /// Maximum power point `(v, p)` by golden-section search on the
    /// unimodal P-V curve.
    pub fn mpp(&self, s: f64) -> (f64, f64) {
        if s <= 0.0 {
            return (0.0, 0.0);
        }
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0, self.v_oc(s));
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (self.power(c, s), self.power(d, s));
        while b - a > 1e-9 * self.p.n_series {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.power(c, s);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.power(d, s);
            }
        }
        let v = 0.5 * (a + b);
        (v, self.power(v, s))
    }

    /// Voltage on the high-voltage side of the MPP delivering `p_w`, or the
    /// MPP voltage if that power is not available.
    pub fn voltage_for_power(&self, p_w: f64, s: f64) -> f64 {
        let (v_mpp, p_mpp) = self.mpp(s);
        if p_w >= p_mpp {
            return v_mpp;
        }
        let (mut lo, mut hi) = (v_mpp, self.v_oc(s));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.power(mid, s) > p_w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// PV-side voltage of the boost stage in continuous conduction.
pub fn boost_interface(d: f64, v_dc: f64) -> f64 {
    (1.0 - d) * v_dc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackMode {
    /// Maximum power point.
    Mpp,
    /// Demanded power point.
    Dpp,
}

/// Feedback signal for the tracker.
pub fn po_feedback(p_pv: f64, p_dem: f64, mode: TrackMode) -> f64 {
    match mode {
        TrackMode::Mpp => p_pv,
        TrackMode::Dpp => -(p_pv - p_dem).abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostState {
    pub d: f64,
    pub delta_d: f64,
    pub d_max: f64,
    /// +1 or -1.
    pub direction: f64,
    pub last_feedback: f64,
}

impl BoostState {
    pub fn new(d: f64, delta_d: f64, d_max: f64) -> Self {
        Self {
            d,
            delta_d,
            d_max,
            direction: 1.0,
            last_feedback: f64::NEG_INFINITY,
        }
    }
}

/// One perturb-and-observe decision: keep the direction if the feedback
/// increased, otherwise reverse; then move the duty by one step.
pub fn perturb_observe_step(s: BoostState, feedback: f64) -> BoostState {
    let direction = if feedback > s.last_feedback {
        s.direction
    } else {
        -s.direction
    };
    BoostState {
        d: (s.d + direction * s.delta_d).clamp(0.0, s.d_max),
        direction,
        last_feedback: feedback,
        ..s
    }
}
