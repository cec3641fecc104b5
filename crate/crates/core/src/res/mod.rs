//! Renewable sources feeding the converter DC side. Powers at this interface
//! are in per unit of the converter rating.

pub mod pv;
pub mod wind;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use pv::{
    boost_interface, perturb_observe_step, po_feedback, BoostState, PvArray, PvArrayParams,
    TrackMode,
};
use wind::{wind_available, CpTable, WindParams, WindTurbine, WIND_SLOTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResModel {
    IdealDc,
    StaticPv,
    DynamicPv,
    StaticWind,
    DynamicWind,
}

impl ResModel {
    pub const ALL: [ResModel; 5] = [
        ResModel::IdealDc,
        ResModel::StaticPv,
        ResModel::DynamicPv,
        ResModel::StaticWind,
        ResModel::DynamicWind,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ResModel::IdealDc => "ideal_dc",
            ResModel::StaticPv => "static_pv",
            ResModel::DynamicPv => "dynamic_pv",
            ResModel::StaticWind => "static_wind",
            ResModel::DynamicWind => "dynamic_wind",
        }
    }

    /// Whether the source sits behind a DC link of its own.
    pub fn has_dc_link(&self) -> bool {
        !matches!(self, ResModel::IdealDc)
    }
}

/// Primary resource at the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Environment {
    /// Irradiance (W/m2).
    pub irradiance: f64,
    /// Hub-height wind speed (m/s).
    pub wind_speed: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            irradiance: 1000.0,
            wind_speed: 14.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ResParams {
    pub pv: PvArrayParams,
    pub wind: WindParams,
}

/// One source instance. Continuous states (dynamic wind only) live in the
/// global state vector at `offset`; the P&O tracker is sampled and keeps its
/// state here.
#[derive(Debug, Clone)]
pub struct ResDevice {
    pub model: ResModel,
    pub rated_w: f64,
    pub offset: usize,
    pv: Option<PvArray>,
    boost: BoostState,
    next_sample: f64,
    turbine: Option<WindTurbine>,
    /// Available power (pu) of a static model for the last resource input;
    /// recomputed only when the input changes.
    avail_cache: Option<(f64, f64)>,
    /// Last delivered and available power (pu).
    pub p_out: f64,
    pub p_available: f64,
}

impl ResDevice {
    pub fn new(model: ResModel, params: &ResParams, rated_mva: f64) -> Result<Self> {
        if !(rated_mva > 0.0) {
            return Err(SimError::config("source rating must be positive"));
        }
        let rated_w = rated_mva * 1e6;
        let pv = match model {
            ResModel::StaticPv | ResModel::DynamicPv => Some(PvArray::new(params.pv, rated_w)?),
            _ => None,
        };
        let turbine = match model {
            ResModel::StaticWind | ResModel::DynamicWind => {
                let mut w = params.wind;
                // The farm is sized so that its turbines together meet the rating.
                w.n_turbines = rated_w / w.rated_w;
                Some(WindTurbine::new(w, CpTable::default())?)
            }
            _ => None,
        };
        Ok(Self {
            model,
            rated_w,
            offset: 0,
            pv,
            boost: BoostState::new(0.0, params.pv.po_step, params.pv.d_max),
            next_sample: 0.0,
            turbine,
            avail_cache: None,
            p_out: 0.0,
            p_available: 0.0,
        })
    }

    pub fn slot_names(&self) -> &'static [&'static str] {
        match self.model {
            ResModel::DynamicWind => &WIND_SLOTS,
            _ => &[],
        }
    }

    pub fn duty(&self) -> f64 {
        self.boost.d
    }

    fn array(&self) -> &PvArray {
        self.pv.as_ref().expect("PV model has an array")
    }

    fn turbine(&self) -> &WindTurbine {
        self.turbine.as_ref().expect("wind model has a turbine")
    }

    fn per_turbine(&self, demand: f64) -> f64 {
        demand * self.rated_w / self.turbine().params.n_turbines
    }

    /// Steady state delivering `demand` (pu) at time `t0`; returns the
    /// continuous states.
    pub fn init(&mut self, demand: f64, env: &Environment, v_dc: f64, t0: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.slot_names().len()];
        match self.model {
            ResModel::DynamicPv => {
                let a = *self.array();
                let v = a.voltage_for_power(demand * self.rated_w, env.irradiance);
                let d = (1.0 - v / (v_dc * a.p.v_dc_base)).clamp(0.0, a.p.d_max);
                self.boost = BoostState::new(d, a.p.po_step, a.p.d_max);
                self.next_sample = t0 + a.p.po_period;
            }
            ResModel::DynamicWind => {
                x = self
                    .turbine()
                    .equilibrium(env.wind_speed, self.per_turbine(demand));
            }
            _ => {}
        }
        self.p_out = self.power_into_dc(&x, demand, env, v_dc);
        x
    }

    /// Power delivered to the DC link this step (pu).
    pub fn power_into_dc(&mut self, x: &[f64], demand: f64, env: &Environment, v_dc: f64) -> f64 {
        let demand = demand.max(0.0);
        let p = match self.model {
            ResModel::IdealDc => {
                self.p_available = demand;
                demand
            }
            ResModel::StaticPv => {
                self.p_available = match self.avail_cache {
                    Some((s, p)) if s == env.irradiance => p,
                    _ => {
                        let p = self.array().mpp(env.irradiance).1 / self.rated_w;
                        self.avail_cache = Some((env.irradiance, p));
                        p
                    }
                };
                demand.min(self.p_available)
            }
            ResModel::DynamicPv => {
                let a = self.array();
                let v_pv = boost_interface(self.boost.d, v_dc * a.p.v_dc_base);
                // The boost diode blocks reverse current.
                let p = a.power(v_pv, env.irradiance).max(0.0) / self.rated_w;
                self.p_available = p;
                p
            }
            ResModel::StaticWind => {
                self.p_available = match self.avail_cache {
                    Some((v, p)) if v == env.wind_speed => p,
                    _ => {
                        let t = self.turbine();
                        let n = t.params.n_turbines;
                        let p =
                            wind_available(env.wind_speed, &t.params, &t.table) * n / self.rated_w;
                        self.avail_cache = Some((env.wind_speed, p));
                        p
                    }
                };
                demand.min(self.p_available)
            }
            ResModel::DynamicWind => {
                let n = self.turbine().params.n_turbines;
                let p = WindTurbine::electrical_power(x) * n / self.rated_w;
                self.p_available = p;
                p
            }
        };
        self.p_out = p;
        p
    }

    pub fn derivs(&self, x: &[f64], demand: f64, env: &Environment, dx: &mut [f64]) {
        if self.model == ResModel::DynamicWind {
            self.turbine()
                .derivs(x, env.wind_speed, self.per_turbine(demand.max(0.0)), dx);
        }
    }

    /// Discrete updates after a step ending at `t`: state clamps and the P&O
    /// sample when due. `p_delivered` is the power of the step just taken.
    pub fn post_step(&mut self, x: &mut [f64], t: f64, demand: f64, p_delivered: f64) {
        match self.model {
            ResModel::DynamicWind => self.turbine().clamp(x),
            ResModel::DynamicPv => {
                let period = self.array().p.po_period;
                // Tolerance keeps sampling on the intended steps despite rounding.
                if t >= self.next_sample - 1e-9 {
                    let fb = po_feedback(p_delivered, demand.max(0.0), TrackMode::Dpp);
                    self.boost = perturb_observe_step(self.boost, fb);
                    self.next_sample += period;
                }
            }
            _ => {}
        }
    }

    /// Pitch angle of the dynamic turbine (deg), zero otherwise.
    pub fn pitch(&self, x: &[f64]) -> f64 {
        match self.model {
            ResModel::DynamicWind => WindTurbine::pitch(x),
            _ => 0.0,
        }
    }
}

/// Power delivered to the DC link by a stateless evaluation of `dev`.
pub fn res_power_into_dc(
    dev: &mut ResDevice,
    x: &[f64],
    demand: f64,
    env: &Environment,
    v_dc: f64,
) -> f64 {
    dev.power_into_dc(x, demand, env, v_dc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev(model: ResModel) -> ResDevice {
        ResDevice::new(model, &ResParams::default(), 100.0).unwrap()
    }

    /// Advance a device with a fixed step, demand and environment.
    fn run(
        d: &mut ResDevice,
        x: &mut [f64],
        demand: impl Fn(f64) -> f64,
        env: &Environment,
        h: f64,
        t_end: f64,
    ) -> Vec<f64> {
        let mut out = Vec::new();
        let mut dx = vec![0.0; x.len()];
        let n = (t_end / h).round() as usize;
        for k in 0..n {
            let t = k as f64 * h;
            let dem = demand(t);
            let p = d.power_into_dc(x, dem, env, 1.0);
            d.derivs(x, dem, env, &mut dx);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += h * di;
            }
            d.post_step(x, t + h, dem, p);
            out.push(p);
        }
        out
    }

    #[test]
    fn ideal_source_follows_demand_immediately() {
        let mut d = dev(ResModel::IdealDc);
        assert_eq!(d.power_into_dc(&[], 1.0, &Environment::default(), 1.0), 1.0);
        assert_eq!(
            d.power_into_dc(&[], 0.37, &Environment::default(), 0.8),
            0.37
        );
    }

    #[test]
    fn static_pv_caps_at_available() {
        let mut d = dev(ResModel::StaticPv);
        let env = Environment {
            irradiance: 400.0,
            ..Default::default()
        };
        let p = d.power_into_dc(&[], 1.0, &env, 1.0);
        let avail = d.array().mpp(400.0).1 / 100e6;
        assert_eq!(p, avail);
        assert!(avail < 0.45 && avail > 0.3);
        assert_eq!(d.power_into_dc(&[], 0.2, &env, 1.0), 0.2);
    }

    #[test]
    fn static_wind_follows_setpoint() {
        let mut d = dev(ResModel::StaticWind);
        let env = Environment::default();
        assert!((d.power_into_dc(&[], 0.6, &env, 1.0) - 0.6).abs() < 1e-12);
        assert!((d.power_into_dc(&[], 1.3, &env, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dynamic_pv_starts_at_demand() {
        let mut d = dev(ResModel::DynamicPv);
        let env = Environment::default();
        d.init(0.5, &env, 1.0, 0.0);
        assert!((d.p_out - 0.5).abs() < 0.01, "{}", d.p_out);
        // High-voltage side of the maximum power point.
        let v_pv = (1.0 - d.duty()) * 1200.0;
        assert!(v_pv > d.array().mpp(1000.0).0);
    }

    #[test]
    fn dynamic_pv_ramp_is_rate_limited() {
        let mut d = dev(ResModel::DynamicPv);
        let env = Environment::default();
        let h = 1e-3;
        d.init(0.3, &env, 1.0, 0.0);
        // Bound on the power change of one duty step anywhere on the curve.
        let a = *d.array();
        let max_step = (0..900)
            .map(|k| {
                let dd = k as f64 * 1e-3;
                (a.power((1.0 - dd) * 1200.0, 1000.0)
                    - a.power((1.0 - dd - 0.002) * 1200.0, 1000.0))
                .abs()
                    / 100e6
            })
            .fold(0.0, f64::max);
        let mut x = Vec::new();
        let p = run(
            &mut d,
            &mut x,
            |t| if t < 0.05 { 0.3 } else { 0.9 },
            &env,
            h,
            0.5,
        );
        // Power only changes at P&O samples, by at most one duty step.
        for w in p.windows(2) {
            assert!((w[1] - w[0]).abs() <= max_step + 1e-12);
        }
        // A 60% step cannot be completed in one sample.
        assert!(p[60] < 0.9 - 0.1);
        assert!(
            (p.last().unwrap() - 0.9).abs() < 0.03,
            "{}",
            p.last().unwrap()
        );
    }

    #[test]
    fn dynamic_pv_settles_to_static() {
        let env = Environment {
            irradiance: 700.0,
            ..Default::default()
        };
        for demand in [0.4, 0.9] {
            let mut s = dev(ResModel::StaticPv);
            let p_static = s.power_into_dc(&[], demand, &env, 1.0);
            let mut d = dev(ResModel::DynamicPv);
            d.init(0.1, &env, 1.0, 0.0);
            let p = run(&mut d, &mut Vec::new(), |_| demand, &env, 1e-3, 3.0);
            let mean = p[2000..].iter().sum::<f64>() / 1000.0;
            assert!(
                (mean - p_static).abs() / p_static < 0.02,
                "{demand}: {mean} vs {p_static}"
            );
        }
    }

    #[test]
    fn dynamic_wind_settles_to_static() {
        let env = Environment::default();
        let mut s = dev(ResModel::StaticWind);
        let p_static = s.power_into_dc(&[], 0.7, &env, 1.0);
        let mut d = dev(ResModel::DynamicWind);
        let mut x = d.init(1.0, &env, 1.0, 0.0);
        let p = run(&mut d, &mut x, |_| 0.7, &env, 1e-3, 40.0);
        let last = *p.last().unwrap();
        assert!(
            (last - p_static).abs() / p_static < 0.02,
            "{last} vs {p_static}"
        );
    }
}
