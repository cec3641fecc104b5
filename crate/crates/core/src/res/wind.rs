//! Wind turbine: power-coefficient table, static power law and a two-mass
//! drivetrain with pitch and torque actuators under gain-scheduled control.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

const BETZ: f64 = 16.0 / 27.0;

/// Rectangular `cP(lambda, beta)` grid with bilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct CpTable {
    pub lambdas: Vec<f64>,
    /// Pitch angles (deg).
    pub betas: Vec<f64>,
    /// `cp[i_beta][i_lambda]`.
    pub cp: Vec<Vec<f64>>,
}

/// Analytic power-coefficient curve used to generate the default table.
pub fn heier_cp(lambda: f64, beta: f64) -> f64 {
    let (c1, c2, c3, c4, c5, c6) = (0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068);
    if lambda <= 0.0 {
        return 0.0;
    }
    let inv = 1.0 / (lambda + 0.08 * beta) - 0.035 / (beta.powi(3) + 1.0);
    (c1 * (c2 * inv - c3 * beta - c4) * (-c5 * inv).exp() + c6 * lambda).max(0.0)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.len() >= 2 && v.windows(2).all(|w| w[1] > w[0])
}

impl CpTable {
    pub fn new(lambdas: Vec<f64>, betas: Vec<f64>, cp: Vec<Vec<f64>>) -> Result<Self> {
        let t = Self { lambdas, betas, cp };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !strictly_increasing(&self.lambdas) {
            errors.push("cP table tip-speed ratios must be strictly increasing".to_string());
        }
        if !strictly_increasing(&self.betas) {
            errors.push("cP table pitch angles must be strictly increasing".to_string());
        }
        if self.cp.len() != self.betas.len()
            || self.cp.iter().any(|r| r.len() != self.lambdas.len())
        {
            errors.push("cP table shape does not match its axes".to_string());
        } else if self
            .cp
            .iter()
            .flatten()
            .any(|&c| !(0.0..=BETZ).contains(&c))
        {
            errors.push("cP table values must lie within [0, 16/27]".to_string());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(errors))
        }
    }

    /// Table sampled from the analytic curve.
    pub fn generate(lambdas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        let cp = betas
            .iter()
            .map(|&b| lambdas.iter().map(|&l| heier_cp(l, b)).collect())
            .collect();
        Self::new(lambdas, betas, cp)
    }

    /// Parse the CSV layout: header `beta\lambda,l0,l1,...`, then one row per
    /// pitch angle starting with the angle.
    pub fn from_csv(text: &str) -> Result<Self> {
        let parse_err = |m: String| SimError::Parse {
            path: "cP table".into(),
            message: m,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
        let lambdas = header
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| parse_err(format!("tip-speed ratio '{s}': {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut betas = Vec::new();
        let mut cp = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| parse_err(e.to_string()))?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| parse_err(format!("value '{s}': {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let (b, row) = vals
                .split_first()
                .ok_or_else(|| parse_err("empty row".into()))?;
            betas.push(*b);
            cp.push(row.to_vec());
        }
        Self::new(lambdas, betas, cp)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta\\lambda");
        for l in &self.lambdas {
            out.push_str(&format!(",{l}"));
        }
        out.push('\n');
        for (b, row) in self.betas.iter().zip(&self.cp) {
            out.push_str(&b.to_string());
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }

    /// Bracketing index and weight along an axis, clamped at the ends.
    fn locate(axis: &[f64], x: f64) -> (usize, f64) {
        let n = axis.len();
        if x <= axis[0] {
            return (0, 0.0);
        }
        if x >= axis[n - 1] {
            return (n - 2, 1.0);
        }
        let k = axis.partition_point(|&a| a <= x) - 1;
        (k, (x - axis[k]) / (axis[k + 1] - axis[k]))
    }

    pub fn eval(&self, lambda: f64, beta: f64) -> f64 {
        let (i, u) = Self::locate(&self.lambdas, lambda);
        let (j, w) = Self::locate(&self.betas, beta);
        let r0 = &self.cp[j];
        let r1 = &self.cp[j + 1];
        let a = r0[i] + u * (r0[i + 1] - r0[i]);
        let b = r1[i] + u * (r1[i + 1] - r1[i]);
        a + w * (b - a)
    }

    /// Largest table entry and its `(lambda, beta)`.
    pub fn max(&self) -> (f64, f64, f64) {
        let mut best = (0.0, self.lambdas[0], self.betas[0]);
        for (j, row) in self.cp.iter().enumerate() {
            for (i, &c) in row.iter().enumerate() {
                if c > best.0 {
                    best = (c, self.lambdas[i], self.betas[j]);
                }
            }
        }
        best
    }

    /// Best coefficient with the tip-speed ratio limited to `lambda_max`:
    /// every grid point inside the limit and every boundary point on it.
    pub fn max_below(&self, lambda_max: f64) -> (f64, f64, f64) {
        let mut best = (0.0, self.lambdas[0], self.betas[0]);
        for (j, row) in self.cp.iter().enumerate() {
            let beta = self.betas[j];
            for (i, &c) in row.iter().enumerate() {
                if self.lambdas[i] > lambda_max {
                    break;
                }
                if c > best.0 {
                    best = (c, self.lambdas[i], beta);
                }
            }
            let c = self.eval(lambda_max, beta);
            if c > best.0 {
                best = (c, lambda_max, beta);
            }
        }
        best
    }

    /// Pitch angle giving coefficient `target` at `lambda`, searching upward
    /// from `beta_min` where the coefficient decreases with pitch.
    pub fn pitch_for(&self, lambda: f64, target: f64, beta_min: f64, beta_max: f64) -> f64 {
        if self.eval(lambda, beta_min) <= target {
            return beta_min;
        }
        let (mut lo, mut hi) = (beta_min, beta_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.eval(lambda, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl Default for CpTable {
    fn default() -> Self {
        Self::from_csv(include_str!("../../data/cp_table.csv")).expect("bundled cP table is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindParams {
    /// Rotor radius (m).
    pub radius: f64,
    /// Air density (kg/m3).
    pub rho: f64,
    /// Rated electrical power per turbine (W).
    pub rated_w: f64,
    pub n_turbines: f64,
    /// Rated rotor speed (rad/s).
    pub omega_rated: f64,
    /// Rotor and low-speed-side generator inertia (kg m2).
    pub j_rotor: f64,
    pub j_gen: f64,
    /// Shaft stiffness (N m/rad) and damping (N m s/rad).
    pub k_shaft: f64,
    pub c_shaft: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Pitch actuator time constant (s) and rate limit (deg/s).
    pub t_pitch: f64,
    pub pitch_rate: f64,
    /// Torque actuator time constant (s).
    pub t_torque: f64,
    /// Speed-loop bandwidth (rad/s).
    pub speed_bandwidth: f64,
    /// Pitch PI gains at zero pitch (deg per pu power error, and per pu s).
    pub pitch_kp: f64,
    pub pitch_ki: f64,
}

impl Default for WindParams {
    fn default() -> Self {
        Self {
            radius: 63.0,
            rho: 1.225,
            rated_w: 5e6,
            n_turbines: 20.0,
            omega_rated: 12.1 * std::f64::consts::PI / 30.0,
            j_rotor: 3.88e7,
            j_gen: 5.03e6,
            k_shaft: 8.676e8,
            c_shaft: 6.215e6,
            beta_min: 0.0,
            beta_max: 30.0,
            t_pitch: 0.2,
            pitch_rate: 8.0,
            t_torque: 0.1,
            speed_bandwidth: 1.0,
            pitch_kp: 60.0,
            pitch_ki: 60.0,
        }
    }
}

impl WindParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.radius,
            self.rho,
            self.rated_w,
            self.n_turbines,
            self.omega_rated,
            self.j_rotor,
            self.j_gen,
            self.k_shaft,
            self.t_pitch,
            self.pitch_rate,
            self.t_torque,
            self.speed_bandwidth,
        ];
        if pos.iter().any(|x| !(x.is_finite() && *x > 0.0))
            || self.c_shaft < 0.0
            || !(self.beta_max > self.beta_min)
        {
            return Err(SimError::config(format!(
                "invalid wind turbine parameters {self:?}"
            )));
        }
        Ok(())
    }

    pub fn swept_area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    /// Aerodynamic power of one turbine (W).
    pub fn aero_power(&self, cp: f64, v: f64) -> f64 {
        0.5 * cp * self.rho * self.swept_area() * v.powi(3)
    }
}

/// Power available to one turbine at wind speed `v` (W): the best table
/// point reachable within the rated rotor speed, capped at rated power.
pub fn wind_available(v: f64, params: &WindParams, table: &CpTable) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let lambda_max = params.omega_rated * params.radius / v;
    let (cp, _, _) = table.max_below(lambda_max);
    params.aero_power(cp, v).min(params.rated_w)
}

/// Static wind model: the output is set to the setpoint immediately when
/// enough power is available (W, one turbine).
pub fn wind_static_power(v: f64, p_setpoint: f64, params: &WindParams, table: &CpTable) -> f64 {
    p_setpoint.max(0.0).min(wind_available(v, params, table))
}

/// Scheduling points for the pitch controller (deg).
pub const SCHEDULE_BETAS: [f64; 5] = [0.0, 5.0, 10.0, 15.0, 20.0];

/// Triangular membership weights over the scheduling points; nonnegative
/// and summing to one.
pub fn schedule_weights(beta: f64) -> [f64; 5] {
    let mut w = [0.0; 5];
    let n = SCHEDULE_BETAS.len();
    if beta <= SCHEDULE_BETAS[0] {
        w[0] = 1.0;
        return w;
    }
    if beta >= SCHEDULE_BETAS[n - 1] {
        w[n - 1] = 1.0;
        return w;
    }
    let k = SCHEDULE_BETAS.partition_point(|&b| b <= beta) - 1;
    let u = (beta - SCHEDULE_BETAS[k]) / (SCHEDULE_BETAS[k + 1] - SCHEDULE_BETAS[k]);
    w[k] = 1.0 - u;
    w[k + 1] = u;
    w
}

/// Pitch sensitivity grows with pitch, so the local gains shrink.
fn local_gain_factor(beta: f64) -> f64 {
    1.0 / (1.0 + beta / 5.0)
}

/// Blended gain factor at pitch `beta`.
pub fn scheduled_gain(beta: f64) -> f64 {
    schedule_weights(beta)
        .iter()
        .zip(SCHEDULE_BETAS)
        .map(|(w, b)| w * local_gain_factor(b))
        .sum()
}

// Slot layout of the dynamic turbine.
pub const WIND_SLOTS: [&str; 7] = [
    "omega_rotor",
    "omega_gen",
    "shaft_twist",
    "pitch",
    "torque",
    "pitch_integrator",
    "speed_integrator",
];
const W_R: usize = 0;
const W_G: usize = 1;
const TWIST: usize = 2;
const BETA: usize = 3;
const TORQUE: usize = 4;
const X_PITCH: usize = 5;
const X_SPEED: usize = 6;

/// Closed-loop turbine. States are per turbine; torques refer to the rotor shaft.
#[derive(Debug, Clone)]
pub struct WindTurbine {
    pub params: WindParams,
    pub table: CpTable,
    lambda_opt: f64,
}

/// Outputs of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindOutputs {
    pub p_elec: f64,
    pub p_aero: f64,
    pub pitch_ref: f64,
    pub torque_ref: f64,
    pub omega_ref: f64,
}

impl WindTurbine {
    pub fn new(params: WindParams, table: CpTable) -> Result<Self> {
        params.validate()?;
        table.validate()?;
        let lambda_opt = table.max().1;
        Ok(Self {
            params,
            table,
            lambda_opt,
        })
    }

    fn omega_ref(&self, v: f64) -> f64 {
        (self.lambda_opt * v / self.params.radius)
            .clamp(0.1 * self.params.omega_rated, self.params.omega_rated)
    }

    fn aero_torque(&self, x: &[f64], v: f64) -> (f64, f64) {
        let w = x[W_R].max(1e-3);
        let cp = self
            .table
            .eval(w * self.params.radius / v.max(0.1), x[BETA]);
        let p = self.params.aero_power(cp, v);
        (p / w, p)
    }

    fn total_inertia(&self) -> f64 {
        self.params.j_rotor + self.params.j_gen
    }

    /// Controller references for the current state.
    pub fn outputs(&self, x: &[f64], v: f64, p_set: f64) -> WindOutputs {
        let p = &self.params;
        let p_set = p_set.clamp(0.0, p.rated_w);
        let omega_ref = self.omega_ref(v);
        let j = self.total_inertia();
        let bw = p.speed_bandwidth;
        let kp_w = 2.0 * 0.7 * bw * j;
        let p_elec = x[TORQUE] * x[W_G];
        let err = (p_elec - p_set) / p.rated_w;
        let pitch_ref =
            (p.pitch_kp * scheduled_gain(x[BETA]) * err + x[X_PITCH]).clamp(p.beta_min, p.beta_max);
        let torque_ref =
            (kp_w * (x[W_G] - omega_ref) + x[X_SPEED]).clamp(0.0, 1.2 * p.rated_w / p.omega_rated);
        let (_, p_aero) = self.aero_torque(x, v);
        WindOutputs {
            p_elec,
            p_aero,
            pitch_ref,
            torque_ref,
            omega_ref,
        }
    }

    pub fn derivs(&self, x: &[f64], v: f64, p_set: f64, dx: &mut [f64]) -> WindOutputs {
        let p = &self.params;
        let out = self.outputs(x, v, p_set);
        let (t_aero, _) = self.aero_torque(x, v);
        let shaft = p.k_shaft * x[TWIST] + p.c_shaft * (x[W_R] - x[W_G]);
        dx[W_R] = (t_aero - shaft) / p.j_rotor;
        dx[W_G] = (shaft - x[TORQUE]) / p.j_gen;
        dx[TWIST] = x[W_R] - x[W_G];
        dx[BETA] = ((out.pitch_ref - x[BETA]) / p.t_pitch).clamp(-p.pitch_rate, p.pitch_rate);
        dx[TORQUE] = (out.torque_ref - x[TORQUE]) / p.t_torque;
        // Integrators hold against their limits.
        let gain = p.pitch_ki * scheduled_gain(x[BETA]);
        let e = (out.p_elec - p_set.clamp(0.0, p.rated_w)) / p.rated_w;
        let at_min = x[X_PITCH] <= p.beta_min && e < 0.0;
        let at_max = x[X_PITCH] >= p.beta_max && e > 0.0;
        dx[X_PITCH] = if at_min || at_max { 0.0 } else { gain * e };
        let j = self.total_inertia();
        let ki_w = p.speed_bandwidth * p.speed_bandwidth * j;
        let t_max = 1.2 * p.rated_w / p.omega_rated;
        let ew = x[W_G] - out.omega_ref;
        let sat = (x[X_SPEED] >= t_max && ew > 0.0) || (x[X_SPEED] <= 0.0 && ew < 0.0);
        dx[X_SPEED] = if sat { 0.0 } else { ki_w * ew };
        out
    }

    /// Keep states within physical limits after a step.
    pub fn clamp(&self, x: &mut [f64]) {
        let p = &self.params;
        x[BETA] = x[BETA].clamp(p.beta_min, p.beta_max);
        x[X_PITCH] = x[X_PITCH].clamp(p.beta_min, p.beta_max);
        x[W_R] = x[W_R].max(0.0);
        x[W_G] = x[W_G].max(0.0);
    }

    /// Equilibrium delivering `min(p_set, available)` at wind speed `v`.
    pub fn equilibrium(&self, v: f64, p_set: f64) -> Vec<f64> {
        let p = &self.params;
        let w = self.omega_ref(v);
        let lambda = w * p.radius / v.max(0.1);
        let cp_free = self.table.eval(lambda, p.beta_min);
        let avail = p.aero_power(cp_free, v);
        let target = p_set.clamp(0.0, p.rated_w).min(avail);
        let beta = self.table.pitch_for(
            lambda,
            target / (0.5 * p.rho * p.swept_area() * v.powi(3)).max(1e-12),
            p.beta_min,
            p.beta_max,
        );
        let mut x = vec![0.0; WIND_SLOTS.len()];
        x[W_R] = w;
        x[W_G] = w;
        x[BETA] = beta;
        let cp = self.table.eval(lambda, beta);
        let t = p.aero_power(cp, v) / w;
        x[TORQUE] = t;
        x[TWIST] = t / p.k_shaft;
        x[X_SPEED] = t;
        x[X_PITCH] = beta;
        // When limited by availability the pitch loop sits at its minimum
        // with a negative error; the integrator holds there.
        x
    }

    pub fn electrical_power(x: &[f64]) -> f64 {
        x[TORQUE] * x[W_G]
    }

    pub fn pitch(x: &[f64]) -> f64 {
        x[BETA]
    }

    pub fn rotor_speed(x: &[f64]) -> f64 {
        x[W_R]
    }
}

/// One Euler step of the dynamic turbine; returns the electrical power (W).
pub fn wind_dynamic_step(t: &WindTurbine, x: &mut [f64], v: f64, p_set: f64, h: f64) -> f64 {
    let mut dx = vec![0.0; x.len()];
    t.derivs(x, v, p_set, &mut dx);
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += h * di;
    }
    t.clamp(x);
    WindTurbine::electrical_power(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turbine() -> WindTurbine {
        WindTurbine::new(WindParams::default(), CpTable::default()).unwrap()
    }

    #[test]
    fn bundled_table_matches_generator() {
        let t = CpTable::default();
        for (j, &b) in t.betas.iter().enumerate() {
            for (i, &l) in t.lambdas.iter().enumerate() {
                assert!((t.cp[j][i] - heier_cp(l, b)).abs() < 1e-12);
            }
        }
        let (cp, l, b) = t.max();
        assert!((cp - 0.48).abs() < 0.005, "{cp}");
        assert!((l - 8.1).abs() < 0.3 && b == 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let t = CpTable::generate(vec![1.0, 2.0, 4.0], vec![0.0, 10.0]).unwrap();
        assert_eq!(CpTable::from_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(CpTable::new(vec![1.0, 1.0], vec![0.0, 1.0], vec![vec![0.1, 0.1]; 2]).is_err());
        assert!(CpTable::new(vec![1.0, 2.0], vec![0.0, 1.0], vec![vec![0.1, 0.7]; 2]).is_err());
    }

    #[test]
    fn zero_wind_zero_power() {
        let t = CpTable::default();
        assert_eq!(wind_static_power(0.0, 5e6, &WindParams::default(), &t), 0.0);
    }

    #[test]
    fn static_follows_setpoint_when_available() {
        let t = CpTable::default();
        let p = WindParams::default();
        assert_eq!(wind_static_power(14.0, 3e6, &p, &t), 3e6);
        assert_eq!(wind_static_power(14.0, 9e6, &p, &t), p.rated_w);
    }

    #[test]
    fn power_law_at_eight_metres_per_second() {
        // Oracle: direct evaluation of 0.5 cP rho pi R^2 v^3 with cP = 0.48.
        let p = WindParams::default();
        let expected = 0.5 * 0.48 * 1.225 * std::f64::consts::PI * 63.0f64.powi(2) * 512.0;
        assert!((p.aero_power(0.48, 8.0) - expected).abs() < 1e-6);
        assert!((expected - 1.88e6).abs() < 0.01e6);
        // Below rated speed the table optimum is reachable.
        let t = CpTable::default();
        let avail = wind_available(8.0, &p, &t);
        assert!((avail - p.aero_power(t.max().0, 8.0)).abs() < 1e-6);
    }

    #[test]
    fn static_never_exceeds_bounds() {
        let t = CpTable::default();
        let p = WindParams::default();
        for k in 0..60 {
            let v = k as f64 * 0.5;
            let out = wind_static_power(v, 4e6, &p, &t);
            assert!(out <= 4e6);
            assert!(out <= p.aero_power(t.max().0, v) + 1e-9);
            assert!(out <= p.rated_w);
        }
    }

    #[test]
    fn schedule_weights_are_convex() {
        for k in 0..=300 {
            let b = -2.0 + k as f64 * 0.1;
            let w = schedule_weights(b);
            assert!(w.iter().all(|&x| x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn equilibrium_is_steady() {
        let t = turbine();
        for (v, p_set) in [(14.0, 5e6), (14.0, 3e6), (9.0, 5e6)] {
            let x = t.equilibrium(v, p_set);
            let mut dx = vec![0.0; x.len()];
            t.derivs(&x, v, p_set, &mut dx);
            for (k, d) in dx.iter().enumerate() {
                assert!(d.abs() < 1e-6, "v={v} p={p_set} {} = {d}", WIND_SLOTS[k]);
            }
        }
    }

    #[test]
    fn setpoint_step_respects_pitch_rate() {
        let t = turbine();
        let h = 1e-3;
        let (v, p0) = (14.0, 5e6);
        let mut x = t.equilibrium(v, p0);
        let p1 = 0.8 * p0;
        let mut settle = None;
        let mut prev_beta = WindTurbine::pitch(&x);
        for k in 0..60_000 {
            let p = wind_dynamic_step(&t, &mut x, v, p1, h);
            let beta = WindTurbine::pitch(&x);
            assert!((beta - prev_beta).abs() <= t.params.pitch_rate * h + 1e-12);
            assert!(beta >= t.params.beta_min && beta <= t.params.beta_max);
            prev_beta = beta;
            if (p - p1).abs() > 0.02 * p1 {
                settle = None;
            } else if settle.is_none() {
                settle = Some(k as f64 * h);
            }
        }
        let ts = settle.expect("reaches the new setpoint");
        // Seconds range: the pitch must travel several degrees at a bounded rate.
        assert!(ts > 0.5 && ts < 30.0, "settling {ts}");
        let x_final = x.clone();
        let mut dx = vec![0.0; x.len()];
        t.derivs(&x_final, v, p1, &mut dx);
        assert!(dx.iter().all(|d| d.abs() < 1e-3), "{dx:?}");
    }

    #[test]
    fn dynamic_matches_static_in_steady_state() {
        let t = turbine();
        for (v, p_set) in [(14.0, 4e6), (9.0, 5e6), (11.0, 5e6)] {
            let mut x = t.equilibrium(v, p_set);
            let mut p = 0.0;
            for _ in 0..30_000 {
                p = wind_dynamic_step(&t, &mut x, v, p_set, 1e-3);
            }
            let s = wind_static_power(v, p_set, &t.params, &t.table);
            assert!((p - s).abs() / s < 0.02, "v={v}: {p} vs {s}");
        }
    }
}
