//! Time-domain engines. Both modes share the device models, the state vector
//! and the event handling; they differ in how the network is solved.
//!
//! Per step: sources are evaluated from the current state, the network is
//! solved, device derivatives are formed from the solution, the sample is
//! recorded and the state advances by one forward-Euler step.

pub mod result;

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::converter::{Vsc, VSC_SLOTS};
use crate::error::{Result, SimError};
use crate::events::{EventKind, EventQueue, TimedEvent};
use crate::frames::{abc_to_complex, complex_to_abc};
use crate::integrate::{IntegratorConfig, StateVector};
use crate::machines::Machine;
use crate::network::phasor::network_admittance;
use crate::network::powerflow::injections;
use crate::network::{power_flow, BusSpec, Companion, EmtNetwork, PhasorNetwork, Topology};
use crate::res::{Environment, ResDevice};

pub use result::RunResult;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Emt,
    Phasor,
}

impl SimMode {
    pub fn name(&self) -> &'static str {
        match self {
            SimMode::Emt => "emt",
            SimMode::Phasor => "phasor",
        }
    }

    pub fn default_step(&self) -> f64 {
        match self {
            SimMode::Emt => crate::integrate::EMT_DEFAULT_STEP,
            SimMode::Phasor => crate::integrate::PHASOR_DEFAULT_STEP,
        }
    }
}

/// Generator operating point for the initial power flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dispatch {
    pub machine: String,
    #[serde(default)]
    pub slack: bool,
    pub p_mw: f64,
    pub v_pu: f64,
}

/// Seeded sample-and-hold noise on the primary resource.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub seed: u64,
    /// Standard deviations (W/m2, m/s).
    pub irradiance_std: f64,
    pub wind_std: f64,
    /// Hold time of each sample (s).
    pub period: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            irradiance_std: 0.0,
            wind_std: 0.0,
            period: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub step_h: f64,
    pub duration: f64,
    /// Settling time simulated before t = 0 (s).
    pub settle: f64,
    /// Output sample spacing (s); rounded to a whole number of steps.
    pub output_dt: f64,
    pub companion: Companion,
    pub noise: NoiseConfig,
}

impl RunOptions {
    pub fn new(mode: SimMode, duration: f64) -> Self {
        Self {
            step_h: mode.default_step(),
            duration,
            settle: 1.0,
            output_dt: 1e-3,
            companion: Companion::default(),
            noise: NoiseConfig::default(),
        }
    }
}

enum Net {
    Emt(Box<EmtNetwork>),
    Phasor(Box<PhasorNetwork>),
}

/// Assembled system ready to run: network topology with source branches
/// registered, devices, and the initial dispatch.
#[derive(Debug, Clone)]
pub struct System {
    pub mode: SimMode,
    pub topo: Topology,
    pub machines: Vec<Machine>,
    pub dispatch: Vec<Dispatch>,
    pub vsc: Vsc,
    pub res: ResDevice,
    pub env: Environment,
    /// Converter setpoints at t = 0 (MW, Mvar).
    pub p_set_mw: f64,
    pub q_set_mvar: f64,
    /// Buses reported in the output.
    pub report_buses: Vec<String>,
    machine_node: Vec<usize>,
    machine_src: Vec<usize>,
    vsc_node: usize,
    vsc_src: Option<usize>,
}

/// Per-run scratch and bookkeeping.
/// Time of step `k`; exact decimal steps when `1/h` is a whole number.
fn step_time(k: i64, h: f64) -> f64 {
    let per_s = (1.0 / h).round();
    if (per_s * h - 1.0).abs() < 1e-12 {
        k as f64 / per_s
    } else {
        k as f64 * h
    }
}

struct Runner {
    net: Net,
    x: StateVector,
    dx: Vec<f64>,
    inject: Vec<C>,
    e_sync: Vec<C>,
    queue: EventQueue,
    h: f64,
    omega_b: f64,
    env_base: Environment,
    rng: ChaCha8Rng,
    noise: NoiseConfig,
    noise_every: i64,
    report_nodes: Vec<usize>,
    sample: Vec<f64>,
    demand: f64,
    p_source: f64,
}

impl System {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mode: SimMode,
        mut topo: Topology,
        machines: Vec<Machine>,
        dispatch: Vec<Dispatch>,
        vsc: Vsc,
        res: ResDevice,
        env: Environment,
        report_buses: Vec<String>,
    ) -> Result<Self> {
        let mut errors = Vec::new();
        let mut machine_node = Vec::new();
        let mut machine_src = Vec::new();
        for m in &machines {
            match topo.node(&m.bus) {
                Some(n) => {
                    machine_node.push(n);
                    machine_src.push(topo.add_source(&m.name, n, m.stamp_impedance_sys()));
                }
                None => errors.push(format!("generator '{}': unknown bus '{}'", m.name, m.bus)),
            }
        }
        let vsc_node = topo.node(&vsc.bus);
        if vsc_node.is_none() {
            errors.push(format!(
                "converter '{}': unknown bus '{}'",
                vsc.name, vsc.bus
            ));
        }
        for d in &dispatch {
            if !machines.iter().any(|m| m.name == d.machine) {
                errors.push(format!("dispatch: unknown generator '{}'", d.machine));
            }
        }
        if dispatch.iter().filter(|d| d.slack).count() != 1 {
            errors.push("dispatch needs exactly one slack generator".to_string());
        }
        for m in &machines {
            if !dispatch.iter().any(|d| d.machine == m.name) {
                errors.push(format!("generator '{}' has no dispatch entry", m.name));
            }
        }
        for b in &report_buses {
            if topo.node(b).is_none() {
                errors.push(format!("reported bus '{b}' does not exist"));
            }
        }
        if !errors.is_empty() {
            return Err(SimError::Validation(errors));
        }
        let vsc_node = vsc_node.expect("checked above");
        let vsc_src = match mode {
            SimMode::Emt => Some(topo.add_source(&vsc.name, vsc_node, vsc.filter_impedance_sys())),
            SimMode::Phasor => None,
        };
        Ok(Self {
            mode,
            topo,
            machines,
            dispatch,
            vsc,
            res,
            env,
            p_set_mw: 0.0,
            q_set_mvar: 0.0,
            report_buses,
            machine_node,
            machine_src,
            vsc_node,
            vsc_src,
        })
    }

    /// Pre-register loads switched in by events so the network keeps its
    /// element set fixed during the run.
    pub fn prepare_events(&mut self, events: &[TimedEvent]) -> Result<()> {
        let names: Vec<&str> = self.machines.iter().map(|m| m.name.as_str()).collect();
        let errors = check_events(&self.topo, &names, events);
        if !errors.is_empty() {
            return Err(SimError::Validation(errors));
        }
        for (k, e) in events.iter().enumerate() {
            if let EventKind::LoadConnect { bus, p_mw, q_mvar } = &e.kind {
                let n = self.topo.node_or_err(bus)?;
                let s = self.topo.s_base_mva;
                self.topo
                    .add_load(&format!("event{k}"), n, p_mw / s, q_mvar / s);
                self.topo.loads.last_mut().expect("just added").active = false;
            }
        }
        Ok(())
    }

    fn s_base(&self) -> f64 {
        self.topo.s_base_mva
    }

    fn vsc_rating(&self) -> f64 {
        self.vsc.params.s_rated_mva
    }

    /// Output column names in recording order.
    pub fn signal_names(&self) -> Vec<String> {
        let mut n = Vec::new();
        for m in &self.machines {
            for s in ["speed", "p_mw", "q_mvar", "v_pu", "field_voltage"] {
                n.push(format!("{}.{s}", m.name));
            }
        }
        for b in &self.report_buses {
            n.push(format!("bus{b}.v_pu"));
        }
        let v = &self.vsc.name;
        for s in [
            "p_mw", "q_mvar", "freq_hz", "v_dc", "i_d_ref", "i_q_ref", "limited",
        ] {
            n.push(format!("{v}.{s}"));
        }
        for s in ["p_mw", "p_avail_mw", "demand_mw"] {
            n.push(format!("res.{s}"));
        }
        match self.res.model {
            crate::res::ResModel::DynamicPv => n.push("res.duty".into()),
            crate::res::ResModel::DynamicWind => {
                n.push("res.pitch_deg".into());
                n.push("res.rotor_speed".into());
            }
            _ => {}
        }
        n
    }

    /// Power flow and device back-initialization. Returns the node voltages,
    /// the source EMFs in the synchronous frame and the initial states.
    fn initialize(&mut self, t0: f64) -> Result<(Vec<C>, Vec<C>, StateVector)> {
        let s_base = self.s_base();
        let y = network_admittance(&self.topo);
        let mut specs = Vec::new();
        for (k, m) in self.machines.iter().enumerate() {
            let d = self
                .dispatch
                .iter()
                .find(|d| d.machine == m.name)
                .expect("validated in new");
            let node = self.machine_node[k];
            specs.push((
                node,
                if d.slack {
                    BusSpec::Slack { v: d.v_pu }
                } else {
                    BusSpec::Pv {
                        p: d.p_mw / s_base,
                        v: d.v_pu,
                    }
                },
            ));
        }
        specs.push((
            self.vsc_node,
            BusSpec::Pq {
                p: self.p_set_mw / s_base,
                q: self.q_set_mvar / s_base,
            },
        ));
        let v = power_flow(&y, &specs, 1e-10, 50).map_err(|e| e.annotate("initial power flow"))?;
        let s_inj = injections(&y, &v);

        let mut x = StateVector::new();
        let mut e = vec![C::new(0.0, 0.0); self.topo.sources.len()];
        for (k, m) in self.machines.iter_mut().enumerate() {
            let node = self.machine_node[k];
            let i_sys = (s_inj[node] / v[node]).conj();
            let xm = m.initial_state(v[node], i_sys / m.base_ratio);
            let delta = Machine::delta(&xm);
            e[self.machine_src[k]] = m.emf(&xm, false) * C::from_polar(1.0, delta);
            m.offset = x.register(&m.name, &m.slot_names(), &xm)?;
        }
        let r = self.vsc_rating();
        let s_vsc = C::new(self.p_set_mw, self.q_set_mvar) / r;
        let xv = self.vsc.initial_state(v[self.vsc_node], s_vsc);
        if let Some(src) = self.vsc_src {
            e[src] = self.vsc.emf(&xv);
        }
        self.vsc.offset = x.register(&self.vsc.name.clone(), &VSC_SLOTS, &xv)?;
        let demand = self.vsc.demand(&xv);
        let xr = self.res.init(demand, &self.env, Vsc::v_dc(&xv), t0);
        self.res.offset = x.register("res", self.res.slot_names(), &xr)?;
        Ok((v, e, x))
    }

    /// Run the scenario: initialize, settle, then integrate to `duration`
    /// while firing `events` and recording samples.
    pub fn run(&mut self, events: &[TimedEvent], opts: &RunOptions) -> Result<RunResult> {
        let cfg = match self.mode {
            SimMode::Emt => IntegratorConfig::emt(opts.step_h)?,
            SimMode::Phasor => IntegratorConfig::phasor(opts.step_h)?,
        };
        let h = cfg.step_h;
        if !(opts.duration >= 0.0 && opts.settle >= 0.0 && opts.output_dt > 0.0) {
            return Err(SimError::config(
                "duration and settle must be nonnegative and output_dt positive",
            ));
        }
        self.prepare_events(events)?;
        let settle_steps = (opts.settle / h).round() as i64;
        let t0 = -(settle_steps as f64) * h;
        let (v0, e0, x) = self.initialize(t0)?;

        let mut queue = EventQueue::new(h);
        queue.set_now(0.0);
        for ev in events {
            if ev.time > opts.duration {
                return Err(SimError::config(format!(
                    "event at {} s is after the end of the run ({} s)",
                    ev.time, opts.duration
                )));
            }
            queue.schedule(ev.time, ev.kind.clone())?;
        }
        let net = match self.mode {
            SimMode::Emt => {
                let mut n = EmtNetwork::new(&self.topo, h, opts.companion)?;
                n.init_from_phasors(&self.topo, &v0, &e0, t0);
                Net::Emt(Box::new(n))
            }
            SimMode::Phasor => Net::Phasor(Box::new(PhasorNetwork::new(&self.topo)?)),
        };
        let names = self.signal_names();
        let n_state = x.len();
        let mut run = Runner {
            net,
            x,
            dx: vec![0.0; n_state],
            inject: vec![C::new(0.0, 0.0); self.topo.n_nodes()],
            e_sync: vec![C::new(0.0, 0.0); self.machines.len()],
            queue,
            h,
            omega_b: self.topo.omega_b(),
            env_base: self.env,
            rng: ChaCha8Rng::seed_from_u64(opts.noise.seed),
            noise: opts.noise,
            noise_every: ((opts.noise.period / h).round() as i64).max(1),
            report_nodes: self
                .report_buses
                .iter()
                .map(|b| self.topo.node(b).expect("validated in new"))
                .collect(),
            sample: vec![0.0; names.len()],
            demand: 0.0,
            p_source: 0.0,
        };
        let mut out = RunResult::new(names);
        let record_every = ((opts.output_dt / h).round() as i64).max(1);
        let n_end = (opts.duration / h).round() as i64;

        for k in -settle_steps..0 {
            self.step(&mut run, k, None)?;
        }
        let start = Instant::now();
        for k in 0..n_end {
            let rec = (k % record_every == 0).then_some(&mut out);
            self.step(&mut run, k, rec)?;
        }
        out.wall_clock_s = start.elapsed().as_secs_f64();
        out.meta.insert("mode".into(), self.mode.name().into());
        out.meta.insert("step_h".into(), h.to_string());
        out.meta.insert("steps".into(), n_end.to_string());
        out.meta
            .insert("settle_steps".into(), settle_steps.to_string());
        out.meta
            .insert("f_nom_hz".into(), self.topo.f_nom.to_string());
        out.meta
            .insert("wall_clock_s".into(), out.wall_clock_s.to_string());
        Ok(out)
    }

    fn apply_event(&mut self, run: &mut Runner, kind: EventKind) -> Result<()> {
        let mut refactor = false;
        match kind {
            EventKind::Setpoint { p_mw, q_mvar } => {
                let r = self.vsc_rating();
                if let Some(p) = p_mw {
                    self.vsc.p_set = p / r;
                }
                if let Some(q) = q_mvar {
                    self.vsc.q_set = q / r;
                }
            }
            EventKind::LoadConnect { bus, p_mw, q_mvar } => {
                let s = self.s_base();
                let node = self.topo.node_or_err(&bus)?;
                let ld = self
                    .topo
                    .loads
                    .iter_mut()
                    .find(|l| !l.active && l.node == node && l.p == p_mw / s && l.q == q_mvar / s)
                    .ok_or_else(|| {
                        SimError::config(format!("load event at bus '{bus}' was not prepared"))
                    })?;
                ld.active = true;
                refactor = true;
            }
            EventKind::FaultOn { fault } => {
                self.topo.apply_fault(&fault)?;
                refactor = true;
            }
            EventKind::FaultClear { id } => {
                refactor = self.topo.clear_fault(&id);
            }
            EventKind::BreakerOpen { line, .. } => {
                refactor = self.topo.open_line(&line)?;
            }
            EventKind::GeneratorTrip { generator } => {
                let k = self
                    .machines
                    .iter()
                    .position(|m| m.name == generator)
                    .ok_or_else(|| SimError::config(format!("unknown generator '{generator}'")))?;
                if !self.machines[k].tripped {
                    self.machines[k].tripped = true;
                    self.topo.isolate_source(self.machine_src[k]);
                    refactor = true;
                }
            }
            EventKind::Irradiance { w_per_m2 } => {
                run.env_base.irradiance = w_per_m2;
                self.env.irradiance = w_per_m2;
            }
            EventKind::WindSpeed { m_per_s } => {
                run.env_base.wind_speed = m_per_s;
                self.env.wind_speed = m_per_s;
            }
        }
        if refactor {
            match &mut run.net {
                Net::Emt(n) => n.refactor(&self.topo)?,
                Net::Phasor(n) => n.refactor(&self.topo)?,
            }
        }
        Ok(())
    }

    fn update_environment(&mut self, run: &mut Runner, k: i64) -> Result<()> {
        let nz = run.noise;
        if (nz.irradiance_std > 0.0 || nz.wind_std > 0.0) && k.rem_euclid(run.noise_every) == 0 {
            let unit = Normal::new(0.0, 1.0).map_err(|e| SimError::config(e.to_string()))?;
            let a: f64 = unit.sample(&mut run.rng);
            let b: f64 = unit.sample(&mut run.rng);
            self.env.irradiance = (run.env_base.irradiance + nz.irradiance_std * a).max(0.0);
            self.env.wind_speed = (run.env_base.wind_speed + nz.wind_std * b).max(0.0);
        }
        Ok(())
    }

    fn step(&mut self, run: &mut Runner, k: i64, rec: Option<&mut RunResult>) -> Result<()> {
        let h = run.h;
        let t = step_time(k, h);
        if run.queue.next_step().is_some_and(|s| s <= k) {
            for ev in run.queue.pop_due(k) {
                self.apply_event(run, ev)?;
            }
        }
        self.update_environment(run, k)?;
        let wb = run.omega_b;
        let xs = run.x.values();
        let dx = &mut run.dx;

        // Source power and converter references from the current state.
        let vo = self.vsc.offset;
        let xv = &xs[vo..vo + VSC_SLOTS.len()];
        let ro = self.res.offset;
        let nr = self.res.slot_names().len();
        let xr = &xs[ro..ro + nr];
        run.demand = self.vsc.demand(xv);
        run.p_source = self
            .res
            .power_into_dc(xr, run.demand, &self.env, Vsc::v_dc(xv));
        self.vsc.references(xv, run.p_source);

        match &mut run.net {
            Net::Emt(net) => {
                let theta = wb * t;
                for (m, &src) in self.machines.iter().zip(&self.machine_src) {
                    if m.tripped {
                        continue;
                    }
                    let xm = &xs[m.offset..m.offset + m.n_slots()];
                    let e = m.emf(xm, true);
                    net.set_emf(src, complex_to_abc(e, theta + Machine::delta(xm)));
                }
                let src = self.vsc_src.expect("EMT mode has a converter source");
                net.set_emf(src, complex_to_abc(self.vsc.emf(xv), theta));
                net.solve(&self.topo, &[])?;
                for (j, m) in self.machines.iter_mut().enumerate() {
                    let n = m.n_slots();
                    let xm = &xs[m.offset..m.offset + n];
                    let th = theta + Machine::delta(xm);
                    let i =
                        abc_to_complex(net.source_current(self.machine_src[j]), th) / m.base_ratio;
                    let v = abc_to_complex(net.node_voltage(self.machine_node[j]), th);
                    m.derivs(xm, i, v, wb, &mut dx[m.offset..m.offset + n]);
                }
                let v = abc_to_complex(net.node_voltage(self.vsc_node), theta);
                let i = abc_to_complex(net.source_current(src), theta) / self.vsc.base_ratio;
                self.vsc
                    .derivs(xv, v, i, run.p_source, &mut dx[vo..vo + VSC_SLOTS.len()]);
            }
            Net::Phasor(net) => {
                run.inject.iter_mut().for_each(|c| *c = C::new(0.0, 0.0));
                for (j, m) in self.machines.iter().enumerate() {
                    if m.tripped {
                        continue;
                    }
                    let xm = &xs[m.offset..m.offset + m.n_slots()];
                    let e = m.emf(xm, false) * C::from_polar(1.0, Machine::delta(xm));
                    run.e_sync[j] = e;
                    run.inject[self.machine_node[j]] +=
                        e / self.topo.sources[self.machine_src[j]].z;
                }
                let i_vsc = self.vsc.injection(xv);
                run.inject[self.vsc_node] += i_vsc * self.vsc.base_ratio;
                net.solve(&run.inject)?;
                for (j, m) in self.machines.iter_mut().enumerate() {
                    let n = m.n_slots();
                    let xm = &xs[m.offset..m.offset + n];
                    let v = net.voltage(self.machine_node[j]);
                    let i_sys = if m.tripped {
                        C::new(0.0, 0.0)
                    } else {
                        (run.e_sync[j] - v) / self.topo.sources[self.machine_src[j]].z
                    };
                    let rot = C::from_polar(1.0, -Machine::delta(xm));
                    m.derivs(
                        xm,
                        i_sys / m.base_ratio * rot,
                        v * rot,
                        wb,
                        &mut dx[m.offset..m.offset + n],
                    );
                }
                let v = net.voltage(self.vsc_node);
                self.vsc.derivs(
                    xv,
                    v,
                    i_vsc,
                    run.p_source,
                    &mut dx[vo..vo + VSC_SLOTS.len()],
                );
            }
        }
        self.res
            .derivs(xr, run.demand, &self.env, &mut dx[ro..ro + nr]);

        if let Some(out) = rec {
            self.fill_sample(run, t);
            out.push(t, &run.sample);
        }

        run.x.apply_euler(&run.dx, h, t)?;
        let xs = run.x.values_mut();
        for m in &self.machines {
            let n = m.n_slots();
            m.clamp(&mut xs[m.offset..m.offset + n]);
        }
        self.res
            .post_step(&mut xs[ro..ro + nr], t + h, run.demand, run.p_source);
        self.vsc.check(&xs[vo..vo + VSC_SLOTS.len()], t + h)?;
        Ok(())
    }

    fn fill_sample(&self, run: &mut Runner, t: f64) {
        let s_base = self.s_base();
        let xs = run.x.values();
        let mut k = 0;
        let mut put = |v: f64| {
            run.sample[k] = v;
            k += 1;
        };
        for m in &self.machines {
            let xm = &xs[m.offset..];
            let s = m.s_term * m.base_ratio * s_base;
            let tripped = m.tripped;
            put(Machine::omega(xm));
            put(if tripped { 0.0 } else { s.re });
            put(if tripped { 0.0 } else { s.im });
            put(m.v_term);
            put(Machine::field_voltage(xm));
        }
        for &node in &run.report_nodes {
            let v = match &run.net {
                Net::Emt(n) => abc_to_complex(n.node_voltage(node), run.omega_b * t).norm(),
                Net::Phasor(n) => n.voltage(node).norm(),
            };
            put(v);
        }
        let xv = &xs[self.vsc.offset..];
        let r = self.vsc_rating();
        put(self.vsc.p_out * r);
        put(self.vsc.q_out * r);
        put(Vsc::filtered_frequency(xv));
        put(Vsc::v_dc(xv));
        put(self.vsc.i_ref.0);
        put(self.vsc.i_ref.1);
        put(if self.vsc.limited { 1.0 } else { 0.0 });
        put(run.p_source * r);
        put(self.res.p_available * r);
        put(run.demand * r);
        let xr = &xs[self.res.offset..];
        match self.res.model {
            crate::res::ResModel::DynamicPv => put(self.res.duty()),
            crate::res::ResModel::DynamicWind => {
                put(self.res.pitch(xr));
                put(crate::res::wind::WindTurbine::rotor_speed(xr));
            }
            _ => {}
        }
    }
}

/// Problems with `events` against a network and its generator names.
pub fn check_events(topo: &Topology, generators: &[&str], events: &[TimedEvent]) -> Vec<String> {
    let mut errors = Vec::new();
    for e in events {
        let problem = match &e.kind {
            EventKind::LoadConnect { bus, .. } if topo.node(bus).is_none() => {
                format!("unknown bus '{bus}'")
            }
            EventKind::FaultOn { fault } => match topo.fault_node(fault) {
                Err(err) => err.to_string(),
                Ok(_) => continue,
            },
            EventKind::BreakerOpen { line, .. } if !topo.lines.iter().any(|l| &l.group == line) => {
                format!("unknown line '{line}'")
            }
            EventKind::GeneratorTrip { generator } if !generators.contains(&generator.as_str()) => {
                format!("unknown generator '{generator}'")
            }
            _ => continue,
        };
        errors.push(format!("event at {} s: {problem}", e.time));
    }
    errors
}
