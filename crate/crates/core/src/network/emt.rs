//! Phase-domain EMT network: companion conductances for R, L and C elements,
//! one nodal matrix per phase factorized on topology changes only.
//!
//! Reactive elements follow `i_n = G v_n + hist_n` and
//! `hist_{n+1} = c_v v_n + c_i i_n`, where `v` is the branch voltage.

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bergeron::BergeronLine;
use super::topology::Topology;
use super::LineModel;
use crate::error::{Result, SimError};
use crate::frames::complex_to_abc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Companion {
    #[default]
    Trapezoidal,
    BackwardEuler,
}

/// Companion coefficients `(G, c_v, c_i)` of a series R-L branch (`l` in pu seconds).
fn rl_companion(r: f64, l: f64, h: f64, method: Companion) -> (f64, f64, f64) {
    match method {
        Companion::Trapezoidal => {
            let a = h / (2.0 * l);
            let g = a / (1.0 + a * r);
            (g, g, (1.0 - a * r) / (1.0 + a * r))
        }
        Companion::BackwardEuler => {
            let a = h / l;
            (a / (1.0 + a * r), 0.0, 1.0 / (1.0 + a * r))
        }
    }
}

fn c_companion(c: f64, h: f64, method: Companion) -> (f64, f64, f64) {
    match method {
        Companion::Trapezoidal => {
            let g = 2.0 * c / h;
            (g, -g, -1.0)
        }
        Companion::BackwardEuler => {
            let g = c / h;
            (g, -g, 0.0)
        }
    }
}

/// Terminal of a reactive branch.
#[derive(Debug, Clone, Copy, PartialEq)]
enum End {
    Node(usize),
    Ground,
    /// Internal EMF of source `k`.
    Emf(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Owner {
    Line(usize),
    Transformer(usize),
    Load(usize),
    Source(usize),
}

#[derive(Debug, Clone, PartialEq)]
struct Branch {
    from: End,
    to: End,
    g: f64,
    c_v: f64,
    c_i: f64,
    hist: [f64; 3],
    i: [f64; 3],
    owner: Owner,
}

#[derive(Debug, Clone, PartialEq)]
struct Travelling {
    line: usize,
    k: usize,
    m: usize,
    model: BergeronLine,
    i_km: [f64; 3],
    i_mk: [f64; 3],
}

/// Linear nodal system of the companion network.
#[derive(Debug, Clone)]
pub struct EmtNetwork {
    h: f64,
    n: usize,
    branches: Vec<Branch>,
    travelling: Vec<Travelling>,
    g: [DMatrix<f64>; 3],
    lu: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    v: [Vec<f64>; 3],
    emf: Vec<[f64; 3]>,
    step: u64,
    /// Per-step scratch: right-hand sides and travelling-wave histories.
    rhs: [DVector<f64>; 3],
    hist: Vec<([f64; 3], [f64; 3])>,
}

fn active(topo: &Topology, owner: Owner) -> bool {
    match owner {
        Owner::Line(k) => topo.lines[k].active,
        Owner::Transformer(k) => topo.transformers[k].active,
        Owner::Load(k) => topo.loads[k].active,
        Owner::Source(k) => topo.sources[k].active,
    }
}

/// Per-phase conductance matrices of the companion network.
pub fn build_emt_companion(
    topo: &Topology,
    h: f64,
    method: Companion,
) -> Result<(EmtNetwork, [DMatrix<f64>; 3])> {
    let net = EmtNetwork::new(topo, h, method)?;
    let g = net.g.clone();
    Ok((net, g))
}

impl EmtNetwork {
    pub fn new(topo: &Topology, h: f64, method: Companion) -> Result<Self> {
        let wb = topo.omega_b();
        let mut branches = Vec::new();
        let mut travelling = Vec::new();
        let mut push_rl = |from, to, r: f64, x: f64, owner| {
            let (g, c_v, c_i) = rl_companion(r, x / wb, h, method);
            branches.push(Branch {
                from,
                to,
                g,
                c_v,
                c_i,
                hist: [0.0; 3],
                i: [0.0; 3],
                owner,
            });
        };
        for (k, l) in topo.lines.iter().enumerate() {
            if l.model == LineModel::Pi {
                push_rl(
                    End::Node(l.from),
                    End::Node(l.to),
                    l.r(),
                    l.x(),
                    Owner::Line(k),
                );
            }
        }
        for (k, t) in topo.transformers.iter().enumerate() {
            push_rl(
                End::Node(t.from),
                End::Node(t.to),
                t.z.re,
                t.z.im,
                Owner::Transformer(k),
            );
        }
        for (k, ld) in topo.loads.iter().enumerate() {
            if ld.q > 0.0 {
                push_rl(
                    End::Node(ld.node),
                    End::Ground,
                    0.0,
                    1.0 / ld.q,
                    Owner::Load(k),
                );
            }
        }
        for (k, s) in topo.sources.iter().enumerate() {
            if !(s.z.im > 0.0) {
                return Err(SimError::config(format!(
                    "source '{}' needs a series inductance",
                    s.id
                )));
            }
            push_rl(
                End::Emf(k),
                End::Node(s.node),
                s.z.re,
                s.z.im,
                Owner::Source(k),
            );
        }
        let mut push_c = |node: usize, b: f64, owner| {
            let (g, c_v, c_i) = c_companion(b / wb, h, method);
            branches.push(Branch {
                from: End::Node(node),
                to: End::Ground,
                g,
                c_v,
                c_i,
                hist: [0.0; 3],
                i: [0.0; 3],
                owner,
            });
        };
        for (k, l) in topo.lines.iter().enumerate() {
            match l.model {
                LineModel::Pi => {
                    push_c(l.from, l.b() / 2.0, Owner::Line(k));
                    push_c(l.to, l.b() / 2.0, Owner::Line(k));
                }
                LineModel::Bergeron => {
                    let model = BergeronLine::new(l.surge_impedance(), l.r(), l.travel_time(wb), h)
                        .map_err(|e| e.annotate(format!("line '{}'", l.id)))?;
                    travelling.push(Travelling {
                        line: k,
                        k: l.from,
                        m: l.to,
                        model,
                        i_km: [0.0; 3],
                        i_mk: [0.0; 3],
                    });
                }
            }
        }
        for (k, ld) in topo.loads.iter().enumerate() {
            if ld.q < 0.0 {
                push_c(ld.node, -ld.q, Owner::Load(k));
            }
        }
        let n = topo.n_nodes();
        let mut net = Self {
            h,
            n,
            branches,
            travelling,
            g: std::array::from_fn(|_| DMatrix::zeros(n, n)),
            lu: Vec::new(),
            v: std::array::from_fn(|_| vec![0.0; n]),
            emf: vec![[0.0; 3]; topo.sources.len()],
            step: 0,
            rhs: std::array::from_fn(|_| DVector::zeros(n)),
            hist: Vec::new(),
        };
        net.refactor(topo)?;
        Ok(net)
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// Restamp and refactorize after a topology change. De-energized
    /// elements lose their history.
    pub fn refactor(&mut self, topo: &Topology) -> Result<()> {
        if topo.n_nodes() != self.n {
            return Err(SimError::config(
                "node count changed after the network was built",
            ));
        }
        for b in self.branches.iter_mut() {
            if !active(topo, b.owner) {
                b.hist = [0.0; 3];
                b.i = [0.0; 3];
            }
        }
        for t in self.travelling.iter_mut() {
            if !topo.lines[t.line].active {
                t.model.reset();
                t.i_km = [0.0; 3];
                t.i_mk = [0.0; 3];
            }
        }
        let n = self.n;
        let mut base = DMatrix::<f64>::zeros(n, n);
        let mut touched = vec![false; n];
        for b in self.branches.iter().filter(|b| active(topo, b.owner)) {
            match (b.from, b.to) {
                (End::Node(f), End::Node(t)) => {
                    base[(f, f)] += b.g;
                    base[(t, t)] += b.g;
                    base[(f, t)] -= b.g;
                    base[(t, f)] -= b.g;
                    touched[f] = true;
                    touched[t] = true;
                }
                (End::Node(f), _) | (_, End::Node(f)) => {
                    base[(f, f)] += b.g;
                    touched[f] = true;
                }
                _ => {}
            }
        }
        for t in self.travelling.iter().filter(|t| topo.lines[t.line].active) {
            let g = t.model.conductance();
            base[(t.k, t.k)] += g;
            base[(t.m, t.m)] += g;
            touched[t.k] = true;
            touched[t.m] = true;
        }
        for ld in topo.loads.iter().filter(|l| l.active) {
            base[(ld.node, ld.node)] += ld.p;
            touched[ld.node] |= ld.p != 0.0;
        }
        let mut lus = Vec::with_capacity(3);
        for p in 0..3 {
            let mut g = base.clone();
            let mut touched = touched.clone();
            for f in topo.faults.iter().filter(|f| f.phases[p]) {
                g[(f.node, f.node)] += f.g;
                touched[f.node] = true;
            }
            for (k, t) in touched.iter().enumerate() {
                if !t {
                    g[(k, k)] = 1.0;
                }
            }
            let lu = g.clone().lu();
            let det = lu.determinant();
            if !det.is_finite() || det == 0.0 {
                let floating: Vec<&str> = (0..n)
                    .filter(|&k| g.row(k).iter().all(|x| x.abs() < 1e-12))
                    .map(|k| topo.nodes[k].id.as_str())
                    .collect();
                return Err(SimError::Singular(format!(
                    "EMT conductance matrix is singular (floating nodes: {floating:?})"
                )));
            }
            self.g[p] = g;
            lus.push(lu);
        }
        self.lu = lus;
        Ok(())
    }

    pub fn conductance(&self, phase: usize) -> &DMatrix<f64> {
        &self.g[phase]
    }

    fn branch_voltage(&self, b: &Branch, p: usize) -> f64 {
        let at = |e: End| match e {
            End::Node(k) => self.v[p][k],
            End::Ground => 0.0,
            End::Emf(k) => self.emf[k][p],
        };
        at(b.from) - at(b.to)
    }

    /// Set the source EMFs for the step about to be solved.
    pub fn set_emf(&mut self, source: usize, e: [f64; 3]) {
        self.emf[source] = e;
    }

    /// Solve the step. `inject` adds ideal current injections per node and phase.
    pub fn solve(&mut self, topo: &Topology, inject: &[(usize, [f64; 3])]) -> Result<()> {
        self.hist.clear();
        self.hist
            .extend(self.travelling.iter().map(|t| t.model.history()));
        for p in 0..3 {
            let rhs = &mut self.rhs[p];
            rhs.fill(0.0);
            for b in self.branches.iter().filter(|b| active(topo, b.owner)) {
                // Branch current flows from `from` to `to`.
                let hist = b.hist[p];
                match b.from {
                    End::Node(f) => rhs[f] -= hist,
                    End::Emf(k) => {
                        if let End::Node(t) = b.to {
                            rhs[t] += b.g * self.emf[k][p];
                        }
                    }
                    End::Ground => {}
                }
                if let End::Node(t) = b.to {
                    rhs[t] += hist;
                }
            }
            for (t, hs) in self.travelling.iter().zip(&self.hist) {
                if topo.lines[t.line].active {
                    rhs[t.k] -= hs.0[p];
                    rhs[t.m] -= hs.1[p];
                }
            }
            for (node, i) in inject {
                rhs[*node] += i[p];
            }
            if !self.lu[p].solve_mut(rhs) || rhs.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFiniteSolution { step: self.step });
            }
            self.v[p].copy_from_slice(rhs.as_slice());
        }
        // Update branch currents and histories.
        for bi in 0..self.branches.len() {
            if !active(topo, self.branches[bi].owner) {
                continue;
            }
            let vb: [f64; 3] = std::array::from_fn(|p| self.branch_voltage(&self.branches[bi], p));
            let b = &mut self.branches[bi];
            for p in 0..3 {
                let i = b.g * vb[p] + b.hist[p];
                b.i[p] = i;
                b.hist[p] = b.c_v * vb[p] + b.c_i * i;
            }
        }
        for (t, hs) in self.travelling.iter_mut().zip(self.hist.iter().copied()) {
            if !topo.lines[t.line].active {
                continue;
            }
            let vk = std::array::from_fn(|p| self.v[p][t.k]);
            let vm = std::array::from_fn(|p| self.v[p][t.m]);
            let (ikm, imk) = t.model.update(vk, vm, hs);
            t.i_km = ikm;
            t.i_mk = imk;
        }
        self.step += 1;
        Ok(())
    }

    pub fn node_voltage(&self, node: usize) -> [f64; 3] {
        std::array::from_fn(|p| self.v[p][node])
    }

    fn source_branch(&self, source: usize) -> &Branch {
        self.branches
            .iter()
            .find(|b| b.owner == Owner::Source(source))
            .expect("every source has a branch")
    }

    /// Current delivered by a source into its node.
    pub fn source_current(&self, source: usize) -> [f64; 3] {
        self.source_branch(source).i
    }

    /// Current entering a line at its `from` end (series current for PI lines).
    pub fn line_current(&self, line: usize) -> [f64; 3] {
        if let Some(t) = self.travelling.iter().find(|t| t.line == line) {
            return t.i_km;
        }
        self.branches
            .iter()
            .find(|b| b.owner == Owner::Line(line) && matches!(b.to, End::Node(_)))
            .map(|b| b.i)
            .unwrap_or([0.0; 3])
    }

    /// Initialize voltages and all histories from a sinusoidal steady state
    /// given by node phasors `v` and source EMF phasors `e` (synchronous frame
    /// at angle `omega_b t`, first solved step at `t = t0`).
    pub fn init_from_phasors(
        &mut self,
        topo: &Topology,
        v: &[Complex64],
        e: &[Complex64],
        t0: f64,
    ) {
        let wb = topo.omega_b();
        let h = self.h;
        let at = |x: Complex64, t: f64| complex_to_abc(x, wb * t);
        let phasor_of = |end: End| match end {
            End::Node(k) => v[k],
            End::Ground => Complex64::new(0.0, 0.0),
            End::Emf(k) => e[k],
        };
        // Branch phasor current for the companion impedance at nominal frequency.
        for b in self.branches.iter_mut() {
            if !active(topo, b.owner) {
                continue;
            }
            let vb = phasor_of(b.from) - phasor_of(b.to);
            let ib = match b.owner {
                Owner::Line(k) if matches!(b.to, End::Ground) => {
                    vb * Complex64::new(0.0, topo.lines[k].b() / 2.0)
                }
                Owner::Line(k) => vb / Complex64::new(topo.lines[k].r(), topo.lines[k].x()),
                Owner::Transformer(k) => vb / topo.transformers[k].z,
                Owner::Load(k) => {
                    let q = topo.loads[k].q;
                    vb * Complex64::new(0.0, -q)
                }
                Owner::Source(k) => vb / topo.sources[k].z,
            };
            let t_prev = t0 - h;
            let vp = at(vb, t_prev);
            let ip = at(ib, t_prev);
            for p in 0..3 {
                b.i[p] = ip[p];
                b.hist[p] = b.c_v * vp[p] + b.c_i * ip[p];
            }
        }
        for t in self.travelling.iter_mut() {
            if !topo.lines[t.line].active {
                continue;
            }
            let l = &topo.lines[t.line];
            let (z, y2) = l.exact_pi();
            let (vk, vm) = (v[t.k], v[t.m]);
            let ikm = vk * y2 + (vk - vm) / z;
            let imk = vm * y2 + (vm - vk) / z;
            t.model.prime(h, |dt| {
                let tt = t0 + dt;
                (at(vk, tt), at(vm, tt), at(ikm, tt), at(imk, tt))
            });
        }
        for (k, ek) in e.iter().enumerate() {
            self.emf[k] = at(*ek, t0 - h);
        }
        let v0: Vec<[f64; 3]> = v.iter().map(|x| at(*x, t0 - h)).collect();
        for p in 0..3 {
            for (k, vk) in v0.iter().enumerate() {
                self.v[p][k] = vk[p];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::topology::tests_support::two_bus;
    use crate::network::Topology;

    fn pi_topo(len: f64) -> Topology {
        Topology::build(&two_bus(len), LineModel::Pi, &[]).unwrap()
    }

    #[test]
    fn companion_coefficients() {
        // Trapezoidal inductor: G = h/2L, history adds G v + i.
        let (g, cv, ci) = rl_companion(0.0, 1e-3, 50e-6, Companion::Trapezoidal);
        assert!((g - 0.025).abs() < 1e-15);
        assert_eq!(cv, g);
        assert_eq!(ci, 1.0);
        let (g, cv, ci) = c_companion(1e-6, 50e-6, Companion::Trapezoidal);
        assert!((g - 0.04).abs() < 1e-15);
        assert_eq!((cv, ci), (-g, -1.0));
    }

    #[test]
    fn single_resistor_matrix() {
        // Resistive load at bus 2 only, line removed: diagonal 1/R and the
        // untouched bus gets a unit placeholder.
        let mut t = pi_topo(100.0);
        t.lines[0].active = false;
        t.add_load("r", 1, 0.5, 0.0);
        let (_, g) = build_emt_companion(&t, 50e-6, Companion::Trapezoidal).unwrap();
        assert_eq!(g[0][(1, 1)], 0.5);
        assert_eq!(g[0][(0, 0)], 1.0);
        assert_eq!(g[0][(0, 1)], 0.0);
    }

    #[test]
    fn travelling_line_has_no_coupling_between_ends() {
        let t = Topology::build(&two_bus(300.0), LineModel::Bergeron, &[]).unwrap();
        let (_, g) = build_emt_companion(&t, 50e-6, Companion::Trapezoidal).unwrap();
        for p in 0..3 {
            assert_eq!(g[p][(0, 1)], 0.0);
            assert_eq!(g[p][(1, 0)], 0.0);
            assert!(g[p][(0, 0)] > 0.0);
        }
    }

    #[test]
    fn no_sources_gives_zero_voltages() {
        let t = pi_topo(100.0);
        let mut net = EmtNetwork::new(&t, 50e-6, Companion::Trapezoidal).unwrap();
        for _ in 0..10 {
            net.solve(&t, &[]).unwrap();
        }
        assert_eq!(net.node_voltage(0), [0.0; 3]);
        assert_eq!(net.node_voltage(1), [0.0; 3]);
    }

    #[test]
    fn pi_line_carries_dc_current_through_resistance() {
        // Oracle: at DC the inductor is a short and the capacitors are open,
        // so a current I injected at bus 1 and drawn at bus 2 through a
        // resistive load settles with v1 - v2 = I R.
        let mut t = pi_topo(100.0);
        t.add_load("r", 1, 2.0, 0.0);
        let r = t.lines[0].r();
        let mut net = EmtNetwork::new(&t, 50e-6, Companion::Trapezoidal).unwrap();
        let i = 0.7;
        for _ in 0..200_000 {
            net.solve(&t, &[(0, [i; 3])]).unwrap();
        }
        let v1 = net.node_voltage(0)[0];
        let v2 = net.node_voltage(1)[0];
        assert!((v2 - i / 2.0).abs() < 1e-9, "{v2}");
        assert!(((v1 - v2) - i * r).abs() < 1e-9, "{}", v1 - v2);
        assert!((net.line_current(0)[0] - i).abs() < 1e-9);
    }

    #[test]
    fn fault_on_phase_b_only() {
        let mut t = pi_topo(100.0);
        let before = EmtNetwork::new(&t, 50e-6, Companion::Trapezoidal).unwrap();
        let spec = crate::network::FaultSpec {
            id: "f".into(),
            location: crate::network::FaultLocation::Bus("2".into()),
            resistance_ohm: 10.0,
            kind: crate::network::FaultKind::SinglePhase,
            phase: crate::network::Phase::B,
        };
        t.apply_fault(&spec).unwrap();
        let mut net = EmtNetwork::new(&t, 50e-6, Companion::Trapezoidal).unwrap();
        assert_eq!(net.conductance(0), before.conductance(0));
        assert_eq!(net.conductance(2), before.conductance(2));
        assert!(net.conductance(1)[(1, 1)] > before.conductance(1)[(1, 1)]);
        t.clear_fault("f");
        net.refactor(&t).unwrap();
        for p in 0..3 {
            assert_eq!(net.conductance(p), before.conductance(p));
        }
    }

    #[test]
    fn open_line_carries_no_current() {
        let mut t = pi_topo(100.0);
        t.add_load("r", 1, 1.0, 0.3);
        let mut net = EmtNetwork::new(&t, 50e-6, Companion::Trapezoidal).unwrap();
        for n in 0..400 {
            let s = (n as f64 * 0.0157).sin();
            net.solve(&t, &[(0, [s; 3])]).unwrap();
        }
        assert!(net.line_current(0)[0] != 0.0);
        t.open_line("1-2").unwrap();
        net.refactor(&t).unwrap();
        for n in 0..400 {
            let s = (n as f64 * 0.0157).sin();
            net.solve(&t, &[(0, [s; 3])]).unwrap();
            assert_eq!(net.line_current(0), [0.0; 3]);
        }
    }
}
