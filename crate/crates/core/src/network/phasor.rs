//! Phasor network: complex nodal admittance at nominal frequency, solved once
//! per step for the device current injections.
//!
//! Elements are uncoupled between phases and machines are represented by the
//! same subtransient impedance in every sequence, so the zero and negative
//! sequence networks equal the positive one. Single-phase faults connect the
//! three sequence networks in series through `3 R_f`, which the positive
//! sequence sees as a shunt `1/(Z_0 + Z_2 + 3 R_f)` at the fault node.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use super::topology::Topology;
use super::FaultKind;
use crate::error::{Result, SimError};
use crate::frames::phase_components;

type C = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceAdmittance {
    pub zero: DMatrix<C>,
    pub positive: DMatrix<C>,
    pub negative: DMatrix<C>,
}

fn passive_admittance(topo: &Topology, sources: bool) -> DMatrix<C> {
    let n = topo.n_nodes();
    let mut y = DMatrix::<C>::zeros(n, n);
    let mut touched = vec![false; n];
    let mut series = |y: &mut DMatrix<C>, f: usize, t: usize, ys: C| {
        y[(f, f)] += ys;
        y[(t, t)] += ys;
        y[(f, t)] -= ys;
        y[(t, f)] -= ys;
        touched[f] = true;
        touched[t] = true;
    };
    for l in topo.lines.iter().filter(|l| l.active) {
        let (z, y2) = l.phasor_pi();
        series(&mut y, l.from, l.to, z.inv());
        y[(l.from, l.from)] += y2;
        y[(l.to, l.to)] += y2;
    }
    for t in topo.transformers.iter().filter(|t| t.active) {
        series(&mut y, t.from, t.to, t.z.inv());
    }
    for ld in topo.loads.iter().filter(|l| l.active) {
        y[(ld.node, ld.node)] += C::new(ld.p, -ld.q);
        touched[ld.node] = true;
    }
    if sources {
        for s in topo.sources.iter().filter(|s| s.active) {
            y[(s.node, s.node)] += s.z.inv();
            touched[s.node] = true;
        }
    }
    for (k, t) in touched.iter().enumerate() {
        if !t {
            y[(k, k)] = C::new(1.0, 0.0);
        }
    }
    y
}

/// Sequence admittance matrices including the Norton admittances of active
/// sources. Fault shunts are not included.
pub fn build_phasor_admittance(topo: &Topology) -> SequenceAdmittance {
    let y = passive_admittance(topo, true);
    SequenceAdmittance {
        zero: y.clone(),
        negative: y.clone(),
        positive: y,
    }
}

/// Admittance of the network alone (no source branches), used by the power flow.
pub fn network_admittance(topo: &Topology) -> DMatrix<C> {
    passive_admittance(topo, false)
}

#[derive(Debug, Clone)]
struct SinglePhaseFault {
    node: usize,
    phase: usize,
    y_eff: C,
    /// Column of the sequence impedance matrix at the fault node.
    z_col: Vec<C>,
}

#[derive(Debug, Clone)]
pub struct PhasorNetwork {
    n: usize,
    y: DMatrix<C>,
    lu: LU<C, Dyn, Dyn>,
    v: Vec<C>,
    slg: Vec<SinglePhaseFault>,
    step: u64,
}

fn factor(y: &DMatrix<C>, what: &str) -> Result<LU<C, Dyn, Dyn>> {
    let lu = y.clone().lu();
    let det = lu.determinant();
    if !det.is_finite() || det.norm() == 0.0 {
        return Err(SimError::Singular(format!(
            "{what} admittance matrix is singular"
        )));
    }
    Ok(lu)
}

impl PhasorNetwork {
    pub fn new(topo: &Topology) -> Result<Self> {
        let n = topo.n_nodes();
        let y = DMatrix::<C>::identity(n, n);
        let lu = y.clone().lu();
        let mut net = Self {
            n,
            y,
            lu,
            v: vec![C::new(0.0, 0.0); n],
            slg: Vec::new(),
            step: 0,
        };
        net.refactor(topo)?;
        Ok(net)
    }

    pub fn refactor(&mut self, topo: &Topology) -> Result<()> {
        if topo.n_nodes() != self.n {
            return Err(SimError::config(
                "node count changed after the network was built",
            ));
        }
        let base = build_phasor_admittance(topo).positive;
        let mut y = base.clone();
        self.slg.clear();
        let base_lu = if topo.faults.iter().any(|f| f.kind == FaultKind::SinglePhase) {
            Some(factor(&base, "pre-fault")?)
        } else {
            None
        };
        for f in &topo.faults {
            match f.kind {
                FaultKind::ThreePhase => y[(f.node, f.node)] += f.g,
                FaultKind::SinglePhase => {
                    let mut e = DVector::<C>::zeros(self.n);
                    e[f.node] = C::new(1.0, 0.0);
                    let z_col = base_lu
                        .as_ref()
                        .expect("factored above")
                        .solve(&e)
                        .ok_or_else(|| SimError::Singular("pre-fault admittance".into()))?;
                    let z_kk = z_col[f.node];
                    // Z_0 = Z_2 = Z_kk in series with 3 R_f.
                    let y_eff = (2.0 * z_kk + 3.0 / f.g).inv();
                    y[(f.node, f.node)] += y_eff;
                    let phase = f.phases.iter().position(|&p| p).unwrap_or(0);
                    self.slg.push(SinglePhaseFault {
                        node: f.node,
                        phase,
                        y_eff,
                        z_col: z_col.iter().copied().collect(),
                    });
                }
            }
        }
        self.lu = factor(&y, "phasor")?;
        self.y = y;
        Ok(())
    }

    pub fn admittance(&self) -> &DMatrix<C> {
        &self.y
    }

    /// Solve `Y v = i` for the per-node current injections.
    pub fn solve(&mut self, inject: &[C]) -> Result<()> {
        let rhs = DVector::from_column_slice(inject);
        let x = self
            .lu
            .solve(&rhs)
            .ok_or(SimError::NonFiniteSolution { step: self.step })?;
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(SimError::NonFiniteSolution { step: self.step });
        }
        self.v.copy_from_slice(x.as_slice());
        self.step += 1;
        Ok(())
    }

    pub fn voltage(&self, node: usize) -> C {
        self.v[node]
    }

    pub fn voltages(&self) -> &[C] {
        &self.v
    }

    /// Phase voltages `(a, b, c)` at a node, including the negative and zero
    /// sequence contributions of single-phase faults.
    pub fn phase_voltages(&self, node: usize) -> [C; 3] {
        let a = C::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let v1 = self.v[node];
        let mut v2 = C::new(0.0, 0.0);
        let mut v0 = C::new(0.0, 0.0);
        for f in &self.slg {
            let i1 = f.y_eff * self.v[f.node];
            // Rotate the sequence currents to the faulted phase.
            let (i2, i0) = match f.phase {
                0 => (i1, i1),
                1 => (a * i1, a * a * i1),
                _ => (a * a * i1, a * i1),
            };
            v2 -= f.z_col[node] * i2;
            v0 -= f.z_col[node] * i0;
        }
        phase_components(v0, v1, v2)
    }
}
