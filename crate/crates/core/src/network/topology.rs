//! Compiled network in system per unit, shared by the EMT and phasor solvers.

use std::collections::HashMap;

use num_complex::Complex64;

use super::{FaultKind, FaultLocation, FaultSpec, LineModel, NetworkData};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub v_kv: f64,
}

/// One line segment. Lines with a midpoint fault are split in two segments
/// sharing `group`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSeg {
    pub id: String,
    pub group: String,
    pub from: usize,
    pub to: usize,
    pub model: LineModel,
    pub length_km: f64,
    /// Series resistance, reactance and shunt susceptance per km (pu).
    pub r_km: f64,
    pub x_km: f64,
    pub b_km: f64,
    pub active: bool,
}

impl LineSeg {
    pub fn r(&self) -> f64 {
        self.r_km * self.length_km
    }

    pub fn x(&self) -> f64 {
        self.x_km * self.length_km
    }

    pub fn b(&self) -> f64 {
        self.b_km * self.length_km
    }

    /// Lossless surge impedance (pu).
    pub fn surge_impedance(&self) -> f64 {
        (self.x_km / self.b_km).sqrt()
    }

    /// Travel time (s).
    pub fn travel_time(&self, omega_b: f64) -> f64 {
        self.length_km * (self.x_km * self.b_km).sqrt() / omega_b
    }

    /// Series impedance and half shunt admittance of the nominal PI.
    pub fn nominal_pi(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.r(), self.x()),
            Complex64::new(0.0, self.b() / 2.0),
        )
    }

    /// PI equivalent that is exact for the distributed line at nominal frequency.
    pub fn exact_pi(&self) -> (Complex64, Complex64) {
        let z = Complex64::new(self.r_km, self.x_km);
        let y = Complex64::new(0.0, self.b_km);
        let gamma_l = (z * y).sqrt() * self.length_km;
        let zc = (z / y).sqrt();
        (zc * gamma_l.sinh(), (gamma_l / 2.0).tanh() / zc)
    }

    /// PI used by the phasor network: nominal for PI lines, exact for
    /// travelling-wave lines.
    pub fn phasor_pi(&self) -> (Complex64, Complex64) {
        match self.model {
            LineModel::Pi => self.nominal_pi(),
            LineModel::Bergeron => self.exact_pi(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesElem {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub z: Complex64,
    pub active: bool,
}

/// Constant-impedance shunt load: admittance `p - jq` at 1 pu voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuntLoad {
    pub id: String,
    pub node: usize,
    pub p: f64,
    pub q: f64,
    pub active: bool,
}

/// EMF behind a series impedance (machine or converter filter).
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBranch {
    pub id: String,
    pub node: usize,
    pub z: Complex64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveFault {
    pub id: String,
    pub node: usize,
    /// Fault conductance (pu).
    pub g: f64,
    pub phases: [bool; 3],
    pub kind: FaultKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub s_base_mva: f64,
    pub f_nom: f64,
    pub nodes: Vec<Node>,
    index: HashMap<String, usize>,
    pub lines: Vec<LineSeg>,
    pub transformers: Vec<SeriesElem>,
    pub loads: Vec<ShuntLoad>,
    pub sources: Vec<SourceBranch>,
    pub faults: Vec<ActiveFault>,
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Topology {
    /// Compile the network data. `split` lists lines modelled as two halves so
    /// that their midpoint is available as a fault location.
    pub fn build(data: &NetworkData, model: LineModel, split: &[String]) -> Result<Self> {
        let mut errors = Vec::new();
        if !positive(data.s_base_mva) || !positive(data.f_nom_hz) {
            errors.push("base power and nominal frequency must be positive".to_string());
        }
        let mut topo = Topology {
            s_base_mva: data.s_base_mva,
            f_nom: data.f_nom_hz,
            nodes: Vec::new(),
            index: HashMap::new(),
            lines: Vec::new(),
            transformers: Vec::new(),
            loads: Vec::new(),
            sources: Vec::new(),
            faults: Vec::new(),
        };
        for b in &data.buses {
            if topo.index.contains_key(&b.id) {
                errors.push(format!("duplicate bus '{}'", b.id));
                continue;
            }
            if !positive(b.v_kv) {
                errors.push(format!("bus '{}': voltage base must be positive", b.id));
            }
            topo.add_node(&b.id, b.v_kv);
        }
        let omega = 2.0 * std::f64::consts::PI * data.f_nom_hz;
        let mut line_ids = std::collections::HashSet::new();
        for l in &data.lines {
            if !line_ids.insert(l.id.clone()) {
                errors.push(format!("duplicate line '{}'", l.id));
            }
            let (Some(f), Some(t)) = (topo.node(&l.from), topo.node(&l.to)) else {
                errors.push(format!("line '{}' references an unknown bus", l.id));
                continue;
            };
            if !(positive(l.length_km)
                && l.r_ohm_per_km >= 0.0
                && positive(l.x_ohm_per_km)
                && positive(l.c_nf_per_km))
            {
                errors.push(format!("line '{}': invalid parameters", l.id));
                continue;
            }
            let z_base = topo.nodes[f].v_kv.powi(2) / data.s_base_mva;
            let seg = LineSeg {
                id: l.id.clone(),
                group: l.id.clone(),
                from: f,
                to: t,
                model,
                length_km: l.length_km,
                r_km: l.r_ohm_per_km / z_base,
                x_km: l.x_ohm_per_km / z_base,
                b_km: omega * l.c_nf_per_km * 1e-9 * z_base,
                active: true,
            };
            if split.contains(&l.id) {
                let mid = topo.add_node(&midpoint_id(&l.id), topo.nodes[f].v_kv);
                let half = seg.length_km / 2.0;
                topo.lines.push(LineSeg {
                    id: format!("{}/a", l.id),
                    to: mid,
                    length_km: half,
                    ..seg.clone()
                });
                topo.lines.push(LineSeg {
                    id: format!("{}/b", l.id),
                    from: mid,
                    length_km: half,
                    ..seg
                });
            } else {
                topo.lines.push(seg);
            }
        }
        for s in split {
            if !line_ids.contains(s) {
                errors.push(format!("fault references unknown line '{s}'"));
            }
        }
        for tr in &data.transformers {
            let (Some(f), Some(t)) = (topo.node(&tr.from), topo.node(&tr.to)) else {
                errors.push(format!("transformer '{}' references an unknown bus", tr.id));
                continue;
            };
            if !(positive(tr.x_pu) && tr.r_pu >= 0.0 && positive(tr.s_mva)) {
                errors.push(format!("transformer '{}': invalid parameters", tr.id));
                continue;
            }
            let ratio = data.s_base_mva / tr.s_mva;
            topo.transformers.push(SeriesElem {
                id: tr.id.clone(),
                from: f,
                to: t,
                z: Complex64::new(tr.r_pu, tr.x_pu) * ratio,
                active: true,
            });
        }
        for ld in &data.loads {
            match topo.node(&ld.bus) {
                Some(n) => topo.loads.push(ShuntLoad {
                    id: ld.id.clone(),
                    node: n,
                    p: ld.p_mw / data.s_base_mva,
                    q: ld.q_mvar / data.s_base_mva,
                    active: true,
                }),
                None => errors.push(format!(
                    "load '{}' references unknown bus '{}'",
                    ld.id, ld.bus
                )),
            }
        }
        if errors.is_empty() {
            Ok(topo)
        } else {
            Err(SimError::Validation(errors))
        }
    }

    fn add_node(&mut self, id: &str, v_kv: f64) -> usize {
        let n = self.nodes.len();
        self.nodes.push(Node {
            id: id.to_string(),
            v_kv,
        });
        self.index.insert(id.to_string(), n);
        n
    }

    pub fn omega_b(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_nom
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node_or_err(&self, id: &str) -> Result<usize> {
        self.node(id)
            .ok_or_else(|| SimError::config(format!("unknown bus '{id}'")))
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn z_base(&self, node: usize) -> f64 {
        self.nodes[node].v_kv.powi(2) / self.s_base_mva
    }

    /// Register a source branch and return its index.
    pub fn add_source(&mut self, id: &str, node: usize, z: Complex64) -> usize {
        self.sources.push(SourceBranch {
            id: id.to_string(),
            node,
            z,
            active: true,
        });
        self.sources.len() - 1
    }

    pub fn add_load(&mut self, id: &str, node: usize, p: f64, q: f64) {
        self.loads.push(ShuntLoad {
            id: id.to_string(),
            node,
            p,
            q,
            active: true,
        });
    }

    pub fn fault_node(&self, f: &FaultSpec) -> Result<usize> {
        match &f.location {
            FaultLocation::Bus(b) => self.node_or_err(b),
            FaultLocation::LineMidpoint(l) => self.node(&midpoint_id(l)).ok_or_else(|| {
                SimError::config(format!("line '{l}' was not split for a midpoint fault"))
            }),
        }
    }

    pub fn apply_fault(&mut self, f: &FaultSpec) -> Result<()> {
        if !positive(f.resistance_ohm) {
            return Err(SimError::config(format!(
                "fault '{}': resistance must be positive",
                f.id
            )));
        }
        let node = self.fault_node(f)?;
        let g = self.z_base(node) / f.resistance_ohm;
        self.faults.push(ActiveFault {
            id: f.id.clone(),
            node,
            g,
            phases: f.phases(),
            kind: f.kind,
        });
        Ok(())
    }

    /// Remove a fault; returns whether it was present.
    pub fn clear_fault(&mut self, id: &str) -> bool {
        let before = self.faults.len();
        self.faults.retain(|f| f.id != id);
        self.faults.len() != before
    }

    /// Open a line (all its segments). Returns whether anything changed.
    pub fn open_line(&mut self, group: &str) -> Result<bool> {
        let mut found = false;
        let mut changed = false;
        for l in self.lines.iter_mut().filter(|l| l.group == group) {
            found = true;
            changed |= l.active;
            l.active = false;
        }
        if !found {
            return Err(SimError::config(format!("unknown line '{group}'")));
        }
        Ok(changed)
    }

    pub fn isolate_source(&mut self, source: usize) {
        self.sources[source].active = false;
    }

    pub fn open_transformer_at(&mut self, node: usize) {
        for t in self.transformers.iter_mut() {
            if t.from == node || t.to == node {
                t.active = false;
            }
        }
    }
}

pub fn midpoint_id(line: &str) -> String {
    format!("{line}/mid")
}

#[cfg(test)]
pub(crate) mod tests_support {
    use crate::network::{BusData, LineData, NetworkData};

    pub fn two_bus(len: f64) -> NetworkData {
        NetworkData {
            s_base_mva: 100.0,
            f_nom_hz: 50.0,
            buses: vec![
                BusData {
                    id: "1".into(),
                    v_kv: 220.0,
                },
                BusData {
                    id: "2".into(),
                    v_kv: 220.0,
                },
            ],
            lines: vec![LineData {
                id: "1-2".into(),
                from: "1".into(),
                to: "2".into(),
                length_km: len,
                r_ohm_per_km: 0.0653,
                x_ohm_per_km: 0.398,
                c_nf_per_km: 9.08,
            }],
            transformers: vec![],
            loads: vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::two_bus;
    use super::*;
    use crate::network::BusData;

    #[test]
    fn per_unit_conversion() {
        let t = Topology::build(&two_bus(100.0), LineModel::Pi, &[]).unwrap();
        let l = &t.lines[0];
        assert!((l.r() - 6.53 / 484.0).abs() < 1e-15);
        assert!((l.x() - 39.8 / 484.0).abs() < 1e-15);
        let b = 2.0 * std::f64::consts::PI * 50.0 * 9.08e-7 * 484.0;
        assert!((l.b() - b).abs() < 1e-15);
    }

    #[test]
    fn exact_pi_approaches_nominal_for_short_lines() {
        let t = Topology::build(&two_bus(1.0), LineModel::Pi, &[]).unwrap();
        let (zn, yn) = t.lines[0].nominal_pi();
        let (ze, ye) = t.lines[0].exact_pi();
        assert!(((ze - zn) / zn).norm() < 1e-6);
        assert!(((ye - yn) / yn).norm() < 1e-6);
    }

    #[test]
    fn split_line_creates_midpoint() {
        let t = Topology::build(&two_bus(100.0), LineModel::Pi, &["1-2".to_string()]).unwrap();
        assert_eq!(t.n_nodes(), 3);
        assert_eq!(t.lines.len(), 2);
        assert_eq!(t.lines[0].length_km, 50.0);
        assert!(t.node("1-2/mid").is_some());
    }

    #[test]
    fn validation_lists_all_problems() {
        let mut d = two_bus(100.0);
        d.lines[0].to = "9".into();
        d.buses.push(BusData {
            id: "1".into(),
            v_kv: 220.0,
        });
        match Topology::build(&d, LineModel::Pi, &[]) {
            Err(SimError::Validation(e)) => assert_eq!(e.len(), 2, "{e:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fault_apply_and_clear() {
        let mut t = Topology::build(&two_bus(100.0), LineModel::Pi, &[]).unwrap();
        let f = FaultSpec {
            id: "f".into(),
            location: FaultLocation::Bus("2".into()),
            resistance_ohm: 5.0,
            kind: FaultKind::ThreePhase,
            phase: super::super::Phase::A,
        };
        t.apply_fault(&f).unwrap();
        assert!((t.faults[0].g - 484.0 / 5.0).abs() < 1e-12);
        assert!(t.clear_fault("f"));
        assert!(t.faults.is_empty());
    }
}
