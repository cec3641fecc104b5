//! Bus/branch network: file schema, compiled topology, EMT companion solver,
//! phasor admittance solver, Bergeron travelling-wave lines and power flow.

pub mod bergeron;
pub mod emt;
pub mod phasor;
pub mod powerflow;
pub mod topology;

use serde::{Deserialize, Serialize};

pub use bergeron::BergeronLine;
pub use emt::{build_emt_companion, Companion, EmtNetwork};
pub use phasor::{build_phasor_admittance, PhasorNetwork, SequenceAdmittance};
pub use powerflow::{power_flow, BusSpec};
pub use topology::{SourceBranch, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineModel {
    Pi,
    Bergeron,
}

impl LineModel {
    pub const ALL: [LineModel; 2] = [LineModel::Pi, LineModel::Bergeron];

    pub fn name(&self) -> &'static str {
        match self {
            LineModel::Pi => "pi",
            LineModel::Bergeron => "bergeron",
        }
    }
}

/// Network description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkData {
    pub s_base_mva: f64,
    pub f_nom_hz: f64,
    pub buses: Vec<BusData>,
    pub lines: Vec<LineData>,
    #[serde(default)]
    pub transformers: Vec<TransformerData>,
    #[serde(default)]
    pub loads: Vec<LoadData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusData {
    pub id: String,
    pub v_kv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineData {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_km: f64,
    pub r_ohm_per_km: f64,
    pub x_ohm_per_km: f64,
    pub c_nf_per_km: f64,
}

/// Two-winding transformer; impedance on its own rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerData {
    pub id: String,
    pub from: String,
    pub to: String,
    pub r_pu: f64,
    pub x_pu: f64,
    pub s_mva: f64,
}

/// Constant-impedance load specified at rated voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadData {
    pub id: String,
    pub bus: String,
    pub p_mw: f64,
    pub q_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultLocation {
    Bus(String),
    /// Midpoint of a line, which is then modelled as two halves.
    LineMidpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    ThreePhase,
    SinglePhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub fn index(&self) -> usize {
        match self {
            Phase::A => 0,
            Phase::B => 1,
            Phase::C => 2,
        }
    }
}

fn default_phase() -> Phase {
    Phase::A
}

/// Shunt fault to ground through a resistance on one or all phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub id: String,
    pub location: FaultLocation,
    pub resistance_ohm: f64,
    pub kind: FaultKind,
    /// Faulted phase for single-phase faults.
    #[serde(default = "default_phase")]
    pub phase: Phase,
}

impl FaultSpec {
    pub fn phases(&self) -> [bool; 3] {
        match self.kind {
            FaultKind::ThreePhase => [true; 3],
            FaultKind::SinglePhase => {
                let mut p = [false; 3];
                p[self.phase.index()] = true;
                p
            }
        }
    }
}
