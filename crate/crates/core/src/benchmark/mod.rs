//! Adapted HV transmission benchmark with four generators, eight lines and
//! one converter-interfaced source, and the six scripted disturbance tests.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::converter::{ConverterModel, DcSide, Vsc, VscParams};
use crate::error::{Result, SimError};
use crate::events::{EventKind, TimedEvent};
use crate::machines::{Machine, MachineSpec, SgVariant};
use crate::network::{
    FaultKind, FaultLocation, FaultSpec, LineModel, NetworkData, Phase, Topology,
};
use crate::res::{Environment, ResDevice, ResModel, ResParams};
use crate::sim::{Dispatch, RunOptions, RunResult, SimMode, System};

/// Which variant of each component to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSelection {
    pub sg_model: SgVariant,
    pub line_model: LineModel,
    pub converter_model: ConverterModel,
    pub res_model: ResModel,
}

impl Default for ModelSelection {
    /// The base group.
    fn default() -> Self {
        Self {
            sg_model: SgVariant::Model22,
            line_model: LineModel::Pi,
            converter_model: ConverterModel::EmtAvg,
            res_model: ResModel::IdealDc,
        }
    }
}

impl ModelSelection {
    pub fn base() -> Self {
        Self::default()
    }

    pub fn mode(&self) -> SimMode {
        match self.converter_model {
            ConverterModel::EmtAvg => SimMode::Emt,
            ConverterModel::Phasor => SimMode::Phasor,
        }
    }

    /// Selection from variant names, e.g. `("model22", "pi", "emt_avg", "ideal_dc")`.
    pub fn from_names(sg: &str, line: &str, converter: &str, res: &str) -> Result<Self> {
        fn find<T: Copy>(
            all: &[T],
            name: fn(&T) -> &'static str,
            s: &str,
            what: &str,
        ) -> Result<T> {
            all.iter().copied().find(|v| name(v) == s).ok_or_else(|| {
                let names: Vec<&str> = all.iter().map(name).collect();
                SimError::config(format!(
                    "unknown {what} model '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
        }
        Ok(Self {
            sg_model: find(&SgVariant::ALL, SgVariant::name, sg, "generator")?,
            line_model: find(&LineModel::ALL, LineModel::name, line, "line")?,
            converter_model: find(
                &ConverterModel::ALL,
                ConverterModel::name,
                converter,
                "converter",
            )?,
            res_model: find(&ResModel::ALL, ResModel::name, res, "source")?,
        })
    }

    pub fn label(&self) -> String {
        format!(
            "{}-{}-{}-{}",
            self.sg_model.name(),
            self.line_model.name(),
            self.converter_model.name(),
            self.res_model.name()
        )
    }
}

/// Component varied in a run matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Sg,
    Line,
    Converter,
    Res,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sg" => Ok(Axis::Sg),
            "line" => Ok(Axis::Line),
            "converter" => Ok(Axis::Converter),
            "res" => Ok(Axis::Res),
            _ => Err(SimError::config(format!(
                "unknown axis '{s}' (expected sg, line, converter or res)"
            ))),
        }
    }

    /// Selections along this axis with `base` elsewhere, in a fixed order.
    pub fn variants(&self, base: ModelSelection) -> Vec<(String, ModelSelection)> {
        match self {
            Axis::Sg => SgVariant::ALL
                .iter()
                .map(|&v| {
                    (
                        v.name().to_string(),
                        ModelSelection {
                            sg_model: v,
                            ..base
                        },
                    )
                })
                .collect(),
            Axis::Line => LineModel::ALL
                .iter()
                .map(|&v| {
                    (
                        v.name().to_string(),
                        ModelSelection {
                            line_model: v,
                            ..base
                        },
                    )
                })
                .collect(),
            Axis::Converter => ConverterModel::ALL
                .iter()
                .map(|&v| {
                    (
                        v.name().to_string(),
                        ModelSelection {
                            converter_model: v,
                            ..base
                        },
                    )
                })
                .collect(),
            Axis::Res => ResModel::ALL
                .iter()
                .map(|&v| {
                    (
                        v.name().to_string(),
                        ModelSelection {
                            res_model: v,
                            ..base
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterSite {
    pub name: String,
    pub bus: String,
    #[serde(default)]
    pub params: VscParams,
}

/// Benchmark parameter set: network, generators, dispatch and the
/// converter-interfaced source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkData {
    pub network: NetworkData,
    pub machines: Vec<MachineSpec>,
    pub converter: ConverterSite,
    #[serde(default)]
    pub res: ResParams,
    #[serde(default)]
    pub environment: Environment,
}

pub const DEFAULT_BENCHMARK: &str = include_str!("../../data/benchmark.toml");

/// File layout: the network tables plus `dispatch` under `[network]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileNetwork {
    s_base_mva: f64,
    f_nom_hz: f64,
    buses: Vec<crate::network::BusData>,
    lines: Vec<crate::network::LineData>,
    #[serde(default)]
    transformers: Vec<crate::network::TransformerData>,
    #[serde(default)]
    loads: Vec<crate::network::LoadData>,
    dispatch: Vec<Dispatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBenchmark {
    network: FileNetwork,
    machines: Vec<MachineSpec>,
    converter: ConverterSite,
    #[serde(default)]
    res: ResParams,
    #[serde(default)]
    environment: Environment,
}

/// Parsed benchmark file together with the generator dispatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub data: BenchmarkData,
    pub dispatch: Vec<Dispatch>,
}

impl Benchmark {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let f: FileBenchmark = toml::from_str(text).map_err(|e| SimError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        let n = f.network;
        let b = Self {
            data: BenchmarkData {
                network: NetworkData {
                    s_base_mva: n.s_base_mva,
                    f_nom_hz: n.f_nom_hz,
                    buses: n.buses,
                    lines: n.lines,
                    transformers: n.transformers,
                    loads: n.loads,
                },
                machines: f.machines,
                converter: f.converter,
                res: f.res,
                environment: f.environment,
            },
            dispatch: n.dispatch,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::config(format!(
                "benchmark parameter file '{}': {e}",
                path.display()
            ))
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        for m in &self.data.machines {
            if let Err(e) = m.validate() {
                errors.push(format!("generator '{}': {e}", m.name));
            }
        }
        if let Err(e) = self.data.converter.params.validate() {
            errors.push(format!("converter: {e}"));
        }
        if let Err(e) = self.data.res.pv.cell.validate() {
            errors.push(format!("PV: {e}"));
        }
        if let Err(e) = self.data.res.wind.validate() {
            errors.push(format!("wind: {e}"));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(errors))
        }
    }

    /// Bus ids of the transmission level, reported in every run.
    pub fn report_buses(&self) -> Vec<String> {
        let v_max = self
            .data
            .network
            .buses
            .iter()
            .map(|b| b.v_kv)
            .fold(0.0, f64::max);
        self.data
            .network
            .buses
            .iter()
            .filter(|b| b.v_kv == v_max)
            .map(|b| b.id.clone())
            .collect()
    }
}

impl Default for Benchmark {
    fn default() -> Self {
        Self::parse(DEFAULT_BENCHMARK, "benchmark.toml").expect("bundled benchmark data is valid")
    }
}

/// Assemble the system for `selection`. `split` lists lines to be modelled
/// as two halves (midpoint faults).
pub fn build_benchmark(
    bench: &Benchmark,
    selection: &ModelSelection,
    split: &[String],
) -> Result<System> {
    let d = &bench.data;
    let topo = Topology::build(&d.network, selection.line_model, split)?;
    let s_base = d.network.s_base_mva;
    let machines: Vec<Machine> = d
        .machines
        .iter()
        .map(|spec| Machine::new(spec, selection.sg_model, s_base))
        .collect();
    let dc = if selection.res_model.has_dc_link() {
        DcSide::Link
    } else {
        DcSide::Stiff
    };
    let vsc = Vsc::new(
        &d.converter.name,
        &d.converter.bus,
        d.converter.params,
        selection.converter_model,
        dc,
        d.network.f_nom_hz,
        s_base,
    );
    let res = ResDevice::new(selection.res_model, &d.res, d.converter.params.s_rated_mva)?;
    System::new(
        selection.mode(),
        topo,
        machines,
        bench.dispatch.clone(),
        vsc,
        res,
        d.environment,
        bench.report_buses(),
    )
}

/// One scripted disturbance test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: u32,
    pub description: String,
    pub duration: f64,
    /// Converter setpoints at t = 0 (MW, Mvar).
    pub p_set_mw: f64,
    pub q_set_mvar: f64,
    pub events: Vec<TimedEvent>,
}

impl TestCase {
    /// Lines that need a midpoint node.
    pub fn split_lines(&self) -> Vec<String> {
        self.events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::FaultOn { fault } => match &fault.location {
                    FaultLocation::LineMidpoint(l) => Some(l.clone()),
                    FaultLocation::Bus(_) => None,
                },
                _ => None,
            })
            .collect()
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }
}

fn ev(time: f64, kind: EventKind) -> TimedEvent {
    TimedEvent { time, kind }
}

/// Converter dispatch before any event in tests 2 to 6 (MW).
pub const BASE_CONVERTER_MW: f64 = 80.0;

pub fn make_test(id: u32) -> Result<TestCase> {
    let t = match id {
        1 => TestCase {
            id,
            description: "converter setpoints raised to 100 MW and 30 Mvar".into(),
            duration: 5.0,
            p_set_mw: 50.0,
            q_set_mvar: 0.0,
            events: vec![ev(
                1.0,
                EventKind::Setpoint {
                    p_mw: Some(100.0),
                    q_mvar: Some(30.0),
                },
            )],
        },
        2 => TestCase {
            id,
            description: "100 MW, 20 Mvar load connected at bus 6".into(),
            duration: 8.0,
            p_set_mw: BASE_CONVERTER_MW,
            q_set_mvar: 0.0,
            events: vec![ev(
                5.0,
                EventKind::LoadConnect {
                    bus: "6".into(),
                    p_mw: 100.0,
                    q_mvar: 20.0,
                },
            )],
        },
        3 => {
            let fault = FaultSpec {
                id: "f3".into(),
                location: FaultLocation::Bus("2".into()),
                resistance_ohm: 5.0,
                kind: FaultKind::ThreePhase,
                phase: Phase::A,
            };
            TestCase {
                id,
                description: "5 ohm three-phase fault at bus 2 for 200 ms".into(),
                duration: 8.0,
                p_set_mw: BASE_CONVERTER_MW,
                q_set_mvar: 0.0,
                events: vec![
                    ev(5.0, EventKind::FaultOn { fault }),
                    ev(5.2, EventKind::FaultClear { id: "f3".into() }),
                ],
            }
        }
        4 => {
            let fault = FaultSpec {
                id: "f4".into(),
                location: FaultLocation::Bus("1".into()),
                resistance_ohm: 10.0,
                kind: FaultKind::SinglePhase,
                phase: Phase::B,
            };
            TestCase {
                id,
                description: "10 ohm phase-B fault at bus 1 for 500 ms".into(),
                duration: 8.0,
                p_set_mw: BASE_CONVERTER_MW,
                q_set_mvar: 0.0,
                events: vec![
                    ev(5.0, EventKind::FaultOn { fault }),
                    ev(5.5, EventKind::FaultClear { id: "f4".into() }),
                ],
            }
        }
        5 => TestCase {
            id,
            description: "generator G2 disconnected".into(),
            duration: 8.0,
            p_set_mw: BASE_CONVERTER_MW,
            q_set_mvar: 0.0,
            events: vec![ev(
                5.0,
                EventKind::GeneratorTrip {
                    generator: "G2".into(),
                },
            )],
        },
        6 => {
            let fault = FaultSpec {
                id: "f6".into(),
                location: FaultLocation::LineMidpoint("1-3".into()),
                resistance_ohm: 1.0,
                kind: FaultKind::ThreePhase,
                phase: Phase::A,
            };
            TestCase {
                id,
                description: "permanent 1 ohm fault on line 1-3, isolated after 100 ms".into(),
                duration: 8.0,
                p_set_mw: BASE_CONVERTER_MW,
                q_set_mvar: 0.0,
                events: vec![
                    ev(5.0, EventKind::FaultOn { fault }),
                    ev(
                        5.1,
                        EventKind::BreakerOpen {
                            line: "1-3".into(),
                            end: "1".into(),
                        },
                    ),
                    ev(
                        5.1,
                        EventKind::BreakerOpen {
                            line: "1-3".into(),
                            end: "3".into(),
                        },
                    ),
                ],
            }
        }
        _ => return Err(SimError::config(format!("test id {id} is not in 1..=6"))),
    };
    Ok(t)
}

/// Run one test with one selection.
pub fn run_test(
    bench: &Benchmark,
    selection: &ModelSelection,
    test: &TestCase,
    opts: &RunOptions,
) -> Result<RunResult> {
    let mut sys = build_benchmark(bench, selection, &test.split_lines())?;
    sys.p_set_mw = test.p_set_mw;
    sys.q_set_mvar = test.q_set_mvar;
    let mut r = sys.run(&test.events, opts)?;
    r.meta.insert("test".into(), test.id.to_string());
    r.meta.insert("selection".into(), selection.label());
    Ok(r)
}

/// Default run options for a selection and test.
pub fn default_options(selection: &ModelSelection, test: &TestCase) -> RunOptions {
    RunOptions::new(selection.mode(), test.duration)
}

/// Run every test for each variant along `axis` (base group alone when
/// `axis` is `None`). Results are ordered by variant, then test.
pub fn run_matrix(
    bench: &Benchmark,
    tests: &[u32],
    axis: Option<Axis>,
    base: ModelSelection,
    opts: impl Fn(&ModelSelection, &TestCase) -> RunOptions,
) -> Result<Vec<(String, u32, RunResult)>> {
    let variants = match axis {
        Some(a) => a.variants(base),
        None => vec![("base".to_string(), base)],
    };
    let mut out = Vec::new();
    for (name, sel) in &variants {
        for &id in tests {
            let test = make_test(id)?;
            let r = run_test(bench, sel, &test, &opts(sel, &test))
                .map_err(|e| e.annotate(format!("test {id}, variant {name}")))?;
            out.push((name.clone(), id, r));
        }
    }
    Ok(out)
}
