//! Scenario configuration, run execution and CSV export.

pub mod metrics;
pub mod timing;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmark::{build_benchmark, make_test, Axis, Benchmark, ModelSelection, TestCase};
use crate::converter::VscParams;
use crate::error::{Result, SimError};
use crate::events::{EventKind, TimedEvent};
use crate::integrate::IntegratorConfig;
use crate::network::{Companion, FaultLocation, Topology};
use crate::res::Environment;
use crate::sim::{check_events, NoiseConfig, RunOptions, RunResult, SimMode, System};

pub use metrics::{compute_metrics, default_windows, MetricsReport, SignalMetrics};
pub use timing::{timing_report, TimingEntry, TimingReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setpoint {
    pub p_mw: f64,
    #[serde(default)]
    pub q_mvar: f64,
}

/// One scenario: a benchmark test or custom event list, the model
/// selection and the numerical and output settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Benchmark parameter file; the bundled set when absent.
    #[serde(default)]
    pub benchmark: Option<PathBuf>,
    /// Benchmark test id (1 to 6).
    #[serde(default)]
    pub test: Option<u32>,
    /// Test ids for `matrix`; falls back to `test`.
    #[serde(default)]
    pub tests: Vec<u32>,
    /// Custom events, used instead of a test's events.
    #[serde(default)]
    pub events: Option<Vec<TimedEvent>>,
    #[serde(default)]
    pub duration: Option<f64>,
    #[serde(default)]
    pub models: ModelSelection,
    #[serde(default)]
    pub step_h: Option<f64>,
    #[serde(default)]
    pub settle: Option<f64>,
    #[serde(default = "default_output_dt")]
    pub output_dt: f64,
    #[serde(default)]
    pub companion: Companion,
    /// Recorded signals; all when empty.
    #[serde(default)]
    pub signals: Vec<String>,
    /// CSV path for `run`, directory for `matrix`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Converter setpoint at t = 0; the test's value when absent.
    #[serde(default)]
    pub setpoint: Option<Setpoint>,
    #[serde(default)]
    pub converter_bus: Option<String>,
    #[serde(default)]
    pub converter: Option<VscParams>,
    #[serde(default)]
    pub environment: Option<Environment>,
    /// Metric exclusion windows; `[event, event + 0.5]` per event when absent.
    #[serde(default)]
    pub transient_windows: Option<Vec<[f64; 2]>>,
    /// Timed repetitions; the minimum wall-clock is kept.
    #[serde(default = "default_repeats")]
    pub repeats: u32,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_output_dt() -> f64 {
    1e-3
}

fn default_repeats() -> u32 {
    1
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty scenario parses")
    }
}

/// Merge `over` into `base`, tables recursively, other values replaced.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn read_table(path: &Path, depth: usize) -> Result<toml::Table> {
    if depth > 8 {
        return Err(SimError::config(format!(
            "include depth exceeded at '{}'",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| SimError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut merged = toml::Table::new();
    if let Some(inc) = table.remove("include") {
        let list = inc.as_array().ok_or_else(|| SimError::Parse {
            path: path.display().to_string(),
            message: "include must be an array of paths".into(),
        })?;
        for item in list {
            let rel = item.as_str().ok_or_else(|| SimError::Parse {
                path: path.display().to_string(),
                message: "include entries must be strings".into(),
            })?;
            merge(&mut merged, read_table(&dir.join(rel), depth + 1)?);
        }
    }
    // Paths are relative to the file that names them.
    for key in ["benchmark", "output"] {
        if let Some(toml::Value::String(p)) = table.get_mut(key) {
            *p = dir.join(&*p).display().to_string();
        }
    }
    merge(&mut merged, table);
    Ok(merged)
}

impl ScenarioConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })
    }

    /// Read a scenario file, resolving `include = [...]` references. Later
    /// includes override earlier ones and the file overrides all includes.
    pub fn load(path: &Path) -> Result<Self> {
        let table = read_table(path, 0)?;
        table
            .try_into()
            .map_err(|e: toml::de::Error| SimError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })
    }

    pub fn benchmark(&self) -> Result<Benchmark> {
        let mut b = match &self.benchmark {
            Some(p) => Benchmark::load(p)?,
            None => Benchmark::default(),
        };
        if let Some(bus) = &self.converter_bus {
            b.data.converter.bus = bus.clone();
        }
        if let Some(p) = self.converter {
            b.data.converter.params = p;
        }
        if let Some(e) = self.environment {
            b.data.environment = e;
        }
        Ok(b)
    }

    /// Test case with the config's overrides applied.
    pub fn test_case(&self) -> Result<TestCase> {
        let mut t = match self.test {
            Some(id) => make_test(id)?,
            None => TestCase {
                id: 0,
                description: "custom".into(),
                duration: 0.0,
                p_set_mw: 0.0,
                q_set_mvar: 0.0,
                events: Vec::new(),
            },
        };
        if let Some(ev) = &self.events {
            t.events = ev.clone();
        }
        if let Some(d) = self.duration {
            t.duration = d;
        }
        if let Some(s) = self.setpoint {
            t.p_set_mw = s.p_mw;
            t.q_set_mvar = s.q_mvar;
        }
        Ok(t)
    }

    pub fn options(&self, test: &TestCase) -> RunOptions {
        let mode = self.models.mode();
        let mut o = RunOptions::new(mode, test.duration);
        if let Some(h) = self.step_h {
            o.step_h = h;
        }
        if let Some(s) = self.settle {
            o.settle = s;
        }
        o.output_dt = self.output_dt;
        o.companion = self.companion;
        o.noise = self.noise;
        if let Some(seed) = self.seed {
            o.noise.seed = seed;
        }
        o
    }

    pub fn windows(&self, test: &TestCase) -> Vec<[f64; 2]> {
        self.transient_windows
            .clone()
            .unwrap_or_else(|| default_windows(&test.event_times(), 0.5))
    }

    /// Check everything and report all problems together.
    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    fn prepare(&self) -> Result<(System, TestCase, RunOptions)> {
        let mut errors = Vec::new();
        if self.test.is_none() && self.events.is_none() {
            errors.push("scenario needs a test id or an event list".to_string());
        }
        if self.test.is_none() && self.duration.is_none() {
            errors.push("custom scenario needs a duration".to_string());
        }
        let test = match self.test_case() {
            Ok(t) => Some(t),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        };
        if let Some(t) = &test {
            if !(t.duration >= 0.0 && t.duration.is_finite()) {
                errors.push(format!(
                    "duration {} must be finite and non-negative",
                    t.duration
                ));
            }
            if let Some(last) = t.events.iter().map(|e| e.time).reduce(f64::max) {
                if last >= t.duration && t.duration > 0.0 {
                    errors.push(format!(
                        "duration {} s must exceed the last event time {last} s",
                        t.duration
                    ));
                }
            }
        }
        if !(self.output_dt > 0.0) {
            errors.push(format!("output_dt {} must be positive", self.output_dt));
        }
        if self.repeats == 0 {
            errors.push("repeats must be at least 1".into());
        }
        if let Some(h) = self.step_h {
            let check = match self.models.mode() {
                SimMode::Emt => IntegratorConfig::emt(h),
                SimMode::Phasor => IntegratorConfig::phasor(h),
            };
            if let Err(e) = check {
                errors.push(e.to_string());
            }
        }
        let bench = match self.benchmark() {
            Ok(b) => Some(b),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        };
        let mut sys = None;
        if let (Some(b), Some(t)) = (&bench, &test) {
            match build_benchmark(b, &self.models, &split_lines(&t.events)) {
                Ok(mut s) => match s.clone().prepare_events(&t.events) {
                    Ok(()) => {
                        s.p_set_mw = t.p_set_mw;
                        s.q_set_mvar = t.q_set_mvar;
                        let names = s.signal_names();
                        for sig in &self.signals {
                            if !names.contains(sig) {
                                errors.push(format!("unknown signal '{sig}'"));
                            }
                        }
                        sys = Some(s);
                    }
                    Err(e) => push_errors(&mut errors, e),
                },
                Err(e) => {
                    push_errors(&mut errors, e);
                    // Still report event problems against the bare network.
                    if let Ok(topo) = Topology::build(
                        &b.data.network,
                        self.models.line_model,
                        &split_lines(&t.events),
                    ) {
                        let names: Vec<&str> =
                            b.data.machines.iter().map(|m| m.name.as_str()).collect();
                        errors.extend(check_events(&topo, &names, &t.events));
                    }
                }
            }
        }
        if !errors.is_empty() {
            return Err(SimError::Validation(errors));
        }
        let (sys, test) = (sys.expect("built"), test.expect("built"));
        let opts = self.options(&test);
        Ok((sys, test, opts))
    }
}

fn push_errors(errors: &mut Vec<String>, e: SimError) {
    match e {
        SimError::Validation(v) => errors.extend(v),
        other => errors.push(other.to_string()),
    }
}

fn split_lines(events: &[TimedEvent]) -> Vec<String> {
    events
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

/// Run a scenario; writes the CSV and a `.meta.json` next to it when
/// `output` is set.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunResult> {
    let (sys, test, opts) = config.prepare()?;
    let mut best: Option<RunResult> = None;
    for _ in 0..config.repeats.max(1) {
        let mut s = sys.clone();
        let r = s.run(&test.events, &opts)?;
        best = Some(match best {
            Some(b) if b.wall_clock_s <= r.wall_clock_s => b,
            _ => r,
        });
    }
    let mut r = best.expect("at least one repeat");
    if !config.signals.is_empty() {
        r = r.select(&config.signals)?;
    }
    r.meta.insert("scenario".into(), config.name.clone());
    r.meta.insert("test".into(), test.id.to_string());
    r.meta.insert("selection".into(), config.models.label());
    r.meta.insert("repeats".into(), config.repeats.to_string());
    r.meta.insert("seed".into(), opts.noise.seed.to_string());
    let windows: Vec<String> = config
        .windows(&test)
        .iter()
        .map(|w| format!("{}:{}", w[0], w[1]))
        .collect();
    r.meta.insert("transient_windows".into(), windows.join(","));
    if let Some(path) = &config.output {
        write_run(&r, path)?;
    }
    Ok(r)
}

/// Path of the metadata file written alongside a run CSV.
pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_run(r: &RunResult, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| SimError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
    }
    r.write_csv(path)?;
    let mut meta = r.meta.clone();
    meta.insert("wall_clock_s".into(), r.wall_clock_s.to_string());
    let mp = meta_path(path);
    let text = serde_json::to_string_pretty(&meta).expect("string map serializes");
    std::fs::write(&mp, text + "\n").map_err(|e| SimError::Io {
        path: mp.display().to_string(),
        source: e,
    })
}

/// Read a run CSV and its metadata file when present.
pub fn read_run(path: &Path) -> Result<RunResult> {
    let mut r = RunResult::read_csv(path)?;
    let mp = meta_path(path);
    if mp.exists() {
        let text = std::fs::read_to_string(&mp).map_err(|e| SimError::Io {
            path: mp.display().to_string(),
            source: e,
        })?;
        r.meta = serde_json::from_str(&text).map_err(|e| SimError::Parse {
            path: mp.display().to_string(),
            message: e.to_string(),
        })?;
        if let Some(w) = r.meta.get("wall_clock_s").and_then(|w| w.parse().ok()) {
            r.wall_clock_s = w;
        }
    }
    Ok(r)
}

/// Exclusion windows recorded in a run's metadata.
pub fn meta_windows(r: &RunResult) -> Vec<[f64; 2]> {
    r.meta
        .get("transient_windows")
        .map(|s| {
            s.split(',')
                .filter_map(|w| {
                    let (a, b) = w.split_once(':')?;
                    Some([a.parse().ok()?, b.parse().ok()?])
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Run every test for each variant along `axis`, writing
/// `<output>/<variant>_t<test>.csv` when `output` is set.
pub fn run_matrix(config: &ScenarioConfig, axis: Axis) -> Result<Vec<(String, u32, RunResult)>> {
    let tests: Vec<u32> = if config.tests.is_empty() {
        config.test.into_iter().collect()
    } else {
        config.tests.clone()
    };
    if tests.is_empty() {
        return Err(SimError::config("matrix needs `test` or `tests`"));
    }
    let mut out = Vec::new();
    for (name, sel) in axis.variants(config.models) {
        for &id in &tests {
            let mut c = config.clone();
            c.models = sel;
            c.test = Some(id);
            c.output = config
                .output
                .as_ref()
                .map(|d| d.join(format!("{name}_t{id}.csv")));
            let r =
                run_scenario(&c).map_err(|e| e.annotate(format!("test {id}, variant {name}")))?;
            out.push((name.clone(), id, r));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_base_group() {
        let c = ScenarioConfig::default();
        assert_eq!(c.models, ModelSelection::base());
        assert_eq!(c.repeats, 1);
        assert!(c.validate().is_err());
    }

    #[test]
    fn validation_lists_every_problem() {
        let c = ScenarioConfig::parse(
            r#"
            duration = 1.0
            output_dt = 0.0
            signals = ["nope.x"]
            events = [
              { time = 0.5, kind = "load_connect", bus = "77", p_mw = 1.0, q_mvar = 0.0 },
              { time = 0.6, kind = "generator_trip", generator = "G9" },
            ]
            "#,
            "mem",
        )
        .unwrap();
        let msg = c.validate().unwrap_err().to_string();
        for needle in ["output_dt", "77", "G9"] {
            assert!(msg.contains(needle), "{needle} missing from {msg}");
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::parse("bogus = 1", "mem").is_err());
    }

    #[test]
    fn merge_overrides_nested() {
        let mut a: toml::Table =
            toml::from_str("x = 1\n[models]\nsg_model = \"simplified\"\nline_model = \"pi\"")
                .unwrap();
        let b: toml::Table = toml::from_str("[models]\nline_model = \"bergeron\"").unwrap();
        merge(&mut a, b);
        assert_eq!(a["x"].as_integer(), Some(1));
        assert_eq!(a["models"]["sg_model"].as_str(), Some("simplified"));
        assert_eq!(a["models"]["line_model"].as_str(), Some("bergeron"));
    }
}
