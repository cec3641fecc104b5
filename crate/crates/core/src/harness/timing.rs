//! Relative runtime tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sim::RunResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub label: String,
    /// Sum over tests of the minimum wall-clock per test (s).
    pub wall_clock_s: f64,
    pub tests: usize,
    /// Wall-clock over the baseline's wall-clock.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub baseline: String,
    pub entries: Vec<TimingEntry>,
}

impl TimingReport {
    pub fn get(&self, label: &str) -> Option<&TimingEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,wall_clock_s,tests,ratio\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.label, e.wall_clock_s, e.tests, e.ratio
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "| configuration | wall-clock (s) | tests | ratio vs {} |\n|---|---|---|---|\n",
            self.baseline
        );
        for e in &self.entries {
            out.push_str(&format!(
                "| {} | {:.4} | {} | {:.3} |\n",
                e.label, e.wall_clock_s, e.tests, e.ratio
            ));
        }
        out
    }
}

/// Group runs by `meta.selection` (or `label` when absent), keep the
/// minimum wall-clock of repeated runs of the same test, and sum over tests.
/// `baseline` defaults to the first label seen.
pub fn timing_report(runs: &[RunResult], baseline: Option<&str>) -> Result<TimingReport> {
    if runs.len() < 2 {
        return Err(SimError::config("timing report needs at least two runs"));
    }
    let mut order: Vec<String> = Vec::new();
    let mut best: BTreeMap<(String, String), f64> = BTreeMap::new();
    for r in runs {
        let label = r
            .meta
            .get("selection")
            .or_else(|| r.meta.get("label"))
            .cloned()
            .unwrap_or_else(|| "unlabelled".into());
        let test = r.meta.get("test").cloned().unwrap_or_default();
        if !order.contains(&label) {
            order.push(label.clone());
        }
        let e = best.entry((label, test)).or_insert(f64::INFINITY);
        *e = e.min(r.wall_clock_s);
    }
    let mut entries: Vec<TimingEntry> = order
        .iter()
        .map(|label| {
            let per_test: Vec<f64> = best
                .iter()
                .filter(|((l, _), _)| l == label)
                .map(|(_, w)| *w)
                .collect();
            TimingEntry {
                label: label.clone(),
                wall_clock_s: per_test.iter().sum(),
                tests: per_test.len(),
                ratio: f64::NAN,
            }
        })
        .collect();
    let baseline = baseline
        .map(str::to_string)
        .unwrap_or_else(|| order[0].clone());
    let base = entries
        .iter()
        .find(|e| e.label == baseline)
        .map(|e| e.wall_clock_s)
        .ok_or_else(|| SimError::config(format!("baseline '{baseline}' not among the runs")))?;
    for e in &mut entries {
        e.ratio = e.wall_clock_s / base;
    }
    Ok(TimingReport { baseline, entries })
}

/// Minimum wall-clock over `n` repetitions of `f`.
pub fn min_of<F: FnMut() -> Result<RunResult>>(n: usize, mut f: F) -> Result<RunResult> {
    let mut best: Option<RunResult> = None;
    for _ in 0..n.max(1) {
        let r = f()?;
        if best
            .as_ref()
            .is_none_or(|b| r.wall_clock_s < b.wall_clock_s)
        {
            best = Some(r);
        }
    }
    Ok(best.expect("n >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(sel: &str, test: &str, w: f64) -> RunResult {
        let mut r = RunResult::new(vec![]);
        r.wall_clock_s = w;
        r.meta.insert("selection".into(), sel.into());
        r.meta.insert("test".into(), test.into());
        r
    }

    #[test]
    fn min_per_test_then_sum() {
        let runs = [
            run("emt", "1", 2.0),
            run("emt", "1", 1.0),
            run("emt", "2", 3.0),
            run("phasor", "1", 0.1),
            run("phasor", "2", 0.3),
        ];
        let rep = timing_report(&runs, None).unwrap();
        assert_eq!(rep.baseline, "emt");
        assert_eq!(rep.get("emt").unwrap().wall_clock_s, 4.0);
        assert!((rep.get("phasor").unwrap().ratio - 0.1).abs() < 1e-12);
        assert!(rep.to_markdown().contains("| phasor |"));
    }

    #[test]
    fn needs_two_runs_and_known_baseline() {
        assert!(timing_report(&[run("a", "1", 1.0)], None).is_err());
        assert!(timing_report(&[run("a", "1", 1.0), run("b", "1", 1.0)], Some("c")).is_err());
    }
}
