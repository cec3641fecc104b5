//! Precision metrics of a run against a reference run.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sim::RunResult;

/// Frequency assumed for the averaging window when runs carry no `f_nom_hz`.
pub const DEFAULT_F_NOM: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMetrics {
    pub name: String,
    pub rms: f64,
    pub max_abs: f64,
    /// Errors of the one-cycle moving averages.
    pub windowed_rms: f64,
    pub windowed_max: f64,
    /// `windowed_max` over the RMS level of the averaged reference.
    pub windowed_max_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub signals: Vec<SignalMetrics>,
    pub wall_clock_s: f64,
    pub reference_wall_clock_s: f64,
    /// Run wall-clock over reference wall-clock, when both were timed.
    pub relative_runtime: Option<f64>,
}

impl MetricsReport {
    pub fn get(&self, name: &str) -> Option<&SignalMetrics> {
        self.signals.iter().find(|s| s.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("signal,rms,max_abs,windowed_rms,windowed_max,windowed_max_rel\n");
        for s in &self.signals {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.name, s.rms, s.max_abs, s.windowed_rms, s.windowed_max, s.windowed_max_rel
            ));
        }
        out
    }
}

/// `[t, t + width]` for each event time.
pub fn default_windows(event_times: &[f64], width: f64) -> Vec<[f64; 2]> {
    event_times.iter().map(|&t| [t, t + width]).collect()
}

/// Linear interpolation of `(t, y)` at `x`, clamped to the end values.
fn interp(t: &[f64], y: &[f64], x: f64) -> f64 {
    let k = t.partition_point(|&v| v <= x);
    if k == 0 {
        return y[0];
    }
    if k == t.len() {
        return y[t.len() - 1];
    }
    let (t0, t1) = (t[k - 1], t[k]);
    let w = if t1 > t0 { (x - t0) / (t1 - t0) } else { 0.0 };
    y[k - 1] + w * (y[k] - y[k - 1])
}

fn median_spacing(t: &[f64]) -> Option<f64> {
    let mut d: Vec<f64> = t
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

/// Trailing moving average over `n` samples, shorter at the start.
fn moving_average(y: &[f64], n: usize) -> Vec<f64> {
    let n = n.max(1);
    let mut out = Vec::with_capacity(y.len());
    let mut sum = 0.0;
    for k in 0..y.len() {
        sum += y[k];
        if k >= n {
            sum -= y[k - n];
        }
        out.push(sum / (k + 1).min(n) as f64);
    }
    out
}

fn rms_max(d: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut s, mut m, mut n) = (0.0, 0.0f64, 0usize);
    for v in d {
        s += v * v;
        m = m.max(v.abs());
        n += 1;
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        ((s / n as f64).sqrt(), m)
    }
}

/// Compare every signal of `run` with `reference` on a common uniform grid
/// over the overlapping time range, skipping points inside
/// `transient_windows`. Moving averages span one cycle of the reference's
/// nominal frequency.
pub fn compute_metrics(
    run: &RunResult,
    reference: &RunResult,
    transient_windows: &[[f64; 2]],
) -> Result<MetricsReport> {
    let missing_run: Vec<&str> = reference
        .names
        .iter()
        .filter(|n| run.column(n).is_none())
        .map(String::as_str)
        .collect();
    let missing_ref: Vec<&str> = run
        .names
        .iter()
        .filter(|n| reference.column(n).is_none())
        .map(String::as_str)
        .collect();
    if !missing_run.is_empty() || !missing_ref.is_empty() {
        let mut errors = Vec::new();
        if !missing_run.is_empty() {
            errors.push(format!("missing from run: {}", missing_run.join(", ")));
        }
        if !missing_ref.is_empty() {
            errors.push(format!(
                "missing from reference: {}",
                missing_ref.join(", ")
            ));
        }
        return Err(SimError::Validation(errors));
    }
    let (Some(&a0), Some(&b0)) = (run.time.first(), reference.time.first()) else {
        return Err(SimError::config("cannot compare empty runs"));
    };
    let t0 = a0.max(b0);
    let t1 = run.time[run.len() - 1].min(reference.time[reference.len() - 1]);
    if t1 < t0 {
        return Err(SimError::config(format!(
            "time ranges do not overlap ([{a0}, ..] vs [{b0}, ..])"
        )));
    }
    let dt = match (median_spacing(&run.time), median_spacing(&reference.time)) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 1.0,
    };
    let n = ((t1 - t0) / dt + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    let keep: Vec<bool> = grid
        .iter()
        .map(|&t| !transient_windows.iter().any(|w| t >= w[0] && t <= w[1]))
        .collect();
    let f_nom = reference
        .meta
        .get("f_nom_hz")
        .and_then(|f| f.parse::<f64>().ok())
        .unwrap_or(DEFAULT_F_NOM);
    let cycle = ((1.0 / f_nom) / dt).round() as usize;

    let mut signals = Vec::with_capacity(run.names.len());
    for name in &run.names {
        let ya = run.column(name).expect("checked");
        let yb = reference.column(name).expect("checked");
        let a: Vec<f64> = grid.iter().map(|&t| interp(&run.time, ya, t)).collect();
        let b: Vec<f64> = grid
            .iter()
            .map(|&t| interp(&reference.time, yb, t))
            .collect();
        let kept = |v: Vec<f64>| -> Vec<f64> {
            v.into_iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(x, _)| x)
                .collect()
        };
        let (rms, max_abs) = rms_max(
            a.iter()
                .zip(&b)
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|((x, y), _)| x - y),
        );
        let am = kept(moving_average(&a, cycle));
        let bm = kept(moving_average(&b, cycle));
        let (windowed_rms, windowed_max) = rms_max(am.iter().zip(&bm).map(|(x, y)| x - y));
        let (level, _) = rms_max(bm.iter().copied());
        let windowed_max_rel = if windowed_max == 0.0 {
            0.0
        } else if level > 0.0 {
            windowed_max / level
        } else {
            f64::INFINITY
        };
        signals.push(SignalMetrics {
            name: name.clone(),
            rms,
            max_abs,
            windowed_rms,
            windowed_max,
            windowed_max_rel,
        });
    }
    let relative_runtime = (run.wall_clock_s > 0.0 && reference.wall_clock_s > 0.0)
        .then(|| run.wall_clock_s / reference.wall_clock_s);
    Ok(MetricsReport {
        signals,
        wall_clock_s: run.wall_clock_s,
        reference_wall_clock_s: reference.wall_clock_s,
        relative_runtime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn series(name: &str, f: impl Fn(f64) -> f64, n: usize, dt: f64) -> RunResult {
        let mut r = RunResult::new(vec![name.into()]);
        for k in 0..n {
            let t = k as f64 * dt;
            r.push(t, &[f(t)]);
        }
        r
    }

    #[test]
    fn self_comparison_is_zero() {
        let a = series("x.y", |t| (7.0 * t).sin(), 500, 1e-3);
        let m = compute_metrics(&a, &a, &[]).unwrap();
        let s = &m.signals[0];
        assert_eq!(
            (s.rms, s.max_abs, s.windowed_rms, s.windowed_max),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn constant_offset() {
        let a = series("x.y", |t| t.cos() + 0.01, 300, 1e-3);
        let b = series("x.y", |t| t.cos(), 300, 1e-3);
        let m = compute_metrics(&a, &b, &[]).unwrap();
        assert_relative_eq!(m.signals[0].rms, 0.01, max_relative = 1e-9);
        assert_relative_eq!(m.signals[0].windowed_rms, 0.01, max_relative = 1e-9);
    }

    #[test]
    fn one_cycle_average_removes_fundamental_ripple() {
        let a = series(
            "p",
            |t| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * DEFAULT_F_NOM * t).sin(),
            2000,
            1e-4,
        );
        let b = series("p", |_| 1.0, 2000, 1e-4);
        let m = compute_metrics(&a, &b, &[[0.0, 0.03]]).unwrap();
        assert!(m.signals[0].max_abs > 0.29);
        assert!(
            m.signals[0].windowed_max < 1e-9,
            "{}",
            m.signals[0].windowed_max
        );
    }

    #[test]
    fn windows_exclude_points() {
        let a = series(
            "x",
            |t| if (0.1..=0.2).contains(&t) { 5.0 } else { 0.0 },
            301,
            1e-3,
        );
        let b = series("x", |_| 0.0, 301, 1e-3);
        assert!(compute_metrics(&a, &b, &[]).unwrap().signals[0].max_abs == 5.0);
        assert!(
            compute_metrics(&a, &b, &[[0.0995, 0.2005]])
                .unwrap()
                .signals[0]
                .max_abs
                < 1e-9
        );
    }

    #[test]
    fn disjoint_signals_named() {
        let a = series("a.x", |t| t, 10, 1e-3);
        let b = series("b.x", |t| t, 10, 1e-3);
        let msg = compute_metrics(&a, &b, &[]).unwrap_err().to_string();
        assert!(msg.contains("a.x") && msg.contains("b.x"));
    }

    proptest! {
        #[test]
        fn max_error_is_symmetric(amp in 0.0f64..5.0, w in 0.1f64..40.0, off in -1.0f64..1.0) {
            let a = series("s", |t| amp * (w * t).sin(), 400, 1e-3);
            let b = series("s", |t| off + (w * t).cos(), 400, 1e-3);
            let ab = compute_metrics(&a, &b, &[]).unwrap();
            let ba = compute_metrics(&b, &a, &[]).unwrap();
            prop_assert_eq!(ab.signals[0].max_abs, ba.signals[0].max_abs);
            prop_assert_eq!(ab.signals[0].rms, ba.signals[0].rms);
            prop_assert!(ab.signals[0].rms >= 0.0);
        }
    }
}
