//! Timed disturbance events and the step-snapped queue that fires them.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::network::FaultSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// New converter active/reactive power setpoints (MW, Mvar).
    Setpoint {
        p_mw: Option<f64>,
        q_mvar: Option<f64>,
    },
    /// Constant-impedance load switched in at nominal voltage rating.
    LoadConnect {
        bus: String,
        p_mw: f64,
        q_mvar: f64,
    },
    FaultOn {
        fault: FaultSpec,
    },
    FaultClear {
        id: String,
    },
    /// Ideal breaker at one end of a line. Opening either end isolates the line.
    BreakerOpen {
        line: String,
        end: String,
    },
    GeneratorTrip {
        generator: String,
    },
    Irradiance {
        w_per_m2: f64,
    },
    WindSpeed {
        m_per_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
struct Queued {
    step: i64,
    seq: u64,
    kind: EventKind,
}

/// Events sorted by firing step; equal steps keep insertion order.
#[derive(Debug, Clone)]
pub struct EventQueue {
    h: f64,
    now_step: i64,
    next_seq: u64,
    items: Vec<Queued>,
}

impl EventQueue {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            now_step: i64::MIN,
            next_seq: 0,
            items: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn step_of(&self, t: f64) -> i64 {
        (t / self.h).round() as i64
    }

    /// Nearest integration-step boundary to `t`.
    pub fn snap(&self, t: f64) -> f64 {
        self.step_of(t) as f64 * self.h
    }

    pub fn set_now(&mut self, t: f64) {
        self.now_step = self.step_of(t);
    }

    pub fn schedule(&mut self, t: f64, kind: EventKind) -> Result<()> {
        if !t.is_finite() {
            return Err(SimError::config(format!("event time {t} is not finite")));
        }
        let step = self.step_of(t);
        if step < self.now_step {
            return Err(SimError::EventInPast {
                t,
                now: self.now_step as f64 * self.h,
            });
        }
        let pos = self.items.partition_point(|q| q.step <= step);
        self.items.insert(
            pos,
            Queued {
                step,
                seq: self.next_seq,
                kind,
            },
        );
        self.next_seq += 1;
        Ok(())
    }

    /// Firing times of queued events, in firing order.
    pub fn times(&self) -> Vec<f64> {
        self.items.iter().map(|q| q.step as f64 * self.h).collect()
    }

    /// Remove and return every event due at or before `step`.
    pub fn pop_due(&mut self, step: i64) -> Vec<EventKind> {
        self.now_step = step;
        let n = self.items.partition_point(|q| q.step <= step);
        let mut due: Vec<Queued> = self.items.drain(..n).collect();
        due.sort_by_key(|q| (q.step, q.seq));
        due.into_iter().map(|q| q.kind).collect()
    }

    pub fn next_step(&self) -> Option<i64> {
        self.items.first().map(|q| q.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(bus: &str) -> EventKind {
        EventKind::LoadConnect {
            bus: bus.into(),
            p_mw: 100.0,
            q_mvar: 20.0,
        }
    }

    #[test]
    fn schedule_into_empty() {
        let mut q = EventQueue::new(50e-6);
        q.schedule(5.0, load("6")).unwrap();
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn snaps_to_nearest_boundary() {
        let mut q = EventQueue::new(50e-6);
        q.schedule(5.00003, load("6")).unwrap();
        let t = q.times()[0];
        assert!((t - 5.00005).abs() < 1e-12, "{t}");
        assert_eq!(q.step_of(5.00003), 100_001);
    }

    #[test]
    fn same_time_fires_in_insertion_order() {
        let mut q = EventQueue::new(1e-3);
        q.schedule(1.0, load("a")).unwrap();
        q.schedule(0.5, load("early")).unwrap();
        q.schedule(1.0, load("b")).unwrap();
        assert!(q.pop_due(499).is_empty());
        assert_eq!(q.pop_due(500), vec![load("early")]);
        assert_eq!(q.pop_due(1000), vec![load("a"), load("b")]);
        assert!(q.is_empty());
        // Each event fires once.
        assert!(q.pop_due(2000).is_empty());
    }

    #[test]
    fn rejects_past_events() {
        let mut q = EventQueue::new(1e-3);
        q.set_now(2.0);
        assert!(matches!(
            q.schedule(1.0, load("x")),
            Err(SimError::EventInPast { .. })
        ));
        assert!(q.schedule(2.0, load("x")).is_ok());
    }
}
