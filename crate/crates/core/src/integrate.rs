//! Flat state storage with named slots and the forward-Euler step.

use std::collections::HashMap;

use crate::error::{Result, SimError};

/// Fixed-step integrator settings. Only forward Euler is provided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step_h: f64,
}

pub const EMT_MAX_STEP: f64 = 100e-6;
pub const PHASOR_MAX_STEP: f64 = 10e-3;
pub const EMT_DEFAULT_STEP: f64 = 50e-6;
pub const PHASOR_DEFAULT_STEP: f64 = 1e-3;

impl IntegratorConfig {
    pub fn emt(step_h: f64) -> Result<Self> {
        Self::checked(step_h, EMT_MAX_STEP, "EMT")
    }

    pub fn phasor(step_h: f64) -> Result<Self> {
        Self::checked(step_h, PHASOR_MAX_STEP, "phasor")
    }

    fn checked(step_h: f64, max: f64, mode: &str) -> Result<Self> {
        if !(step_h.is_finite() && step_h > 0.0) {
            return Err(SimError::config(format!(
                "{mode} step must be positive, got {step_h}"
            )));
        }
        if step_h > max * (1.0 + 1e-12) {
            return Err(SimError::config(format!(
                "{mode} step {step_h} s exceeds the {max} s limit"
            )));
        }
        Ok(Self { step_h })
    }
}

/// Ordered real state with a registry of `device.slot` names.
#[derive(Debug, Clone, Default)]
pub struct StateVector {
    values: Vec<f64>,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a contiguous block of slots for one device and return the
    /// offset of its first slot.
    pub fn register(&mut self, device: &str, slots: &[&str], init: &[f64]) -> Result<usize> {
        assert_eq!(
            slots.len(),
            init.len(),
            "slot/initial-value length mismatch"
        );
        let offset = self.values.len();
        for (slot, &v) in slots.iter().zip(init) {
            let name = format!("{device}.{slot}");
            if self.index.contains_key(&name) {
                return Err(SimError::config(format!(
                    "state slot `{name}` registered twice"
                )));
            }
            self.index.insert(name.clone(), self.values.len());
            self.names.push(name);
            self.values.push(v);
        }
        Ok(offset)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.values[i])
    }

    pub fn slot_name(&self, i: usize) -> &str {
        &self.names[i]
    }

    /// `x <- x + h * dx`, rejecting non-finite derivative components.
    pub fn apply_euler(&mut self, deriv: &[f64], h: f64, time: f64) -> Result<()> {
        if deriv.len() != self.values.len() {
            return Err(SimError::config(format!(
                "derivative length {} does not match state length {}",
                deriv.len(),
                self.values.len()
            )));
        }
        for (i, (x, dx)) in self.values.iter_mut().zip(deriv).enumerate() {
            if !dx.is_finite() {
                return Err(SimError::NonFiniteState {
                    slot: self.names[i].clone(),
                    time,
                });
            }
            *x += h * dx;
        }
        Ok(())
    }
}

/// One forward-Euler step of `dx/dt = f(x)`.
pub fn euler_step<F>(state: &StateVector, derivative: F, h: f64, time: f64) -> Result<StateVector>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(h > 0.0) {
        return Err(SimError::config(format!("step must be positive, got {h}")));
    }
    let dx = derivative(state.values());
    let mut next = state.clone();
    next.apply_euler(&dx, h, time)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(x0: f64) -> StateVector {
        let mut s = StateVector::new();
        s.register("x", &["v"], &[x0]).unwrap();
        s
    }

    #[test]
    fn zero_derivative_is_identity() {
        let mut s = StateVector::new();
        s.register("dev", &["a", "b"], &[1.5, -2.0]).unwrap();
        let next = euler_step(&s, |x| vec![0.0; x.len()], 0.01, 0.0).unwrap();
        assert_eq!(next.values(), s.values());
    }

    #[test]
    fn one_step_of_decay() {
        let next = euler_step(&scalar(1.0), |x| vec![-x[0]], 0.1, 0.0).unwrap();
        assert!((next.values()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn nonfinite_derivative_names_slot() {
        let mut s = StateVector::new();
        s.register("g1", &["omega", "delta"], &[1.0, 0.0]).unwrap();
        let err = euler_step(&s, |_| vec![0.0, f64::NAN], 1e-3, 0.5).unwrap_err();
        match err {
            SimError::NonFiniteState { slot, .. } => assert_eq!(slot, "g1.delta"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_slots_rejected() {
        let mut s = StateVector::new();
        s.register("a", &["x"], &[0.0]).unwrap();
        assert!(s.register("a", &["x"], &[0.0]).is_err());
        assert_eq!(s.index_of("a.x"), Some(0));
    }

    #[test]
    fn step_limits() {
        assert!(IntegratorConfig::emt(50e-6).is_ok());
        assert!(IntegratorConfig::emt(200e-6).is_err());
        assert!(IntegratorConfig::phasor(1e-3).is_ok());
        assert!(IntegratorConfig::phasor(20e-3).is_err());
        assert!(IntegratorConfig::phasor(0.0).is_err());
    }

    #[test]
    fn global_error_is_first_order() {
        // Oracle: exact solution exp(-1).
        let exact = (-1.0f64).exp();
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut s = scalar(1.0);
            for k in 0..n {
                s = euler_step(&s, |x| vec![-x[0]], h, k as f64 * h).unwrap();
            }
            (s.values()[0] - exact).abs()
        };
        let ratio = err(2e-3) / err(1e-3);
        assert!((ratio - 2.0).abs() < 0.01, "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn linear_decay_matches_closed_form(lambda in -5.0..0.5f64, h in 1e-4..1e-2f64, n in 1usize..200) {
            let mut s = scalar(1.0);
            let mut expected = 1.0;
            for k in 0..n {
                s = euler_step(&s, |x| vec![lambda * x[0]], h, k as f64 * h).unwrap();
                expected *= 1.0 + h * lambda;
            }
            // Same evaluation order: x + h*(lambda*x) vs x*(1 + h*lambda).
            prop_assert!((s.values()[0] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }
}
