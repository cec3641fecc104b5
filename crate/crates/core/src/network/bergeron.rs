//! Travelling-wave line with lumped losses (a quarter of the resistance at each
//! end and half in the middle).
//!
//! Each end is a conductance `1/Z` in parallel with a history current source;
//! the two ends interact only through values delayed by the travel time:
//!
//! ```text
//! i_km(t) = v_k(t)/Z + I_k(t)
//! I_k(t)  = -(1+h)/2 [v_m(t-tau)/Z + h i_mk(t-tau)] - (1-h)/2 [v_k(t-tau)/Z + h i_km(t-tau)]
//! Z = Zc + R/4,  h = (Zc - R/4)/(Zc + R/4)
//! ```
//!
//! Delayed values between step boundaries are linearly interpolated.

use crate::error::{Result, SimError};

/// One stored step: end voltages and line-entry currents per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sample {
    v_k: [f64; 3],
    v_m: [f64; 3],
    i_km: [f64; 3],
    i_mk: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BergeronLine {
    /// End conductance source impedance `Zc + R/4`.
    pub z: f64,
    pub hc: f64,
    pub tau: f64,
    /// Delay in steps, split into whole steps and a fraction.
    whole: usize,
    frac: f64,
    ring: Vec<Sample>,
    /// Index of the most recent sample.
    head: usize,
}

impl BergeronLine {
    pub fn new(zc: f64, r_total: f64, tau: f64, h: f64) -> Result<Self> {
        if !(zc > 0.0 && r_total >= 0.0 && tau > 0.0 && h > 0.0) {
            return Err(SimError::config(format!(
                "invalid travelling-wave line (zc {zc}, r {r_total}, tau {tau})"
            )));
        }
        if tau < h {
            return Err(SimError::config(format!(
                "travel time {tau:.3e} s is shorter than the step {h:.3e} s; model this line as PI"
            )));
        }
        let s = tau / h;
        let mut whole = s.floor() as usize;
        let mut frac = s - whole as f64;
        // Snap values that are within rounding of a step boundary.
        if frac > 1.0 - 1e-9 {
            whole += 1;
            frac = 0.0;
        } else if frac < 1e-9 {
            frac = 0.0;
        }
        let q = r_total / 4.0;
        Ok(Self {
            z: zc + q,
            hc: (zc - q) / (zc + q),
            tau,
            whole,
            frac,
            ring: vec![Sample::default(); whole + 2],
            head: 0,
        })
    }

    /// Depth of the history buffer in steps.
    pub fn depth(&self) -> usize {
        self.ring.len()
    }

    pub fn conductance(&self) -> f64 {
        1.0 / self.z
    }

    /// Sample stored `back` steps before the current one (1 = last step).
    fn back(&self, back: usize) -> &Sample {
        let n = self.ring.len();
        &self.ring[(self.head + n - (back - 1)) % n]
    }

    /// Delayed sample at `t - tau` for the step about to be solved.
    fn delayed(&self) -> Sample {
        let a = self.back(self.whole);
        if self.frac == 0.0 {
            return *a;
        }
        let b = self.back(self.whole + 1);
        let w = self.frac;
        let mix = |x: [f64; 3], y: [f64; 3]| std::array::from_fn(|p| (1.0 - w) * x[p] + w * y[p]);
        Sample {
            v_k: mix(a.v_k, b.v_k),
            v_m: mix(a.v_m, b.v_m),
            i_km: mix(a.i_km, b.i_km),
            i_mk: mix(a.i_mk, b.i_mk),
        }
    }

    /// History current sources `(I_k, I_m)` for the step about to be solved.
    pub fn history(&self) -> ([f64; 3], [f64; 3]) {
        let d = self.delayed();
        let (z, h) = (self.z, self.hc);
        let fwd = (1.0 + h) / 2.0;
        let own = (1.0 - h) / 2.0;
        let ik = std::array::from_fn(|p| {
            -fwd * (d.v_m[p] / z + h * d.i_mk[p]) - own * (d.v_k[p] / z + h * d.i_km[p])
        });
        let im = std::array::from_fn(|p| {
            -fwd * (d.v_k[p] / z + h * d.i_km[p]) - own * (d.v_m[p] / z + h * d.i_mk[p])
        });
        (ik, im)
    }

    /// Store the solved end voltages; returns the entry currents `(i_km, i_mk)`.
    pub fn update(
        &mut self,
        v_k: [f64; 3],
        v_m: [f64; 3],
        hist: ([f64; 3], [f64; 3]),
    ) -> ([f64; 3], [f64; 3]) {
        let g = self.conductance();
        let i_km = std::array::from_fn(|p| g * v_k[p] + hist.0[p]);
        let i_mk = std::array::from_fn(|p| g * v_m[p] + hist.1[p]);
        self.head = (self.head + 1) % self.ring.len();
        self.ring[self.head] = Sample {
            v_k,
            v_m,
            i_km,
            i_mk,
        };
        (i_km, i_mk)
    }

    /// Fill the history with a past trajectory; `f(t)` returns
    /// `(v_k, v_m, i_km, i_mk)` at time `t` relative to the first step.
    pub fn prime(
        &mut self,
        h: f64,
        mut f: impl FnMut(f64) -> ([f64; 3], [f64; 3], [f64; 3], [f64; 3]),
    ) {
        let n = self.ring.len();
        for back in (1..=n).rev() {
            let (v_k, v_m, i_km, i_mk) = f(-(back as f64) * h);
            self.head = (self.head + 1) % n;
            self.ring[self.head] = Sample {
                v_k,
                v_m,
                i_km,
                i_mk,
            };
        }
    }

    /// Forget all history (line de-energized).
    pub fn reset(&mut self) {
        self.ring.iter_mut().for_each(|s| *s = Sample::default());
    }
}

/// Drive one end of a line with a forced voltage and terminate the far end
/// in a resistance (`f64::INFINITY` for an open end). Returns per-step
/// `(v_m, i_km)` on phase a. Used by the wave-propagation checks.
pub fn bergeron_update(
    line: &mut BergeronLine,
    v_send: impl Fn(usize) -> f64,
    r_load: f64,
    steps: usize,
) -> Vec<(f64, f64)> {
    let g_load = if r_load.is_finite() {
        1.0 / r_load
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(steps);
    for n in 0..steps {
        let hist = line.history();
        let vk = v_send(n);
        // Far-end node: v_m/Z + I_m + v_m/R = 0.
        let vm = -hist.1[0] / (line.conductance() + g_load);
        let (ikm, _) = line.update([vk; 3], [vm; 3], ([hist.0[0]; 3], [hist.1[0]; 3]));
        out.push((vm, ikm[0]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_history_stays_zero() {
        let mut l = BergeronLine::new(300.0, 0.0, 1e-3, 50e-6).unwrap();
        let out = bergeron_update(&mut l, |_| 0.0, 100.0, 200);
        assert!(out.iter().all(|&(v, i)| v == 0.0 && i == 0.0));
    }

    #[test]
    fn rejects_short_lines() {
        assert!(BergeronLine::new(300.0, 0.0, 20e-6, 50e-6).is_err());
    }

    #[test]
    fn buffer_depth_covers_delay() {
        let l = BergeronLine::new(300.0, 0.0, 1.02e-3, 50e-6).unwrap();
        assert_eq!(l.whole, 20);
        assert!((l.frac - 0.4).abs() < 1e-9);
        assert_eq!(l.depth(), 22);
    }

    #[test]
    fn matched_termination_has_no_reflection() {
        // Oracle: a wave E/Zc launched at t=0 reaches the far end at tau and is
        // fully absorbed, so v_m = E from tau on and i_km stays E/Zc.
        let zc = 400.0;
        let h = 50e-6;
        let tau = 20.0 * h;
        let mut l = BergeronLine::new(zc, 0.0, tau, h).unwrap();
        let out = bergeron_update(&mut l, |_| 1.0, zc, 200);
        for (n, &(vm, ikm)) in out.iter().enumerate() {
            let expect_v = if n >= 20 { 1.0 } else { 0.0 };
            assert!((vm - expect_v).abs() < 1e-12, "step {n}: {vm}");
            assert!((ikm - 1.0 / zc).abs() < 1e-12, "step {n}: {ikm}");
        }
    }

    #[test]
    fn open_end_doubles_voltage() {
        // Oracle: open end reflects with +1, so v_m = 2E after tau and the
        // sending-end current flips to -E/Zc when the reflection returns at 2 tau.
        let zc = 400.0;
        let h = 50e-6;
        let mut l = BergeronLine::new(zc, 0.0, 20.0 * h, h).unwrap();
        let out = bergeron_update(&mut l, |_| 1.0, f64::INFINITY, 60);
        assert_eq!(out[19].0, 0.0);
        assert!((out[20].0 - 2.0).abs() < 1e-12);
        assert!((out[39].1 - 1.0 / zc).abs() < 1e-12);
        assert!((out[40].1 + 1.0 / zc).abs() < 1e-12);
    }
}
