//! Newton-Raphson power flow in polar coordinates on a dense admittance matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, SimError};

type C = Complex64;

/// Injection specification at one node; nodes without a spec are PQ with
/// zero injection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusSpec {
    Slack { v: f64 },
    Pv { p: f64, v: f64 },
    Pq { p: f64, q: f64 },
}

/// Solve for node voltages given specs `(node, spec)`. Exactly one slack is
/// required. Returns the complex voltages.
pub fn power_flow(
    y: &DMatrix<C>,
    specs: &[(usize, BusSpec)],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<C>> {
    let n = y.nrows();
    let mut kind = vec![BusSpec::Pq { p: 0.0, q: 0.0 }; n];
    let mut slack = None;
    for &(k, s) in specs {
        if k >= n {
            return Err(SimError::config(format!(
                "power flow node {k} out of range"
            )));
        }
        if let BusSpec::Pq { p, q } = s {
            // Several PQ specs on one node add up.
            if let BusSpec::Pq { p: p0, q: q0 } = kind[k] {
                kind[k] = BusSpec::Pq {
                    p: p0 + p,
                    q: q0 + q,
                };
                continue;
            }
        }
        if matches!(s, BusSpec::Slack { .. }) {
            if slack.is_some() {
                return Err(SimError::config("power flow needs exactly one slack node"));
            }
            slack = Some(k);
        }
        kind[k] = s;
    }
    if slack.is_none() {
        return Err(SimError::config("power flow needs exactly one slack node"));
    }
    let mut vm: Vec<f64> = kind
        .iter()
        .map(|s| match s {
            BusSpec::Slack { v } | BusSpec::Pv { v, .. } => *v,
            BusSpec::Pq { .. } => 1.0,
        })
        .collect();
    let mut va = vec![0.0; n];
    let pvpq: Vec<usize> = (0..n)
        .filter(|&k| !matches!(kind[k], BusSpec::Slack { .. }))
        .collect();
    let pq: Vec<usize> = (0..n)
        .filter(|&k| matches!(kind[k], BusSpec::Pq { .. }))
        .collect();
    let s_spec: Vec<C> = kind
        .iter()
        .map(|s| match s {
            BusSpec::Pv { p, .. } => C::new(*p, 0.0),
            BusSpec::Pq { p, q } => C::new(*p, *q),
            BusSpec::Slack { .. } => C::new(0.0, 0.0),
        })
        .collect();
    let m = pvpq.len() + pq.len();
    for _ in 0..max_iter {
        let v = DVector::from_iterator(n, (0..n).map(|k| C::from_polar(vm[k], va[k])));
        let ibus = y * &v;
        let s: Vec<C> = (0..n).map(|k| v[k] * ibus[k].conj()).collect();
        let mut f = DVector::<f64>::zeros(m);
        for (r, &k) in pvpq.iter().enumerate() {
            f[r] = s[k].re - s_spec[k].re;
        }
        for (r, &k) in pq.iter().enumerate() {
            f[pvpq.len() + r] = s[k].im - s_spec[k].im;
        }
        if f.amax() < tol {
            return Ok(v.iter().copied().collect());
        }
        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
        // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        let vn: Vec<C> = (0..n).map(|k| v[k] / vm[k]).collect();
        let ds_dva = |i: usize, j: usize| -> C {
            let mut t = -y[(i, j)] * v[j];
            if i == j {
                t += ibus[i];
            }
            C::new(0.0, 1.0) * v[i] * t.conj()
        };
        let ds_dvm = |i: usize, j: usize| -> C {
            let mut t = v[i] * (y[(i, j)] * vn[j]).conj();
            if i == j {
                t += ibus[i].conj() * vn[i];
            }
            t
        };
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for (r, &i) in pvpq.iter().enumerate() {
            for (c, &j) in pvpq.iter().enumerate() {
                jac[(r, c)] = ds_dva(i, j).re;
            }
            for (c, &j) in pq.iter().enumerate() {
                jac[(r, pvpq.len() + c)] = ds_dvm(i, j).re;
            }
        }
        for (r, &i) in pq.iter().enumerate() {
            for (c, &j) in pvpq.iter().enumerate() {
                jac[(pvpq.len() + r, c)] = ds_dva(i, j).im;
            }
            for (c, &j) in pq.iter().enumerate() {
                jac[(pvpq.len() + r, pvpq.len() + c)] = ds_dvm(i, j).im;
            }
        }
        let dx = jac
            .lu()
            .solve(&(-f))
            .ok_or_else(|| SimError::Singular("power flow Jacobian".into()))?;
        for (r, &k) in pvpq.iter().enumerate() {
            va[k] += dx[r];
        }
        for (r, &k) in pq.iter().enumerate() {
            vm[k] += dx[pvpq.len() + r];
        }
    }
    Err(SimError::config(format!(
        "power flow did not converge in {max_iter} iterations"
    )))
}

/// Complex power injected at each node for voltages `v`.
pub fn injections(y: &DMatrix<C>, v: &[C]) -> Vec<C> {
    let vv = DVector::from_column_slice(v);
    let i = y * &vv;
    v.iter().zip(i.iter()).map(|(v, i)| v * i.conj()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_bus_against_closed_form() {
        // Oracle: lossless line x, load P at receiving end with V1 = 1:
        // P = V1 V2 sin(d)/x and Q balance from the circle equation.
        let x = 0.2;
        let ys = C::new(0.0, -1.0 / x);
        let y = DMatrix::from_row_slice(2, 2, &[ys, -ys, -ys, ys]);
        let v = power_flow(
            &y,
            &[
                (0, BusSpec::Slack { v: 1.0 }),
                (1, BusSpec::Pv { p: -1.0, v: 1.0 }),
            ],
            1e-12,
            30,
        )
        .unwrap();
        let d = v[1].arg();
        assert!((v[1].norm() - 1.0).abs() < 1e-12);
        assert!(((-d).sin() / x - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pq_node_balance() {
        let z = C::new(0.02, 0.1);
        let ys = z.inv();
        let y = DMatrix::from_row_slice(2, 2, &[ys, -ys, -ys, ys]);
        let v = power_flow(
            &y,
            &[
                (0, BusSpec::Slack { v: 1.02 }),
                (1, BusSpec::Pq { p: -0.8, q: -0.3 }),
            ],
            1e-12,
            30,
        )
        .unwrap();
        let s = injections(&y, &v);
        assert!((s[1] - C::new(-0.8, -0.3)).norm() < 1e-10);
        // Slack supplies load plus losses.
        let i = (v[0] - v[1]) / z;
        let loss = i.norm_sqr() * z.re;
        assert!((s[0].re - (0.8 + loss)).abs() < 1e-10);
    }

    #[test]
    fn needs_one_slack() {
        let y = DMatrix::from_element(1, 1, C::new(1.0, 0.0));
        assert!(power_flow(&y, &[], 1e-9, 5).is_err());
    }
}
