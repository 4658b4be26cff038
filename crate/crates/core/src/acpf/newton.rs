//! Newton–Raphson power flow in polar coordinates with a dense Jacobian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use super::{compute_flows, max_kcl_residual, ACState};
use crate::netmodel::{ModelError, Network, Topology, I};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Largest admissible complex power mismatch at any bus (p.u.).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50 }
    }
}

/// Per-generator setpoints. Buses with a generator hold `|V|` at the generator's
/// voltage setpoint and inject the sum of the active setpoints; the reference
/// bus is the slack.
#[derive(Debug, Clone, PartialEq)]
pub struct Controls {
    pub p_setpoint: Vec<f64>,
    pub v_setpoint: Vec<f64>,
}

impl Controls {
    pub fn from_network(network: &Network) -> Self {
        Self {
            p_setpoint: network.generators.iter().map(|g| g.p_setpoint).collect(),
            v_setpoint: network.generators.iter().map(|g| g.v_setpoint).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub state: ACState,
    pub iterations: usize,
    /// Mismatch max-norm at the start of every iteration, ending with the final one.
    pub trace: Vec<f64>,
    pub bus_kinds: Vec<BusKind>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NewtonError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("controls have {found} entries, network has {expected} generators")]
    Controls { found: usize, expected: usize },
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize, trace: Vec<f64> },
    #[error("no convergence after {iterations} iterations (last mismatch {last:.3e})", last = trace.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { iterations: usize, trace: Vec<f64> },
}

/// Dense bus admittance matrix including charging, transformers and shunts.
pub fn admittance_matrix(network: &Network, topo: &Topology) -> Result<DMatrix<Complex64>, ModelError> {
    let n = network.buses.len();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (br, &(f, t)) in network.branches.iter().zip(&topo.ends) {
        let p = br.params()?;
        let ys = p.y + I * p.half_charge;
        y[(f, f)] += ys / p.tap_sq;
        y[(f, t)] -= p.y / p.t;
        y[(t, f)] -= p.y / p.t.conj();
        y[(t, t)] += ys;
    }
    for (k, bus) in network.buses.iter().enumerate() {
        y[(k, k)] += bus.shunt();
    }
    Ok(y)
}

fn injections(ybus: &DMatrix<Complex64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    let i = ybus * v;
    v.zip_map(&i, |vk, ik| vk * ik.conj())
}

pub fn newton_solve(network: &Network, controls: &Controls, opts: NewtonOptions) -> Result<NewtonSolution, NewtonError> {
    network.ensure_valid()?;
    let ng = network.generators.len();
    if controls.p_setpoint.len() != ng || controls.v_setpoint.len() != ng {
        return Err(NewtonError::Controls { found: controls.p_setpoint.len().min(controls.v_setpoint.len()), expected: ng });
    }
    let topo = Topology::of(network)?;
    let n = network.buses.len();
    let ybus = admittance_matrix(network, &topo)?;

    let mut kinds = vec![BusKind::Pq; n];
    let mut vm = vec![1.0; n];
    let mut s_spec: Vec<Complex64> = network.buses.iter().map(|b| -b.demand()).collect();
    for (k, gens) in topo.bus_gens.iter().enumerate() {
        if let Some(&g0) = gens.first() {
            kinds[k] = BusKind::Pv;
            vm[k] = controls.v_setpoint[g0];
            for &g in gens {
                s_spec[k].re += controls.p_setpoint[g];
            }
        }
    }
    kinds[topo.reference] = BusKind::Slack;

    let pvpq: Vec<usize> = (0..n).filter(|&k| kinds[k] != BusKind::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|&k| kinds[k] == BusKind::Pq).collect();
    let (npvpq, npq) = (pvpq.len(), pq.len());
    let dim = npvpq + npq;

    let mut va = vec![0.0; n];
    let polar = |vm: &[f64], va: &[f64]| DVector::from_iterator(n, (0..n).map(|k| Complex64::from_polar(vm[k], va[k])));
    let mut v = polar(&vm, &va);

    let mismatch = |v: &DVector<Complex64>| -> DVector<f64> {
        let s = injections(&ybus, v);
        let mut f = DVector::zeros(dim);
        for (r, &k) in pvpq.iter().enumerate() {
            f[r] = s[k].re - s_spec[k].re;
        }
        for (r, &k) in pq.iter().enumerate() {
            f[npvpq + r] = s[k].im - s_spec[k].im;
        }
        f
    };

    // Per-bus complex mismatch, the quantity the KCL residual measures.
    let pv_offset: Vec<Option<usize>> = pvpq.iter().map(|k| pq.iter().position(|c| c == k).map(|c| npvpq + c)).collect();
    let worst = |f: &DVector<f64>| -> f64 {
        pv_offset
            .iter()
            .enumerate()
            .map(|(r, q)| q.map_or(f[r].abs(), |q| f[r].hypot(f[q])))
            .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) })
    };

    let mut f = mismatch(&v);
    let mut trace = vec![f.amax()];
    let mut iterations = 0;
    while !(worst(&f) < opts.tol) {
        if iterations >= opts.max_iter || !f.amax().is_finite() || f.amax() > 1e10 {
            return Err(NewtonError::NonConvergence { iterations, trace });
        }
        iterations += 1;

        // dS/dVa = i diag(V) conj(diag(I) − Y diag(V)),
        // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|).
        let ibus = &ybus * &v;
        let mut jac = DMatrix::zeros(dim, dim);
        let col_of_va = |k: usize| pvpq.iter().position(|&c| c == k);
        let col_of_vm = |k: usize| pq.iter().position(|&c| c == k).map(|c| npvpq + c);
        let rows: Vec<(usize, usize, bool)> = pvpq
            .iter()
            .enumerate()
            .map(|(r, &k)| (r, k, true))
            .chain(pq.iter().enumerate().map(|(r, &k)| (npvpq + r, k, false)))
            .collect();
        for &(row, i, active) in &rows {
            for j in 0..n {
                let yij = ybus[(i, j)];
                let diag = i == j;
                if yij == Complex64::new(0.0, 0.0) && !diag {
                    continue;
                }
                let d_va = {
                    let mut t = -(yij * v[j]).conj();
                    if diag {
                        t += ibus[i].conj();
                    }
                    I * v[i] * t
                };
                let d_vm = {
                    let e = v[j] / v[j].norm();
                    let mut t = v[i] * (yij * e).conj();
                    if diag {
                        t += ibus[i].conj() * e;
                    }
                    t
                };
                let pick = |z: Complex64| if active { z.re } else { z.im };
                if let Some(c) = col_of_va(j) {
                    jac[(row, c)] = pick(d_va);
                }
                if let Some(c) = col_of_vm(j) {
                    jac[(row, c)] = pick(d_vm);
                }
            }
        }
        let Some(dx) = jac.lu().solve(&(-&f)) else {
            return Err(NewtonError::SingularJacobian { iteration: iterations, trace });
        };
        for (c, &k) in pvpq.iter().enumerate() {
            va[k] += dx[c];
        }
        for (c, &k) in pq.iter().enumerate() {
            vm[k] += dx[npvpq + c];
        }
        v = polar(&vm, &va);
        f = mismatch(&v);
        trace.push(f.amax());
    }

    let s = injections(&ybus, &v);
    let mut generation = vec![Complex64::new(0.0, 0.0); ng];
    for (k, gens) in topo.bus_gens.iter().enumerate() {
        if gens.is_empty() {
            continue;
        }
        let total = s[k] + network.buses[k].demand();
        let q_share = total.im / gens.len() as f64;
        let mut p_rest = total.re;
        for &g in &gens[1..] {
            p_rest -= controls.p_setpoint[g];
        }
        for (pos, &g) in gens.iter().enumerate() {
            let p = if kinds[k] == BusKind::Slack && pos == 0 { p_rest } else { controls.p_setpoint[g] };
            generation[g] = Complex64::new(p, q_share);
        }
    }

    let voltages: Vec<Complex64> = v.iter().copied().collect();
    let flows = compute_flows(network, &voltages)?;
    let state = ACState { voltages, flows, generation };
    debug_assert!(max_kcl_residual(network, &state).map(|r| r.is_finite()).unwrap_or(false));
    Ok(NewtonSolution { state, iterations, trace, bus_kinds: kinds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acpf::max_kcl_residual;
    use crate::netmodel::test_support::*;
    use crate::netmodel::Branch;

    fn loaded_two_bus(pd: f64, qd: f64) -> Network {
        let mut net = two_bus();
        net.buses[1].p_demand = pd;
        net.buses[1].q_demand = qd;
        net.buses[1].v_min = 0.5;
        net.generators[0].p_max = 1000.0;
        net.generators[0].q_min = -1000.0;
        net.generators[0].q_max = 1000.0;
        net
    }

    /// Scalar oracle for the two-bus case: with V_1 = 1, the receiving voltage
    /// satisfies v·e^{iθ} = v² + Z*S_d, so |v² + Z*S_d| = v is solved by
    /// bisection on the high-voltage branch.
    fn bisection_oracle(z: Complex64, sd: Complex64) -> (f64, f64) {
        let g = |v: f64| (v * v + z.conj() * sd).norm() - v;
        let (mut lo, mut hi) = (0.5, 1.0);
        assert!(g(lo) < 0.0 && g(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let v = 0.5 * (lo + hi);
        (v, (v * v + z.conj() * sd).arg())
    }

    #[test]
    fn zero_load_converges_immediately() {
        let net = two_bus();
        let sol = newton_solve(&net, &Controls::from_network(&net), NewtonOptions::default()).unwrap();
        assert!(sol.iterations <= 1);
        for v in &sol.state.voltages {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn two_bus_matches_bisection() {
        let net = loaded_two_bus(0.5, 0.1);
        let sol = newton_solve(&net, &Controls::from_network(&net), NewtonOptions::default()).unwrap();
        let (v, theta) = bisection_oracle(Complex64::new(0.01, 0.1), Complex64::new(0.5, 0.1));
        let v2 = sol.state.voltages[1];
        assert!((v2.norm() - v).abs() < 1e-8, "{} vs {v}", v2.norm());
        assert!((v2.arg() - theta).abs() < 1e-8, "{} vs {theta}", v2.arg());
        assert!(max_kcl_residual(&net, &sol.state).unwrap() < 1e-8);
    }

    #[test]
    fn excessive_load_does_not_converge() {
        let net = loaded_two_bus(100.0, 0.0);
        let err = newton_solve(&net, &Controls::from_network(&net), NewtonOptions::default()).unwrap_err();
        match err {
            NewtonError::NonConvergence { trace, .. } | NewtonError::SingularJacobian { trace, .. } => assert!(!trace.is_empty()),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn extended_three_bus_balances() {
        let mut net = two_bus();
        net.buses.push(bus(3, false));
        net.buses[2].p_demand = 0.6;
        net.buses[2].q_demand = 0.2;
        net.buses[2].shunt_b = 0.05;
        net.buses[1].shunt_g = 0.01;
        net.generators.push(generator(2));
        net.generators[1].p_setpoint = 0.3;
        net.generators[1].v_setpoint = 1.02;
        let mut tr = Branch::line(2, 3, 0.005, 0.08);
        tr.tap = 0.97;
        tr.shift = 0.03;
        net.branches.push(tr);
        let mut line = Branch::line(1, 3, 0.02, 0.15);
        line.b_charge = 0.1;
        net.branches.push(line);
        let sol = newton_solve(&net, &Controls::from_network(&net), NewtonOptions::default()).unwrap();
        assert!(max_kcl_residual(&net, &sol.state).unwrap() < 1e-8);
        assert!((sol.state.voltages[1].norm() - 1.02).abs() < 1e-14);
        assert_eq!(sol.state.voltages[0].arg(), 0.0);
        assert_eq!(sol.bus_kinds, vec![BusKind::Slack, BusKind::Pv, BusKind::Pq]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn converged_states_balance_at_their_tolerance(pd in 0.0..3.0f64, qd in -1.0..1.5f64, tol in 1e-10..1e-6f64) {
                let net = loaded_two_bus(pd, qd);
                let opts = NewtonOptions { tol, ..NewtonOptions::default() };
                if let Ok(sol) = newton_solve(&net, &Controls::from_network(&net), opts) {
                    prop_assert!(max_kcl_residual(&net, &sol.state).unwrap() <= tol);
                }
            }
        }
    }
}
