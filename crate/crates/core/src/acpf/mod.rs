//! AC power flow: branch evaluators, identities, KCL residuals, operational
//! checks and a Newton solver for reference operating points.

pub mod flows;
pub mod identities;
pub mod newton;
pub mod simple;
pub mod violations;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use flows::{
    abs_sq_current_rhs, branch_current, branch_flow_from, branch_flow_to, loss_identity_residual,
    voltage_drop_identity_residual, vv_product,
};
pub use newton::{admittance_matrix, newton_solve, BusKind, Controls, NewtonError, NewtonOptions, NewtonSolution};
pub use violations::{angle_difference, operational_violations, pad_cross_check, Bound, OperationalViolation, PadCheck};

use crate::netmodel::{ModelError, Network, Topology};

/// Flows at both ends of one branch. Parallel branches each get their own entry,
/// so the branch index is the key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchFlow {
    /// `S_ij` on the arc `from -> to`.
    pub from: Complex64,
    /// `S_ji` on the reverse arc.
    pub to: Complex64,
}

/// Bus voltages, per-branch flows and per-generator dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ACState {
    pub voltages: Vec<Complex64>,
    pub flows: Vec<BranchFlow>,
    pub generation: Vec<Complex64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("state has {found} {what}, network has {expected}")]
    Shape { what: &'static str, found: usize, expected: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ACState {
    /// Flat profile `1∠0` with flows recomputed and zero generation.
    pub fn flat(network: &Network) -> Result<Self, ModelError> {
        let v = vec![Complex64::new(1.0, 0.0); network.buses.len()];
        let g = vec![Complex64::new(0.0, 0.0); network.generators.len()];
        Self::from_voltages(network, v, g)
    }

    /// Builds a state whose flows are evaluated from the given voltages.
    pub fn from_voltages(network: &Network, voltages: Vec<Complex64>, generation: Vec<Complex64>) -> Result<Self, ModelError> {
        let flows = compute_flows(network, &voltages)?;
        Ok(Self { voltages, flows, generation })
    }

    fn check_shape(&self, network: &Network) -> Result<(), StateError> {
        let checks = [
            ("voltages", self.voltages.len(), network.buses.len()),
            ("branch flows", self.flows.len(), network.branches.len()),
            ("generator outputs", self.generation.len(), network.generators.len()),
        ];
        for (what, found, expected) in checks {
            if found != expected {
                return Err(StateError::Shape { what, found, expected });
            }
        }
        Ok(())
    }
}

pub fn compute_flows(network: &Network, voltages: &[Complex64]) -> Result<Vec<BranchFlow>, ModelError> {
    let topo = Topology::of(network)?;
    network
        .branches
        .iter()
        .zip(&topo.ends)
        .map(|(br, &(f, t))| {
            let p = br.params()?;
            let (vi, vj) = (voltages[f], voltages[t]);
            Ok(BranchFlow { from: branch_flow_from(vi, vj, &p), to: branch_flow_to(vi, vj, &p) })
        })
        .collect()
}

/// `S^g − S^d − (Y^s)*|V|² − Σ S` per bus.
pub fn kcl_residuals(network: &Network, state: &ACState) -> Result<Vec<Complex64>, StateError> {
    state.check_shape(network)?;
    let topo = Topology::of(network)?;
    let mut out: Vec<Complex64> = network
        .buses
        .iter()
        .zip(&state.voltages)
        .map(|(bus, v)| -bus.demand() - bus.shunt().conj() * v.norm_sqr())
        .collect();
    for (g, &b) in topo.gen_bus.iter().enumerate() {
        out[b] += state.generation[g];
    }
    for (flow, &(f, t)) in state.flows.iter().zip(&topo.ends) {
        out[f] -= flow.from;
        out[t] -= flow.to;
    }
    Ok(out)
}

/// Largest `|residual|` of [`kcl_residuals`].
pub fn max_kcl_residual(network: &Network, state: &ACState) -> Result<f64, StateError> {
    Ok(kcl_residuals(network, state)?.iter().map(|r| r.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::test_support::*;
    use crate::netmodel::Branch;

    #[test]
    fn islanded_bus_balances_its_shunt() {
        let mut b = bus(1, true);
        b.shunt_g = 0.1;
        b.shunt_b = -0.2;
        b.p_demand = 0.3;
        let net = Network { name: "one".into(), base_mva: 100.0, buses: vec![b], branches: vec![], generators: vec![generator(1)] };
        let v = Complex64::from_polar(1.05, 0.0);
        // S^g = S^d + (Y^s)*|V|²
        let sg = Complex64::new(0.3, 0.0) + Complex64::new(0.1, 0.2) * v.norm_sqr();
        let state = ACState::from_voltages(&net, vec![v], vec![sg]).unwrap();
        assert!(max_kcl_residual(&net, &state).unwrap() < 1e-15);
    }

    #[test]
    fn flat_unloaded_network_balances() {
        let net = two_bus();
        let state = ACState::flat(&net).unwrap();
        assert_eq!(max_kcl_residual(&net, &state).unwrap(), 0.0);
    }

    #[test]
    fn parallel_branches_keep_separate_flows() {
        let mut net = two_bus();
        net.branches.push(Branch::line(1, 2, 0.02, 0.2));
        let v = vec![Complex64::new(1.0, 0.0), Complex64::from_polar(0.98, -0.05)];
        let state = ACState::from_voltages(&net, v, vec![Complex64::new(0.0, 0.0)]).unwrap();
        assert_eq!(state.flows.len(), 2);
        assert!((state.flows[0].from - state.flows[1].from).norm() > 1e-3);
    }

    #[test]
    fn missing_flows_are_structural_errors() {
        let net = two_bus();
        let mut state = ACState::flat(&net).unwrap();
        state.flows.clear();
        assert!(matches!(kcl_residuals(&net, &state), Err(StateError::Shape { what: "branch flows", .. })));
    }
}
