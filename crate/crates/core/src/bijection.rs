//! Point maps between the SOC (W-space) and Convex DistFlow (L-space)
//! relaxations, and a sampled check that each map sends feasible points to
//! feasible points.
//!
//! Both maps keep `W_i`, `S_ij`, `S_ji` and generator dispatch unchanged and
//! only exchange the per-branch coordinate:
//!
//! ```text
//! W_ij = Z*T*((Y* − i b^c/2)W_i/|T|² − S_ij)
//! L_ij = |Y|²(W_i/|T|² − W_ij/T* − W_ij*/T + W_j) − (b^c/2)²W_i/|T|² − b^c·Im S_ij
//! ```

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coneprog::{self, ConeProgram, SolveOptions, Status, VerifyReport};
use crate::netmodel::{Network, Topology, I};
use crate::relax::{
    build_cdf_e, build_soc_e, embed_point, extract_point, Objective, RelaxError, RelaxPoint, SharedWeights, Space,
    VariableMap,
};

/// Relative round-trip tolerance on the exchanged coordinate.
pub const ROUND_TRIP_TOL: f64 = 1e-9;

/// L-space point to W-space.
pub fn cdf_to_soc(network: &Network, point: &RelaxPoint) -> Result<RelaxPoint, RelaxError> {
    point.expect_space(Space::L)?;
    point.check_shape(network)?;
    let topo = Topology::of(network)?;
    let params = network.branch_params()?;
    let w_branch = topo
        .ends
        .iter()
        .enumerate()
        .map(|(k, &(f, _))| crate::acpf::vv_product(point.w[f], point.s_from[k], &params[k]))
        .collect();
    Ok(RelaxPoint { space: Space::W, w_branch, l: Vec::new(), ..point.clone() })
}

/// W-space point to L-space.
pub fn soc_to_cdf(network: &Network, point: &RelaxPoint) -> Result<RelaxPoint, RelaxError> {
    point.expect_space(Space::W)?;
    point.check_shape(network)?;
    let topo = Topology::of(network)?;
    let params = network.branch_params()?;
    let l = topo
        .ends
        .iter()
        .enumerate()
        .map(|(k, &(f, t))| {
            let p = &params[k];
            let wij = point.w_branch[k];
            let wi = point.w[f] / p.tap_sq;
            let d = Complex64::from(wi) - wij / p.t.conj() - wij.conj() / p.t + point.w[t];
            p.y_sq() * d.re - p.half_charge * p.half_charge * wi - p.b_charge * point.s_from[k].im
        })
        .collect();
    Ok(RelaxPoint { space: Space::L, w_branch: Vec::new(), l, ..point.clone() })
}

/// Per branch, `Z·S_ij* − [W_i/|T|² − W_j + Z*·S_ji + i(b^c/2)(Z·W_i/|T|² + Z*·W_j)]`.
/// Zero whenever the loss and drop rows hold.
pub fn combined_property_residual(network: &Network, point: &RelaxPoint) -> Result<Vec<Complex64>, RelaxError> {
    point.check_shape(network)?;
    let topo = Topology::of(network)?;
    let params = network.branch_params()?;
    Ok(topo
        .ends
        .iter()
        .enumerate()
        .map(|(k, &(f, t))| {
            let p = &params[k];
            let wi = point.w[f] / p.tap_sq;
            let wj = point.w[t];
            let rhs = Complex64::from(wi - wj)
                + p.z.conj() * point.s_to[k]
                + I * p.half_charge * (p.z * wi + p.z.conj() * wj);
            p.z * point.s_from[k].conj() - rhs
        })
        .collect())
}

/// Direction of a mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    CdfToSoc,
    SocToCdf,
}

/// Test hook: after mapping, add `delta` to the exchanged coordinate of one
/// branch (`Re W_ij` or `L_ij`) before the target check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corruption {
    pub branch: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceOptions {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    pub solve: SolveOptions,
    pub corruption: Option<Corruption>,
}

impl EquivalenceOptions {
    pub fn new(samples: usize, tol: f64, seed: u64) -> Self {
        Self { samples, tol, seed, solve: SolveOptions::default(), corruption: None }
    }
}

/// Aggregate over all samples of one direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionSummary {
    pub direction: Direction,
    /// Samples whose source point passed its own check and was mapped.
    pub accepted: usize,
    /// Solver optima rejected because they failed the source check.
    pub rejected: usize,
    pub solver_failures: usize,
    /// Worst target-check violation over accepted samples.
    pub worst: f64,
    pub worst_label: Option<String>,
    /// Worst target violation per constraint family.
    pub families: BTreeMap<String, f64>,
    /// Worst source-check violation over accepted samples.
    pub source_worst: f64,
    /// Largest ratio of target to source violation.
    pub amplification: f64,
    /// Worst relative round-trip error of the exchanged coordinate.
    pub round_trip: f64,
}

impl DirectionSummary {
    fn new(direction: Direction) -> Self {
        Self {
            direction,
            accepted: 0,
            rejected: 0,
            solver_failures: 0,
            worst: 0.0,
            worst_label: None,
            families: BTreeMap::new(),
            source_worst: 0.0,
            amplification: 0.0,
            round_trip: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleFailure {
    pub sample: usize,
    pub direction: Direction,
    /// Constraint label, or `round_trip[branch k]`.
    pub label: String,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub seed: u64,
    pub samples: usize,
    pub tol: f64,
    pub passed: bool,
    pub cdf_to_soc: DirectionSummary,
    pub soc_to_cdf: DirectionSummary,
    pub failures: Vec<SampleFailure>,
}

/// [`verify_equivalence_with`] with default solver options and no corruption.
pub fn verify_equivalence(network: &Network, samples: usize, tol: f64, seed: u64) -> Result<EquivalenceReport, RelaxError> {
    verify_equivalence_with(network, &EquivalenceOptions::new(samples, tol, seed))
}

/// For each sample, draws weights uniform in `[−1, 1]` over `W_i`, `S_ij`,
/// `S_ji`, solves both relaxations with that linear objective, maps each
/// optimum to the other space and checks it there. Optima that fail their own
/// check at `tol` are rejected rather than mapped. Every mapped point also has
/// to map back to its starting coordinate within [`ROUND_TRIP_TOL`].
///
/// Passes when no sample fails and each direction accepted at least one sample.
pub fn verify_equivalence_with(network: &Network, opts: &EquivalenceOptions) -> Result<EquivalenceReport, RelaxError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let nb = network.branches.len();
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect() };
    let weights: Vec<SharedWeights> = (0..opts.samples)
        .map(|_| {
            let w = draw(network.buses.len());
            let pair = |v: Vec<f64>| v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
            SharedWeights { w, s_from: pair(draw(2 * nb)), s_to: pair(draw(2 * nb)) }
        })
        .collect();

    // Target programs for the checks; the objective is irrelevant there.
    let (soc_target, soc_map) = build_soc_e(network, &Objective::Feasibility)?;
    let (cdf_target, cdf_map) = build_cdf_e(network, &Objective::Feasibility)?;

    let mut fwd = DirectionSummary::new(Direction::CdfToSoc);
    let mut back = DirectionSummary::new(Direction::SocToCdf);
    let mut failures = Vec::new();
    for (s, wt) in weights.iter().enumerate() {
        let objective = Objective::Shared(wt.clone());
        let runs = [
            (Direction::CdfToSoc, build_cdf_e(network, &objective)?, &soc_target, &soc_map, &mut fwd),
            (Direction::SocToCdf, build_soc_e(network, &objective)?, &cdf_target, &cdf_map, &mut back),
        ];
        for (dir, (prog, map), target, target_map, summary) in runs {
            let ctx = Sample { network, opts, index: s, direction: dir };
            ctx.run(&prog, &map, target, target_map, summary, &mut failures)?;
        }
    }
    let passed = failures.is_empty() && (opts.samples == 0 || (fwd.accepted > 0 && back.accepted > 0));
    Ok(EquivalenceReport {
        seed: opts.seed,
        samples: opts.samples,
        tol: opts.tol,
        passed,
        cdf_to_soc: fwd,
        soc_to_cdf: back,
        failures,
    })
}

struct Sample<'a> {
    network: &'a Network,
    opts: &'a EquivalenceOptions,
    index: usize,
    direction: Direction,
}

impl Sample<'_> {
    fn run(
        &self,
        prog: &ConeProgram,
        map: &VariableMap,
        target: &ConeProgram,
        target_map: &VariableMap,
        summary: &mut DirectionSummary,
        failures: &mut Vec<SampleFailure>,
    ) -> Result<(), RelaxError> {
        let solution = match coneprog::solve(prog, &self.opts.solve) {
            Ok(sol) if sol.status == Status::Optimal => sol,
            _ => {
                summary.solver_failures += 1;
                return Ok(());
            }
        };
        let source = prog.check_point(&solution.x, self.opts.tol).expect("solver vector matches its program");
        if !source.passed {
            summary.rejected += 1;
            return Ok(());
        }
        let point = extract_point(map, &solution.x)?;
        let (mut mapped, back) = match self.direction {
            Direction::CdfToSoc => {
                let m = cdf_to_soc(self.network, &point)?;
                let b = soc_to_cdf(self.network, &m)?;
                (m, b)
            }
            Direction::SocToCdf => {
                let m = soc_to_cdf(self.network, &point)?;
                let b = cdf_to_soc(self.network, &m)?;
                (m, b)
            }
        };
        if let Some(c) = self.opts.corruption {
            match self.direction {
                Direction::CdfToSoc => {
                    if let Some(w) = mapped.w_branch.get_mut(c.branch) {
                        w.re += c.delta;
                    }
                }
                Direction::SocToCdf => {
                    if let Some(l) = mapped.l.get_mut(c.branch) {
                        *l += c.delta;
                    }
                }
            }
        }
        let x = embed_point(target_map, &mapped)?;
        let report = target.check_point(&x, self.opts.tol).expect("embedded vector matches its program");
        self.record(&source, &report, summary, failures);

        let errors: Vec<f64> = match self.direction {
            Direction::CdfToSoc => point.l.iter().zip(&back.l).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).collect(),
            Direction::SocToCdf => {
                point.w_branch.iter().zip(&back.w_branch).map(|(a, b)| (a - b).norm() / a.norm().max(1.0)).collect()
            }
        };
        for (k, &e) in errors.iter().enumerate() {
            summary.round_trip = summary.round_trip.max(e);
            if !(e <= ROUND_TRIP_TOL) {
                failures.push(SampleFailure {
                    sample: self.index,
                    direction: self.direction,
                    label: format!("round_trip[branch {k}]"),
                    violation: e,
                });
            }
        }
        Ok(())
    }

    fn record(
        &self,
        source: &VerifyReport,
        target: &VerifyReport,
        summary: &mut DirectionSummary,
        failures: &mut Vec<SampleFailure>,
    ) {
        summary.accepted += 1;
        summary.source_worst = summary.source_worst.max(source.worst);
        summary.amplification = summary.amplification.max(target.worst / source.worst.max(f64::EPSILON));
        if target.worst > summary.worst || summary.worst_label.is_none() {
            summary.worst = summary.worst.max(target.worst);
            summary.worst_label = target.worst_label.clone();
        }
        for (fam, &v) in &target.families {
            let e = summary.families.entry(fam.clone()).or_insert(0.0);
            *e = e.max(v);
        }
        for r in target.failures() {
            failures.push(SampleFailure {
                sample: self.index,
                direction: self.direction,
                label: r.label.clone(),
                violation: r.violation,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acpf::{newton_solve, ACState, Controls, NewtonOptions};
    use crate::netmodel::test_support::two_bus;
    use crate::relax::{build_cdf_simple, build_soc_simple, lift_ac_solution};
    use crate::relax::test_support::three_bus;

    fn flat_l_point(net: &Network) -> RelaxPoint {
        lift_ac_solution(net, &ACState::flat(net).unwrap(), Space::L).unwrap()
    }

    #[test]
    fn flat_point_maps_to_unit_product() {
        let net = two_bus();
        let w = cdf_to_soc(&net, &flat_l_point(&net)).unwrap();
        assert!((w.w_branch[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let l = soc_to_cdf(&net, &w).unwrap();
        assert!(l.l[0].abs() < 1e-12);
    }

    #[test]
    fn degenerate_maps_reduce_to_plain_formulas() {
        let net = three_bus().degenerate();
        let state = newton_solve(&net, &Controls::from_network(&net), NewtonOptions::default()).unwrap().state;
        let lp = lift_ac_solution(&net, &state, Space::L).unwrap();
        let wp = cdf_to_soc(&net, &lp).unwrap();
        let topo = Topology::of(&net).unwrap();
        for (k, &(f, t)) in topo.ends.iter().enumerate() {
            let z = net.branches[k].impedance();
            let y = net.branches[k].admittance().unwrap();
            let plain_w = lp.w[f] - z.conj() * lp.s_from[k];
            assert!((wp.w_branch[k] - plain_w).norm() < 1e-13);
            let wij = wp.w_branch[k];
            let plain_l = y.norm_sqr() * (wp.w[f] - 2.0 * wij.re + wp.w[t]);
            let back = soc_to_cdf(&net, &wp).unwrap();
            assert!((back.l[k] - plain_l).abs() < 1e-12);
        }
    }

    #[test]
    fn maps_are_inverse_on_lifted_points() {
        let net = three_bus();
        let state = newton_solve(&net, &Controls::from_network(&net), NewtonOptions::default()).unwrap().state;
        let lp = lift_ac_solution(&net, &state, Space::L).unwrap();
        let wp = lift_ac_solution(&net, &state, Space::W).unwrap();
        let mapped = cdf_to_soc(&net, &lp).unwrap();
        for (a, b) in mapped.w_branch.iter().zip(&wp.w_branch) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = soc_to_cdf(&net, &mapped).unwrap();
        for (a, b) in back.l.iter().zip(&lp.l) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn combined_residual_vanishes_on_flat_point() {
        let net = two_bus();
        let r = combined_property_residual(&net, &flat_l_point(&net)).unwrap();
        assert_eq!(r, vec![Complex64::new(0.0, 0.0)]);
    }

    #[test]
    fn combined_residual_is_linear_in_drop_violation() {
        let net = three_bus();
        let state = newton_solve(&net, &Controls::from_network(&net), NewtonOptions::default()).unwrap().state;
        let base = lift_ac_solution(&net, &state, Space::L).unwrap();
        let r0 = combined_property_residual(&net, &base).unwrap()[0];
        assert!(r0.norm() < 1e-12);
        // Shifting W_j by δ violates the drop row by δ and moves the combination by δ.
        let mut norms = Vec::new();
        for delta in [1e-6, 2e-6, 4e-6] {
            let mut p = base.clone();
            p.w[1] += delta;
            norms.push(combined_property_residual(&net, &p).unwrap()[0].norm() / delta);
        }
        assert!((norms[0] - norms[2]).abs() < 1e-6 * norms[0], "{norms:?}");
    }

    #[test]
    fn wrong_space_is_rejected() {
        let net = two_bus();
        let p = flat_l_point(&net);
        assert!(matches!(soc_to_cdf(&net, &p), Err(RelaxError::WrongSpace { .. })));
    }

    #[test]
    fn unloaded_pair_passes_sampled_check() {
        let r = verify_equivalence(&two_bus(), 4, 1e-7, 7).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.cdf_to_soc.worst < 1e-9 && r.soc_to_cdf.worst < 1e-9);
    }

    #[test]
    fn sampled_check_on_three_bus() {
        let r = verify_equivalence(&three_bus(), 6, 1e-7, 11).unwrap();
        assert!(r.passed, "{r:#?}");
        assert_eq!(r.cdf_to_soc.accepted + r.cdf_to_soc.rejected + r.cdf_to_soc.solver_failures, 6);
    }

    #[test]
    fn corruption_is_reported_by_name() {
        let mut opts = EquivalenceOptions::new(1, 1e-7, 3);
        opts.corruption = Some(Corruption { branch: 0, delta: 1e-3 });
        let r = verify_equivalence_with(&two_bus(), &opts).unwrap();
        assert!(!r.passed);
        assert!(r.failures.iter().any(|f| f.label == "flow_p_fr[branch 0]"), "{:?}", r.failures);
        assert!(r.failures.iter().any(|f| f.label.starts_with("loss_") || f.label == "drop[branch 0]"));
    }

    #[test]
    fn simple_builders_accept_degenerate_maps() {
        let net = three_bus().degenerate();
        let state = newton_solve(&net, &Controls::from_network(&net), NewtonOptions::default()).unwrap().state;
        let lp = lift_ac_solution(&net, &state, Space::L).unwrap();
        let wp = cdf_to_soc(&net, &lp).unwrap();
        let (soc, soc_map) = build_soc_simple(&net, &Objective::Feasibility).unwrap();
        let (cdf, cdf_map) = build_cdf_simple(&net, &Objective::Feasibility).unwrap();
        assert!(soc.check_point(&embed_point(&soc_map, &wp).unwrap(), 1e-8).unwrap().passed);
        assert!(cdf.check_point(&embed_point(&cdf_map, &lp).unwrap(), 1e-8).unwrap().passed);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]

            #[test]
            fn maps_preserve_feasibility_for_any_seed(seed in any::<u64>()) {
                let report = verify_equivalence(&three_bus(), 3, 1e-7, seed).unwrap();
                prop_assert!(report.passed, "{:?}", report.failures);
                prop_assert!(report.cdf_to_soc.round_trip <= ROUND_TRIP_TOL);
                prop_assert!(report.soc_to_cdf.round_trip <= ROUND_TRIP_TOL);
            }
        }
    }
}
