//! Operational limit checks on an AC state.

use num_complex::Complex64;
use serde::Serialize;

use super::{ACState, StateError};
use crate::netmodel::{Entity, Network, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    ReferenceAngle,
    VoltageMin,
    VoltageMax,
    ActiveMin,
    ActiveMax,
    ReactiveMin,
    ReactiveMax,
    ThermalFrom,
    ThermalTo,
    AngleDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperationalViolation {
    pub entity: Entity,
    pub bound: Bound,
    pub value: f64,
    pub limit: f64,
    /// Distance past the limit; always positive.
    pub slack: f64,
}

/// All bounds broken by more than `tol`.
pub fn operational_violations(network: &Network, state: &ACState, tol: f64) -> Result<Vec<OperationalViolation>, StateError> {
    state.check_shape(network)?;
    let topo = Topology::of(network)?;
    let mut out = Vec::new();
    let mut check = |entity: &Entity, bound: Bound, value: f64, limit: f64, excess: f64| {
        if excess > tol {
            out.push(OperationalViolation { entity: entity.clone(), bound, value, limit, slack: excess });
        }
    };

    let reference = &network.buses[topo.reference];
    let angle = state.voltages[topo.reference].arg();
    check(&Entity::Bus(reference.id), Bound::ReferenceAngle, angle, 0.0, angle.abs());

    for (bus, v) in network.buses.iter().zip(&state.voltages) {
        let e = Entity::Bus(bus.id);
        let m = v.norm();
        check(&e, Bound::VoltageMin, m, bus.v_min, bus.v_min - m);
        check(&e, Bound::VoltageMax, m, bus.v_max, m - bus.v_max);
    }

    for (k, (gen, s)) in network.generators.iter().zip(&state.generation).enumerate() {
        let e = Entity::Generator(k);
        check(&e, Bound::ActiveMin, s.re, gen.p_min, gen.p_min - s.re);
        check(&e, Bound::ActiveMax, s.re, gen.p_max, s.re - gen.p_max);
        check(&e, Bound::ReactiveMin, s.im, gen.q_min, gen.q_min - s.im);
        check(&e, Bound::ReactiveMax, s.im, gen.q_max, s.im - gen.q_max);
    }

    for (k, ((br, flow), &(f, t))) in network.branches.iter().zip(&state.flows).zip(&topo.ends).enumerate() {
        let e = Entity::Branch(k);
        if let Some(limit) = br.s_rating {
            for (bound, s) in [(Bound::ThermalFrom, flow.from), (Bound::ThermalTo, flow.to)] {
                let mag = s.re.hypot(s.im);
                check(&e, bound, mag, limit, mag - limit);
            }
        }
        let diff = angle_difference(state.voltages[f], state.voltages[t]);
        check(&e, Bound::AngleDifference, diff, br.angle_limit, diff.abs() - br.angle_limit);
    }
    Ok(out)
}

/// `∠(V_i V_j*)` by the four-quadrant arctangent.
pub fn angle_difference(vi: Complex64, vj: Complex64) -> f64 {
    let w = vi * vj.conj();
    w.im.atan2(w.re)
}

/// Largest value of the two linear angle-difference rows
/// `±Im W − tan(θ^Δ)·Re W ≤ 0` at `W = V_iV_j*`. A limit of π/2 degenerates to
/// `−Re W ≤ 0`.
pub fn pad_linear_residual(w: Complex64, limit: f64) -> f64 {
    if limit >= std::f64::consts::FRAC_PI_2 {
        return -w.re;
    }
    let tan = limit.tan();
    (w.im - tan * w.re).max(-w.im - tan * w.re)
}

/// Outcome of both angle-difference tests on one branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PadCheck {
    pub branch: usize,
    pub angle: f64,
    pub limit: f64,
    pub angle_feasible: bool,
    pub linear_feasible: bool,
}

/// Evaluates the angle-difference limit both as an angle bound and in the linear
/// form on `V_iV_j*`. The two agree except within `tol` of the boundary.
pub fn pad_cross_check(network: &Network, state: &ACState, tol: f64) -> Result<Vec<PadCheck>, StateError> {
    state.check_shape(network)?;
    let topo = Topology::of(network)?;
    Ok(network
        .branches
        .iter()
        .zip(&topo.ends)
        .enumerate()
        .map(|(k, (br, &(f, t)))| {
            let (vi, vj) = (state.voltages[f], state.voltages[t]);
            let angle = angle_difference(vi, vj);
            let w = vi * vj.conj();
            PadCheck {
                branch: k,
                angle,
                limit: br.angle_limit,
                angle_feasible: angle.abs() <= br.angle_limit + tol,
                linear_feasible: pad_linear_residual(w, br.angle_limit) <= tol * w.norm().max(1.0),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::test_support::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_state_has_no_violations() {
        let net = two_bus();
        let state = ACState::flat(&net).unwrap();
        assert!(operational_violations(&net, &state, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn overvoltage_is_reported_with_slack() {
        let net = two_bus();
        let v = vec![Complex64::new(1.0, 0.0), Complex64::new(1.2, 0.0)];
        let state = ACState::from_voltages(&net, v, vec![Complex64::new(0.0, 0.0)]).unwrap();
        let found: Vec<_> = operational_violations(&net, &state, 1e-9)
            .unwrap()
            .into_iter()
            .filter(|v| matches!(v.bound, Bound::VoltageMin | Bound::VoltageMax))
            .collect();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].bound, Bound::VoltageMax);
        assert!((found[0].slack - 0.1).abs() < 1e-12);
    }

    #[test]
    fn thermal_flags_match_magnitude_oracle() {
        let mut net = two_bus();
        net.branches[0].s_rating = Some(0.5);
        net.branches[0].angle_limit = std::f64::consts::FRAC_PI_2;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let v = vec![
                Complex64::new(1.0, 0.0),
                Complex64::from_polar(rng.random_range(0.9..1.1), rng.random_range(-0.2..0.2)),
            ];
            let state = ACState::from_voltages(&net, v, vec![Complex64::new(0.0, 0.0)]).unwrap();
            let found = operational_violations(&net, &state, 1e-12).unwrap();
            for (bound, s) in [(Bound::ThermalFrom, state.flows[0].from), (Bound::ThermalTo, state.flows[0].to)] {
                let oracle = (s.re * s.re + s.im * s.im).sqrt() - 0.5 > 1e-12;
                assert_eq!(found.iter().any(|v| v.bound == bound), oracle);
            }
        }
    }

    #[test]
    fn angle_tie_is_feasible() {
        let mut net = two_bus();
        net.branches[0].angle_limit = 0.25;
        let v = vec![Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, -0.25)];
        let state = ACState::from_voltages(&net, v, vec![Complex64::new(0.0, 0.0)]).unwrap();
        assert!(operational_violations(&net, &state, 0.0)
            .unwrap()
            .iter()
            .all(|v| v.bound != Bound::AngleDifference));
    }

    #[test]
    fn angle_and_linear_forms_agree_away_from_boundary() {
        let mut net = two_bus();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            net.branches[0].angle_limit = rng.random_range(0.0..=std::f64::consts::FRAC_PI_2);
            let v = vec![
                Complex64::from_polar(rng.random_range(0.9..1.1), rng.random_range(-1.5..1.5)),
                Complex64::from_polar(rng.random_range(0.9..1.1), rng.random_range(-1.5..1.5)),
            ];
            let state = ACState::from_voltages(&net, v, vec![Complex64::new(0.0, 0.0)]).unwrap();
            let c = pad_cross_check(&net, &state, 1e-12).unwrap()[0];
            if (c.angle.abs() - c.limit).abs() > 1e-9 {
                assert_eq!(c.angle_feasible, c.linear_feasible, "{c:?}");
            }
        }
    }
}
