//! SOC relaxation in W-space.

use num_complex::Complex64;

use super::{branch_tag, complex_rows, Frame, Objective, RelaxError, Space, VariableMap};
use crate::coneprog::ConeProgram;
use crate::netmodel::{Network, I};

/// Coefficients of the two flow equations of one branch:
/// `S_ij = a·W_i − b·W_ij` and `S_ji = c·W_j − d·W_ij*`.
struct FlowCoefficients {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

/// Extended SOC relaxation: shunted power balance, flows with charging and
/// transformers, squared voltage bounds, angle-difference rows on `W_ij`,
/// thermal limits and `|W_ij|² ≤ W_iW_j`.
pub fn build_soc_e(network: &Network, objective: &Objective) -> Result<(ConeProgram, VariableMap), RelaxError> {
    build(network, objective, true)
}

/// SOC relaxation without charging, transformers or shunts:
/// `S_ij = Y*W_i − Y*W_ij`, `S_ji = Y*W_j − Y*W_ij*`.
pub fn build_soc_simple(network: &Network, objective: &Objective) -> Result<(ConeProgram, VariableMap), RelaxError> {
    build(network, objective, false)
}

fn build(network: &Network, objective: &Objective, extended: bool) -> Result<(ConeProgram, VariableMap), RelaxError> {
    let mut f = Frame::new(network, Space::W)?;
    f.add_kcl(extended);
    for k in 0..network.branches.len() {
        let p = f.params[k];
        let y_conj = p.y.conj();
        let co = if extended {
            let shunted = y_conj - I * p.half_charge;
            FlowCoefficients { a: shunted / p.tap_sq, b: y_conj / p.t.conj(), c: shunted, d: y_conj / p.t }
        } else {
            FlowCoefficients { a: y_conj, b: y_conj, c: y_conj, d: y_conj }
        };
        let (fb, tb) = f.topo.ends[k];
        let (wi, wj) = (f.map.w[fb], f.map.w[tb]);
        let (wr, wm) = f.map.w_branch[k];
        let (pf, qf) = f.map.s_from[k];
        let (pt, qt) = f.map.s_to[k];
        let one = Complex64::new(1.0, 0.0);
        let tag = branch_tag(k);

        let (re, im) = complex_rows(
            format!("flow_p_fr[{tag}]"),
            format!("flow_q_fr[{tag}]"),
            &[(pf, one), (qf, I), (wi, -co.a), (wr, co.b), (wm, I * co.b)],
            Complex64::new(0.0, 0.0),
        );
        f.prog.add_eq(re);
        f.prog.add_eq(im);
        let (re, im) = complex_rows(
            format!("flow_p_to[{tag}]"),
            format!("flow_q_to[{tag}]"),
            &[(pt, one), (qt, I), (wj, -co.c), (wr, co.d), (wm, -I * co.d)],
            Complex64::new(0.0, 0.0),
        );
        f.prog.add_eq(re);
        f.prog.add_eq(im);

        f.add_pad(k, &[(wr, 1.0)], &[(wm, 1.0)]);
        f.prog.add_rsoc(format!("voltage_product_cone[{tag}]"), vec![wr, wm], wi, wj);
    }
    f.add_thermal();
    f.set_objective(objective)?;
    Ok(f.finish())
}
