//! Convex DistFlow relaxation in L-space.
//!
//! Per branch, with `K = L_ij + b^c·q_ij + (b^c/2)²·W_i/|T|²`:
//!
//! ```text
//! loss   S_ij + S_ji = Z·K − i(b^c/2)(W_i/|T|² + W_j)
//! drop   (1 − x·b^c)W_i/|T|² − W_j = (Z*S_ij + Z S_ij*) − |Z|²·K
//! angle  ±Im M ≤ tan(θ^Δ)·Re M,  M = Z*T*((Y* − i b^c/2)W_i/|T|² − S_ij)
//! cone   |S_ij|² ≤ (W_i/|T|²)·L_ij
//! ```
//!
//! The charging correction inside `K` is linear in `W_i`.

use num_complex::Complex64;

use super::{branch_tag, complex_rows, Frame, Objective, RelaxError, ScaledVoltage, Space, VariableMap};
use crate::coneprog::{ConeProgram, SparseRow};
use crate::netmodel::{Network, I};

/// Variable indices of one branch.
#[derive(Clone, Copy)]
struct Vars {
    wi: usize,
    wj: usize,
    l: usize,
    pf: usize,
    qf: usize,
    pt: usize,
    qt: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Form {
    Complex,
    Real,
    Simple,
}

/// Extended Convex DistFlow relaxation assembled from complex coefficients.
pub fn build_cdf_e(network: &Network, objective: &Objective) -> Result<(ConeProgram, VariableMap), RelaxError> {
    build(network, objective, Form::Complex)
}

/// The same relaxation written with real branch coefficients only, using
/// `tz = Z·T` in rectangular form. Rows and their order match [`build_cdf_e`].
pub fn build_cdf_e_real(network: &Network, objective: &Objective) -> Result<(ConeProgram, VariableMap), RelaxError> {
    build(network, objective, Form::Real)
}

/// Convex DistFlow without charging, transformers or shunts:
/// `S_ij + S_ji = Z·L_ij`, `W_i − W_j = (Z*S_ij + Z S_ij*) − |Z|²L_ij`,
/// angle rows on `W_i − Z*S_ij`, `|S_ij|² ≤ W_i·L_ij`.
pub fn build_cdf_simple(network: &Network, objective: &Objective) -> Result<(ConeProgram, VariableMap), RelaxError> {
    build(network, objective, Form::Simple)
}

fn build(network: &Network, objective: &Objective, form: Form) -> Result<(ConeProgram, VariableMap), RelaxError> {
    let mut f = Frame::new(network, Space::L)?;
    f.add_kcl(form != Form::Simple);
    for k in 0..network.branches.len() {
        let (fb, tb) = f.topo.ends[k];
        let v = Vars {
            wi: f.map.w[fb],
            wj: f.map.w[tb],
            l: f.map.l[k],
            pf: f.map.s_from[k].0,
            qf: f.map.s_from[k].1,
            pt: f.map.s_to[k].0,
            qt: f.map.s_to[k].1,
        };
        match form {
            Form::Complex => complex_branch(&mut f, k, v),
            Form::Real => real_branch(&mut f, k, v),
            Form::Simple => simple_branch(&mut f, k, v),
        }
        let tag = branch_tag(k);
        let tap_sq = f.params[k].tap_sq;
        let scaled = if form == Form::Simple || tap_sq == 1.0 {
            v.wi
        } else {
            let lo = f.prog.lower[v.wi] / tap_sq;
            let hi = f.prog.upper[v.wi] / tap_sq;
            let wt = f.prog.add_var(format!("w_scaled[{tag}]"), lo, hi);
            f.prog.add_eq(SparseRow::new(format!("tap_scaled_w[{tag}]"), [(wt, 1.0), (v.wi, -1.0 / tap_sq)], 0.0));
            f.map.scaled_w[k] = Some(ScaledVoltage { index: wt, bus: fb, scale: 1.0 / tap_sq });
            wt
        };
        f.prog.add_rsoc(format!("power_current_cone[{tag}]"), vec![v.pf, v.qf], scaled, v.l);
    }
    f.add_thermal();
    f.set_objective(objective)?;
    Ok(f.finish())
}

fn complex_branch(f: &mut Frame, k: usize, v: Vars) {
    let p = f.params[k];
    let tag = branch_tag(k);
    let h = p.half_charge;
    let inv_t2 = 1.0 / p.tap_sq;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);

    // Z·K expanded over (l, q_ij, w_i).
    let zk_l = p.z;
    let zk_q = p.z * p.b_charge;
    let zk_w = p.z * (h * h * inv_t2);
    let (re, im) = complex_rows(
        format!("loss_p[{tag}]"),
        format!("loss_q[{tag}]"),
        &[
            (v.pf, one),
            (v.qf, I - zk_q),
            (v.pt, one),
            (v.qt, I),
            (v.l, -zk_l),
            (v.wi, -zk_w + I * h * inv_t2),
            (v.wj, I * h),
        ],
        zero,
    );
    f.prog.add_eq(re);
    f.prog.add_eq(im);

    // (Z*S + Z S*) is real: coefficient Z* + Z on p and i(Z* − Z) on q.
    let z2 = p.z_sq();
    let drop_p = -(p.z.conj() + p.z);
    let drop_q = -(I * p.z.conj() - I * p.z) + z2 * p.b_charge;
    let drop_w = (1.0 - p.z.im * p.b_charge) * inv_t2 + z2 * h * h * inv_t2;
    f.prog.add_eq(SparseRow::new(
        format!("drop[{tag}]"),
        [(v.wi, drop_w), (v.wj, -1.0), (v.pf, drop_p.re), (v.qf, drop_q.re), (v.l, z2)],
        0.0,
    ));

    // M = Z*T*(Y* − i b^c/2)W_i/|T|² − Z*T*·S_ij with Z*Y* = 1.
    let zt = p.z.conj() * p.t.conj();
    let m_w = (p.t.conj() - I * h * zt) * inv_t2;
    let m = [(v.wi, m_w), (v.pf, -zt), (v.qf, -I * zt)];
    let re: Vec<(usize, f64)> = m.iter().map(|&(j, c)| (j, c.re)).collect();
    let im: Vec<(usize, f64)> = m.iter().map(|&(j, c)| (j, c.im)).collect();
    f.add_pad(k, &re, &im);
}

fn real_branch(f: &mut Frame, k: usize, v: Vars) {
    let br = &f.net.branches[k];
    let (r, x, bc) = (br.r, br.x, br.b_charge);
    let h = bc / 2.0;
    let t2 = br.tap * br.tap;
    let (t_re, t_im) = (br.tap * br.shift.cos(), br.tap * br.shift.sin());
    let (tz_re, tz_im) = crate::netmodel::tz_coefficients(br);
    let z2 = r * r + x * x;
    let tag = branch_tag(k);

    f.prog.add_eq(SparseRow::new(
        format!("loss_p[{tag}]"),
        [(v.pf, 1.0), (v.qf, -r * bc), (v.pt, 1.0), (v.l, -r), (v.wi, -r * h * h / t2)],
        0.0,
    ));
    f.prog.add_eq(SparseRow::new(
        format!("loss_q[{tag}]"),
        [(v.pf, 0.0), (v.qf, 1.0 - x * bc), (v.qt, 1.0), (v.l, -x), (v.wi, -x * h * h / t2 + h / t2), (v.wj, h)],
        0.0,
    ));
    f.prog.add_eq(SparseRow::new(
        format!("drop[{tag}]"),
        [
            (v.wi, (1.0 - x * bc) / t2 + z2 * h * h / t2),
            (v.wj, -1.0),
            (v.pf, -2.0 * r),
            (v.qf, -2.0 * x + z2 * bc),
            (v.l, z2),
        ],
        0.0,
    ));
    let re = [(v.wi, (t_re - tz_im * h) / t2), (v.pf, -tz_re), (v.qf, -tz_im)];
    let im = [(v.wi, (-t_im - tz_re * h) / t2), (v.qf, -tz_re), (v.pf, tz_im)];
    f.add_pad(k, &re, &im);
}

fn simple_branch(f: &mut Frame, k: usize, v: Vars) {
    let p = f.params[k];
    let tag = branch_tag(k);
    let one = Complex64::new(1.0, 0.0);
    let (re, im) = complex_rows(
        format!("loss_p[{tag}]"),
        format!("loss_q[{tag}]"),
        &[(v.pf, one), (v.qf, I), (v.pt, one), (v.qt, I), (v.l, -p.z)],
        Complex64::new(0.0, 0.0),
    );
    f.prog.add_eq(re);
    f.prog.add_eq(im);
    let zc = p.z.conj();
    f.prog.add_eq(SparseRow::new(
        format!("drop[{tag}]"),
        [(v.wi, 1.0), (v.wj, -1.0), (v.pf, -(zc + p.z).re), (v.qf, -(I * zc - I * p.z).re), (v.l, p.z_sq())],
        0.0,
    ));
    // W_i − Z*S_ij
    let m = [(v.wi, one), (v.pf, -zc), (v.qf, -I * zc)];
    let re: Vec<(usize, f64)> = m.iter().map(|&(j, c)| (j, c.re)).collect();
    let im: Vec<(usize, f64)> = m.iter().map(|&(j, c)| (j, c.im)).collect();
    f.add_pad(k, &re, &im);
}
