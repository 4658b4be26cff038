//! Branch flow evaluators and the algebraic identities that relate them.
//!
//! Every function takes the voltages at both ends as ground truth; flows that
//! an identity needs are computed internally.

use num_complex::Complex64;

use crate::netmodel::{BranchParams, I};

/// `S_ij = (Y* − i b^c/2)|V_i|²/|T|² − Y* V_i V_j*/T*`.
pub fn branch_flow_from(vi: Complex64, vj: Complex64, p: &BranchParams) -> Complex64 {
    p.shunted_conj() * vi.norm_sqr() / p.tap_sq - p.y.conj() * vi * vj.conj() / p.t.conj()
}

/// `S_ji = (Y* − i b^c/2)|V_j|² − Y* V_i* V_j/T`.
pub fn branch_flow_to(vi: Complex64, vj: Complex64, p: &BranchParams) -> Complex64 {
    p.shunted_conj() * vj.norm_sqr() - p.y.conj() * vi.conj() * vj / p.t
}

/// `I_ij = (Y + i b^c/2) V_i/T* − Y V_j`.
pub fn branch_current(vi: Complex64, vj: Complex64, p: &BranchParams) -> Complex64 {
    (p.y + I * p.half_charge) * vi / p.t.conj() - p.y * vj
}

/// `|V_i|²/|T|² − V_iV_j*/T* − V_i*V_j/T + |V_j|²`, the squared magnitude of the
/// series voltage difference. Returned as a complex value so callers can
/// inspect the rounding residue in the imaginary part.
pub fn series_difference_sq(vi: Complex64, vj: Complex64, p: &BranchParams) -> Complex64 {
    let vv = vi * vj.conj();
    Complex64::from(vi.norm_sqr() / p.tap_sq) - vv / p.t.conj() - vv.conj() / p.t + vj.norm_sqr()
}

/// Right-hand side of the extended absolute square of current:
/// `|Y|²·d − (b^c/2)²|V_i|²/|T|² − b^c·Im(S_ij)` with `d` from
/// [`series_difference_sq`].
pub fn abs_sq_current_rhs(vi: Complex64, vj: Complex64, s_ij: Complex64, p: &BranchParams) -> f64 {
    let d = series_difference_sq(vi, vj, p).re;
    p.y_sq() * d - p.half_charge * p.half_charge * vi.norm_sqr() / p.tap_sq - p.b_charge * s_ij.im
}

/// [`abs_sq_current_rhs`] after checking that `s_ij` is the from-side flow of
/// the given voltages.
pub fn abs_sq_current_rhs_checked(
    vi: Complex64,
    vj: Complex64,
    s_ij: Complex64,
    p: &BranchParams,
    tol: f64,
) -> Result<f64, f64> {
    let mismatch = (s_ij - branch_flow_from(vi, vj, p)).norm();
    if mismatch > tol * (1.0 + s_ij.norm()) {
        Err(mismatch)
    } else {
        Ok(abs_sq_current_rhs(vi, vj, s_ij, p))
    }
}

/// `(S_ij + S_ji) − [Y*·d − i(b^c/2)(|V_i|²/|T|² + |V_j|²)]`.
pub fn loss_identity_residual(vi: Complex64, vj: Complex64, p: &BranchParams) -> Complex64 {
    let lhs = branch_flow_from(vi, vj, p) + branch_flow_to(vi, vj, p);
    let rhs = p.y.conj() * series_difference_sq(vi, vj, p)
        - I * p.half_charge * (vi.norm_sqr() / p.tap_sq + vj.norm_sqr());
    lhs - rhs
}

/// Complex form of the extended voltage drop residual:
/// `(1 − x b^c)|V_i|²/|T|² − |V_j|² − [(Z*S_ij + Z S_ij*) − d]`.
/// The imaginary part is pure rounding.
pub fn voltage_drop_identity_residual_complex(vi: Complex64, vj: Complex64, p: &BranchParams) -> Complex64 {
    let s = branch_flow_from(vi, vj, p);
    let lhs = Complex64::from((1.0 - p.x * p.b_charge) * vi.norm_sqr() / p.tap_sq - vj.norm_sqr());
    let rhs = (p.z.conj() * s + p.z * s.conj()) - series_difference_sq(vi, vj, p);
    lhs - rhs
}

pub fn voltage_drop_identity_residual(vi: Complex64, vj: Complex64, p: &BranchParams) -> f64 {
    voltage_drop_identity_residual_complex(vi, vj, p).re
}

/// `V_iV_j* = Z*T*((Y* − i b^c/2)W_i/|T|² − S_ij)`.
pub fn vv_product(w_i: f64, s_ij: Complex64, p: &BranchParams) -> Complex64 {
    p.z.conj() * p.t.conj() * (p.shunted_conj() * w_i / p.tap_sq - s_ij)
}
