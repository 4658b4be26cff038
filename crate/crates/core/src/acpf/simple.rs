//! Flow evaluators of the network model without charging, transformers or
//! shunts. Written directly from the plain formulas; the extended evaluators
//! must collapse onto these when the extra parameters vanish.

use num_complex::Complex64;

/// `S_ij = Y*|V_i|² − Y* V_i V_j*`.
pub fn flow_from(vi: Complex64, vj: Complex64, y: Complex64) -> Complex64 {
    y.conj() * vi.norm_sqr() - y.conj() * vi * vj.conj()
}

/// `S_ji = Y*|V_j|² − Y* V_j V_i*`.
pub fn flow_to(vi: Complex64, vj: Complex64, y: Complex64) -> Complex64 {
    y.conj() * vj.norm_sqr() - y.conj() * vj * vi.conj()
}

/// `I_ij = Y(V_i − V_j)`.
pub fn current(vi: Complex64, vj: Complex64, y: Complex64) -> Complex64 {
    y * (vi - vj)
}

/// `|V_i|² − V_iV_j* − V_i*V_j + |V_j|²`.
pub fn difference_sq(vi: Complex64, vj: Complex64) -> f64 {
    let vv = vi * vj.conj();
    vi.norm_sqr() - 2.0 * vv.re + vj.norm_sqr()
}

/// `|I_ij|² = |Y|²(|V_i|² − V_iV_j* − V_i*V_j + |V_j|²)`.
pub fn abs_sq_current(vi: Complex64, vj: Complex64, y: Complex64) -> f64 {
    y.norm_sqr() * difference_sq(vi, vj)
}

/// `(S_ij + S_ji) − Y*(|V_i|² − V_iV_j* − V_i*V_j + |V_j|²)`.
pub fn loss_residual(vi: Complex64, vj: Complex64, y: Complex64) -> Complex64 {
    flow_from(vi, vj, y) + flow_to(vi, vj, y) - y.conj() * difference_sq(vi, vj)
}

/// `|V_i|² − |V_j|² − [(Z*S_ij + Z S_ij*) − (|V_i|² − V_iV_j* − V_i*V_j + |V_j|²)]`.
pub fn drop_residual(vi: Complex64, vj: Complex64, y: Complex64) -> f64 {
    let z = y.inv();
    let s = flow_from(vi, vj, y);
    vi.norm_sqr() - vj.norm_sqr() - (2.0 * (z.conj() * s).re - difference_sq(vi, vj))
}

/// `V_iV_j* = |V_i|² − Z* S_ij`.
pub fn vv_product(w_i: f64, s_ij: Complex64, z: Complex64) -> Complex64 {
    w_i - z.conj() * s_ij
}
