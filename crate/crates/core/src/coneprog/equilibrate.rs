//! Ruiz equilibration of `[A; G]`. Rows of one second-order block share a
//! single scale so that the cone is preserved.

use super::cones::ConeSpec;

#[derive(Debug, Clone)]
pub(crate) struct Equilibration {
    /// Column scales: `x = D x̃`.
    pub d: Vec<f64>,
    /// Objective scale.
    pub cost: f64,
}

/// Scales the data in place and returns the factors.
pub(crate) fn ruiz(
    n: usize,
    c: &mut [f64],
    a_rows: &mut [Vec<(usize, f64)>],
    b: &mut [f64],
    g_rows: &mut [Vec<(usize, f64)>],
    h: &mut [f64],
    cone: &ConeSpec,
    sweeps: usize,
) -> Equilibration {
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; a_rows.len()];
    let mut f = vec![1.0; g_rows.len()];
    let inv_sqrt = |m: f64| if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 };
    let row_max = |row: &[(usize, f64)]| row.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));

    for _ in 0..sweeps {
        let mut col = vec![0.0f64; n];
        for row in a_rows.iter().chain(g_rows.iter()) {
            for &(j, v) in row {
                col[j] = col[j].max(v.abs());
            }
        }
        let dc: Vec<f64> = col.iter().map(|&m| inv_sqrt(m)).collect();
        let er: Vec<f64> = a_rows.iter().map(|r| inv_sqrt(row_max(r))).collect();
        let mut fr: Vec<f64> = g_rows.iter().map(|r| inv_sqrt(row_max(r))).collect();
        for (o, q) in cone.soc_blocks() {
            let m = g_rows[o..o + q].iter().map(|r| row_max(r)).fold(0.0, f64::max);
            fr[o..o + q].fill(inv_sqrt(m));
        }
        for (r, row) in a_rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut() {
                *v *= er[r] * dc[*j];
            }
        }
        for (r, row) in g_rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut() {
                *v *= fr[r] * dc[*j];
            }
        }
        for k in 0..n {
            d[k] *= dc[k];
        }
        for k in 0..e.len() {
            e[k] *= er[k];
        }
        for k in 0..f.len() {
            f[k] *= fr[k];
        }
    }
    for k in 0..n {
        c[k] *= d[k];
    }
    for k in 0..b.len() {
        b[k] *= e[k];
    }
    for k in 0..h.len() {
        h[k] *= f[k];
    }
    let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cost = 1.0 / cmax.max(1.0);
    for v in c.iter_mut() {
        *v *= cost;
    }
    Equilibration { d, cost }
}
