//! Symmetric quasi-definite systems with a fixed sparsity pattern: ordering,
//! factorization with static and dynamic regularization, and solves with
//! iterative refinement against the unregularized matrix.

use super::cones::{ConeSpec, Scaling};
use super::ldl::{Ldl, UpperCsc};
use super::ordering::minimum_degree;

const DYN_EPS: f64 = 1e-13;
const DYN_DELTA: f64 = 2e-7;
const REFINE_STEPS: usize = 8;

#[derive(Debug, Clone)]
pub(crate) struct SymSystem {
    csc: UpperCsc,
    /// Entry values without regularization.
    values: Vec<f64>,
    pinv: Vec<usize>,
    ldl: Ldl,
    /// CSC position of every input entry.
    slots: Vec<usize>,
    /// Signed static regularization per permuted diagonal.
    reg: Vec<(usize, f64)>,
}

impl SymSystem {
    /// `entries` are `(row, col, value)` of the upper triangle in the original
    /// ordering. Every diagonal must be present. `signs` gives the expected
    /// pivot sign of each original index.
    pub fn new(dim: usize, entries: &[(usize, usize, f64)], signs: &[f64], static_reg: f64) -> Self {
        let edges: Vec<(usize, usize)> = entries.iter().filter(|e| e.0 != e.1).map(|e| (e.0, e.1)).collect();
        let perm = minimum_degree(dim, &edges);
        let mut pinv = vec![0; dim];
        for (k, &v) in perm.iter().enumerate() {
            pinv[v] = k;
        }
        let mut cols: Vec<Vec<(usize, usize)>> = vec![Vec::new(); dim];
        for (t, &(i, j, _)) in entries.iter().enumerate() {
            let (a, b) = (pinv[i], pinv[j]);
            let (r, c) = if a <= b { (a, b) } else { (b, a) };
            cols[c].push((r, t));
        }
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut slots = vec![0; entries.len()];
        let mut values = vec![0.0; entries.len()];
        for col in &mut cols {
            col.sort_unstable();
            for &(r, t) in col.iter() {
                slots[t] = row_idx.len();
                values[row_idx.len()] = entries[t].2;
                row_idx.push(r);
            }
            col_ptr.push(row_idx.len());
        }
        let csc = UpperCsc { n: dim, col_ptr, row_idx };
        let mut psigns = vec![0.0; dim];
        let mut reg = Vec::with_capacity(dim);
        for i in 0..dim {
            psigns[pinv[i]] = signs[i];
            let pos = csc.position(pinv[i], pinv[i]).expect("diagonal entries are structural");
            reg.push((pos, signs[i] * static_reg));
        }
        let ldl = Ldl::analyze(&csc, psigns);
        Self { csc, values, pinv, ldl, slots, reg }
    }

    pub fn set(&mut self, entry: usize, value: f64) {
        self.values[self.slots[entry]] = value;
    }

    pub fn factor(&mut self) -> bool {
        let mut v = self.values.clone();
        for &(pos, r) in &self.reg {
            v[pos] += r;
        }
        self.ldl.factor(&self.csc, &v, DYN_EPS, DYN_DELTA)
    }

    /// Solve in the original ordering.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[self.pinv[i]] = rhs[i];
        }
        let mut x = b.clone();
        self.ldl.solve(&mut x);
        let mut kx = vec![0.0; n];
        let mut prev = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            self.csc.sym_mul(&self.values, &x, &mut kx);
            let r: Vec<f64> = b.iter().zip(&kx).map(|(b, k)| b - k).collect();
            let err = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(err < prev) || err <= 1e-15 * (1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                break;
            }
            prev = err;
            let mut dx = r;
            self.ldl.solve(&mut dx);
            for (x, d) in x.iter_mut().zip(&dx) {
                *x += d;
            }
        }
        (0..n).map(|i| x[self.pinv[i]]).collect()
    }
}

/// `[0 Aᵀ Gᵀ; A 0 0; G 0 −W²]` for the interior-point method, factored in the
/// equivalent form `[0 Aᵀ (W⁻¹G)ᵀ; A 0 0; W⁻¹G 0 −I]` with `ẑ = W z`.
#[derive(Debug, Clone)]
pub(crate) struct Kkt {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    sys: SymSystem,
    cone: ConeSpec,
    /// `(value, entry)` per orthant row of `G`.
    lp_rows: Vec<Vec<(f64, usize)>>,
    /// Per second-order block: every column touched by the block, with its
    /// block column of `G` and one entry index per block row.
    soc_cols: Vec<Vec<(Vec<f64>, Vec<usize>)>>,
    scaling: Option<Scaling>,
    a_rows: Vec<Vec<(usize, f64)>>,
    g_rows: Vec<Vec<(usize, f64)>>,
}

impl Kkt {
    pub fn new(n: usize, a_rows: &[Vec<(usize, f64)>], g_rows: &[Vec<(usize, f64)>], cone: &ConeSpec, static_reg: f64) -> Self {
        let p = a_rows.len();
        let m = g_rows.len();
        let dim = n + p + m;
        let z0 = n + p;
        let mut entries = Vec::new();
        for j in 0..n {
            entries.push((j, j, 0.0));
        }
        for (r, row) in a_rows.iter().enumerate() {
            for &(j, v) in row {
                entries.push((j, n + r, v));
            }
            entries.push((n + r, n + r, 0.0));
        }
        for r in 0..m {
            entries.push((z0 + r, z0 + r, -1.0));
        }
        let mut lp_rows = Vec::with_capacity(cone.lp);
        for (r, row) in g_rows[..cone.lp].iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for &(j, v) in row {
                out.push((v, entries.len()));
                entries.push((j, z0 + r, v));
            }
            lp_rows.push(out);
        }
        let mut soc_cols = Vec::new();
        for (o, q) in cone.soc_blocks() {
            let mut cols: std::collections::BTreeMap<usize, Vec<f64>> = std::collections::BTreeMap::new();
            for r in 0..q {
                for &(j, v) in &g_rows[o + r] {
                    cols.entry(j).or_insert_with(|| vec![0.0; q])[r] += v;
                }
            }
            let mut blk = Vec::with_capacity(cols.len());
            for (j, g) in cols {
                let mut ents = Vec::with_capacity(q);
                for (r, &v) in g.iter().enumerate() {
                    ents.push(entries.len());
                    entries.push((j, z0 + o + r, v));
                }
                blk.push((g, ents));
            }
            soc_cols.push(blk);
        }
        let mut signs = vec![-1.0; dim];
        signs[..n].fill(1.0);
        let sys = SymSystem::new(dim, &entries, &signs, static_reg);
        Self {
            n,
            p,
            m,
            sys,
            cone: cone.clone(),
            lp_rows,
            soc_cols,
            scaling: None,
            a_rows: a_rows.to_vec(),
            g_rows: g_rows.to_vec(),
        }
    }

    /// Loads `W⁻¹G` for the given scaling.
    pub fn set_scaling(&mut self, scaling: &Scaling) {
        for (k, row) in self.lp_rows.iter().enumerate() {
            let inv = 1.0 / scaling.lp_scale(k);
            for &(v, e) in row {
                self.sys.set(e, v * inv);
            }
        }
        for (b, blk) in self.soc_cols.iter().enumerate() {
            for (g, ents) in blk {
                let mut wg = vec![0.0; g.len()];
                scaling.apply_block(b, g, true, &mut wg);
                for (&e, v) in ents.iter().zip(wg) {
                    self.sys.set(e, v);
                }
            }
        }
        self.scaling = Some(scaling.clone());
    }

    /// Loads `G` unscaled.
    pub fn set_identity(&mut self) {
        for row in &self.lp_rows {
            for &(v, e) in row {
                self.sys.set(e, v);
            }
        }
        for blk in &self.soc_cols {
            for (g, ents) in blk {
                for (&e, &v) in ents.iter().zip(g) {
                    self.sys.set(e, v);
                }
            }
        }
        self.scaling = None;
    }

    pub fn factor(&mut self) -> bool {
        self.sys.factor()
    }

    /// Solves the unscaled system and returns `(x, y, z)`, refining against
    /// the unscaled equations.
    pub fn solve(&self, rx: &[f64], ry: &[f64], rz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (mut x, mut y, mut z) = self.solve_scaled(rx, ry, rz);
        let scale = 1.0 + [rx, ry, rz].iter().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        let mut prev = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            let (ex, ey, ez) = self.residual(rx, ry, rz, &x, &y, &z);
            let err = [&ex, &ey, &ez].iter().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
            if !(err < prev) || err <= 1e-15 * scale {
                break;
            }
            prev = err;
            let (dx, dy, dz) = self.solve_scaled(&ex, &ey, &ez);
            for (a, d) in x.iter_mut().zip(dx).chain(y.iter_mut().zip(dy)).chain(z.iter_mut().zip(dz)) {
                *a += d;
            }
        }
        (x, y, z)
    }

    fn solve_scaled(&self, rx: &[f64], ry: &[f64], rz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rhs = Vec::with_capacity(self.n + self.p + self.m);
        rhs.extend_from_slice(rx);
        rhs.extend_from_slice(ry);
        match &self.scaling {
            Some(w) => rhs.extend(w.apply(&self.cone, rz, true)),
            None => rhs.extend_from_slice(rz),
        }
        let mut sol = self.sys.solve(&rhs);
        let mut z = sol.split_off(self.n + self.p);
        if let Some(w) = &self.scaling {
            z = w.apply(&self.cone, &z, true);
        }
        let y = sol.split_off(self.n);
        (sol, y, z)
    }

    /// Right-hand side minus the unscaled matrix applied to `(x, y, z)`.
    fn residual(&self, rx: &[f64], ry: &[f64], rz: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut ex = rx.to_vec();
        for (row, &yr) in self.a_rows.iter().zip(y) {
            for &(j, v) in row {
                ex[j] -= v * yr;
            }
        }
        for (row, &zr) in self.g_rows.iter().zip(z) {
            for &(j, v) in row {
                ex[j] -= v * zr;
            }
        }
        let ey: Vec<f64> = self.a_rows.iter().zip(ry).map(|(row, &r)| r - row.iter().map(|&(j, v)| v * x[j]).sum::<f64>()).collect();
        let w2z = match &self.scaling {
            Some(w) => w.apply(&self.cone, &w.apply(&self.cone, z, false), false),
            None => z.to_vec(),
        };
        let ez: Vec<f64> = (0..self.m).map(|r| rz[r] - self.g_rows[r].iter().map(|&(j, v)| v * x[j]).sum::<f64>() + w2z[r]).collect();
        (ex, ey, ez)
    }
}
