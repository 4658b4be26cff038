//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! with Nesterov–Todd scaling and Mehrotra predictor-corrector steps.
//!
//! The program is reduced to
//!
//! ```text
//! minimize cᵀx  subject to  Ax = b,  Gx + s = h,  s ∈ K
//! ```
//!
//! with fixed variables substituted out, then equilibrated. Each iteration
//! factors one quasi-definite KKT matrix and solves it three times.

use std::collections::BTreeMap;

use super::cones::{dot, norm, ConeSpec, Scaling};
use super::equilibrate::ruiz;
use super::kkt::{Kkt, SymSystem};
use super::{ConeProgram, ProgramError, Solution, SolveOptions, Status};

const STATIC_REG: f64 = 1e-8;
const FEAS_TOL: f64 = 1e-10;
const GAP_ABS: f64 = 1e-10;
const GAP_REL: f64 = 1e-10;
const REDUCED_FEAS_TOL: f64 = 1e-7;
const REDUCED_GAP: f64 = 1e-7;
const INFEAS_TOL: f64 = 1e-8;
const STEP_FRACTION: f64 = 0.99;
const MIN_STEP: f64 = 1e-10;
const SIGMA_MIN: f64 = 1e-4;

type Row = Vec<(usize, f64)>;

/// Program in solver form. Columns are the non-fixed variables.
struct StdForm {
    /// Original index per column.
    var_of: Vec<usize>,
    /// Original-length point holding fixed values (zero elsewhere).
    base: Vec<f64>,
    c: Vec<f64>,
    a_rows: Vec<Row>,
    b: Vec<f64>,
    g_rows: Vec<Row>,
    h: Vec<f64>,
    cone: ConeSpec,
}

enum Reduction {
    Ready(StdForm),
    /// A constraint over fixed variables alone fails.
    Infeasible(Vec<f64>),
}

impl StdForm {
    fn build(p: &ConeProgram) -> Reduction {
        let n = p.n_vars;
        let mut col_of = vec![None; n];
        let mut var_of = Vec::new();
        let mut base = vec![0.0; n];
        for k in 0..n {
            if p.lower[k] == p.upper[k] {
                base[k] = p.lower[k];
            } else {
                col_of[k] = Some(var_of.len());
                var_of.push(k);
            }
        }
        // Affine expression Σ coef·x + constant over original indices, split into
        // free columns and a constant.
        let affine = |terms: &mut dyn Iterator<Item = (usize, f64)>, constant: f64| -> (Row, f64) {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            let mut k0 = constant;
            for (k, v) in terms {
                match col_of[k] {
                    Some(c) => *acc.entry(c).or_insert(0.0) += v,
                    None => k0 += v * base[k],
                }
            }
            (acc.into_iter().filter(|e| e.1 != 0.0).collect(), k0)
        };

        let c: Vec<f64> = var_of.iter().map(|&k| p.objective[k]).collect();
        let mut a_rows = Vec::new();
        let mut b = Vec::new();
        for row in &p.equalities {
            let (r, k0) = affine(&mut row.entries.iter().copied(), -row.rhs);
            if r.is_empty() {
                if k0.abs() > 1e-9 {
                    return Reduction::Infeasible(base);
                }
                continue;
            }
            a_rows.push(r);
            b.push(-k0);
        }

        // Slack rows s = h − Gx, written as s = expr.
        let mut g_rows = Vec::new();
        let mut h = Vec::new();
        let push_lp = |expr: (Row, f64), g_rows: &mut Vec<Row>, h: &mut Vec<f64>| -> bool {
            let (terms, k0) = expr;
            if terms.is_empty() {
                return k0 >= -1e-9;
            }
            g_rows.push(terms.into_iter().map(|(j, v)| (j, -v)).collect());
            h.push(k0);
            true
        };
        for row in &p.inequalities {
            let e = affine(&mut row.entries.iter().map(|&(k, v)| (k, -v)), row.rhs);
            if !push_lp(e, &mut g_rows, &mut h) {
                return Reduction::Infeasible(base);
            }
        }
        for &k in &var_of {
            if p.lower[k].is_finite() {
                push_lp(affine(&mut std::iter::once((k, 1.0)), -p.lower[k]), &mut g_rows, &mut h);
            }
            if p.upper[k].is_finite() {
                push_lp(affine(&mut std::iter::once((k, -1.0)), p.upper[k]), &mut g_rows, &mut h);
            }
        }
        let lp = g_rows.len();

        let mut blocks: Vec<Vec<(Row, f64)>> = Vec::new();
        for cb in &p.rsoc {
            let mut comps = Vec::new();
            if cb.a == cb.b {
                comps.push(affine(&mut std::iter::once((cb.a, 1.0)), 0.0));
            } else {
                comps.push(affine(&mut [(cb.a, 1.0), (cb.b, 1.0)].into_iter(), 0.0));
                comps.push(affine(&mut [(cb.a, 1.0), (cb.b, -1.0)].into_iter(), 0.0));
            }
            let scale = if cb.a == cb.b { 1.0 } else { 2.0 };
            for &u in &cb.u {
                comps.push(affine(&mut std::iter::once((u, scale)), 0.0));
            }
            blocks.push(comps);
        }
        for cb in &p.soc {
            let mut comps = vec![affine(&mut std::iter::once((cb.t, 1.0)), 0.0)];
            for &x in &cb.x {
                comps.push(affine(&mut std::iter::once((x, 1.0)), 0.0));
            }
            blocks.push(comps);
        }
        let mut soc = Vec::new();
        for comps in blocks {
            if comps.iter().all(|(t, _)| t.is_empty()) {
                let head = comps[0].1;
                let tail: f64 = comps[1..].iter().map(|c| c.1 * c.1).sum::<f64>().sqrt();
                if tail - head > 1e-9 * head.abs().max(1.0) {
                    return Reduction::Infeasible(base);
                }
                continue;
            }
            soc.push(comps.len());
            for (terms, k0) in comps {
                g_rows.push(terms.into_iter().map(|(j, v)| (j, -v)).collect());
                h.push(k0);
            }
        }
        Reduction::Ready(StdForm { var_of, base, c, a_rows, b, g_rows, h, cone: ConeSpec { lp, soc } })
    }

    fn n(&self) -> usize {
        self.var_of.len()
    }

    fn expand(&self, xc: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (c, &k) in self.var_of.iter().enumerate() {
            x[k] = xc[c];
        }
        x
    }
}

fn mat_vec(rows: &[Row], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect()
}

fn mat_t_vec(rows: &[Row], y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (r, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            out[j] += v * y[r];
        }
    }
    out
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Outcome {
    status: Status,
    it: Iterate,
    iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Metrics {
    pres: f64,
    dres: f64,
    gap: f64,
    relgap: f64,
}

impl Metrics {
    fn converged(&self, feas: f64, gap_abs: f64, gap_rel: f64) -> bool {
        self.pres < feas && self.dres < feas && (self.gap < gap_abs || self.relgap < gap_rel)
    }
}

fn ipm(f: &StdForm, opts: &SolveOptions) -> Outcome {
    let n = f.n();
    let p = f.a_rows.len();
    let cone = &f.cone;
    let nu = cone.degree() as f64;
    let (bn, hn, cn) = (norm(&f.b), norm(&f.h), norm(&f.c));

    let mut kkt = Kkt::new(n, &f.a_rows, &f.g_rows, cone, STATIC_REG);
    kkt.set_identity();
    let fail = |status, it, iterations| Outcome { status, it, iterations };
    let zero_it = || Iterate {
        x: vec![0.0; n],
        y: vec![0.0; p],
        z: cone.unit(),
        s: cone.unit(),
        tau: 1.0,
        kappa: 1.0,
    };
    if !kkt.factor() {
        return fail(Status::NumericalFailure, zero_it(), 0);
    }
    let neg_c: Vec<f64> = f.c.iter().map(|v| -v).collect();
    let (x, _, z0) = kkt.solve(&vec![0.0; n], &f.b, &f.h);
    let mut s: Vec<f64> = z0.iter().map(|v| -v).collect();
    cone.shift_interior(&mut s);
    let (_, y, mut z) = kkt.solve(&neg_c, &vec![0.0; p], &vec![0.0; f.h.len()]);
    cone.shift_interior(&mut z);
    let mut it = Iterate { x, y, z, s, tau: 1.0, kappa: 1.0 };

    let mut last_good: Option<(Iterate, Metrics)> = None;
    for iter in 0..=opts.max_iter {
        let ax = mat_vec(&f.a_rows, &it.x);
        let gx = mat_vec(&f.g_rows, &it.x);
        let aty = mat_t_vec(&f.a_rows, &it.y, n);
        let gtz = mat_t_vec(&f.g_rows, &it.z, n);
        let rx: Vec<f64> = (0..n).map(|k| aty[k] + gtz[k] + f.c[k] * it.tau).collect();
        let ry: Vec<f64> = (0..p).map(|k| ax[k] - f.b[k] * it.tau).collect();
        let rz: Vec<f64> = (0..f.h.len()).map(|k| it.s[k] + gx[k] - f.h[k] * it.tau).collect();
        let cx = dot(&f.c, &it.x);
        let by_hz = dot(&f.b, &it.y) + dot(&f.h, &it.z);
        let rt = it.kappa + cx + by_hz;

        let pcost = cx / it.tau;
        let dcost = -by_hz / it.tau;
        let gap = dot(&it.s, &it.z) / (it.tau * it.tau);
        let m = Metrics {
            pres: (norm(&ry) / (1.0 + bn)).max(norm(&rz) / (1.0 + hn)) / it.tau,
            dres: norm(&rx) / (1.0 + cn) / it.tau,
            gap,
            relgap: gap / pcost.abs().min(dcost.abs()).max(1e-300),
        };
        if !(m.pres.is_finite() && m.dres.is_finite() && m.gap.is_finite()) {
            return finish_reduced(last_good, it, iter, Status::NumericalFailure);
        }
        if m.converged(FEAS_TOL, GAP_ABS, GAP_REL) {
            return Outcome { status: Status::Optimal, it, iterations: iter };
        }

        // Certificates of infeasibility.
        let resx_dual = norm(&(0..n).map(|k| aty[k] + gtz[k]).collect::<Vec<_>>());
        if by_hz < 0.0 && (resx_dual / -by_hz < INFEAS_TOL || it.tau < INFEAS_TOL * it.kappa) && it.kappa > it.tau {
            return Outcome { status: Status::Infeasible, it, iterations: iter };
        }
        if cx < 0.0 {
            let gxs: Vec<f64> = (0..gx.len()).map(|k| gx[k] + it.s[k]).collect();
            let r = norm(&ax).max(norm(&gxs)) / -cx;
            if (r < INFEAS_TOL || it.tau < INFEAS_TOL * it.kappa) && it.kappa > it.tau {
                return Outcome { status: Status::Unbounded, it, iterations: iter };
            }
        }
        if m.converged(REDUCED_FEAS_TOL, REDUCED_GAP, REDUCED_GAP) {
            let better = last_good.as_ref().is_none_or(|(_, lm)| m.pres.max(m.dres) <= lm.pres.max(lm.dres) * 10.0);
            if better {
                last_good = Some((
                    Iterate { x: it.x.clone(), y: it.y.clone(), z: it.z.clone(), s: it.s.clone(), tau: it.tau, kappa: it.kappa },
                    m,
                ));
            }
        }
        if iter == opts.max_iter {
            return finish_reduced(last_good, it, iter, Status::IterationLimit);
        }

        let Some(w) = Scaling::new(cone, &it.s, &it.z) else {
            return finish_reduced(last_good, it, iter, Status::NumericalFailure);
        };
        kkt.set_scaling(&w);
        if !kkt.factor() {
            return finish_reduced(last_good, it, iter, Status::NumericalFailure);
        }
        let (x1, y1, z1) = kkt.solve(&neg_c, &f.b, &f.h);
        let q1 = dot(&f.c, &x1) + dot(&f.b, &y1) + dot(&f.h, &z1);
        let lambda = &w.lambda;
        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (nu + 1.0);

        // Direction for complementarity target `ds_target` and τκ target `dtk`.
        let direction = |eta: f64, ds_target: &[f64], dtk: f64| {
            let u = cone.jordan_div(lambda, ds_target);
            let wu = w.apply(cone, &u, false);
            let bx: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let by: Vec<f64> = ry.iter().map(|v| -eta * v).collect();
            let bz: Vec<f64> = rz.iter().zip(&wu).map(|(r, wu)| -eta * r - wu).collect();
            let (x2, y2, z2) = kkt.solve(&bx, &by, &bz);
            let q2 = dot(&f.c, &x2) + dot(&f.b, &y2) + dot(&f.h, &z2);
            let dtau = (dtk + it.tau * (eta * rt + q2)) / (it.kappa - it.tau * q1);
            let dkappa = (dtk - it.kappa * dtau) / it.tau;
            let mut dx = x2;
            axpy(dtau, &x1, &mut dx);
            let mut dy = y2;
            axpy(dtau, &y1, &mut dy);
            let mut dz = z2;
            axpy(dtau, &z1, &mut dz);
            // Slack step from the linearized primal row, so that solve error
            // lands in centrality rather than in the residual.
            let gdx = mat_vec(&f.g_rows, &dx);
            let ds: Vec<f64> = (0..gdx.len()).map(|k| f.h[k] * dtau - eta * rz[k] - gdx[k]).collect();
            (dx, dy, dz, ds, dtau, dkappa)
        };
        let step_to_boundary = |dz: &[f64], ds: &[f64], dtau: f64, dkappa: f64| {
            let mut a = cone.max_step(&it.s, ds).min(cone.max_step(&it.z, dz));
            if dtau < 0.0 {
                a = a.min(-it.tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-it.kappa / dkappa);
            }
            a
        };

        // Predictor.
        let lam_sq = cone.jordan_product(lambda, lambda);
        let aff_target: Vec<f64> = lam_sq.iter().map(|v| -v).collect();
        let (_, _, dz_a, ds_a, dtau_a, dkappa_a) = direction(1.0, &aff_target, -it.tau * it.kappa);
        let alpha_a = step_to_boundary(&dz_a, &ds_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3).clamp(SIGMA_MIN, 1.0);

        // Corrector.
        let winv_ds = w.apply(cone, &ds_a, true);
        let w_dz = w.apply(cone, &dz_a, false);
        let cross = cone.jordan_product(&winv_ds, &w_dz);
        let e = cone.unit();
        let target: Vec<f64> = (0..lam_sq.len()).map(|k| -lam_sq[k] - cross[k] + sigma * mu * e[k]).collect();
        let dtk = -it.tau * it.kappa - dtau_a * dkappa_a + sigma * mu;
        let (dx, dy, dz, ds, dtau, dkappa) = direction(1.0 - sigma, &target, dtk);
        let alpha = (STEP_FRACTION * step_to_boundary(&dz, &ds, dtau, dkappa)).min(1.0);
        if !(alpha > MIN_STEP) {
            return finish_reduced(last_good, it, iter, Status::NumericalFailure);
        }
        axpy(alpha, &dx, &mut it.x);
        axpy(alpha, &dy, &mut it.y);
        axpy(alpha, &dz, &mut it.z);
        axpy(alpha, &ds, &mut it.s);
        it.tau += alpha * dtau;
        it.kappa += alpha * dkappa;
    }
    unreachable!("loop returns at max_iter")
}

/// Falls back to the last iterate that met the reduced tolerances.
fn finish_reduced(last_good: Option<(Iterate, Metrics)>, it: Iterate, iterations: usize, status: Status) -> Outcome {
    match last_good {
        Some((good, _)) => Outcome { status: Status::Optimal, it: good, iterations },
        None => Outcome { status, it, iterations },
    }
}

/// Moves `x` (original indexing) to the nearest point satisfying the equality
/// rows over the non-fixed variables.
fn project_equalities(f: &StdForm, a_rows: &[Row], b: &[f64], x: &[f64]) -> Option<Vec<f64>> {
    let n = f.n();
    let p = a_rows.len();
    if p == 0 {
        return None;
    }
    let xc: Vec<f64> = f.var_of.iter().map(|&k| x[k]).collect();
    let ax = mat_vec(a_rows, &xc);
    let r: Vec<f64> = (0..p).map(|k| b[k] - ax[k]).collect();
    let mut entries = Vec::new();
    for j in 0..n {
        entries.push((j, j, 1.0));
    }
    for (row, cols) in a_rows.iter().enumerate() {
        for &(j, v) in cols {
            entries.push((j, n + row, v));
        }
        entries.push((n + row, n + row, -1e-12));
    }
    let mut signs = vec![-1.0; n + p];
    signs[..n].fill(1.0);
    let mut sys = SymSystem::new(n + p, &entries, &signs, 0.0);
    if !sys.factor() {
        return None;
    }
    let mut rhs = vec![0.0; n];
    rhs.extend_from_slice(&r);
    let sol = sys.solve(&rhs);
    let mut out = x.to_vec();
    for (c, &k) in f.var_of.iter().enumerate() {
        out[k] += sol[c];
    }
    Some(out)
}

/// Solves the program. Invalid programs are rejected; every other outcome is
/// reported through [`Status`].
pub fn solve(program: &ConeProgram, opts: &SolveOptions) -> Result<Solution, ProgramError> {
    program.validate()?;
    let f = match StdForm::build(program) {
        Reduction::Ready(f) => f,
        Reduction::Infeasible(base) => return Ok(Solution::assemble(program, Status::Infeasible, base, f64::NAN, 0)),
    };
    if f.n() == 0 {
        let x = f.base.clone();
        let ok = program.check_point(&x, opts.tol)?.passed;
        let status = if ok { Status::Optimal } else { Status::Infeasible };
        let obj = program.objective_value(&x);
        return Ok(Solution::assemble(program, status, x, obj, 0));
    }

    let (orig_a, orig_b) = (f.a_rows.clone(), f.b.clone());
    let mut scaled = StdForm {
        var_of: f.var_of.clone(),
        base: f.base.clone(),
        c: f.c.clone(),
        a_rows: f.a_rows.clone(),
        b: f.b.clone(),
        g_rows: f.g_rows.clone(),
        h: f.h.clone(),
        cone: f.cone.clone(),
    };
    let eq = ruiz(
        scaled.n(),
        &mut scaled.c,
        &mut scaled.a_rows,
        &mut scaled.b,
        &mut scaled.g_rows,
        &mut scaled.h,
        &f.cone,
        opts.scaling_sweeps,
    );
    let out = ipm(&scaled, opts);
    let it = &out.it;
    let tau = if out.status == Status::Optimal || it.tau > 0.0 { it.tau } else { 1.0 };
    let scale_x = |k: usize| eq.d[k] * it.x[k];
    let xc: Vec<f64> = match out.status {
        Status::Optimal => (0..scaled.n()).map(|k| scale_x(k) / tau).collect(),
        // Certificates are directions; report them unnormalized.
        _ => (0..scaled.n()).map(scale_x).collect(),
    };
    let mut x = f.expand(&xc);
    let fixed_obj: f64 = program.objective.iter().zip(&f.base).map(|(c, v)| c * v).sum();
    let dual = -(dot(&scaled.b, &it.y) + dot(&scaled.h, &it.z)) / (tau * eq.cost) + fixed_obj + program.objective_constant;

    let mut status = out.status;
    if status == Status::Optimal {
        if let Some(px) = project_equalities(&f, &orig_a, &orig_b, &x) {
            let before = program.check_point(&x, opts.tol)?.worst;
            let after = program.check_point(&px, opts.tol)?.worst;
            if after <= before {
                x = px;
            }
        }
        if !program.check_point(&x, opts.tol)?.passed {
            status = Status::NumericalFailure;
        }
    }
    Ok(Solution::assemble(program, status, x, dual, out.iterations))
}
