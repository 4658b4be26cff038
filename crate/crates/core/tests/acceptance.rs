//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits nonzero if any of them fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use relaxflow::acpf::identities::{draws, sweep, SweepRanges};
use relaxflow::acpf::newton::{newton_solve, Controls, NewtonOptions};
use relaxflow::acpf::{flows, operational_violations, simple};
use relaxflow::bijection::verify_equivalence;
use relaxflow::case_io::{self, parse_matpower, read_native, to_network, write_native, CaseFormat, LoadError};
use relaxflow::coneprog::{self, ConeProgram, SolveOptions, SparseRow, Status};
use relaxflow::relax::{
    build_cdf_e, build_cdf_e_real, build_cdf_simple, build_soc_e, build_soc_simple, embed_point, lift_ac_solution,
    Objective, Relaxation,
};
use relaxflow::Network;

const FIXTURES: [&str; 5] = ["case2", "case3", "case5", "case14", "case30"];

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.m"))
}

fn fixture(name: &str) -> Network {
    case_io::load(&fixture_path(name), None).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn solve_cost(net: &Network, relaxation: Relaxation) -> Result<f64, String> {
    let (prog, _) = relaxation.build(net, &Objective::Cost).map_err(|e| e.to_string())?;
    let sol = coneprog::solve(&prog, &SolveOptions::default()).map_err(|e| e.to_string())?;
    check(sol.status == Status::Optimal, || format!("{} {relaxation:?}: status {}", net.name, sol.status))?;
    Ok(sol.objective)
}

/// Identity sweep over the stated sampling box.
fn identities() -> Result<String, String> {
    let report = sweep(42, 10_000, SweepRanges::default());
    for (name, v) in report.entries() {
        check(v < 1e-11, || format!("{name} residual {v:.3e}"))?;
    }
    Ok(format!("10000 draws, worst relative residual {:.2e}", report.worst()))
}

/// Extended evaluators against the simple forms on degenerate branches, and
/// extended builders against simple builders on degenerate fixtures.
fn degeneration() -> Result<String, String> {
    let mut worst = 0.0f64;
    for d in draws(7, 5_000, SweepRanges::default().simple()) {
        let (vi, vj, p) = (d.vi, d.vj, &d.branch);
        let s_ij = flows::branch_flow_from(vi, vj, p);
        let rel_c = |a: num_complex::Complex64, b: num_complex::Complex64| (a - b).norm() / a.norm().max(b.norm()).max(1.0);
        let pairs = [
            rel_c(s_ij, simple::flow_from(vi, vj, p.y)),
            rel_c(flows::branch_flow_to(vi, vj, p), simple::flow_to(vi, vj, p.y)),
            rel_c(flows::branch_current(vi, vj, p), simple::current(vi, vj, p.y)),
            rel(flows::abs_sq_current_rhs(vi, vj, s_ij, p), simple::abs_sq_current(vi, vj, p.y)),
            rel_c(flows::loss_identity_residual(vi, vj, p), simple::loss_residual(vi, vj, p.y)),
            rel(flows::voltage_drop_identity_residual(vi, vj, p), simple::drop_residual(vi, vj, p.y)),
            rel_c(flows::vv_product(vi.norm_sqr(), s_ij, p), simple::vv_product(vi.norm_sqr(), s_ij, p.z)),
        ];
        for v in pairs {
            worst = worst.max(v);
        }
    }
    check(worst <= 1e-13, || format!("evaluator disagreement {worst:.3e}"))?;
    for name in FIXTURES {
        let net = fixture(name).degenerate();
        for objective in [Objective::Feasibility, Objective::Cost] {
            let canon = |r: Result<(ConeProgram, _), _>| r.map(|(p, _)| p.canonical()).map_err(|e: relaxflow::relax::RelaxError| e.to_string());
            let soc = canon(build_soc_e(&net, &objective))?;
            check(soc == canon(build_soc_simple(&net, &objective))?, || format!("{name}: soc builders differ"))?;
            let cdf = canon(build_cdf_simple(&net, &objective))?;
            check(cdf == canon(build_cdf_e(&net, &objective))?, || format!("{name}: cdf builders differ"))?;
            check(cdf == canon(build_cdf_e_real(&net, &objective))?, || format!("{name}: cdf-real and simple differ"))?;
        }
    }
    Ok(format!("evaluators within {worst:.2e}; builders identical on {} fixtures", FIXTURES.len()))
}

/// Newton operating points lifted into both spaces pass the extended programs.
fn soundness() -> Result<String, String> {
    let mut worst = 0.0f64;
    for name in FIXTURES {
        let net = fixture(name);
        let sol = newton_solve(&net, &Controls::from_network(&net), NewtonOptions::default())
            .map_err(|e| format!("{name}: {e}"))?;
        let ops = operational_violations(&net, &sol.state, 1e-9).map_err(|e| e.to_string())?;
        check(ops.is_empty(), || format!("{name}: operating point violates {:?}", ops[0]))?;
        for relaxation in [Relaxation::Soc, Relaxation::Cdf, Relaxation::CdfReal] {
            let (prog, map) = relaxation.build(&net, &Objective::Cost).map_err(|e| e.to_string())?;
            let point = lift_ac_solution(&net, &sol.state, relaxation.space()).map_err(|e| e.to_string())?;
            let x = embed_point(&map, &point).map_err(|e| e.to_string())?;
            let report = prog.check_point(&x, 1e-8).map_err(|e| e.to_string())?;
            check(report.passed, || {
                format!("{name} {relaxation:?}: {} at {:.3e}", report.worst_label.clone().unwrap_or_default(), report.worst)
            })?;
            worst = worst.max(report.worst);
        }
    }
    Ok(format!("5 fixtures x 3 programs, worst violation {worst:.2e}"))
}

/// Bijection sampling plus the cross-solve objective check.
fn equivalence() -> Result<String, String> {
    let mut worst = 0.0f64;
    let mut round_trip = 0.0f64;
    let mut amplification = 0.0f64;
    let mut objective_gap = 0.0f64;
    for name in FIXTURES {
        let net = fixture(name);
        let report = verify_equivalence(&net, 32, 1e-7, 2024).map_err(|e| e.to_string())?;
        check(report.passed, || {
            let f = report.failures.first();
            format!("{name}: {:?}", f.map(|f| (&f.label, f.violation)))
        })?;
        for d in [&report.cdf_to_soc, &report.soc_to_cdf] {
            check(d.accepted > 0, || format!("{name}: no accepted samples for {:?}", d.direction))?;
            worst = worst.max(d.worst);
            round_trip = round_trip.max(d.round_trip);
            amplification = amplification.max(d.amplification);
        }
        let soc = solve_cost(&net, Relaxation::Soc)?;
        let cdf = solve_cost(&net, Relaxation::Cdf)?;
        let gap = rel(soc, cdf);
        check(gap <= 1e-6, || format!("{name}: objectives {soc} vs {cdf}"))?;
        objective_gap = objective_gap.max(gap);
    }
    Ok(format!(
        "worst mapped violation {worst:.2e}, round trip {round_trip:.2e}, amplification {amplification:.2e}, objective gap {objective_gap:.2e}"
    ))
}

fn row_values(rows: &[SparseRow], x: &[f64], out: &mut Vec<f64>) {
    out.extend(rows.iter().map(|r| r.eval(x) - r.rhs));
}

/// Complex and real-coefficient CDF programs: residuals and solved objectives.
fn model7() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut objective_gap = 0.0f64;
    for name in FIXTURES {
        let net = fixture(name);
        let (a, _) = build_cdf_e(&net, &Objective::Cost).map_err(|e| e.to_string())?;
        let (b, _) = build_cdf_e_real(&net, &Objective::Cost).map_err(|e| e.to_string())?;
        let labels = |p: &ConeProgram| p.equalities.iter().chain(&p.inequalities).map(|r| r.label.clone()).collect::<Vec<_>>();
        check(labels(&a) == labels(&b) && a.var_names == b.var_names, || format!("{name}: layouts differ"))?;
        check(a.rsoc == b.rsoc && a.soc == b.soc, || format!("{name}: cones differ"))?;
        let (mut ra, mut rb) = (Vec::new(), Vec::new());
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..a.n_vars).map(|_| rng.random_range(-2.0..2.0)).collect();
            ra.clear();
            rb.clear();
            row_values(&a.equalities, &x, &mut ra);
            row_values(&a.inequalities, &x, &mut ra);
            row_values(&b.equalities, &x, &mut rb);
            row_values(&b.inequalities, &x, &mut rb);
            for (u, v) in ra.iter().zip(&rb) {
                worst = worst.max((u - v).abs());
            }
        }
        check(worst <= 1e-12, || format!("{name}: residual difference {worst:.3e}"))?;
        let ca = solve_cost(&net, Relaxation::Cdf)?;
        let cb = solve_cost(&net, Relaxation::CdfReal)?;
        let gap = rel(ca, cb);
        check(gap <= 1e-8, || format!("{name}: objectives {ca} vs {cb}"))?;
        objective_gap = objective_gap.max(gap);
    }
    Ok(format!("residual difference {worst:.2e} over 50000 points, objective gap {objective_gap:.2e}"))
}

/// Relaxation optima never exceed the cost of the Newton operating point.
fn lower_bound() -> Result<String, String> {
    let mut margins = Vec::new();
    for name in FIXTURES {
        let net = fixture(name);
        let sol = newton_solve(&net, &Controls::from_network(&net), NewtonOptions::default())
            .map_err(|e| format!("{name}: {e}"))?;
        let p: Vec<f64> = sol.state.generation.iter().map(|s| s.re).collect();
        let ac = net.generation_cost(&p);
        for relaxation in [Relaxation::Soc, Relaxation::Cdf, Relaxation::CdfReal] {
            let lb = solve_cost(&net, relaxation)?;
            check(lb <= ac + 1e-7 * (1.0 + ac.abs()), || format!("{name} {relaxation:?}: {lb} above AC cost {ac}"))?;
        }
        margins.push(format!("{name} {:.1}%", 100.0 * (ac - solve_cost(&net, Relaxation::Soc)?) / ac.abs().max(1.0)));
    }
    Ok(format!("gap to AC point cost: {}", margins.join(", ")))
}

/// Random block of at most three variables with a known interior point.
struct Block {
    prog: ConeProgram,
    center: Vec<f64>,
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, infeasible: bool) -> Block {
    let mut prog = ConeProgram::new();
    let mut center = Vec::with_capacity(n);
    for j in 0..n {
        let lo = rng.random_range(-2.0..-0.5);
        let hi = rng.random_range(0.5..2.0);
        prog.add_var(format!("x{j}"), lo, hi);
        prog.objective[j] = rng.random_range(-1.0..1.0);
        center.push(rng.random_range(lo * 0.5..hi * 0.5));
    }
    let raise = |prog: &mut ConeProgram, center: &mut Vec<f64>, side: usize, norm: f64, rng: &mut ChaCha8Rng| {
        center[side] = norm + rng.random_range(0.1..0.5);
        prog.lower[side] = 0.0;
        prog.upper[side] = prog.upper[side].max(center[side] + 0.5);
    };
    if n == 3 && rng.random_bool(0.4) {
        let norm = center[2].abs();
        raise(&mut prog, &mut center, 0, norm, rng);
        raise(&mut prog, &mut center, 1, norm, rng);
        prog.add_rsoc("rsoc", vec![2], 0, 1);
    } else if n >= 2 && rng.random_bool(0.7) {
        let xs: Vec<usize> = (1..n).collect();
        let norm = xs.iter().map(|&j| center[j] * center[j]).sum::<f64>().sqrt();
        raise(&mut prog, &mut center, 0, norm, rng);
        prog.add_soc("soc", 0, xs);
    }
    for r in 0..rng.random_range(0..=2) {
        let coef: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect();
        let at: f64 = coef.iter().map(|&(j, v)| v * center[j]).sum();
        prog.add_le(SparseRow::new(format!("ineq{r}"), coef, at + rng.random_range(0.05..0.5)));
    }
    if n >= 2 && rng.random_bool(0.25) {
        let coef: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect();
        let at: f64 = coef.iter().map(|&(j, v)| v * center[j]).sum();
        prog.add_eq(SparseRow::new("eq", coef, at));
    }
    if infeasible {
        let j = rng.random_range(0..n);
        let v = (prog.lower[j] + prog.upper[j]) / 2.0;
        prog.add_le(SparseRow::new("above", [(j, -1.0)], -(v + 0.3)));
        prog.add_le(SparseRow::new("below", [(j, 1.0)], v - 0.3));
    }
    Block { prog, center }
}

/// Places independent blocks side by side in one program.
fn merge(blocks: &[Block]) -> ConeProgram {
    let mut out = ConeProgram::new();
    for (b, blk) in blocks.iter().enumerate() {
        let off = out.n_vars;
        let p = &blk.prog;
        for j in 0..p.n_vars {
            let v = out.add_var(format!("b{b}_{}", p.var_names[j]), p.lower[j], p.upper[j]);
            out.objective[v] = p.objective[j];
        }
        let shift = |r: &SparseRow| SparseRow::new(format!("b{b}_{}", r.label), r.entries.iter().map(|&(j, v)| (j + off, v)), r.rhs);
        p.equalities.iter().for_each(|r| out.add_eq(shift(r)));
        p.inequalities.iter().for_each(|r| out.add_le(shift(r)));
        for c in &p.soc {
            out.add_soc(format!("b{b}_{}", c.label), c.t + off, c.x.iter().map(|j| j + off).collect());
        }
        for c in &p.rsoc {
            out.add_rsoc(format!("b{b}_{}", c.label), c.u.iter().map(|j| j + off).collect(), c.a + off, c.b + off);
        }
    }
    out
}

fn strictly_feasible_ignoring_eq(p: &ConeProgram, x: &[f64]) -> bool {
    (0..p.n_vars).all(|j| x[j] >= p.lower[j] && x[j] <= p.upper[j])
        && p.inequalities.iter().all(|r| r.eval(x) <= r.rhs)
        && p.soc.iter().all(|c| c.x.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt() <= x[c.t])
        && p.rsoc.iter().all(|c| c.u.iter().map(|&j| x[j] * x[j]).sum::<f64>() <= x[c.a] * x[c.b])
}

/// Orthonormal basis of the null space of the equality rows.
fn null_basis(p: &ConeProgram) -> DMatrix<f64> {
    let n = p.n_vars;
    if p.equalities.is_empty() {
        return DMatrix::identity(n, n);
    }
    let mut a = DMatrix::zeros(n, n);
    for (r, row) in p.equalities.iter().enumerate() {
        for &(j, v) in &row.entries {
            a[(r, j)] = v;
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12).count();
    let rows: Vec<_> = (rank..n).map(|i| vt.row(i).transpose()).collect();
    DMatrix::from_columns(&rows)
}

/// Zooming grid search over the null space of the equalities around `origin`.
/// Returns the best feasible objective found, or `None` when no grid point is
/// feasible.
fn grid_oracle(p: &ConeProgram, origin: &[f64]) -> Option<f64> {
    let basis = null_basis(p);
    let d = basis.ncols();
    let objective = |x: &[f64]| p.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
    // Without equalities the grid is clipped to the box so that its faces are
    // reachable exactly.
    let clip = p.equalities.is_empty();
    let point = |t: &[f64]| -> Vec<f64> {
        (0..p.n_vars)
            .map(|i| {
                let v = origin[i] + (0..d).map(|k| basis[(i, k)] * t[k]).sum::<f64>();
                if clip {
                    v.clamp(p.lower[i], p.upper[i])
                } else {
                    v
                }
            })
            .collect()
    };
    if d == 0 {
        return strictly_feasible_ignoring_eq(p, origin).then(|| objective(origin));
    }
    let per_dim = ((200_000f64).powf(1.0 / d as f64).floor() as usize).clamp(4, 61);
    let diameter = (0..p.n_vars).map(|j| (p.upper[j] - p.lower[j]).powi(2)).sum::<f64>().sqrt();
    let mut center = vec![0.0; d];
    let mut radius = diameter;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; d];
    let mut t = vec![0.0; d];
    let mut levels = 0;
    while radius > 1e-9 {
        idx.fill(0);
        loop {
            for k in 0..d {
                t[k] = center[k] - radius + 2.0 * radius * idx[k] as f64 / (per_dim - 1) as f64;
            }
            let x = point(&t);
            if strictly_feasible_ignoring_eq(p, &x) {
                let v = objective(&x);
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, t.clone()));
                }
            }
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < per_dim {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        // Recenter on the best point; shrink only once it lies inside the
        // current window.
        let mut on_edge = false;
        match &best {
            Some((_, bt)) => {
                on_edge = bt.iter().zip(&center).any(|(b, c)| (b - c).abs() >= radius * (1.0 - 1e-9));
                center.clone_from(bt);
            }
            None if radius < diameter => return None,
            None => {}
        }
        levels += 1;
        if !on_edge || levels > 2000 {
            radius *= 0.7;
        }
    }
    best.map(|(v, _)| v)
}

/// Embedded solver against grid oracles on random programs of up to eight
/// variables. Each program is a union of independent blocks, so the oracle
/// searches each block's grid on its own and adds the optima.
fn solver_correctness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = SolveOptions::default();
    let mut worst_gap = 0.0f64;
    let mut optimal = 0;
    let mut infeasible = 0;
    let mut sizes = Vec::new();
    for k in 0..50 {
        let mut blocks = Vec::new();
        let mut n = 0;
        let target = rng.random_range(1..=8);
        while n < target {
            let size = rng.random_range(1..=3usize).min(target - n);
            let bad = k % 10 == 9 && blocks.is_empty();
            blocks.push(random_block(&mut rng, size, bad));
            n += size;
        }
        let prog = merge(&blocks);
        sizes.push(prog.n_vars);
        let sol = coneprog::solve(&prog, &opts).map_err(|e| format!("program {k}: {e}"))?;
        let oracle: Option<f64> = blocks.iter().map(|b| grid_oracle(&b.prog, &b.center)).sum();
        match (sol.status, oracle) {
            (Status::Optimal, Some(best)) => {
                let report = prog.check_point(&sol.x, 1e-7).map_err(|e| e.to_string())?;
                check(report.passed, || format!("program {k}: solution fails check at {:.3e}", report.worst))?;
                let gap = (sol.objective - best).abs();
                check(gap <= 1e-3, || format!("program {k}: solver {} vs grid {best}", sol.objective))?;
                worst_gap = worst_gap.max(gap);
                optimal += 1;
            }
            (Status::Infeasible, None) => infeasible += 1,
            (status, oracle) => return Err(format!("program {k}: solver {status}, grid {oracle:?}")),
        }
    }
    check(sizes.iter().any(|&n| n == 8), || "no eight-variable program drawn".into())?;
    Ok(format!("{optimal} optimal within {worst_gap:.2e} of grid, {infeasible} infeasible agreed"))
}

/// Flattens every number in a JSON document with its path.
fn numbers(v: &Value, path: String, out: &mut Vec<(String, f64)>) {
    match v {
        Value::Number(n) => out.push((path, n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| numbers(x, format!("{path}[{i}]"), out)),
        Value::Object(o) => o.iter().for_each(|(k, x)| numbers(x, format!("{path}.{k}"), out)),
        _ => {}
    }
}

const MALFORMED: [&str; 7] = [
    "function mpc = c\nmpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n",
    "function mpc = c\nmpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 abc 0 230 1 1.1 0.9;\n];\n",
    "function mpc = c\nmpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0;\n];\n",
    "function mpc = c\nmpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n2 1 0 0 0 0 1 1 0 230 1 1.1;\n];\n",
    "function mpc = c\nmpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n];\nmpc.gen = [\n7 0 0 10 -10 1 100 1 10 0;\n];\nmpc.branch = [\n];\n",
    "mpc.bus = [ 1 2 3 ",
    "\u{0}\u{1}garbage ; ] [ = =",
];

/// MATPOWER round trips through the native format, and malformed inputs fail
/// cleanly with a location.
fn parser() -> Result<String, String> {
    let mut values = 0;
    for name in FIXTURES {
        let text = std::fs::read_to_string(fixture_path(name)).map_err(|e| e.to_string())?;
        let doc = parse_matpower(&text).map_err(|e| format!("{name}: {e}"))?;
        let net = to_network(&doc).map_err(|e| format!("{name}: {e}"))?;
        let native = write_native(&net).map_err(|e| e.to_string())?;
        let back = read_native(&native).map_err(|e| format!("{name}: {e}"))?;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        numbers(&serde_json::to_value(&net).unwrap(), String::new(), &mut a);
        numbers(&serde_json::to_value(&back).unwrap(), String::new(), &mut b);
        check(a.len() == b.len(), || format!("{name}: value count changed"))?;
        for ((pa, va), (pb, vb)) in a.iter().zip(&b) {
            check(pa == pb && (va - vb).abs() <= 1e-12, || format!("{name}: {pa} {va} vs {pb} {vb}"))?;
        }
        values += a.len();
        // Per-unit conversion against the raw tables.
        for (bus, row) in net.buses.iter().zip(&doc.bus.rows) {
            check((bus.p_demand - row[2] / doc.base_mva).abs() <= 1e-12, || format!("{name}: bus {} demand", bus.id))?;
            check((bus.shunt_b - row[5] / doc.base_mva).abs() <= 1e-12, || format!("{name}: bus {} shunt", bus.id))?;
        }
        for (br, row) in net.branches.iter().zip(&doc.branch.rows) {
            let tap = if row[8] == 0.0 { 1.0 } else { row[8] };
            check(br.r == row[2] && br.x == row[3] && br.tap == tap, || format!("{name}: branch impedance or tap"))?;
            check((br.shift + row[9].to_radians()).abs() <= 1e-12, || format!("{name}: branch shift"))?;
        }
    }

    let mut located = 0;
    let bad = std::fs::read_to_string(fixture_path("bad_zero_impedance")).map_err(|e| e.to_string())?;
    let mut inputs: Vec<String> = MALFORMED.iter().map(|s| s.to_string()).collect();
    inputs.push(bad);
    // Byte-level damage to a real fixture.
    let base = std::fs::read_to_string(fixture_path("case14")).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let mut bytes = base.clone().into_bytes();
        for _ in 0..rng.random_range(1..6) {
            let at = rng.random_range(0..bytes.len());
            bytes[at] = b"[];=x-.0 \n"[rng.random_range(0..10)];
        }
        inputs.push(String::from_utf8_lossy(&bytes).into_owned());
    }
    let mut rejected = 0;
    for (i, text) in inputs.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(|| case_io::load_str(text, CaseFormat::Matpower)))
            .map_err(|_| format!("input {i} panicked"))?;
        if let Err(e) = outcome {
            rejected += 1;
            let msg = e.to_string();
            let has_location = match &e {
                LoadError::Parse(_) | LoadError::Convert(_) => {
                    msg.contains("line") || msg.contains("row") || msg.contains("mpc.") || msg.contains(':')
                }
                _ => true,
            };
            if i < MALFORMED.len() + 1 {
                check(has_location, || format!("input {i}: unlocated error {msg:?}"))?;
                located += 1;
            }
        } else {
            check(i >= MALFORMED.len() + 1, || format!("malformed input {i} accepted"))?;
        }
    }
    Ok(format!("{values} values round-tripped; {located} malformed inputs located; {rejected}/{} inputs rejected without panic", inputs.len()))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Result<String, String>,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "identity suite", limit: Duration::from_secs(5), run: identities },
        Criterion { id: 2, name: "degeneration", limit: Duration::from_secs(2), run: degeneration },
        Criterion { id: 3, name: "relaxation soundness", limit: Duration::from_secs(10), run: soundness },
        Criterion { id: 4, name: "bijection", limit: Duration::from_secs(60), run: equivalence },
        Criterion { id: 5, name: "real-coefficient cdf", limit: Duration::from_secs(30), run: model7 },
        Criterion { id: 6, name: "lower bound", limit: Duration::from_secs(60), run: lower_bound },
        Criterion { id: 7, name: "solver correctness", limit: Duration::from_secs(30), run: solver_correctness },
        Criterion { id: 8, name: "parser", limit: Duration::from_secs(60), run: parser },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let previous_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = catch_unwind(c.run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed <= c.limit {
                Ok(msg)
            } else {
                Err(format!("{msg}; over the {:?} limit", c.limit))
            }
        });
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {} {:<22} {tag} {:>8.2}s  {msg}", c.id, c.name, elapsed.as_secs_f64());
    }
    std::panic::set_hook(previous_hook);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
