//! Cone programs over linear rows, variable bounds, rotated and standard
//! second-order cones, with a point checker and an interior-point solver.
//!
//! A [`ConeProgram`] is
//!
//! ```text
//! minimize    cᵀx + c₀
//! subject to  a·x = b          (equalities)
//!             a·x ≤ b          (inequalities)
//!             l ≤ x ≤ u        (bounds, infinite allowed)
//!             Σ x_u² ≤ x_a·x_b (rotated cones, x_a, x_b ≥ 0)
//!             ‖x_x‖ ≤ x_t      (standard cones)
//! ```
//!
//! Row and cone labels follow `family[entity]`, e.g. `kcl_p[bus 3]`. The family
//! part keys the per-family summaries of [`VerifyReport`].

mod cones;
mod equilibrate;
mod kkt;
mod ldl;
mod ordering;
mod solver;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

pub use solver::solve;

/// Linear row `Σ coef·x_idx (= or ≤) rhs`. Entries are sorted by index with
/// duplicates summed and exact zeros dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseRow {
    pub label: String,
    pub entries: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn new(label: impl Into<String>, entries: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (k, v) in entries {
            *acc.entry(k).or_insert(0.0) += v;
        }
        Self { label: label.into(), entries: acc.into_iter().filter(|&(_, v)| v != 0.0).collect(), rhs }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(k, v)| v * x[k]).sum()
    }
}

/// `Σ x_u² ≤ x_a·x_b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsocBlock {
    pub label: String,
    pub u: Vec<usize>,
    pub a: usize,
    pub b: usize,
}

/// `‖x_x‖ ≤ x_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SocBlock {
    pub label: String,
    pub t: usize,
    pub x: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConeProgram {
    pub n_vars: usize,
    pub var_names: Vec<String>,
    /// Dense objective coefficients.
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub equalities: Vec<SparseRow>,
    pub inequalities: Vec<SparseRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rsoc: Vec<RsocBlock>,
    pub soc: Vec<SocBlock>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramError {
    #[error("{label}: index {index} out of range for {n_vars} variables")]
    IndexOutOfRange { label: String, index: usize, n_vars: usize },
    #[error("{label}: duplicate column {index}")]
    DuplicateColumn { label: String, index: usize },
    #[error("{label}: cone side variable {index} needs a nonnegative lower bound")]
    ConeSign { label: String, index: usize },
    #[error("variable {index}: lower bound {lower} exceeds upper bound {upper}")]
    EmptyBox { index: usize, lower: f64, upper: f64 },
    #[error("{what} has length {found}, expected {expected}")]
    Dimension { what: &'static str, found: usize, expected: usize },
    #[error("{label}: non-finite coefficient")]
    NonFinite { label: String },
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a variable and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.var_names.push(name.into());
        self.objective.push(0.0);
        self.lower.push(lower);
        self.upper.push(upper);
        self.n_vars += 1;
        self.n_vars - 1
    }

    pub fn add_eq(&mut self, row: SparseRow) {
        self.equalities.push(row);
    }

    pub fn add_le(&mut self, row: SparseRow) {
        self.inequalities.push(row);
    }

    pub fn add_rsoc(&mut self, label: impl Into<String>, u: Vec<usize>, a: usize, b: usize) {
        self.rsoc.push(RsocBlock { label: label.into(), u, a, b });
    }

    pub fn add_soc(&mut self, label: impl Into<String>, t: usize, x: Vec<usize>) {
        self.soc.push(SocBlock { label: label.into(), t, x });
    }

    /// Checks index ranges, duplicate columns, boxes and cone sign bounds.
    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.n_vars;
        for (what, len) in [
            ("var_names", self.var_names.len()),
            ("objective", self.objective.len()),
            ("lower", self.lower.len()),
            ("upper", self.upper.len()),
        ] {
            if len != n {
                return Err(ProgramError::Dimension { what, found: len, expected: n });
            }
        }
        let in_range = |label: &str, k: usize| {
            if k < n {
                Ok(())
            } else {
                Err(ProgramError::IndexOutOfRange { label: label.to_string(), index: k, n_vars: n })
            }
        };
        for row in self.equalities.iter().chain(&self.inequalities) {
            let mut prev = None;
            for &(k, v) in &row.entries {
                in_range(&row.label, k)?;
                if prev == Some(k) {
                    return Err(ProgramError::DuplicateColumn { label: row.label.clone(), index: k });
                }
                if !v.is_finite() {
                    return Err(ProgramError::NonFinite { label: row.label.clone() });
                }
                prev = Some(k);
            }
            if !row.rhs.is_finite() {
                return Err(ProgramError::NonFinite { label: row.label.clone() });
            }
        }
        for (k, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l > u || l.is_nan() || u.is_nan() {
                return Err(ProgramError::EmptyBox { index: k, lower: l, upper: u });
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.objective_constant.is_finite() {
            return Err(ProgramError::NonFinite { label: "objective".into() });
        }
        for c in &self.rsoc {
            for &k in c.u.iter().chain([&c.a, &c.b]) {
                in_range(&c.label, k)?;
            }
            for k in [c.a, c.b] {
                if !(self.lower[k] >= 0.0) {
                    return Err(ProgramError::ConeSign { label: c.label.clone(), index: k });
                }
            }
        }
        for c in &self.soc {
            for &k in c.x.iter().chain([&c.t]) {
                in_range(&c.label, k)?;
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.objective_constant
    }

    /// Evaluates every constraint at `x`.
    pub fn check_point(&self, x: &[f64], tol: f64) -> Result<VerifyReport, ProgramError> {
        if x.len() != self.n_vars {
            return Err(ProgramError::Dimension { what: "point", found: x.len(), expected: self.n_vars });
        }
        let mut res = Vec::new();
        for row in &self.equalities {
            let v = row.eval(x) - row.rhs;
            res.push(Residual { label: row.label.clone(), kind: ResidualKind::Equality, value: v, violation: v.abs() });
        }
        for row in &self.inequalities {
            let v = row.eval(x) - row.rhs;
            res.push(Residual { label: row.label.clone(), kind: ResidualKind::Inequality, value: v, violation: v.max(0.0) });
        }
        for (k, &xk) in x.iter().enumerate() {
            if self.lower[k].is_finite() {
                let v = self.lower[k] - xk;
                res.push(Residual {
                    label: format!("lower[{}]", self.var_names[k]),
                    kind: ResidualKind::Lower,
                    value: v,
                    violation: v.max(0.0),
                });
            }
            if self.upper[k].is_finite() {
                let v = xk - self.upper[k];
                res.push(Residual {
                    label: format!("upper[{}]", self.var_names[k]),
                    kind: ResidualKind::Upper,
                    value: v,
                    violation: v.max(0.0),
                });
            }
        }
        for c in &self.rsoc {
            let ab = x[c.a] * x[c.b];
            let v = c.u.iter().map(|&k| x[k] * x[k]).sum::<f64>() - ab;
            res.push(Residual {
                label: c.label.clone(),
                kind: ResidualKind::RotatedCone,
                value: v,
                violation: v.max(0.0) / ab.abs().max(1.0),
            });
        }
        for c in &self.soc {
            let t = x[c.t];
            let v = c.x.iter().map(|&k| x[k] * x[k]).sum::<f64>().sqrt() - t;
            res.push(Residual { label: c.label.clone(), kind: ResidualKind::Cone, value: v, violation: v.max(0.0) / t.abs().max(1.0) });
        }
        Ok(VerifyReport::from_residuals(res, tol))
    }

    /// Equivalent program with every rotated cone `(u, a, b)` replaced by the
    /// standard cone `‖(a − b, 2u)‖ ≤ a + b` over auxiliary variables tied to the
    /// originals by equality rows. A rotated cone with `a == b` becomes `‖u‖ ≤ a`
    /// directly. Original variables keep their indices.
    pub fn to_standard_soc(&self) -> ConeProgram {
        let mut out = self.clone();
        out.rsoc.clear();
        for c in &self.rsoc {
            if c.a == c.b {
                out.add_soc(c.label.clone(), c.a, c.u.clone());
                continue;
            }
            let t = out.add_var(format!("sum[{}]", c.label), 0.0, f64::INFINITY);
            out.add_eq(SparseRow::new(format!("aux_sum[{}]", c.label), [(t, 1.0), (c.a, -1.0), (c.b, -1.0)], 0.0));
            let d = out.add_var(format!("diff[{}]", c.label), f64::NEG_INFINITY, f64::INFINITY);
            out.add_eq(SparseRow::new(format!("aux_diff[{}]", c.label), [(d, 1.0), (c.a, -1.0), (c.b, 1.0)], 0.0));
            let mut xs = vec![d];
            for (k, &u) in c.u.iter().enumerate() {
                let w = out.add_var(format!("twice[{}][{k}]", c.label), f64::NEG_INFINITY, f64::INFINITY);
                out.add_eq(SparseRow::new(format!("aux_twice[{}][{k}]", c.label), [(w, 1.0), (u, -2.0)], 0.0));
                xs.push(w);
            }
            out.add_soc(c.label.clone(), t, xs);
        }
        out
    }

    /// Extends a point of `self` with the auxiliary values [`Self::to_standard_soc`] introduces.
    pub fn lift_to_standard(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for c in &self.rsoc {
            if c.a == c.b {
                continue;
            }
            out.push(x[c.a] + x[c.b]);
            out.push(x[c.a] - x[c.b]);
            out.extend(c.u.iter().map(|&u| 2.0 * x[u]));
        }
        out
    }

    /// Plain-text sparse listing.
    ///
    /// ```text
    /// relaxflow-cone-program 1
    /// vars <n>
    /// <index> <name> <lower> <upper> <objective>
    /// objective_constant <c0>
    /// eq <count>
    /// <label> <rhs> <nnz> (<index>:<coef>)*
    /// le <count>
    /// <label> <rhs> <nnz> (<index>:<coef>)*
    /// rsoc <count>
    /// <label> <a> <b> <len> <u indices>*
    /// soc <count>
    /// <label> <t> <len> <x indices>*
    /// ```
    ///
    /// Numbers use the shortest representation that round-trips.
    pub fn listing(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "relaxflow-cone-program 1");
        let _ = writeln!(s, "vars {}", self.n_vars);
        for k in 0..self.n_vars {
            let _ = writeln!(s, "{k} {} {:?} {:?} {:?}", self.var_names[k], self.lower[k], self.upper[k], self.objective[k]);
        }
        let _ = writeln!(s, "objective_constant {:?}", self.objective_constant);
        for (tag, rows) in [("eq", &self.equalities), ("le", &self.inequalities)] {
            let _ = writeln!(s, "{tag} {}", rows.len());
            for r in rows {
                let _ = write!(s, "{} {:?} {}", r.label, r.rhs, r.entries.len());
                for (k, v) in &r.entries {
                    let _ = write!(s, " {k}:{v:?}");
                }
                s.push('\n');
            }
        }
        let _ = writeln!(s, "rsoc {}", self.rsoc.len());
        for c in &self.rsoc {
            let _ = write!(s, "{} {} {} {}", c.label, c.a, c.b, c.u.len());
            for k in &c.u {
                let _ = write!(s, " {k}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "soc {}", self.soc.len());
        for c in &self.soc {
            let _ = write!(s, "{} {} {}", c.label, c.t, c.x.len());
            for k in &c.x {
                let _ = write!(s, " {k}");
            }
            s.push('\n');
        }
        s
    }

    /// Order-independent form keyed by variable names. Row labels are ignored.
    pub fn canonical(&self) -> CanonicalForm {
        let name = |k: usize| self.var_names[k].clone();
        let rows = |rows: &[SparseRow]| {
            let mut out: Vec<CanonicalRow> = rows
                .iter()
                .map(|r| {
                    let mut entries: Vec<(String, u64)> = r.entries.iter().map(|&(k, v)| (name(k), bits(v))).collect();
                    entries.sort();
                    CanonicalRow { entries, rhs: bits(r.rhs) }
                })
                .collect();
            out.sort();
            out
        };
        let mut vars: Vec<(String, u64, u64, u64)> = (0..self.n_vars)
            .map(|k| (name(k), bits(self.lower[k]), bits(self.upper[k]), bits(self.objective[k])))
            .collect();
        vars.sort();
        let mut rsoc: Vec<(Vec<String>, String, String)> = self
            .rsoc
            .iter()
            .map(|c| {
                let mut u: Vec<String> = c.u.iter().map(|&k| name(k)).collect();
                u.sort();
                (u, name(c.a), name(c.b))
            })
            .collect();
        rsoc.sort();
        let mut soc: Vec<(String, Vec<String>)> = self
            .soc
            .iter()
            .map(|c| {
                let mut x: Vec<String> = c.x.iter().map(|&k| name(k)).collect();
                x.sort();
                (name(c.t), x)
            })
            .collect();
        soc.sort();
        CanonicalForm {
            vars,
            objective_constant: bits(self.objective_constant),
            equalities: rows(&self.equalities),
            inequalities: rows(&self.inequalities),
            rsoc,
            soc,
        }
    }
}

/// Bit pattern with both zeros identified.
fn bits(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CanonicalRow {
    pub entries: Vec<(String, u64)>,
    pub rhs: u64,
}

/// Result of [`ConeProgram::canonical`]. Coefficients are compared bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalForm {
    /// `(name, lower, upper, objective)` sorted by name.
    pub vars: Vec<(String, u64, u64, u64)>,
    pub objective_constant: u64,
    pub equalities: Vec<CanonicalRow>,
    pub inequalities: Vec<CanonicalRow>,
    pub rsoc: Vec<(Vec<String>, String, String)>,
    pub soc: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Equality,
    Inequality,
    Lower,
    Upper,
    RotatedCone,
    Cone,
}

/// Signed residual of one constraint. `violation` is the nonnegative amount
/// compared against the tolerance; cone violations are relative to
/// `max(1, |x_a·x_b|)` (rotated) or `max(1, |x_t|)` (standard).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub label: String,
    pub kind: ResidualKind,
    pub value: f64,
    pub violation: f64,
}

impl Residual {
    pub fn family(&self) -> &str {
        family_of(&self.label)
    }
}

/// Part of a label before the first `[`.
pub fn family_of(label: &str) -> &str {
    label.split('[').next().unwrap_or(label)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub tol: f64,
    pub passed: bool,
    pub worst: f64,
    pub worst_label: Option<String>,
    /// Worst violation per constraint family.
    pub families: BTreeMap<String, f64>,
    pub residuals: Vec<Residual>,
}

impl VerifyReport {
    pub fn from_residuals(residuals: Vec<Residual>, tol: f64) -> Self {
        let mut worst = 0.0;
        let mut worst_label = None;
        let mut families: BTreeMap<String, f64> = BTreeMap::new();
        let mut passed = true;
        for r in &residuals {
            let fam = families.entry(r.family().to_string()).or_insert(0.0);
            *fam = fam.max(r.violation);
            // NaN never passes.
            if !(r.violation <= tol) {
                passed = false;
            }
            if r.violation > worst || (r.violation.is_nan() && !f64::is_nan(worst)) {
                worst = r.violation;
                worst_label = Some(r.label.clone());
            }
        }
        Self { tol, passed, worst, worst_label, families, residuals }
    }

    /// Largest violation among residuals of one kind.
    pub fn worst_of(&self, kind: ResidualKind) -> f64 {
        self.residuals.iter().filter(|r| r.kind == kind).map(|r| r.violation).fold(0.0, f64::max)
    }

    /// Residuals above tolerance, worst first.
    pub fn failures(&self) -> Vec<&Residual> {
        let mut out: Vec<&Residual> = self.residuals.iter().filter(|r| !(r.violation <= self.tol)).collect();
        out.sort_by(|a, b| b.violation.total_cmp(&a.violation));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration-limit",
            Status::NumericalFailure => "numerical-failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Feasibility tolerance an optimal point must meet under [`ConeProgram::check_point`].
    pub tol: f64,
    pub max_iter: usize,
    /// Ruiz equilibration sweeps.
    pub scaling_sweeps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 100, scaling_sweeps: 10 }
    }
}

/// Solver result. Residual fields are recomputed from `x` on the original
/// program.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Dual objective bound of the final iterate.
    pub dual_objective: f64,
    pub max_eq_residual: f64,
    pub max_ineq_violation: f64,
    pub max_cone_violation: f64,
    pub iterations: usize,
}

impl Solution {
    pub(crate) fn assemble(program: &ConeProgram, status: Status, x: Vec<f64>, dual_objective: f64, iterations: usize) -> Self {
        let report = program.check_point(&x, f64::INFINITY).expect("solver returns full-length points");
        Self {
            status,
            objective: program.objective_value(&x),
            dual_objective,
            max_eq_residual: report.worst_of(ResidualKind::Equality),
            max_ineq_violation: report
                .worst_of(ResidualKind::Inequality)
                .max(report.worst_of(ResidualKind::Lower))
                .max(report.worst_of(ResidualKind::Upper)),
            max_cone_violation: report.worst_of(ResidualKind::RotatedCone).max(report.worst_of(ResidualKind::Cone)),
            x,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn max_violation(&self) -> f64 {
        self.max_eq_residual.max(self.max_ineq_violation).max(self.max_cone_violation)
    }
}
