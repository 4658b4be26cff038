//! Convex relaxations of the extended AC power flow as cone programs.
//!
//! Two lifted spaces are supported:
//!
//! - W-space: `W_i = |V_i|²` per bus and `W_ij = V_iV_j*` per branch, used by
//!   the SOC relaxation ([`build_soc_e`]).
//! - L-space: `W_i` per bus and the squared from-end current `L_ij` per branch,
//!   used by the Convex DistFlow relaxation ([`build_cdf_e`] and its real-number
//!   twin [`build_cdf_e_real`]).
//!
//! Both share bus voltages squared, arc flows `S_ij = p + iq` on both ends of
//! every branch and generator dispatch. Complex equalities are split into a
//! real row and an imaginary row. Every builder returns a [`VariableMap`] that
//! locates each modeled quantity inside the program's variable vector.
//!
//! The simple builders [`build_soc_simple`] and [`build_cdf_simple`] ignore
//! line charging, transformers and bus shunts; they exist so that the extended
//! builders can be compared against them on degenerate networks.

mod cdf;
mod soc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acpf::{abs_sq_current_rhs, ACState, StateError};
use crate::coneprog::{ConeProgram, SparseRow};
use crate::netmodel::{BranchParams, ModelError, Network, Topology};

pub use cdf::{build_cdf_e, build_cdf_e_real, build_cdf_simple};
pub use soc::{build_soc_e, build_soc_simple};

/// Lifted variable space of a relaxation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Space {
    /// Voltage products `W_ij` per branch.
    W,
    /// Squared currents `L_ij` per branch.
    L,
}

/// Relaxation family, used by front ends to pick a builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relaxation {
    Soc,
    Cdf,
    CdfReal,
}

impl Relaxation {
    pub fn space(self) -> Space {
        match self {
            Relaxation::Soc => Space::W,
            Relaxation::Cdf | Relaxation::CdfReal => Space::L,
        }
    }

    pub fn build(self, network: &Network, objective: &Objective) -> Result<(ConeProgram, VariableMap), RelaxError> {
        match self {
            Relaxation::Soc => build_soc_e(network, objective),
            Relaxation::Cdf => build_cdf_e(network, objective),
            Relaxation::CdfReal => build_cdf_e_real(network, objective),
        }
    }
}

/// Linear weights over the coordinates both spaces share. The real part of a
/// complex weight multiplies `p`, the imaginary part multiplies `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedWeights {
    pub w: Vec<f64>,
    pub s_from: Vec<Complex64>,
    pub s_to: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Objective {
    /// Zero objective.
    #[default]
    Feasibility,
    /// Total generation cost. Quadratic terms go through rotated-cone epigraphs.
    Cost,
    /// Linear objective over `W_i`, `S_ij`, `S_ji`.
    Shared(SharedWeights),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("generator {0} has a negative quadratic cost coefficient")]
    NonConvexCost(usize),
    #[error("{what}: found {found}, expected {expected}")]
    Dimension { what: &'static str, found: usize, expected: usize },
    #[error("point lives in {found:?}-space, expected {expected:?}-space")]
    WrongSpace { found: Space, expected: Space },
}

/// Program indices of an auxiliary `W_i/|T|²` variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledVoltage {
    pub index: usize,
    pub bus: usize,
    pub scale: f64,
}

/// Epigraph of a quadratic cost term: `p² ≤ value·scale`, `scale` fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Epigraph {
    pub value: usize,
    pub scale: usize,
    /// Quadratic coefficient in per-unit: `value = quad·p²` on the boundary.
    pub quad: f64,
}

/// Where each modeled quantity lives in the program's variable vector.
/// Complex quantities map to `(real index, imaginary index)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableMap {
    pub space: Space,
    pub n_vars: usize,
    /// `W_i` per bus position.
    pub w: Vec<usize>,
    /// `W_ij` per branch; empty in L-space.
    pub w_branch: Vec<(usize, usize)>,
    /// `L_ij` per branch; empty in W-space.
    pub l: Vec<usize>,
    pub s_from: Vec<(usize, usize)>,
    pub s_to: Vec<(usize, usize)>,
    pub generation: Vec<(usize, usize)>,
    /// Fixed thermal limit auxiliary and its value, per branch.
    pub thermal: Vec<Option<(usize, f64)>>,
    /// `W_i/|T|²` auxiliary per branch, present when `|T| ≠ 1` in L-space.
    pub scaled_w: Vec<Option<ScaledVoltage>>,
    pub epigraph: Vec<Option<Epigraph>>,
}

impl VariableMap {
    /// Every program index the map refers to, in map order.
    pub fn indices(&self) -> Vec<usize> {
        let mut out = self.w.clone();
        for &(a, b) in self.w_branch.iter().chain(&self.s_from).chain(&self.s_to).chain(&self.generation) {
            out.push(a);
            out.push(b);
        }
        out.extend(&self.l);
        out.extend(self.thermal.iter().flatten().map(|t| t.0));
        out.extend(self.scaled_w.iter().flatten().map(|s| s.index));
        for e in self.epigraph.iter().flatten() {
            out.push(e.value);
            out.push(e.scale);
        }
        out
    }
}

/// Values of the modeled quantities of one relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxPoint {
    pub space: Space,
    pub w: Vec<f64>,
    /// W-space only.
    pub w_branch: Vec<Complex64>,
    /// L-space only.
    pub l: Vec<f64>,
    pub s_from: Vec<Complex64>,
    pub s_to: Vec<Complex64>,
    pub generation: Vec<Complex64>,
}

impl RelaxPoint {
    /// Checks vector lengths against the network and the space.
    pub fn check_shape(&self, network: &Network) -> Result<(), RelaxError> {
        let nb = network.branches.len();
        let (wb, l) = match self.space {
            Space::W => (nb, 0),
            Space::L => (0, nb),
        };
        for (what, found, expected) in [
            ("bus values", self.w.len(), network.buses.len()),
            ("voltage products", self.w_branch.len(), wb),
            ("squared currents", self.l.len(), l),
            ("from flows", self.s_from.len(), nb),
            ("to flows", self.s_to.len(), nb),
            ("generator outputs", self.generation.len(), network.generators.len()),
        ] {
            if found != expected {
                return Err(RelaxError::Dimension { what, found, expected });
            }
        }
        Ok(())
    }

    pub(crate) fn expect_space(&self, expected: Space) -> Result<(), RelaxError> {
        if self.space == expected {
            Ok(())
        } else {
            Err(RelaxError::WrongSpace { found: self.space, expected })
        }
    }
}

/// Lifts an AC state into the given space: `W_i = |V_i|²`, `W_ij = V_iV_j*`,
/// and `L_ij` from the extended squared-current expression.
pub fn lift_ac_solution(network: &Network, state: &ACState, space: Space) -> Result<RelaxPoint, RelaxError> {
    let topo = Topology::of(network)?;
    let params = network.branch_params()?;
    let shape = [
        ("voltages", state.voltages.len(), network.buses.len()),
        ("branch flows", state.flows.len(), network.branches.len()),
        ("generator outputs", state.generation.len(), network.generators.len()),
    ];
    for (what, found, expected) in shape {
        if found != expected {
            return Err(StateError::Shape { what, found, expected }.into());
        }
    }
    let v = &state.voltages;
    let mut point = RelaxPoint {
        space,
        w: v.iter().map(|v| v.norm_sqr()).collect(),
        w_branch: Vec::new(),
        l: Vec::new(),
        s_from: state.flows.iter().map(|f| f.from).collect(),
        s_to: state.flows.iter().map(|f| f.to).collect(),
        generation: state.generation.clone(),
    };
    for (k, &(f, t)) in topo.ends.iter().enumerate() {
        match space {
            Space::W => point.w_branch.push(v[f] * v[t].conj()),
            Space::L => point.l.push(abs_sq_current_rhs(v[f], v[t], state.flows[k].from, &params[k])),
        }
    }
    Ok(point)
}

/// Reads the modeled quantities out of a solver vector.
pub fn extract_point(map: &VariableMap, x: &[f64]) -> Result<RelaxPoint, RelaxError> {
    if x.len() != map.n_vars {
        return Err(RelaxError::Dimension { what: "solver vector", found: x.len(), expected: map.n_vars });
    }
    let c = |&(a, b): &(usize, usize)| Complex64::new(x[a], x[b]);
    Ok(RelaxPoint {
        space: map.space,
        w: map.w.iter().map(|&k| x[k]).collect(),
        w_branch: map.w_branch.iter().map(c).collect(),
        l: map.l.iter().map(|&k| x[k]).collect(),
        s_from: map.s_from.iter().map(c).collect(),
        s_to: map.s_to.iter().map(c).collect(),
        generation: map.generation.iter().map(c).collect(),
    })
}

/// Writes a point into a solver vector. Auxiliaries take their implied values:
/// fixed limits, `W_i/|T|²`, and tight cost epigraphs.
pub fn embed_point(map: &VariableMap, point: &RelaxPoint) -> Result<Vec<f64>, RelaxError> {
    point.expect_space(map.space)?;
    let check = |what, found: usize, expected: usize| {
        if found == expected {
            Ok(())
        } else {
            Err(RelaxError::Dimension { what, found, expected })
        }
    };
    check("bus values", point.w.len(), map.w.len())?;
    check("voltage products", point.w_branch.len(), map.w_branch.len())?;
    check("squared currents", point.l.len(), map.l.len())?;
    check("from flows", point.s_from.len(), map.s_from.len())?;
    check("to flows", point.s_to.len(), map.s_to.len())?;
    check("generator outputs", point.generation.len(), map.generation.len())?;

    let mut x = vec![0.0; map.n_vars];
    let mut put = |&(a, b): &(usize, usize), v: Complex64| {
        x[a] = v.re;
        x[b] = v.im;
    };
    for (k, v) in map.w_branch.iter().zip(&point.w_branch) {
        put(k, *v);
    }
    for (k, v) in map.s_from.iter().zip(&point.s_from) {
        put(k, *v);
    }
    for (k, v) in map.s_to.iter().zip(&point.s_to) {
        put(k, *v);
    }
    for (k, v) in map.generation.iter().zip(&point.generation) {
        put(k, *v);
    }
    for (&k, &v) in map.w.iter().zip(&point.w) {
        x[k] = v;
    }
    for (&k, &v) in map.l.iter().zip(&point.l) {
        x[k] = v;
    }
    for &(k, v) in map.thermal.iter().flatten() {
        x[k] = v;
    }
    for s in map.scaled_w.iter().flatten() {
        x[s.index] = point.w[s.bus] * s.scale;
    }
    for (g, e) in map.epigraph.iter().enumerate() {
        if let Some(e) = e {
            let p = point.generation[g].re;
            x[e.value] = e.quad * p * p;
            x[e.scale] = 1.0 / e.quad;
        }
    }
    Ok(x)
}

pub(crate) fn bus_tag(network: &Network, k: usize) -> String {
    format!("bus {}", network.buses[k].id)
}

pub(crate) fn branch_tag(k: usize) -> String {
    format!("branch {k}")
}

/// Splits `Σ c_k x_k = rhs` with complex `c_k` over real `x_k` into its real and
/// imaginary rows.
pub(crate) fn complex_rows(
    re_label: String,
    im_label: String,
    entries: &[(usize, Complex64)],
    rhs: Complex64,
) -> (SparseRow, SparseRow) {
    (
        SparseRow::new(re_label, entries.iter().map(|&(k, c)| (k, c.re)), rhs.re),
        SparseRow::new(im_label, entries.iter().map(|&(k, c)| (k, c.im)), rhs.im),
    )
}

/// Program under construction with the variables and rows both relaxations
/// share.
pub(crate) struct Frame<'a> {
    pub net: &'a Network,
    pub topo: Topology,
    pub params: Vec<BranchParams>,
    pub prog: ConeProgram,
    pub map: VariableMap,
}

impl<'a> Frame<'a> {
    /// Validates the network and adds `W_i`, the per-branch lifted variables,
    /// arc flows and generator outputs with their bounds.
    pub fn new(net: &'a Network, space: Space) -> Result<Self, RelaxError> {
        net.ensure_valid()?;
        let topo = Topology::of(net)?;
        let params = net.branch_params()?;
        let mut prog = ConeProgram::new();
        let nb = net.branches.len();
        let w = (0..net.buses.len())
            .map(|k| {
                let b = &net.buses[k];
                prog.add_var(format!("w[{}]", bus_tag(net, k)), b.v_min * b.v_min, b.v_max * b.v_max)
            })
            .collect();
        let free = f64::INFINITY;
        let mut w_branch = Vec::new();
        let mut l = Vec::new();
        for k in 0..nb {
            let tag = branch_tag(k);
            match space {
                Space::W => {
                    let re = prog.add_var(format!("wr[{tag}]"), -free, free);
                    let im = prog.add_var(format!("wi[{tag}]"), -free, free);
                    w_branch.push((re, im));
                }
                Space::L => l.push(prog.add_var(format!("l[{tag}]"), 0.0, free)),
            }
        }
        let mut s_from = Vec::with_capacity(nb);
        let mut s_to = Vec::with_capacity(nb);
        for k in 0..nb {
            let tag = branch_tag(k);
            let p = prog.add_var(format!("p_fr[{tag}]"), -free, free);
            let q = prog.add_var(format!("q_fr[{tag}]"), -free, free);
            s_from.push((p, q));
            let p = prog.add_var(format!("p_to[{tag}]"), -free, free);
            let q = prog.add_var(format!("q_to[{tag}]"), -free, free);
            s_to.push((p, q));
        }
        let generation = net
            .generators
            .iter()
            .enumerate()
            .map(|(g, gen)| {
                let p = prog.add_var(format!("pg[gen {g}]"), gen.p_min, gen.p_max);
                let q = prog.add_var(format!("qg[gen {g}]"), gen.q_min, gen.q_max);
                (p, q)
            })
            .collect();
        let map = VariableMap {
            space,
            n_vars: 0,
            w,
            w_branch,
            l,
            s_from,
            s_to,
            generation,
            thermal: vec![None; nb],
            scaled_w: vec![None; nb],
            epigraph: vec![None; net.generators.len()],
        };
        Ok(Self { net, topo, params, prog, map })
    }

    /// Power balance per bus: `Σ p^g − Σ p − g^s·w = p^d` and
    /// `Σ q^g − Σ q + b^s·w = q^d`. Shunt terms are skipped when `shunts` is false.
    pub fn add_kcl(&mut self, shunts: bool) {
        for k in 0..self.net.buses.len() {
            let bus = &self.net.buses[k];
            let tag = bus_tag(self.net, k);
            let mut p_row = Vec::new();
            let mut q_row = Vec::new();
            for &g in &self.topo.bus_gens[k] {
                let (p, q) = self.map.generation[g];
                p_row.push((p, 1.0));
                q_row.push((q, 1.0));
            }
            for &(br, from) in &self.topo.bus_arcs[k] {
                let (p, q) = if from { self.map.s_from[br] } else { self.map.s_to[br] };
                p_row.push((p, -1.0));
                q_row.push((q, -1.0));
            }
            if shunts {
                p_row.push((self.map.w[k], -bus.shunt_g));
                q_row.push((self.map.w[k], bus.shunt_b));
            }
            self.prog.add_eq(SparseRow::new(format!("kcl_p[{tag}]"), p_row, bus.p_demand));
            self.prog.add_eq(SparseRow::new(format!("kcl_q[{tag}]"), q_row, bus.q_demand));
        }
    }

    /// `p² + q² ≤ (s^u)²` on both arcs of every rated branch, through one fixed
    /// auxiliary per branch.
    pub fn add_thermal(&mut self) {
        for (k, br) in self.net.branches.iter().enumerate() {
            let Some(rating) = br.s_rating else { continue };
            let tag = branch_tag(k);
            let aux = self.prog.add_var(format!("s_max[{tag}]"), rating, rating);
            self.map.thermal[k] = Some((aux, rating));
            let (p, q) = self.map.s_from[k];
            self.prog.add_rsoc(format!("thermal_fr[{tag}]"), vec![p, q], aux, aux);
            let (p, q) = self.map.s_to[k];
            self.prog.add_rsoc(format!("thermal_to[{tag}]"), vec![p, q], aux, aux);
        }
    }

    /// Two angle-difference rows `±Im M − tan(θ^Δ)·Re M ≤ 0` given `Re M` and
    /// `Im M` as linear forms. A limit of π/2 leaves `−Re M ≤ 0` in both rows.
    pub fn add_pad(&mut self, k: usize, re: &[(usize, f64)], im: &[(usize, f64)]) {
        let tag = branch_tag(k);
        let limit = self.net.branches[k].angle_limit;
        let tan = if limit >= std::f64::consts::FRAC_PI_2 { None } else { Some(limit.tan()) };
        for (name, sign) in [("pad_upper", 1.0), ("pad_lower", -1.0)] {
            let row: Vec<(usize, f64)> = match tan {
                Some(t) => im.iter().map(|&(j, c)| (j, sign * c)).chain(re.iter().map(|&(j, c)| (j, -t * c))).collect(),
                None => re.iter().map(|&(j, c)| (j, -c)).collect(),
            };
            self.prog.add_le(SparseRow::new(format!("{name}[{tag}]"), row, 0.0));
        }
    }

    pub fn set_objective(&mut self, objective: &Objective) -> Result<(), RelaxError> {
        match objective {
            Objective::Feasibility => {}
            Objective::Cost => {
                let base = self.net.base_mva;
                for (g, gen) in self.net.generators.iter().enumerate() {
                    if gen.c2 < 0.0 {
                        return Err(RelaxError::NonConvexCost(g));
                    }
                    let p = self.map.generation[g].0;
                    self.prog.objective[p] += gen.c1 * base;
                    self.prog.objective_constant += gen.c0;
                    if gen.c2 > 0.0 {
                        let quad = gen.c2 * base * base;
                        let value = self.prog.add_var(format!("cost_quad[gen {g}]"), 0.0, f64::INFINITY);
                        let scale = self.prog.add_var(format!("cost_scale[gen {g}]"), 1.0 / quad, 1.0 / quad);
                        self.prog.objective[value] = 1.0;
                        self.prog.add_rsoc(format!("cost_epigraph[gen {g}]"), vec![p], value, scale);
                        self.map.epigraph[g] = Some(Epigraph { value, scale, quad });
                    }
                }
            }
            Objective::Shared(weights) => {
                let nb = self.net.branches.len();
                for (what, found, expected) in [
                    ("bus weights", weights.w.len(), self.net.buses.len()),
                    ("from-flow weights", weights.s_from.len(), nb),
                    ("to-flow weights", weights.s_to.len(), nb),
                ] {
                    if found != expected {
                        return Err(RelaxError::Dimension { what, found, expected });
                    }
                }
                for (&k, &c) in self.map.w.iter().zip(&weights.w) {
                    self.prog.objective[k] += c;
                }
                let arcs = self.map.s_from.iter().zip(&weights.s_from).chain(self.map.s_to.iter().zip(&weights.s_to));
                for (&(p, q), c) in arcs {
                    self.prog.objective[p] += c.re;
                    self.prog.objective[q] += c.im;
                }
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> (ConeProgram, VariableMap) {
        self.map.n_vars = self.prog.n_vars;
        (self.prog, self.map)
    }
}
