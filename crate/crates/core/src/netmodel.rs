//! Per-unit data model of a transmission network.
//!
//! A [`Network`] is the graph `(N, E)`: buses are nodes, each [`Branch`] is a
//! directed arc `from -> to`. Reverse arcs are never stored; every evaluator
//! that needs them derives them from the branch list.
//!
//! All electrical quantities are per-unit on `base_mva`. The series admittance
//! `Y = 1/Z` is always derived from the stored impedance so that `Y·Z = 1`
//! holds by construction.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Complex scalar used for voltages, powers, admittances and transformer ratios.
pub type ComplexValue = Complex64;

/// Imaginary unit.
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Phase-angle-difference limit used when a case does not specify one.
pub const DEFAULT_ANGLE_LIMIT: f64 = std::f64::consts::FRAC_PI_3;

/// Integer bus key, as it appears in case files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub v_min: f64,
    pub v_max: f64,
    /// Shunt conductance `g^s`.
    pub shunt_g: f64,
    /// Shunt susceptance `b^s`.
    pub shunt_b: f64,
    pub p_demand: f64,
    pub q_demand: f64,
    pub is_reference: bool,
}

impl Bus {
    /// Shunt admittance `Y^s = g^s + i b^s`.
    pub fn shunt(&self) -> Complex64 {
        Complex64::new(self.shunt_g, self.shunt_b)
    }

    pub fn demand(&self) -> Complex64 {
        Complex64::new(self.p_demand, self.q_demand)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: BusId,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Constant cost term (currency).
    pub c0: f64,
    /// Linear cost coefficient (currency/MW).
    pub c1: f64,
    /// Quadratic cost coefficient (currency/MW²).
    pub c2: f64,
    /// Active power setpoint used by the power flow solver (p.u.).
    pub p_setpoint: f64,
    /// Voltage magnitude setpoint used by the power flow solver (p.u.).
    pub v_setpoint: f64,
}

impl Generator {
    /// Generation cost of an active power output `p` (p.u.).
    pub fn cost(&self, p: f64, base_mva: f64) -> f64 {
        let mw = p * base_mva;
        self.c2 * mw * mw + self.c1 * mw + self.c0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub r: f64,
    pub x: f64,
    /// Total line charging `b^c`; each terminal sees half of it.
    pub b_charge: f64,
    /// Transformer magnitude `t`.
    pub tap: f64,
    /// Transformer angle `θ^t` (radians).
    pub shift: f64,
    /// Apparent power limit `s^u`; `None` means unconstrained.
    pub s_rating: Option<f64>,
    /// Symmetric phase angle difference limit `θ^Δ` (radians).
    pub angle_limit: f64,
}

impl Branch {
    /// A plain line with no charging, identity transformer and default angle limit.
    pub fn line(from: u32, to: u32, r: f64, x: f64) -> Self {
        Self {
            from_bus: BusId(from),
            to_bus: BusId(to),
            r,
            x,
            b_charge: 0.0,
            tap: 1.0,
            shift: 0.0,
            s_rating: None,
            angle_limit: DEFAULT_ANGLE_LIMIT,
        }
    }

    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r, self.x)
    }

    /// Series admittance `Y = 1/Z`.
    pub fn admittance(&self) -> Result<Complex64, ModelError> {
        admittance(self)
    }

    /// Transformer ratio `T = t∠θ^t`.
    pub fn tap_complex(&self) -> Complex64 {
        tap_complex(self)
    }

    /// `|T|²`.
    pub fn tap_sq(&self) -> f64 {
        self.tap * self.tap
    }

    pub fn params(&self) -> Result<BranchParams, ModelError> {
        BranchParams::of(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("branch {from}->{to} has zero impedance; admittance is undefined")]
    DegenerateImpedance { from: BusId, to: BusId },
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("network has {0} reference buses, expected exactly one")]
    ReferenceCount(usize),
    #[error("network failed validation: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
}

/// Which structural rule a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    BaseMva,
    NonFinite,
    DuplicateBus,
    VoltageBounds,
    ReferenceUniqueness,
    GeneratorBounds,
    ImpedanceInvertible,
    PositiveTap,
    AngleLimitRange,
    DanglingReference,
    SelfLoop,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::BaseMva => "base MVA must be positive",
            Rule::NonFinite => "values must be finite",
            Rule::DuplicateBus => "bus ids must be unique",
            Rule::VoltageBounds => "0 < v_min <= v_max",
            Rule::ReferenceUniqueness => "exactly one reference bus",
            Rule::GeneratorBounds => "p_min <= p_max and q_min <= q_max",
            Rule::ImpedanceInvertible => "(r, x) != (0, 0)",
            Rule::PositiveTap => "tap > 0",
            Rule::AngleLimitRange => "0 <= angle_limit <= pi/2",
            Rule::DanglingReference => "referenced bus must exist",
            Rule::SelfLoop => "branch endpoints must differ",
        };
        f.write_str(s)
    }
}

/// The network element a [`Violation`] refers to. Indices are positions in the
/// corresponding `Network` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Entity {
    Network,
    Bus(BusId),
    Generator(usize),
    Branch(usize),
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Network => f.write_str("network"),
            Entity::Bus(id) => write!(f, "bus {id}"),
            Entity::Generator(k) => write!(f, "generator {k}"),
            Entity::Branch(k) => write!(f, "branch {k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub entity: Entity,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.entity, self.rule, self.detail)
    }
}

pub fn admittance(branch: &Branch) -> Result<Complex64, ModelError> {
    if branch.r == 0.0 && branch.x == 0.0 {
        return Err(ModelError::DegenerateImpedance { from: branch.from_bus, to: branch.to_bus });
    }
    // 1/(r + ix) = (r - ix)/(r² + x²)
    let d = branch.r * branch.r + branch.x * branch.x;
    Ok(Complex64::new(branch.r / d, -branch.x / d))
}

pub fn tap_complex(branch: &Branch) -> Complex64 {
    Complex64::from_polar(branch.tap, branch.shift)
}

/// Real and imaginary parts of `Z·T`.
pub fn tz_coefficients(branch: &Branch) -> (f64, f64) {
    let t = tap_complex(branch);
    let tz_r = branch.r * t.re - branch.x * t.im;
    let tz_i = branch.r * t.im + branch.x * t.re;
    (tz_r, tz_i)
}

/// Derived electrical constants of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchParams {
    pub r: f64,
    pub x: f64,
    pub z: Complex64,
    pub y: Complex64,
    pub t: Complex64,
    /// `|T|²`.
    pub tap_sq: f64,
    /// Total charging `b^c`.
    pub b_charge: f64,
    /// Per-terminal charging `b^c/2`.
    pub half_charge: f64,
    /// Real and imaginary parts of `Z·T`.
    pub tz: (f64, f64),
}

impl BranchParams {
    pub fn of(branch: &Branch) -> Result<Self, ModelError> {
        Ok(Self {
            r: branch.r,
            x: branch.x,
            z: branch.impedance(),
            y: admittance(branch)?,
            t: tap_complex(branch),
            tap_sq: branch.tap_sq(),
            b_charge: branch.b_charge,
            half_charge: branch.b_charge / 2.0,
            tz: tz_coefficients(branch),
        })
    }

    /// `|Z|²`.
    pub fn z_sq(&self) -> f64 {
        self.r * self.r + self.x * self.x
    }

    /// `|Y|²`.
    pub fn y_sq(&self) -> f64 {
        self.y.norm_sqr()
    }

    /// `Y* − i b^c/2`, the from/to self term of the flow equations.
    pub fn shunted_conj(&self) -> Complex64 {
        self.y.conj() - I * self.half_charge
    }
}

pub fn validate(network: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |entity: Entity, rule: Rule, detail: String| {
        out.push(Violation { entity, rule, detail });
    };

    if !(network.base_mva.is_finite() && network.base_mva > 0.0) {
        push(Entity::Network, Rule::BaseMva, format!("base_mva = {}", network.base_mva));
    }

    let mut ids = BTreeMap::new();
    let mut n_ref = 0;
    for bus in &network.buses {
        let entity = Entity::Bus(bus.id);
        if ids.insert(bus.id, ()).is_some() {
            push(entity.clone(), Rule::DuplicateBus, "id appears more than once".into());
        }
        let vals = [bus.v_min, bus.v_max, bus.shunt_g, bus.shunt_b, bus.p_demand, bus.q_demand];
        if vals.iter().any(|v| !v.is_finite()) {
            push(entity.clone(), Rule::NonFinite, "bus data".into());
        }
        if !(bus.v_min > 0.0 && bus.v_min <= bus.v_max) {
            push(entity.clone(), Rule::VoltageBounds, format!("v_min = {}, v_max = {}", bus.v_min, bus.v_max));
        }
        if bus.is_reference {
            n_ref += 1;
        }
    }
    if n_ref != 1 {
        push(Entity::Network, Rule::ReferenceUniqueness, format!("found {n_ref} reference buses"));
    }

    for (k, gen) in network.generators.iter().enumerate() {
        let entity = Entity::Generator(k);
        if !ids.contains_key(&gen.bus) {
            push(entity.clone(), Rule::DanglingReference, format!("bus {} not found", gen.bus));
        }
        let vals = [gen.p_min, gen.p_max, gen.q_min, gen.q_max, gen.c0, gen.c1, gen.c2, gen.p_setpoint, gen.v_setpoint];
        if vals.iter().any(|v| !v.is_finite()) {
            push(entity.clone(), Rule::NonFinite, "generator data".into());
        }
        if !(gen.p_min <= gen.p_max && gen.q_min <= gen.q_max) {
            push(
                entity,
                Rule::GeneratorBounds,
                format!("p in [{}, {}], q in [{}, {}]", gen.p_min, gen.p_max, gen.q_min, gen.q_max),
            );
        }
    }

    for (k, br) in network.branches.iter().enumerate() {
        let entity = Entity::Branch(k);
        for end in [br.from_bus, br.to_bus] {
            if !ids.contains_key(&end) {
                push(entity.clone(), Rule::DanglingReference, format!("bus {end} not found"));
            }
        }
        if br.from_bus == br.to_bus {
            push(entity.clone(), Rule::SelfLoop, format!("bus {}", br.from_bus));
        }
        let vals = [br.r, br.x, br.b_charge, br.tap, br.shift, br.angle_limit, br.s_rating.unwrap_or(0.0)];
        if vals.iter().any(|v| !v.is_finite()) {
            push(entity.clone(), Rule::NonFinite, "branch data".into());
        }
        if br.r == 0.0 && br.x == 0.0 {
            push(entity.clone(), Rule::ImpedanceInvertible, "r = x = 0".into());
        }
        if !(br.tap > 0.0) {
            push(entity.clone(), Rule::PositiveTap, format!("tap = {}", br.tap));
        }
        if !(0.0..=FRAC_PI_2).contains(&br.angle_limit) {
            push(entity, Rule::AngleLimitRange, format!("angle_limit = {}", br.angle_limit));
        }
    }
    out
}

/// Position-based view of a validated network.
///
/// Algorithms work with bus positions (indices into `Network::buses`) rather than
/// ids; this resolves every reference once.
#[derive(Debug, Clone)]
pub struct Topology {
    /// `(from position, to position)` per branch.
    pub ends: Vec<(usize, usize)>,
    /// Bus position per generator.
    pub gen_bus: Vec<usize>,
    pub reference: usize,
    /// Generators attached to each bus.
    pub bus_gens: Vec<Vec<usize>>,
    /// Arcs incident to each bus: `(branch index, true if the bus is the from end)`.
    pub bus_arcs: Vec<Vec<(usize, bool)>>,
}

impl Topology {
    pub fn of(network: &Network) -> Result<Self, ModelError> {
        let pos: BTreeMap<BusId, usize> =
            network.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect();
        let lookup = |id: BusId| pos.get(&id).copied().ok_or(ModelError::UnknownBus(id));

        let refs: Vec<usize> = (0..network.buses.len()).filter(|&k| network.buses[k].is_reference).collect();
        if refs.len() != 1 {
            return Err(ModelError::ReferenceCount(refs.len()));
        }

        let n = network.buses.len();
        let mut bus_arcs = vec![Vec::new(); n];
        let mut ends = Vec::with_capacity(network.branches.len());
        for (k, br) in network.branches.iter().enumerate() {
            let f = lookup(br.from_bus)?;
            let t = lookup(br.to_bus)?;
            bus_arcs[f].push((k, true));
            bus_arcs[t].push((k, false));
            ends.push((f, t));
        }
        let mut bus_gens = vec![Vec::new(); n];
        let mut gen_bus = Vec::with_capacity(network.generators.len());
        for (g, gen) in network.generators.iter().enumerate() {
            let b = lookup(gen.bus)?;
            bus_gens[b].push(g);
            gen_bus.push(b);
        }
        Ok(Self { ends, gen_bus, reference: refs[0], bus_gens, bus_arcs })
    }
}

impl Network {
    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    /// Validate and fail with the full violation list.
    pub fn ensure_valid(&self) -> Result<(), ModelError> {
        let v = validate(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(v))
        }
    }

    pub fn bus_position(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn reference_position(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.is_reference)
    }

    /// Copy with line charging and bus shunts removed and every transformer set
    /// to the identity, which reduces the extended models to the simple ones.
    pub fn degenerate(&self) -> Network {
        let mut net = self.clone();
        for bus in &mut net.buses {
            bus.shunt_g = 0.0;
            bus.shunt_b = 0.0;
        }
        for br in &mut net.branches {
            br.b_charge = 0.0;
            br.tap = 1.0;
            br.shift = 0.0;
        }
        net
    }

    /// Derived constants for every branch, in branch order.
    pub fn branch_params(&self) -> Result<Vec<BranchParams>, ModelError> {
        self.branches.iter().map(BranchParams::of).collect()
    }

    /// Total generation cost of per-generator active outputs (p.u.).
    pub fn generation_cost(&self, p: &[f64]) -> f64 {
        self.generators.iter().zip(p).map(|(g, &p)| g.cost(p, self.base_mva)).sum()
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn bus(id: u32, reference: bool) -> Bus {
        Bus {
            id: BusId(id),
            v_min: 0.9,
            v_max: 1.1,
            shunt_g: 0.0,
            shunt_b: 0.0,
            p_demand: 0.0,
            q_demand: 0.0,
            is_reference: reference,
        }
    }

    pub fn generator(bus: u32) -> Generator {
        Generator {
            bus: BusId(bus),
            p_min: 0.0,
            p_max: 2.0,
            q_min: -1.0,
            q_max: 1.0,
            c0: 0.0,
            c1: 10.0,
            c2: 0.01,
            p_setpoint: 0.0,
            v_setpoint: 1.0,
        }
    }

    pub fn two_bus() -> Network {
        Network {
            name: "two-bus".into(),
            base_mva: 100.0,
            buses: vec![bus(1, true), bus(2, false)],
            branches: vec![Branch::line(1, 2, 0.01, 0.1)],
            generators: vec![generator(1)],
        }
    }
}
