//! MATPOWER tables to a per-unit [`Network`].

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use super::matpower::{CaseDocument, Table};
use crate::netmodel::{Branch, Bus, BusId, Entity, Generator, Network, Violation, DEFAULT_ANGLE_LIMIT};

mod col {
    pub const BUS_I: usize = 0;
    pub const BUS_TYPE: usize = 1;
    pub const PD: usize = 2;
    pub const QD: usize = 3;
    pub const GS: usize = 4;
    pub const BS: usize = 5;
    pub const VMAX: usize = 11;
    pub const VMIN: usize = 12;

    pub const GEN_BUS: usize = 0;
    pub const PG: usize = 1;
    pub const QMAX: usize = 3;
    pub const QMIN: usize = 4;
    pub const VG: usize = 5;
    pub const GEN_STATUS: usize = 7;
    pub const PMAX: usize = 8;
    pub const PMIN: usize = 9;

    pub const F_BUS: usize = 0;
    pub const T_BUS: usize = 1;
    pub const BR_R: usize = 2;
    pub const BR_X: usize = 3;
    pub const BR_B: usize = 4;
    pub const RATE_A: usize = 5;
    pub const TAP: usize = 8;
    pub const SHIFT: usize = 9;
    pub const BR_STATUS: usize = 10;
    pub const ANGMIN: usize = 11;
    pub const ANGMAX: usize = 12;
}

const REF_BUS_TYPE: f64 = 3.0;
const POLYNOMIAL_COST: f64 = 2.0;

/// A netmodel violation located at a source table row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowViolation {
    pub table: &'static str,
    /// 1-based row within the table; `None` for network-wide rules.
    pub row: Option<usize>,
    /// 1-based source line when known.
    pub line: Option<usize>,
    pub violation: Violation,
}

impl std::fmt::Display for RowViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.row, self.line) {
            (Some(r), Some(l)) => write!(f, "{} row {r} (line {l}): ", self.table)?,
            (Some(r), None) => write!(f, "{} row {r}: ", self.table)?,
            _ => {}
        }
        write!(f, "{}", self.violation)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvertError {
    #[error("{}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<RowViolation>),
    #[error("bus row {row}: bus number {value} is not a positive integer")]
    BusNumber { row: usize, value: f64 },
    #[error("gencost row {row}: only polynomial costs with at most 3 coefficients are supported")]
    UnsupportedCost { row: usize },
    #[error("gencost has {found} rows, expected at least {expected}")]
    CostRows { found: usize, expected: usize },
}

fn bus_id(v: f64, row: usize) -> Result<BusId, ConvertError> {
    if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 {
        Ok(BusId(v as u32))
    } else {
        Err(ConvertError::BusNumber { row, value: v })
    }
}

/// `0` and `±360°` mean "no limit".
fn angle_bound(deg: f64) -> Option<f64> {
    (deg != 0.0 && deg.abs() < 360.0).then(|| deg.to_radians())
}

/// Symmetric phase angle difference limit from MATPOWER's `angmin`/`angmax`.
pub fn angle_limit(angmin_deg: f64, angmax_deg: f64) -> f64 {
    let lo = angle_bound(angmin_deg).map(f64::abs);
    let hi = angle_bound(angmax_deg);
    let limit = match (lo, hi) {
        (None, None) => DEFAULT_ANGLE_LIMIT,
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (Some(a), Some(b)) => a.min(b),
    };
    limit.clamp(0.0, FRAC_PI_2)
}

/// Polynomial cost row to `(c0, c1, c2)`.
fn cost_coefficients(row: &[f64], k: usize) -> Result<(f64, f64, f64), ConvertError> {
    let unsupported = ConvertError::UnsupportedCost { row: k + 1 };
    if row.len() < 4 || row[0] != POLYNOMIAL_COST {
        return Err(unsupported);
    }
    let n = row[3];
    if !(n.fract() == 0.0 && (0.0..=3.0).contains(&n)) || row.len() < 4 + n as usize {
        return Err(unsupported);
    }
    // Highest order first.
    let c = &row[4..4 + n as usize];
    Ok(match c.len() {
        3 => (c[2], c[1], c[0]),
        2 => (c[1], c[0], 0.0),
        1 => (c[0], 0.0, 0.0),
        _ => (0.0, 0.0, 0.0),
    })
}

pub fn to_network(doc: &CaseDocument) -> Result<Network, ConvertError> {
    let base = doc.base_mva;

    let mut buses = Vec::with_capacity(doc.bus.len());
    for (k, row) in doc.bus.rows.iter().enumerate() {
        buses.push(Bus {
            id: bus_id(row[col::BUS_I], k + 1)?,
            v_min: row[col::VMIN],
            v_max: row[col::VMAX],
            shunt_g: row[col::GS] / base,
            shunt_b: row[col::BS] / base,
            p_demand: row[col::PD] / base,
            q_demand: row[col::QD] / base,
            is_reference: row[col::BUS_TYPE] == REF_BUS_TYPE,
        });
    }

    if let Some(gc) = &doc.gencost {
        if gc.len() < doc.gen.len() {
            return Err(ConvertError::CostRows { found: gc.len(), expected: doc.gen.len() });
        }
    }
    let mut generators = Vec::new();
    let mut gen_rows = Vec::new();
    for (k, row) in doc.gen.rows.iter().enumerate() {
        if row[col::GEN_STATUS] <= 0.0 {
            continue;
        }
        let (c0, c1, c2) = match &doc.gencost {
            Some(gc) => cost_coefficients(&gc.rows[k], k)?,
            None => (0.0, 0.0, 0.0),
        };
        generators.push(Generator {
            bus: bus_id(row[col::GEN_BUS], k + 1)?,
            p_min: row[col::PMIN] / base,
            p_max: row[col::PMAX] / base,
            q_min: row[col::QMIN] / base,
            q_max: row[col::QMAX] / base,
            c0,
            c1,
            c2,
            p_setpoint: row[col::PG] / base,
            v_setpoint: row[col::VG],
        });
        gen_rows.push(k);
    }

    let mut branches = Vec::new();
    let mut branch_rows = Vec::new();
    for (k, row) in doc.branch.rows.iter().enumerate() {
        if row[col::BR_STATUS] == 0.0 {
            continue;
        }
        let tap = if row[col::TAP] == 0.0 { 1.0 } else { row[col::TAP] };
        let rate = row[col::RATE_A];
        branches.push(Branch {
            from_bus: bus_id(row[col::F_BUS], k + 1)?,
            to_bus: bus_id(row[col::T_BUS], k + 1)?,
            r: row[col::BR_R],
            x: row[col::BR_X],
            b_charge: row[col::BR_B],
            tap,
            // MATPOWER's ratio is the conjugate of T = t∠θ^t.
            shift: -row[col::SHIFT].to_radians(),
            s_rating: (rate != 0.0).then(|| rate / base),
            angle_limit: angle_limit(row[col::ANGMIN], row[col::ANGMAX]),
        });
        branch_rows.push(k);
    }

    let network = Network { name: doc.name.clone(), base_mva: base, buses, branches, generators };
    let violations = network.validate();
    if violations.is_empty() {
        return Ok(network);
    }
    let locate = |table: &'static str, src: &Table, k: Option<usize>| {
        let row = k.map(|k| k + 1);
        let line = k.and_then(|k| src.line_of(k));
        (table, row, line)
    };
    let located = violations
        .into_iter()
        .map(|v| {
            let (table, row, line) = match &v.entity {
                Entity::Network => ("network", None, None),
                Entity::Bus(id) => {
                    let k = network.bus_position(*id);
                    locate("bus", &doc.bus, k)
                }
                Entity::Generator(g) => locate("gen", &doc.gen, gen_rows.get(*g).copied()),
                Entity::Branch(b) => locate("branch", &doc.branch, branch_rows.get(*b).copied()),
            };
            RowViolation { table, row, line, violation: v }
        })
        .collect();
    Err(ConvertError::Invalid(located))
}
