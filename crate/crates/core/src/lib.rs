//! Extended AC power flow, its SOC and Convex DistFlow relaxations, and an
//! executable check of the bijection between the two relaxations.
//!
//! Modules, from data to verification:
//!
//! - [`netmodel`]: per-unit network data and structural validation.
//! - [`case_io`]: MATPOWER and native JSON case files.
//! - [`acpf`]: branch flow evaluators, identities and a Newton power flow.
//! - [`coneprog`]: cone-program representation and an interior-point solver.
//! - [`relax`]: relaxation builders over [`coneprog::ConeProgram`].
//! - [`bijection`]: point maps between the two relaxations.

pub mod acpf;
pub mod bijection;
pub mod case_io;
pub mod coneprog;
pub mod netmodel;
pub mod relax;

pub use acpf::ACState;
pub use coneprog::{ConeProgram, Solution, SolveOptions, Status, VerifyReport};
pub use netmodel::{Branch, BranchParams, Bus, BusId, ComplexValue, Generator, ModelError, Network};
pub use relax::{RelaxPoint, Space, VariableMap};
