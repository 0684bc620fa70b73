//! Energy-aware computation offloading for DAG applications on a mobile
//! client with an edge server, under uncertain channels and queues.
//!
//! Transfer times and energy-per-bit ratios are modelled by GEV fits of block
//! maxima ([`evt`]); the offloading problem ([`energy`]) is solved by
//! ε-bounded column generation ([`cg`]), closed-form policies for chains and
//! fans ([`special`]) or exhaustive search on small graphs ([`oracle`]), and
//! decisions are replayed against random traces in [`sim`].

pub mod cg;
pub mod energy;
pub mod error;
pub mod evt;
pub mod export;
pub mod graph;
pub mod lp;
pub mod oracle;
pub mod params;
pub mod relax;
pub mod schedule;
pub mod sim;
pub mod special;
pub mod trace;

pub use cg::{solve, SolveResult, SolverOptions, Termination};
pub use energy::{check_constraints, worst_case_expected_energy, EnergyReport, Location, OffloadDecision};
pub use error::{Error, Result};
pub use evt::GevParams;
pub use graph::{load_graph, save_graph, topological_order, validate_graph, TaskGraph};
pub use oracle::{brute_force_optimum, OracleResult};
pub use params::{exec_slots, Config, SystemParams};
