//! Worst-case expected energy Ψ, dependency bounds, constraint checking and
//! realized-energy accounting.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TaskGraph;
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Client,
    Server,
}

impl Location {
    pub fn is_server(self) -> bool {
        self == Location::Server
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Location::Client => "client",
            Location::Server => "server",
        }
    }
}

/// One (location, completion slot) pair per node, indexed by node index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffloadDecision {
    pub locations: Vec<Location>,
    pub slots: Vec<i64>,
}

impl OffloadDecision {
    pub fn new(locations: Vec<Location>, slots: Vec<i64>) -> Self {
        OffloadDecision { locations, slots }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn is_server(&self, idx: usize) -> bool {
        self.locations[idx].is_server()
    }

    /// Node ids placed on the server, ascending.
    pub fn offloaded_ids(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.is_server(i))
            .map(|i| i + 1)
            .collect()
    }

    /// Share of interior nodes on the server.
    pub fn offload_fraction(&self) -> f64 {
        if self.len() <= 2 {
            return 0.0;
        }
        self.offloaded_ids().len() as f64 / (self.len() - 2) as f64
    }
}

/// Locations for an assignment bitmask over interior nodes: bit i set puts
/// node index i+1 on the server.
pub fn locations_from_mask(n: usize, mask: u64) -> Vec<Location> {
    (0..n)
        .map(|i| {
            if i > 0 && i + 1 < n && mask >> (i - 1) & 1 == 1 {
                Location::Server
            } else {
                Location::Client
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    pub psi: f64,
    pub local_exec_energy: f64,
    pub uplink_energy: f64,
    pub downlink_energy: f64,
}

impl EnergyReport {
    fn from_parts(local: f64, up: f64, down: f64) -> Self {
        EnergyReport {
            psi: local + up + down,
            local_exec_energy: local,
            uplink_energy: up,
            downlink_energy: down,
        }
    }
}

/// Ψ for a location vector; slots play no part.
pub fn location_energy(graph: &TaskGraph, locs: &[Location], params: &SystemParams) -> EnergyReport {
    let mut local = 0.0;
    for (i, m) in graph.modules().iter().enumerate() {
        if !locs[i].is_server() {
            local += params.local_energy(m.workload);
        }
    }
    let (mut up, mut down) = (0.0, 0.0);
    for e in graph.edges() {
        match (locs[e.from - 1], locs[e.to - 1]) {
            (Location::Client, Location::Server) => up += e.bits as f64 * params.theta_up,
            (Location::Server, Location::Client) => down += e.bits as f64 * params.theta_down,
            _ => {}
        }
    }
    EnergyReport::from_parts(local, up, down)
}

pub fn worst_case_expected_energy(
    graph: &TaskGraph,
    decision: &OffloadDecision,
    params: &SystemParams,
) -> EnergyReport {
    location_energy(graph, &decision.locations, params)
}

/// Slots a node needs at the given location.
pub fn exec_at(graph: &TaskGraph, idx: usize, loc: Location, params: &SystemParams) -> i64 {
    match loc {
        Location::Client => params.client_exec(graph.workload(idx)),
        Location::Server => params.server_exec(graph.workload(idx)),
    }
}

/// Reserved transfer slots on an edge between the two locations.
pub fn transfer_slots(from: Location, to: Location, params: &SystemParams) -> i64 {
    match (from, to) {
        (Location::Client, Location::Server) => params.z_up_slots,
        (Location::Server, Location::Client) => params.z_down_slots,
        _ => 0,
    }
}

/// b^{c,s}: gap left on edge m→n for the upload when n runs on the server.
pub fn dependency_bound_upload(
    graph: &TaskGraph,
    decision: &OffloadDecision,
    m: usize,
    n: usize,
    params: &SystemParams,
) -> i64 {
    decision.slots[n] - decision.slots[m] - params.server_exec(graph.workload(n))
}

/// b^{s,c}: gap left on edge m→n for the download when n runs on the client.
pub fn dependency_bound_download(
    graph: &TaskGraph,
    decision: &OffloadDecision,
    m: usize,
    n: usize,
    params: &SystemParams,
) -> i64 {
    decision.slots[n] - decision.slots[m] - params.client_exec(graph.workload(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DependencyKind {
    Upload,
    Download,
    SameSide,
}

/// Node fields are 1-based ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Violation {
    Shape { expected: usize, got: usize },
    PinnedOnServer { node: usize },
    Deadline { slot: i64, deadline: i64 },
    SlotRange { node: usize, slot: i64 },
    ExecTime { node: usize, slot: i64, exec: i64 },
    Dependency {
        from: usize,
        to: usize,
        kind: DependencyKind,
        gap: i64,
        required: i64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { expected, got } => {
                write!(f, "decision covers {got} nodes, graph has {expected}")
            }
            Violation::PinnedOnServer { node } => write!(f, "node {node} must run on the client"),
            Violation::Deadline { slot, deadline } => {
                write!(f, "deadline: last module completes at {slot} > {deadline}")
            }
            Violation::SlotRange { node, slot } => {
                write!(f, "node {node} completion slot {slot} outside 1..T")
            }
            Violation::ExecTime { node, slot, exec } => {
                write!(f, "node {node} completes at {slot} but needs {exec} slots")
            }
            Violation::Dependency {
                from,
                to,
                kind,
                gap,
                required,
            } => write!(
                f,
                "dependency {from} -> {to} ({kind:?}): gap {gap} < required {required}"
            ),
        }
    }
}

pub fn check_constraints(
    graph: &TaskGraph,
    decision: &OffloadDecision,
    params: &SystemParams,
) -> Vec<Violation> {
    let n = graph.len();
    if decision.locations.len() != n || decision.slots.len() != n {
        return vec![Violation::Shape {
            expected: n,
            got: decision.locations.len().min(decision.slots.len()),
        }];
    }
    let mut out = Vec::new();
    let t = params.deadline_slots;
    for i in 0..n {
        if graph.is_pinned(i) && decision.is_server(i) {
            out.push(Violation::PinnedOnServer { node: i + 1 });
        }
    }
    let last = decision.slots[n - 1];
    if last > t {
        out.push(Violation::Deadline {
            slot: last,
            deadline: t,
        });
    }
    for i in 0..n {
        let s = decision.slots[i];
        if s < 1 || (s > t && i + 1 != n) {
            out.push(Violation::SlotRange { node: i + 1, slot: s });
        }
        let exec = exec_at(graph, i, decision.locations[i], params);
        if s < exec {
            out.push(Violation::ExecTime {
                node: i + 1,
                slot: s,
                exec,
            });
        }
    }
    for e in graph.edges() {
        let (m, k) = (e.from - 1, e.to - 1);
        let (lm, lk) = (decision.locations[m], decision.locations[k]);
        let kind = match (lm, lk) {
            (Location::Client, Location::Server) => DependencyKind::Upload,
            (Location::Server, Location::Client) => DependencyKind::Download,
            _ => DependencyKind::SameSide,
        };
        let gap = decision.slots[k] - decision.slots[m] - exec_at(graph, k, lk, params);
        let required = transfer_slots(lm, lk, params);
        if gap < required {
            out.push(Violation::Dependency {
                from: e.from,
                to: e.to,
                kind,
                gap,
                required,
            });
        }
    }
    out
}

/// One realized transfer: queue ahead of the payload, bit rate and radio power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferDraw {
    pub queue_bits: f64,
    pub rate_bps: f64,
    pub power: f64,
}

impl TransferDraw {
    pub fn seconds(&self, bits: f64) -> f64 {
        (self.queue_bits + bits) / self.rate_bps
    }

    pub fn energy(&self, bits: f64) -> f64 {
        self.power * bits / self.rate_bps
    }
}

/// Realized draws consumed in edge order, one per cross-boundary transfer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RealizedTraces {
    pub up: Vec<TransferDraw>,
    pub down: Vec<TransferDraw>,
}

pub fn realized_energy(
    graph: &TaskGraph,
    decision: &OffloadDecision,
    params: &SystemParams,
    traces: &RealizedTraces,
) -> Result<EnergyReport> {
    let mut local = 0.0;
    for (i, m) in graph.modules().iter().enumerate() {
        if !decision.is_server(i) {
            local += params.local_energy(m.workload);
        }
    }
    let (mut up, mut down) = (0.0, 0.0);
    let (mut iu, mut id) = (0, 0);
    for e in graph.edges() {
        let bits = e.bits as f64;
        match (decision.locations[e.from - 1], decision.locations[e.to - 1]) {
            (Location::Client, Location::Server) => {
                let d = traces.up.get(iu).ok_or(Error::TraceExhausted {
                    direction: "upload",
                    consumed: iu,
                })?;
                up += d.energy(bits);
                iu += 1;
            }
            (Location::Server, Location::Client) => {
                let d = traces.down.get(id).ok_or(Error::TraceExhausted {
                    direction: "download",
                    consumed: id,
                })?;
                down += d.energy(bits);
                id += 1;
            }
            _ => {}
        }
    }
    Ok(EnergyReport::from_parts(local, up, down))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TaskGraph;

    fn chain3() -> TaskGraph {
        TaskGraph::from_weights(&[1, 1, 1], &[(1, 2, 1), (2, 3, 1)]).unwrap()
    }

    #[test]
    fn offloading_middle_of_unit_chain() {
        let g = chain3();
        let p = SystemParams::unit(10);
        let d = OffloadDecision::new(
            vec![Location::Client, Location::Server, Location::Client],
            vec![1, 2, 3],
        );
        let r = worst_case_expected_energy(&g, &d, &p);
        assert_eq!(r.psi, 4.0);
        assert_eq!((r.local_exec_energy, r.uplink_energy, r.downlink_energy), (2.0, 1.0, 1.0));
    }

    #[test]
    fn bounds() {
        let g = TaskGraph::from_weights(&[1, 2, 1], &[(1, 2, 1), (2, 3, 1)]).unwrap();
        let p = SystemParams::unit(20);
        let d = OffloadDecision::new(vec![Location::Client; 3], vec![5, 9, 9]);
        assert_eq!(dependency_bound_upload(&g, &d, 0, 1, &p), 2);
        assert!(dependency_bound_download(&g, &d, 1, 2, &p) < 0);
    }

    #[test]
    fn deadline_violation() {
        let g = TaskGraph::from_weights(&[1, 1, 1, 1], &[(1, 2, 1), (2, 3, 1), (3, 4, 1)]).unwrap();
        let p = SystemParams::unit(3);
        let d = OffloadDecision::new(vec![Location::Client; 4], vec![1, 2, 3, 4]);
        let v = check_constraints(&g, &d, &p);
        assert!(v.iter().any(|x| matches!(x, Violation::Deadline { .. })));
        assert!(v.iter().any(|x| x.to_string().starts_with("deadline")));
    }

    #[test]
    fn realized_energy_uses_draws() {
        let g = TaskGraph::from_weights(&[0, 3, 0], &[(1, 2, 8), (2, 3, 4)]).unwrap();
        let p = SystemParams::unit(10);
        let d = OffloadDecision::new(
            vec![Location::Client, Location::Server, Location::Client],
            vec![1, 2, 3],
        );
        let draw = |power, rate| TransferDraw {
            queue_bits: 0.0,
            rate_bps: rate,
            power,
        };
        let tr = RealizedTraces {
            up: vec![draw(2.0, 4.0)],
            down: vec![draw(1.0, 2.0)],
        };
        let r = realized_energy(&g, &d, &p, &tr).unwrap();
        assert_eq!(r.uplink_energy, 4.0);
        assert_eq!(r.downlink_energy, 2.0);
        let short = RealizedTraces {
            up: tr.up.clone(),
            down: vec![],
        };
        assert!(matches!(
            realized_energy(&g, &d, &p, &short),
            Err(Error::TraceExhausted { .. })
        ));
        let local = OffloadDecision::new(vec![Location::Client; 3], vec![1, 4, 5]);
        let r = realized_energy(&g, &local, &p, &RealizedTraces::default()).unwrap();
        assert_eq!(r.psi, 3.0);
    }

    #[test]
    fn mask_roundtrip() {
        let l = locations_from_mask(5, 0b101);
        assert_eq!(
            l,
            vec![
                Location::Client,
                Location::Server,
                Location::Client,
                Location::Server,
                Location::Client
            ]
        );
    }
}
