//! Exact policies for purely sequential and purely parallel graphs, plus the
//! dispatcher used by the CLI.

use std::fmt;
use std::str::FromStr;

use crate::cg::{self, Bounds, IterationRecord, SolverOptions, Termination};
use crate::energy::{location_energy, EnergyReport, Location, OffloadDecision};
use crate::error::{Error, Result};
use crate::graph::TaskGraph;
use crate::params::SystemParams;
use crate::schedule::earliest_decision;

/// Edges are exactly 1→2→…→N.
pub fn is_chain(graph: &TaskGraph) -> bool {
    let n = graph.len();
    graph.edges().len() + 1 == n
        && graph
            .edges()
            .iter()
            .enumerate()
            .all(|(i, e)| e.from == i + 1 && e.to == i + 2)
}

/// Node 1 feeds every interior node and each of them feeds node N only.
pub fn is_fan(graph: &TaskGraph) -> bool {
    let n = graph.len();
    if n < 3 || graph.edges().len() != 2 * (n - 2) {
        return false;
    }
    (1..n - 1).all(|i| {
        let p = graph.parents(i);
        let c = graph.children(i);
        p.len() == 1 && p[0].node == 0 && c.len() == 1 && c[0].node == n - 1
    })
}

/// Contiguous offload window [u, v] (node ids), or None for all-local.
pub fn window_of(decision: &OffloadDecision) -> Option<Option<(usize, usize)>> {
    let ids = decision.offloaded_ids();
    match (ids.first(), ids.last()) {
        (None, _) => Some(None),
        (Some(&u), Some(&v)) if v - u + 1 == ids.len() => Some(Some((u, v))),
        _ => None,
    }
}

/// Best single offload window on a chain, found by trying all of them.
pub fn solve_sequential(graph: &TaskGraph, params: &SystemParams) -> Result<OffloadDecision> {
    if !is_chain(graph) {
        return Err(Error::WrongShape("chain"));
    }
    let n = graph.len();
    let mut windows = vec![None];
    for u in 2..n {
        for v in u..n {
            windows.push(Some((u, v)));
        }
    }
    let mut best: Option<(f64, OffloadDecision)> = None;
    for w in windows {
        let locs: Vec<Location> = (1..=n)
            .map(|id| match w {
                Some((u, v)) if id >= u && id <= v => Location::Server,
                _ => Location::Client,
            })
            .collect();
        let Some(d) = earliest_decision(graph, &locs, params) else {
            continue;
        };
        let psi = location_energy(graph, &locs, params).psi;
        if best.as_ref().is_none_or(|(b, _)| psi < *b) {
            best = Some((psi, d));
        }
    }
    best.map(|b| b.1).ok_or(Error::InfeasibleInstance)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParallelOutcome {
    Threshold(OffloadDecision),
    /// The threshold decision missed the deadline; the column-generation result is used.
    Fallback(Box<cg::SolveResult>),
}

impl ParallelOutcome {
    pub fn decision(&self) -> &OffloadDecision {
        match self {
            ParallelOutcome::Threshold(d) => d,
            ParallelOutcome::Fallback(r) => &r.decision,
        }
    }
}

/// Offloads every interior node whose local energy exceeds its transfer cost
/// κω f_c² > o_{1,n}θ_u + o_{n,N}θ_d.
pub fn solve_parallel(
    graph: &TaskGraph,
    params: &SystemParams,
    opts: &SolverOptions,
) -> Result<ParallelOutcome> {
    if !is_fan(graph) {
        return Err(Error::WrongShape("fan"));
    }
    let n = graph.len();
    let locs: Vec<Location> = (0..n)
        .map(|i| {
            if graph.is_pinned(i) {
                return Location::Client;
            }
            let up = graph.parents(i)[0].bits as f64 * params.theta_up;
            let down = graph.children(i)[0].bits as f64 * params.theta_down;
            if params.local_energy(graph.workload(i)) > up + down {
                Location::Server
            } else {
                Location::Client
            }
        })
        .collect();
    match earliest_decision(graph, &locs, params) {
        Some(d) => Ok(ParallelOutcome::Threshold(d)),
        None => Ok(ParallelOutcome::Fallback(Box::new(cg::solve(graph, params, opts)?))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Auto,
    Cg,
    Sequential,
    Parallel,
}

impl FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Policy::Auto),
            "cg" => Ok(Policy::Cg),
            "sequential" => Ok(Policy::Sequential),
            "parallel" => Ok(Policy::Parallel),
            _ => Err(Error::InvalidParameter(format!("unknown policy {s}"))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Auto => "auto",
            Policy::Cg => "cg",
            Policy::Sequential => "sequential",
            Policy::Parallel => "parallel",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResult {
    /// Policy that produced the decision (never `Auto`).
    pub policy: Policy,
    pub decision: OffloadDecision,
    pub report: EnergyReport,
    pub bounds: Bounds,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub log: Vec<IterationRecord>,
}

impl PolicyResult {
    fn exact(policy: Policy, graph: &TaskGraph, params: &SystemParams, decision: OffloadDecision) -> Self {
        let report = location_energy(graph, &decision.locations, params);
        PolicyResult {
            policy,
            decision,
            report,
            bounds: Bounds {
                psi_lower: report.psi,
                psi_upper: report.psi,
            },
            iterations: 0,
            termination: None,
            log: Vec::new(),
        }
    }

    fn from_cg(r: cg::SolveResult) -> Self {
        PolicyResult {
            policy: Policy::Cg,
            decision: r.decision,
            report: r.report,
            bounds: r.bounds,
            iterations: r.iterations,
            termination: Some(r.termination),
            log: r.log,
        }
    }
}

pub fn solve_with_policy(
    graph: &TaskGraph,
    params: &SystemParams,
    policy: Policy,
    opts: &SolverOptions,
) -> Result<PolicyResult> {
    let policy = match policy {
        Policy::Auto if is_chain(graph) => Policy::Sequential,
        Policy::Auto if is_fan(graph) => Policy::Parallel,
        Policy::Auto => Policy::Cg,
        p => p,
    };
    match policy {
        Policy::Sequential => Ok(PolicyResult::exact(
            policy,
            graph,
            params,
            solve_sequential(graph, params)?,
        )),
        Policy::Parallel => match solve_parallel(graph, params, opts)? {
            ParallelOutcome::Threshold(d) => Ok(PolicyResult::exact(policy, graph, params, d)),
            ParallelOutcome::Fallback(r) => Ok(PolicyResult::from_cg(*r)),
        },
        _ => Ok(PolicyResult::from_cg(cg::solve(graph, params, opts)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fan(w: &[u64], bits: u64) -> TaskGraph {
        let n = w.len();
        let mut e = Vec::new();
        for i in 2..n {
            e.push((1, i, bits));
            e.push((i, n, bits));
        }
        TaskGraph::from_weights(w, &e).unwrap()
    }

    #[test]
    fn shapes() {
        let c = TaskGraph::from_weights(&[1, 1, 1, 1], &[(1, 2, 1), (2, 3, 1), (3, 4, 1)]).unwrap();
        assert!(is_chain(&c) && !is_fan(&c));
        let f = fan(&[1, 1, 1, 1], 1);
        assert!(is_fan(&f) && !is_chain(&f));
        assert!(matches!(solve_sequential(&f, &SystemParams::unit(10)), Err(Error::WrongShape(_))));
    }

    #[test]
    fn dominant_transfers_give_empty_window() {
        let c = TaskGraph::from_weights(&[1, 2, 2, 1], &[(1, 2, 9), (2, 3, 9), (3, 4, 9)]).unwrap();
        let d = solve_sequential(&c, &SystemParams::unit(20)).unwrap();
        assert_eq!(window_of(&d), Some(None));
    }

    #[test]
    fn threshold_rule() {
        let f = fan(&[1, 10, 1], 1);
        let p = SystemParams::unit(100);
        let out = solve_parallel(&f, &p, &SolverOptions::default()).unwrap();
        assert_eq!(out.decision().offloaded_ids(), vec![2]);
        let f = fan(&[1, 2, 1], 1);
        let out = solve_parallel(&f, &p, &SolverOptions::default()).unwrap();
        assert!(out.decision().offloaded_ids().is_empty());
    }

    #[test]
    fn deadline_forces_fallback() {
        let f = fan(&[1, 10, 1], 1);
        let mut p = SystemParams::unit(12);
        p.z_up_slots = 5;
        p.z_down_slots = 5;
        let out = solve_parallel(&f, &p, &SolverOptions::default()).unwrap();
        assert!(matches!(out, ParallelOutcome::Fallback(_)));
        assert!(out.decision().offloaded_ids().is_empty());
    }

    #[test]
    fn auto_dispatch() {
        let c = TaskGraph::from_weights(&[1, 10, 1], &[(1, 2, 1), (2, 3, 1)]).unwrap();
        let r = solve_with_policy(&c, &SystemParams::unit(30), Policy::Auto, &SolverOptions::default()).unwrap();
        assert_eq!(r.policy, Policy::Sequential);
        assert_eq!(r.report.psi, 4.0);
        assert_eq!("parallel".parse::<Policy>().unwrap(), Policy::Parallel);
    }
}
