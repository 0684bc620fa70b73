//! Exhaustive ground truth for small graphs.
//!
//! Ψ depends only on locations, so for each assignment the earliest schedule
//! is as good as any other: it is feasible whenever any schedule is.

use rayon::prelude::*;

use crate::energy::{location_energy, locations_from_mask, EnergyReport, Location, OffloadDecision};
use crate::error::{Error, Result};
use crate::graph::TaskGraph;
use crate::params::SystemParams;
use crate::schedule::{earliest_completion_slots, ec_feasible};

pub const ORACLE_MAX_NODES: usize = 22;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub psi_star: f64,
    pub decision: OffloadDecision,
    pub report: EnergyReport,
    /// Interior assignment bitmask of the witness (bit i = node i+2 on the server).
    pub mask: u64,
    pub assignments_enumerated: u64,
    pub feasible_count: u64,
}

/// Earliest-completion schedule, or None when it misses the deadline.
pub fn earliest_completion(
    graph: &TaskGraph,
    locations: &[Location],
    params: &SystemParams,
) -> Option<Vec<i64>> {
    let ec = earliest_completion_slots(graph, locations, params);
    ec_feasible(&ec, params).then_some(ec)
}

pub fn brute_force_optimum(graph: &TaskGraph, params: &SystemParams) -> Result<OracleResult> {
    let n = graph.len();
    if n > ORACLE_MAX_NODES {
        return Err(Error::OracleCapExceeded {
            nodes: n,
            cap: ORACLE_MAX_NODES,
        });
    }
    let interior = n.saturating_sub(2) as u32;
    let total: u64 = 1 << interior;
    const CHUNK: u64 = 1 << 12;
    let chunks = total.div_ceil(CHUNK);

    let (best, feasible) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut best: Option<(f64, u64)> = None;
            let mut feasible = 0u64;
            for mask in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let locs = locations_from_mask(n, mask);
                if earliest_completion(graph, &locs, params).is_none() {
                    continue;
                }
                feasible += 1;
                let psi = location_energy(graph, &locs, params).psi;
                if best.is_none_or(|(b, _)| psi < b) {
                    best = Some((psi, mask));
                }
            }
            (best, feasible)
        })
        .reduce(
            || (None, 0),
            |(a, fa), (b, fb)| {
                let best = match (a, b) {
                    (Some(x), Some(y)) => {
                        if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
                            Some(y)
                        } else {
                            Some(x)
                        }
                    }
                    (x, None) => x,
                    (None, y) => y,
                };
                (best, fa + fb)
            },
        );

    let (psi_star, mask) = best.ok_or(Error::InfeasibleInstance)?;
    let locs = locations_from_mask(n, mask);
    let slots = earliest_completion(graph, &locs, params).expect("witness is feasible");
    Ok(OracleResult {
        psi_star,
        report: location_energy(graph, &locs, params),
        decision: OffloadDecision::new(locs, slots),
        mask,
        assignments_enumerated: total,
        feasible_count: feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_only_local() {
        let g = TaskGraph::from_weights(&[3, 4], &[(1, 2, 5)]).unwrap();
        let r = brute_force_optimum(&g, &SystemParams::unit(10)).unwrap();
        assert_eq!(r.assignments_enumerated, 1);
        assert_eq!(r.psi_star, 7.0);
    }

    #[test]
    fn cheap_transfer_offloads_middle() {
        let g = TaskGraph::from_weights(&[1, 10, 1], &[(1, 2, 1), (2, 3, 1)]).unwrap();
        let r = brute_force_optimum(&g, &SystemParams::unit(30)).unwrap();
        assert_eq!(r.decision.offloaded_ids(), vec![2]);
        assert_eq!(r.psi_star, 4.0);
        assert_eq!(r.feasible_count, 2);
    }

    #[test]
    fn one_offloaded_node_stretches_chain() {
        let g = TaskGraph::from_weights(&[1, 1, 1], &[(1, 2, 1), (2, 3, 1)]).unwrap();
        let mut p = SystemParams::unit(30);
        p.z_up_slots = 4;
        p.z_down_slots = 3;
        let mid = vec![Location::Client, Location::Server, Location::Client];
        assert_eq!(earliest_completion(&g, &mid, &p).unwrap(), vec![1, 6, 10]);
    }

    #[test]
    fn cap_enforced() {
        let w = vec![1u64; 23];
        let e: Vec<_> = (1..23).map(|i| (i, i + 1, 1)).collect();
        let g = TaskGraph::from_weights(&w, &e).unwrap();
        assert!(matches!(
            brute_force_optimum(&g, &SystemParams::unit(100)),
            Err(Error::OracleCapExceeded { .. })
        ));
    }
}
