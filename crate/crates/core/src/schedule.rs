//! Earliest- and latest-completion schedules for fixed locations.

use crate::energy::{exec_at, transfer_slots, Location, OffloadDecision};
use crate::graph::TaskGraph;
use crate::params::SystemParams;

/// EC(n) = max(1, max_m [EC(m) + transfer(m,n)] + exec(n)).
pub fn earliest_completion_slots(
    graph: &TaskGraph,
    locs: &[Location],
    params: &SystemParams,
) -> Vec<i64> {
    let mut ec = vec![0i64; graph.len()];
    for i in graph.topo_indices() {
        let ready = graph
            .parents(i)
            .iter()
            .map(|a| ec[a.node] + transfer_slots(locs[a.node], locs[i], params))
            .max()
            .unwrap_or(0);
        ec[i] = (ready + exec_at(graph, i, locs[i], params)).max(1);
    }
    ec
}

/// LC(N) = T; LC(n) = min_k [LC(k) - transfer(n,k) - exec(k)]; T for other leaves.
pub fn latest_completion_slots(
    graph: &TaskGraph,
    locs: &[Location],
    params: &SystemParams,
) -> Vec<i64> {
    let t = params.deadline_slots;
    let mut lc = vec![t; graph.len()];
    for &i in graph.topo_indices().iter().rev() {
        if let Some(v) = graph
            .children(i)
            .iter()
            .map(|a| {
                lc[a.node]
                    - transfer_slots(locs[i], locs[a.node], params)
                    - exec_at(graph, a.node, locs[a.node], params)
            })
            .min()
        {
            lc[i] = v.min(t);
        }
    }
    lc
}

/// True when every node fits before the deadline.
pub fn ec_feasible(ec: &[i64], params: &SystemParams) -> bool {
    ec.iter().all(|&s| s <= params.deadline_slots)
}

/// Earliest schedule for the locations, or None if it misses the deadline.
pub fn earliest_decision(
    graph: &TaskGraph,
    locs: &[Location],
    params: &SystemParams,
) -> Option<OffloadDecision> {
    let ec = earliest_completion_slots(graph, locs, params);
    ec_feasible(&ec, params).then(|| OffloadDecision::new(locs.to_vec(), ec))
}

/// All-local schedule running modules one after another in topological order.
pub fn serial_local_slots(graph: &TaskGraph, params: &SystemParams) -> Vec<i64> {
    let mut slots = vec![0; graph.len()];
    let mut acc = 0i64;
    for i in graph.topo_indices() {
        acc += params.client_exec(graph.workload(i));
        acc = acc.max(1);
        slots[i] = acc;
    }
    slots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::check_constraints;

    #[test]
    fn chain_schedules() {
        let g = crate::graph::TaskGraph::from_weights(&[1, 1, 1], &[(1, 2, 1), (2, 3, 1)]).unwrap();
        let mut p = SystemParams::unit(10);
        p.z_up_slots = 2;
        p.z_down_slots = 3;
        let local = vec![Location::Client; 3];
        assert_eq!(earliest_completion_slots(&g, &local, &p), vec![1, 2, 3]);
        assert_eq!(latest_completion_slots(&g, &local, &p), vec![8, 9, 10]);
        let mid = vec![Location::Client, Location::Server, Location::Client];
        assert_eq!(earliest_completion_slots(&g, &mid, &p), vec![1, 4, 8]);
        let d = earliest_decision(&g, &mid, &p).unwrap();
        assert!(check_constraints(&g, &d, &p).is_empty());
        p.deadline_slots = 7;
        assert!(earliest_decision(&g, &mid, &p).is_none());
    }

    #[test]
    fn serial_is_cumulative() {
        let g = crate::graph::TaskGraph::from_weights(
            &[1, 2, 3, 1],
            &[(1, 2, 1), (1, 3, 1), (2, 4, 1), (3, 4, 1)],
        )
        .unwrap();
        assert_eq!(serial_local_slots(&g, &SystemParams::unit(10)), vec![1, 3, 6, 7]);
    }
}
