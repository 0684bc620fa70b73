//! Deadline-free relaxation of the offloading problem, solved exactly as an
//! s-t minimum cut. Its value never exceeds Ψ* and gives the solver a
//! certified lower bound.
//!
//! Source side = client, sink side = server. A node on the client side pays
//! its local energy through its arc to the sink; an edge m→n pays oθ_u when
//! only m is on the client (arc m→n) and oθ_d when only n is (arc n→m).
//! Nodes that can never meet the deadline on the server are tied to the source.

use petgraph::algo::dinics;
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::visit::EdgeRef;

use crate::energy::{location_energy, Location};
use crate::graph::TaskGraph;
use crate::params::SystemParams;

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    /// Server set of the cut that attains (or undercuts) the flow value.
    pub locations: Vec<Location>,
    pub pinned: Vec<bool>,
}

/// Nodes that cannot run on the server in any deadline-feasible decision:
/// every path 1 → n → N needs at least one upload before n and one download
/// after it, on top of each module's fastest execution time.
pub fn deadline_pinned(graph: &TaskGraph, params: &SystemParams) -> Vec<bool> {
    let n = graph.len();
    let order = graph.topo_indices();
    let min_exec = |i: usize| {
        if graph.is_pinned(i) {
            params.client_exec(graph.workload(i))
        } else {
            params
                .client_exec(graph.workload(i))
                .min(params.server_exec(graph.workload(i)))
        }
    };
    // longest path from node 1 ending just before i (None when unreachable)
    let mut head: Vec<Option<i64>> = vec![None; n];
    head[0] = Some(0);
    for &i in &order {
        if i == 0 {
            continue;
        }
        head[i] = graph
            .parents(i)
            .iter()
            .filter_map(|a| head[a.node].map(|h| h + min_exec(a.node)))
            .max();
    }
    // longest path starting just after i and finishing node N
    let mut tail: Vec<Option<i64>> = vec![None; n];
    tail[n - 1] = Some(0);
    for &i in order.iter().rev() {
        if i == n - 1 {
            continue;
        }
        tail[i] = graph
            .children(i)
            .iter()
            .filter_map(|a| tail[a.node].map(|t| t + min_exec(a.node)))
            .max();
    }
    (0..n)
        .map(|i| {
            if graph.is_pinned(i) {
                return true;
            }
            match (head[i], tail[i]) {
                (Some(h), Some(t)) => {
                    h + params.z_up_slots + params.server_exec(graph.workload(i)) + params.z_down_slots + t
                        > params.deadline_slots
                }
                _ => false,
            }
        })
        .collect()
}

pub fn deadline_free_lower_bound(graph: &TaskGraph, params: &SystemParams) -> LowerBound {
    let n = graph.len();
    let pinned = deadline_pinned(graph, params);
    let local: Vec<f64> = (0..n).map(|i| params.local_energy(graph.workload(i))).collect();
    let big = 1.0
        + 2.0
            * (local.iter().sum::<f64>()
                + graph
                    .edges()
                    .iter()
                    .map(|e| e.bits as f64 * (params.theta_up + params.theta_down))
                    .sum::<f64>());

    let mut net: DiGraph<(), f64> = DiGraph::new();
    let nodes: Vec<NodeIndex> = (0..n).map(|_| net.add_node(())).collect();
    let src = net.add_node(());
    let sink = net.add_node(());
    for i in 0..n {
        if local[i] > 0.0 {
            net.add_edge(nodes[i], sink, local[i]);
        }
        if pinned[i] {
            net.add_edge(src, nodes[i], big);
        }
    }
    for e in graph.edges() {
        let (m, k) = (nodes[e.from - 1], nodes[e.to - 1]);
        let up = e.bits as f64 * params.theta_up;
        let down = e.bits as f64 * params.theta_down;
        if up > 0.0 {
            net.add_edge(m, k, up);
        }
        if down > 0.0 {
            net.add_edge(k, m, down);
        }
    }

    let (flow, flows) = dinics(&net, src, sink);

    // client side = residual reachability from the source
    let tol = 1e-12 * big;
    let mut reach = vec![false; net.node_count()];
    let mut stack = vec![src];
    reach[src.index()] = true;
    while let Some(v) = stack.pop() {
        for e in net.edges_directed(v, petgraph::Direction::Outgoing) {
            let w = e.target();
            if !reach[w.index()] && e.weight() - flows[e.id().index()] > tol {
                reach[w.index()] = true;
                stack.push(w);
            }
        }
        for e in net.edges_directed(v, petgraph::Direction::Incoming) {
            let w = e.source();
            if !reach[w.index()] && flows[e.id().index()] > tol {
                reach[w.index()] = true;
                stack.push(w);
            }
        }
    }
    let locations: Vec<Location> = (0..n)
        .map(|i| {
            if reach[nodes[i].index()] || pinned[i] {
                Location::Client
            } else {
                Location::Server
            }
        })
        .collect();
    let cut = location_energy(graph, &locations, params).psi;
    LowerBound {
        value: flow.min(cut).max(0.0),
        locations,
        pinned,
    }
}
