#![allow(dead_code)]

use mec_offload::energy::{Location, OffloadDecision};
use mec_offload::{SystemParams, TaskGraph};
use rand::Rng;

/// Random DAG on ids 1..=n with edges only from lower to higher ids; every
/// interior node gets at least one parent and one child.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, p: f64) -> TaskGraph {
    let w: Vec<u64> = (0..n).map(|_| rng.random_range(1..=6)).collect();
    let mut edges = Vec::new();
    let mut has_parent = vec![false; n + 1];
    let mut has_child = vec![false; n + 1];
    for i in 1..=n {
        for j in i + 1..=n {
            if rng.random_bool(p) {
                edges.push((i, j, rng.random_range(0..=4)));
                has_child[i] = true;
                has_parent[j] = true;
            }
        }
    }
    for i in 2..n {
        if !has_parent[i] {
            edges.push((1, i, rng.random_range(0..=4)));
        }
        if !has_child[i] {
            edges.push((i, n, rng.random_range(0..=4)));
        }
    }
    if n == 2 {
        edges.push((1, 2, 1));
    }
    edges.sort();
    edges.dedup_by_key(|e| (e.0, e.1));
    TaskGraph::from_weights(&w, &edges).unwrap()
}

/// Chain 1→…→n with random weights.
pub fn random_chain<R: Rng>(rng: &mut R, n: usize) -> TaskGraph {
    let w: Vec<u64> = (0..n).map(|_| rng.random_range(1..=9)).collect();
    let e: Vec<_> = (1..n).map(|i| (i, i + 1, rng.random_range(0..=6))).collect();
    TaskGraph::from_weights(&w, &e).unwrap()
}

/// Node 1 feeds every interior node, each of which feeds node n.
pub fn random_fan<R: Rng>(rng: &mut R, n: usize) -> TaskGraph {
    let w: Vec<u64> = (0..n).map(|_| rng.random_range(1..=9)).collect();
    let mut e = Vec::new();
    for i in 2..n {
        e.push((1, i, rng.random_range(0..=6)));
        e.push((i, n, rng.random_range(0..=6)));
    }
    TaskGraph::from_weights(&w, &e).unwrap()
}

/// Small integer-ish parameters: server twice as fast, short reserved transfers.
pub fn random_params<R: Rng>(rng: &mut R, deadline: i64) -> SystemParams {
    let mut p = SystemParams::unit(deadline);
    p.f_s = 2.0;
    p.z_up_slots = rng.random_range(0..=3);
    p.z_down_slots = rng.random_range(0..=3);
    p.theta_up = [0.25, 0.5, 1.0][rng.random_range(0..3)];
    p.theta_down = [0.25, 0.5, 1.0][rng.random_range(0..3)];
    p
}

pub fn random_locations<R: Rng>(rng: &mut R, n: usize) -> Vec<Location> {
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 || !rng.random_bool(0.5) {
                Location::Client
            } else {
                Location::Server
            }
        })
        .collect()
}

pub fn random_decision<R: Rng>(rng: &mut R, n: usize, deadline: i64) -> OffloadDecision {
    let locs = random_locations(rng, n);
    let slots = (0..n).map(|_| rng.random_range(0..=deadline + 1)).collect();
    OffloadDecision::new(locs, slots)
}
