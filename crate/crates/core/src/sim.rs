//! Monte Carlo replay of offloading decisions against random or recorded
//! channel/queue/power traces, and the layered random DAG generator.

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{exec_at, EnergyReport, Location, OffloadDecision};
use crate::error::{Error, Result};
use crate::evt::{gev_sample, GevParams};
use crate::graph::{DataEdge, TaskGraph, TaskModule};
use crate::params::{seconds_to_slots, SystemParams};
use crate::trace::{read_trace, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Dist {
    Constant { value: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Uniform { low: f64, high: f64 },
    Gev { mu: f64, sigma: f64, xi: f64 },
    /// Next row of the model's replay trace.
    EmpiricalReplay,
}

impl Dist {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match *self {
            Dist::Constant { value } if !(value.is_finite() && value >= 0.0) => {
                bad("constant must be finite and nonnegative")
            }
            Dist::Lognormal { sigma, .. } if !(sigma >= 0.0) => bad("lognormal sigma must be >= 0"),
            Dist::Uniform { low, high } if !(low >= 0.0 && high >= low) => {
                bad("uniform needs 0 <= low <= high")
            }
            Dist::Gev { mu, sigma, xi } => GevParams::new(mu, sigma, xi).map(|_| ()),
            _ => Ok(()),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, replay: f64) -> f64 {
        let v = match *self {
            Dist::Constant { value } => value,
            Dist::Lognormal { mu, sigma } => LogNormal::new(mu, sigma).expect("validated").sample(rng),
            Dist::Uniform { low, high } => {
                if high > low {
                    Uniform::new(low, high).expect("validated").sample(rng)
                } else {
                    low
                }
            }
            Dist::Gev { mu, sigma, xi } => gev_sample(&GevParams { mu, sigma, xi }, rng),
            Dist::EmpiricalReplay => replay,
        };
        v.max(0.0)
    }
}

fn default_floor() -> f64 {
    1e3
}

/// Per-transfer distributions of queue, rate and power in each direction.
/// When `transfer_time_up`/`transfer_time_down` is set, the transfer time in
/// seconds is drawn from it directly instead of (Q+o)/R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceModel {
    pub queue_up_bits: Dist,
    pub queue_down_bits: Dist,
    pub rate_up_bps: Dist,
    pub rate_down_bps: Dist,
    pub power_up: Dist,
    pub power_down: Dist,
    #[serde(default = "default_floor")]
    pub rate_floor_bps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_time_up: Option<Dist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_time_down: Option<Dist>,
    /// Trace CSV consumed by `empirical_replay` fields, relative to the model file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_csv: Option<PathBuf>,
    #[serde(skip)]
    pub replay: Vec<TraceRow>,
}

impl TraceModel {
    pub fn constant(queue_bits: f64, rate_bps: f64, power: f64) -> Self {
        let c = |value| Dist::Constant { value };
        TraceModel {
            queue_up_bits: c(queue_bits),
            queue_down_bits: c(queue_bits),
            rate_up_bps: c(rate_bps),
            rate_down_bps: c(rate_bps),
            power_up: c(power),
            power_down: c(power),
            rate_floor_bps: default_floor(),
            transfer_time_up: None,
            transfer_time_down: None,
            replay_csv: None,
            replay: Vec::new(),
        }
    }

    /// Every field replays the given rows in order.
    pub fn replay(rows: Vec<TraceRow>) -> Self {
        let r = Dist::EmpiricalReplay;
        TraceModel {
            queue_up_bits: r,
            queue_down_bits: r,
            rate_up_bps: r,
            rate_down_bps: r,
            power_up: r,
            power_down: r,
            rate_floor_bps: default_floor(),
            transfer_time_up: None,
            transfer_time_down: None,
            replay_csv: None,
            replay: rows,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: TraceModel = serde_json::from_str(&text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => Error::Schema(e.to_string()),
            _ => Error::Json(e),
        })?;
        if let Some(csv) = &m.replay_csv {
            let full = path.parent().unwrap_or(Path::new(".")).join(csv);
            m.replay = read_trace(full)?;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let dists = [
            self.queue_up_bits,
            self.queue_down_bits,
            self.rate_up_bps,
            self.rate_down_bps,
            self.power_up,
            self.power_down,
        ];
        for d in dists.iter().chain(self.transfer_time_up.iter()).chain(self.transfer_time_down.iter()) {
            d.validate()?;
            if *d == Dist::EmpiricalReplay && self.replay.is_empty() {
                return Err(Error::InvalidParameter(
                    "empirical_replay needs a non-empty replay trace".into(),
                ));
            }
        }
        if !(self.rate_floor_bps > 0.0) {
            return Err(Error::InvalidParameter("rate floor must be positive".into()));
        }
        Ok(())
    }

    fn uses_replay(&self) -> bool {
        !self.replay.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferEvent {
    pub edge: usize,
    pub direction: Direction,
    pub seconds: f64,
    pub slots: i64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRun {
    pub energy: EnergyReport,
    pub completion_slots: Vec<i64>,
    pub deadline_met: bool,
    pub transfers: Vec<TransferEvent>,
}

/// Cross-boundary edges in canonical order.
fn cross_edges(graph: &TaskGraph, locs: &[Location]) -> Vec<(usize, Direction)> {
    graph
        .edges()
        .iter()
        .enumerate()
        .filter_map(|(k, e)| match (locs[e.from - 1], locs[e.to - 1]) {
            (Location::Client, Location::Server) => Some((k, Direction::Up)),
            (Location::Server, Location::Client) => Some((k, Direction::Down)),
            _ => None,
        })
        .collect()
}

/// Replays one execution: draws every cross-boundary transfer, then runs the
/// DAG as soon as possible with the realized transfer times. `replay_offset`
/// is the first replay row used by this run.
pub fn simulate_execution<R: Rng + ?Sized>(
    graph: &TaskGraph,
    decision: &OffloadDecision,
    params: &SystemParams,
    model: &TraceModel,
    rng: &mut R,
    replay_offset: usize,
) -> SimRun {
    let locs = &decision.locations;
    let mut transfer = vec![0i64; graph.edges().len()];
    let mut events = Vec::new();
    let (mut up_e, mut down_e) = (0.0, 0.0);
    let (mut nu, mut nd) = (0usize, 0usize);
    for (k, dir) in cross_edges(graph, locs) {
        let bits = graph.edges()[k].bits as f64;
        let (row, (qd, rd, pd, td)) = match dir {
            Direction::Up => {
                nu += 1;
                (
                    replay_offset + nu - 1,
                    (model.queue_up_bits, model.rate_up_bps, model.power_up, model.transfer_time_up),
                )
            }
            Direction::Down => {
                nd += 1;
                (
                    replay_offset + nd - 1,
                    (model.queue_down_bits, model.rate_down_bps, model.power_down, model.transfer_time_down),
                )
            }
        };
        let rec = if model.uses_replay() {
            Some(model.replay[row % model.replay.len()])
        } else {
            None
        };
        let pick = |f: fn(&TraceRow) -> f64| rec.as_ref().map(f).unwrap_or(0.0);
        let (q, r, p) = match dir {
            Direction::Up => (
                qd.draw(rng, pick(|t| t.queue_up_bits)),
                rd.draw(rng, pick(|t| t.rate_up_bps)),
                pd.draw(rng, pick(|t| t.power_up_mw)),
            ),
            Direction::Down => (
                qd.draw(rng, pick(|t| t.queue_down_bits)),
                rd.draw(rng, pick(|t| t.rate_down_bps)),
                pd.draw(rng, pick(|t| t.power_down_mw)),
            ),
        };
        let r = r.max(model.rate_floor_bps);
        let seconds = match td {
            Some(d) => d.draw(rng, (q + bits) / r),
            None => (q + bits) / r,
        };
        let slots = seconds_to_slots(seconds, params.delta_s);
        let energy = p * bits / r;
        match dir {
            Direction::Up => up_e += energy,
            Direction::Down => down_e += energy,
        }
        transfer[k] = slots;
        events.push(TransferEvent {
            edge: k,
            direction: dir,
            seconds,
            slots,
            energy,
        });
    }

    let mut done = vec![0i64; graph.len()];
    for i in graph.topo_indices() {
        let ready = graph
            .parents(i)
            .iter()
            .map(|a| done[a.node] + transfer[a.edge])
            .max()
            .unwrap_or(0);
        done[i] = (ready + exec_at(graph, i, locs[i], params)).max(1);
    }
    let local: f64 = (0..graph.len())
        .filter(|&i| !locs[i].is_server())
        .map(|i| params.local_energy(graph.workload(i)))
        .sum();
    SimRun {
        energy: EnergyReport {
            psi: local + up_e + down_e,
            local_exec_energy: local,
            uplink_energy: up_e,
            downlink_energy: down_e,
        },
        deadline_met: done[graph.len() - 1] <= params.deadline_slots,
        completion_slots: done,
        transfers: events,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeStats {
    pub from: usize,
    pub to: usize,
    pub direction: Direction,
    pub z_slots: i64,
    pub transfers: usize,
    pub exceedances: usize,
    pub exceedance_rate: f64,
    pub mean_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub replications: usize,
    pub seed: u64,
    pub mean_energy: f64,
    pub energy_p05: f64,
    pub energy_p50: f64,
    pub energy_p95: f64,
    pub mean_uplink_energy: f64,
    pub mean_downlink_energy: f64,
    pub deadline_violation_rate: f64,
    pub edges: Vec<EdgeStats>,
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// RNG for replication `rep`: the seed picks the key, the replication the stream.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

pub fn monte_carlo(
    graph: &TaskGraph,
    decision: &OffloadDecision,
    params: &SystemParams,
    model: &TraceModel,
    replications: usize,
    seed: u64,
) -> Result<SimReport> {
    if replications < 1 {
        return Err(Error::InvalidParameter("replications must be at least 1".into()));
    }
    model.validate()?;
    let cross = cross_edges(graph, &decision.locations);
    let per_run = cross.len().max(1);
    let runs: Vec<SimRun> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r as u64);
            simulate_execution(graph, decision, params, model, &mut rng, r * per_run)
        })
        .collect();

    let n = replications as f64;
    let mut energies: Vec<f64> = runs.iter().map(|r| r.energy.psi).collect();
    let mean_energy = energies.iter().sum::<f64>() / n;
    energies.sort_by(f64::total_cmp);
    let violations = runs.iter().filter(|r| !r.deadline_met).count();

    let mut edges: Vec<EdgeStats> = cross
        .iter()
        .map(|&(k, dir)| {
            let e = graph.edges()[k];
            EdgeStats {
                from: e.from,
                to: e.to,
                direction: dir,
                z_slots: match dir {
                    Direction::Up => params.z_up_slots,
                    Direction::Down => params.z_down_slots,
                },
                transfers: 0,
                exceedances: 0,
                exceedance_rate: 0.0,
                mean_energy: 0.0,
            }
        })
        .collect();
    for run in &runs {
        for (s, ev) in edges.iter_mut().zip(&run.transfers) {
            s.transfers += 1;
            if ev.slots > s.z_slots {
                s.exceedances += 1;
            }
            s.mean_energy += ev.energy;
        }
    }
    for s in &mut edges {
        s.exceedance_rate = s.exceedances as f64 / s.transfers as f64;
        s.mean_energy /= s.transfers as f64;
    }

    Ok(SimReport {
        replications,
        seed,
        mean_energy,
        energy_p05: quantile_sorted(&energies, 0.05),
        energy_p50: quantile_sorted(&energies, 0.5),
        energy_p95: quantile_sorted(&energies, 0.95),
        mean_uplink_energy: runs.iter().map(|r| r.energy.uplink_energy).sum::<f64>() / n,
        mean_downlink_energy: runs.iter().map(|r| r.energy.downlink_energy).sum::<f64>() / n,
        deadline_violation_rate: violations as f64 / n,
        edges,
    })
}

fn default_edge_prob() -> f64 {
    0.05
}
fn default_workload_scale() -> f64 {
    1e6
}
fn default_bits_scale() -> f64 {
    1.2e4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayeredDagSpec {
    pub nodes: usize,
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    /// Interior layers hold a uniform 1..=max_layer_width nodes; 0 picks ⌈√(N−2)⌉.
    #[serde(default)]
    pub max_layer_width: usize,
    #[serde(default = "default_workload_scale")]
    pub workload_scale: f64,
    #[serde(default = "default_bits_scale")]
    pub bits_scale: f64,
}

impl LayeredDagSpec {
    pub fn new(nodes: usize, edge_prob: f64) -> Self {
        LayeredDagSpec {
            nodes,
            edge_prob,
            max_layer_width: 0,
            workload_scale: default_workload_scale(),
            bits_scale: default_bits_scale(),
        }
    }
}

/// Random DAG with node 1 alone in the first layer, node N alone in the last,
/// interior nodes numbered layer by layer, and edges between adjacent layers
/// drawn with probability p. Orphans get one repair edge to a random node of
/// the neighbouring layer.
pub fn gen_layered_dag<R: Rng + ?Sized>(spec: &LayeredDagSpec, rng: &mut R) -> Result<TaskGraph> {
    let n = spec.nodes;
    if n < 2 {
        return Err(Error::InvalidParameter("layered DAG needs at least 2 nodes".into()));
    }
    if !(spec.edge_prob > 0.0 && spec.edge_prob <= 1.0) {
        return Err(Error::InvalidParameter("edge probability must lie in (0,1]".into()));
    }
    if !(spec.workload_scale >= 0.0 && spec.bits_scale >= 0.0) {
        return Err(Error::InvalidParameter("scales must be nonnegative".into()));
    }
    let interior = n - 2;
    let width = if spec.max_layer_width == 0 {
        ((interior as f64).sqrt().ceil() as usize).max(1)
    } else {
        spec.max_layer_width
    };

    let mut layers: Vec<Vec<usize>> = vec![vec![1]];
    let mut next = 2;
    while next < n {
        let w = rng.random_range(1..=width).min(n - next);
        layers.push((next..next + w).collect());
        next += w;
    }
    layers.push(vec![n]);

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for li in 0..layers.len() - 1 {
        let (a, b) = (&layers[li], &layers[li + 1]);
        let start = pairs.len();
        for &u in a {
            for &v in b {
                if rng.random::<f64>() < spec.edge_prob {
                    pairs.push((u, v));
                }
            }
        }
        for &v in b {
            if !pairs[start..].iter().any(|p| p.1 == v) {
                pairs.push((*a.choose(rng).expect("layer nonempty"), v));
            }
        }
        for &u in a {
            if !pairs[start..].iter().any(|p| p.0 == u) {
                pairs.push((u, *b.choose(rng).expect("layer nonempty")));
            }
        }
    }

    let half = |rng: &mut R, scale: f64| -> u64 {
        if scale == 0.0 {
            return 0;
        }
        Normal::new(0.0, scale).expect("scale checked").sample(rng).abs().round() as u64
    };
    let modules: Vec<TaskModule> = (1..=n)
        .map(|id| {
            let w = half(rng, spec.workload_scale);
            let w = if id == 1 || id == n { w } else { w.max(1) };
            TaskModule::new(id, w)
        })
        .collect();
    let edges: Vec<DataEdge> = pairs
        .into_iter()
        .map(|(u, v)| DataEdge::new(u, v, half(rng, spec.bits_scale)))
        .collect();
    TaskGraph::new(modules, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate_graph;

    #[test]
    fn two_node_generator() {
        let g = gen_layered_dag(&LayeredDagSpec::new(2, 0.5), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!((g.edges()[0].from, g.edges()[0].to), (1, 2));
    }

    #[test]
    fn generator_is_seeded() {
        let spec = LayeredDagSpec::new(100, 0.05);
        let a = gen_layered_dag(&spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = gen_layered_dag(&spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(validate_graph(&a).is_valid());
    }

    #[test]
    fn local_decision_is_deterministic_energy() {
        let g = TaskGraph::from_weights(&[1, 2, 1], &[(1, 2, 5), (2, 3, 5)]).unwrap();
        let p = SystemParams::unit(10);
        let d = OffloadDecision::new(vec![Location::Client; 3], vec![1, 3, 4]);
        let model = TraceModel {
            rate_up_bps: Dist::Lognormal { mu: 5.0, sigma: 1.0 },
            ..TraceModel::constant(0.0, 100.0, 1.0)
        };
        let rep = monte_carlo(&g, &d, &p, &model, 20, 3).unwrap();
        assert_eq!(rep.energy_p05, 4.0);
        assert_eq!(rep.energy_p95, 4.0);
        assert!(rep.edges.is_empty());
    }

    #[test]
    fn huge_rates_give_one_slot_transfers() {
        let g = TaskGraph::from_weights(&[1, 2, 1], &[(1, 2, 5), (2, 3, 5)]).unwrap();
        let p = SystemParams::unit(10);
        let d = OffloadDecision::new(
            vec![Location::Client, Location::Server, Location::Client],
            vec![1, 4, 6],
        );
        let model = TraceModel::constant(0.0, 1e15, 1.0);
        let run = simulate_execution(&g, &d, &p, &model, &mut ChaCha8Rng::seed_from_u64(0), 0);
        assert!(run.transfers.iter().all(|t| t.slots == 1));
        assert_eq!(run.completion_slots, vec![1, 4, 6]);
        assert!((run.energy.psi - 2.0).abs() < 1e-9);
    }
}
