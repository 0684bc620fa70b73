//! ε-bounded column generation over server placements.
//!
//! A column is an interior node moved to the server. The restricted master
//! keeps the admitted columns, checks that a deadline-feasible schedule exists
//! for them and prices the dependency rows; the pricing problem picks the
//! column with the most negative reduced cost (CS) at its best completion slot
//! (TD). Bounds: Ψ_u is the energy of the current feasible decision, Ψ_l comes
//! from the deadline-free min-cut relaxation, which is a valid lower bound for
//! every pricing round.

use serde::Serialize;

use crate::energy::{
    check_constraints, exec_at, location_energy, transfer_slots, EnergyReport, Location,
    OffloadDecision,
};
use crate::error::{Error, Result};
use crate::graph::TaskGraph;
use crate::lp::{self, Lp, LpStatus};
use crate::params::SystemParams;
use crate::relax::deadline_free_lower_bound;
use crate::schedule::{
    ec_feasible, earliest_completion_slots, latest_completion_slots, serial_local_slots,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub epsilon: f64,
    pub npp_max_iter: usize,
    /// The phase-one LP is skipped (heuristic prices instead) above this many rows.
    pub dual_lp_max_rows: usize,
    /// Duals are scaled to `dual_scale` × (all-local energy / T) per slot.
    pub dual_scale: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            epsilon: 0.0,
            npp_max_iter: 20,
            dual_lp_max_rows: 128,
            dual_scale: 1e-9,
        }
    }
}

impl SolverOptions {
    pub fn with_epsilon(epsilon: f64) -> Self {
        SolverOptions {
            epsilon,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub locations: Vec<Location>,
    /// Columns whose admission failed; never priced again.
    pub blacklist: Vec<bool>,
    pub schedule: OffloadDecision,
    /// π per edge, in [`TaskGraph::edges`] order.
    pub duals: Vec<f64>,
    pub psi_upper: f64,
    pub psi_lower: f64,
    pub r_underbar: f64,
    pub iterations: usize,
    pub k_const: f64,
    ec: Vec<i64>,
    lc: Vec<i64>,
}

impl SolverState {
    pub fn offloaded(&self, idx: usize) -> bool {
        self.locations[idx].is_server()
    }

    pub fn earliest(&self) -> &[i64] {
        &self.ec
    }

    pub fn latest(&self) -> &[i64] {
        &self.lc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PricedColumn {
    pub node: usize,
    pub reduced_cost: f64,
    pub t_min: i64,
    pub t_max: i64,
    pub slot: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Relaxed pricing value r̲* ≥ 0: Ψ_u is optimal.
    Optimal,
    /// Ψ_u ≤ (1+ε)Ψ_l.
    EpsilonBound,
    /// No candidate column with negative reduced cost remained.
    NoImprovingColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub psi_upper: f64,
    pub psi_lower: f64,
    pub r_underbar: f64,
    pub admitted_node: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub psi_lower: f64,
    pub psi_upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub decision: OffloadDecision,
    pub report: EnergyReport,
    pub bounds: Bounds,
    pub epsilon: f64,
    /// Admissions plus rejections.
    pub iterations: usize,
    pub termination: Termination,
    pub log: Vec<IterationRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RmpOutcome {
    Feasible { psi_upper: f64 },
    /// The fixed locations admit no deadline-feasible schedule.
    Reject,
}

pub fn initial_rmp(graph: &TaskGraph, params: &SystemParams) -> Result<SolverState> {
    let n = graph.len();
    let locations = vec![Location::Client; n];
    let serial = serial_local_slots(graph, params);
    let schedule = if ec_feasible(&serial, params) {
        serial
    } else {
        // the serial order is only a sufficient test; parallel branches may still fit
        let ec = earliest_completion_slots(graph, &locations, params);
        if !ec_feasible(&ec, params) {
            return Err(Error::InfeasibleInstance);
        }
        ec
    };
    let psi = location_energy(graph, &locations, params).psi;
    Ok(SolverState {
        schedule: OffloadDecision::new(locations.clone(), schedule),
        locations,
        blacklist: vec![false; n],
        duals: vec![0.0; graph.edges().len()],
        psi_upper: psi,
        psi_lower: 0.0,
        r_underbar: 0.0,
        iterations: 0,
        k_const: n.saturating_sub(2) as f64,
        ec: Vec::new(),
        lc: Vec::new(),
    })
}

/// Checks the fixed locations, refreshes Ψ_u, the completion brackets and the duals.
pub fn solve_rmp(
    state: &mut SolverState,
    graph: &TaskGraph,
    params: &SystemParams,
    opts: &SolverOptions,
) -> RmpOutcome {
    let ec = earliest_completion_slots(graph, &state.locations, params);
    if !ec_feasible(&ec, params) {
        return RmpOutcome::Reject;
    }
    if state.schedule.locations != state.locations
        || !check_constraints(graph, &state.schedule, params).is_empty()
    {
        state.schedule = OffloadDecision::new(state.locations.clone(), ec.clone());
    }
    state.lc = latest_completion_slots(graph, &state.locations, params);
    state.ec = ec;
    state.psi_upper = location_energy(graph, &state.locations, params).psi;
    state.duals = dependency_duals(graph, &state.schedule, params, opts);
    RmpOutcome::Feasible {
        psi_upper: state.psi_upper,
    }
}

/// Prices of the dependency rows: optimal duals of the phase-one LP, or
/// tightness weights 1/(1+slack) normalized to sum 1 when those are all zero.
pub fn dependency_duals(
    graph: &TaskGraph,
    schedule: &OffloadDecision,
    params: &SystemParams,
    opts: &SolverOptions,
) -> Vec<f64> {
    let m = graph.edges().len();
    if m == 0 {
        return Vec::new();
    }
    let mut pi = phase_one_duals(graph, &schedule.locations, params, opts.dual_lp_max_rows)
        .unwrap_or_else(|| vec![0.0; m]);
    if pi.iter().all(|&v| v <= 0.0) {
        for (k, e) in graph.edges().iter().enumerate() {
            let (a, b) = (e.from - 1, e.to - 1);
            let gap = schedule.slots[b]
                - schedule.slots[a]
                - exec_at(graph, b, schedule.locations[b], params);
            let slack = gap - transfer_slots(schedule.locations[a], schedule.locations[b], params);
            pi[k] = 1.0 / (1.0 + slack.max(0) as f64);
        }
        let total: f64 = pi.iter().sum();
        for v in pi.iter_mut() {
            *v /= total;
        }
    }
    let all_local: f64 = (0..graph.len())
        .map(|i| params.local_energy(graph.workload(i)))
        .sum();
    let nu = opts.dual_scale * all_local.max(f64::MIN_POSITIVE) / params.deadline_slots as f64;
    pi.iter().map(|v| v.max(0.0) * nu).collect()
}

/// Phase-one LP over continuous completion times u_n = x_n - 1 ≥ 0:
///   dependency rows  u_k - u_m + s_e - r_e = transfer + exec(k)
///   exec rows        u_n + s_n - r_n = exec(n) - 1      (exec(n) > 1)
///   deadline row     u_N - s_D + w = T - 1
/// minimizing the total slack Σ s. Returns π for the dependency rows.
fn phase_one_duals(
    graph: &TaskGraph,
    locs: &[Location],
    params: &SystemParams,
    max_rows: usize,
) -> Option<Vec<f64>> {
    let n = graph.len();
    let edges = graph.edges();
    let exec: Vec<i64> = (0..n).map(|i| exec_at(graph, i, locs[i], params)).collect();
    let exec_rows: Vec<usize> = (0..n).filter(|&i| exec[i] > 1).collect();
    let rows = edges.len() + exec_rows.len() + 1;
    if rows > max_rows {
        return None;
    }
    // columns: u (n), then per ≥ row (s, r), then deadline (s_D, w)
    let ge_rows = edges.len() + exec_rows.len();
    let cols = n + 2 * ge_rows + 2;
    let mut a = vec![vec![0.0; cols]; rows];
    let mut b = vec![0.0; rows];
    let mut c = vec![0.0; cols];
    for (r, e) in edges.iter().enumerate() {
        let (m, k) = (e.from - 1, e.to - 1);
        a[r][k] += 1.0;
        a[r][m] -= 1.0;
        b[r] = (transfer_slots(locs[m], locs[k], params) + exec[k]) as f64;
    }
    for (j, &i) in exec_rows.iter().enumerate() {
        let r = edges.len() + j;
        a[r][i] = 1.0;
        b[r] = (exec[i] - 1) as f64;
    }
    for r in 0..ge_rows {
        a[r][n + 2 * r] = 1.0;
        a[r][n + 2 * r + 1] = -1.0;
        c[n + 2 * r] = 1.0;
    }
    let d = rows - 1;
    a[d][n - 1] = 1.0;
    a[d][cols - 2] = -1.0;
    a[d][cols - 1] = 1.0;
    c[cols - 2] = 1.0;
    b[d] = (params.deadline_slots - 1) as f64;

    let sol = lp::solve(&Lp { c, a, b });
    (sol.status == LpStatus::Optimal).then(|| sol.duals[..edges.len()].to_vec())
}

/// Exact change in Ψ from moving node `idx` to the server.
pub fn marginal_energy(graph: &TaskGraph, locs: &[Location], idx: usize, params: &SystemParams) -> f64 {
    let mut d = -params.local_energy(graph.workload(idx));
    for a in graph.parents(idx) {
        let o = a.bits as f64;
        d += if locs[a.node].is_server() {
            -o * params.theta_down
        } else {
            o * params.theta_up
        };
    }
    for a in graph.children(idx) {
        let o = a.bits as f64;
        d += if locs[a.node].is_server() {
            -o * params.theta_up
        } else {
            o * params.theta_down
        };
    }
    d
}

/// ζ_n at completion slot t: the marginal energy minus the priced dependency
/// gaps b, with parents at their earliest and children at their latest slots.
pub fn reduced_cost(
    idx: usize,
    t: i64,
    state: &SolverState,
    graph: &TaskGraph,
    params: &SystemParams,
) -> f64 {
    let mut z = marginal_energy(graph, &state.locations, idx, params);
    let own = params.server_exec(graph.workload(idx));
    for a in graph.parents(idx) {
        let b = t - state.ec[a.node] - own;
        z -= state.duals[a.edge] * b as f64;
    }
    for a in graph.children(idx) {
        let b = state.lc[a.node] - t - exec_at(graph, a.node, state.locations[a.node], params);
        z -= state.duals[a.edge] * b as f64;
    }
    z
}

/// ζ with every gap b set to the worst-case transfer time (the pricing start).
fn initial_reduced_cost(idx: usize, state: &SolverState, graph: &TaskGraph, params: &SystemParams) -> f64 {
    let mut z = marginal_energy(graph, &state.locations, idx, params);
    for a in graph.parents(idx) {
        z -= state.duals[a.edge] * params.z_up_slots as f64;
    }
    for a in graph.children(idx) {
        z -= state.duals[a.edge] * params.z_down_slots as f64;
    }
    z
}

/// argmin ζ over (node id, ζ) pairs, ties to the smallest id.
pub fn solve_cs(candidates: &[(usize, f64)]) -> Result<usize> {
    candidates
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|c| c.0)
        .ok_or(Error::NoColumn)
}

pub fn feasible_slot_range(
    idx: usize,
    state: &SolverState,
    graph: &TaskGraph,
    params: &SystemParams,
) -> Result<(i64, i64)> {
    let own = params.server_exec(graph.workload(idx));
    let t_min = graph
        .parents(idx)
        .iter()
        .map(|a| state.ec[a.node] + transfer_slots(state.locations[a.node], Location::Server, params) + own)
        .max()
        .unwrap_or(own)
        .max(1);
    let t_max = graph
        .children(idx)
        .iter()
        .map(|a| {
            let loc = state.locations[a.node];
            state.lc[a.node] - transfer_slots(Location::Server, loc, params) - exec_at(graph, a.node, loc, params)
        })
        .min()
        .unwrap_or(params.deadline_slots)
        .min(params.deadline_slots);
    if t_min > t_max {
        Err(Error::NoFeasibleSlot {
            node: idx + 1,
            t_min,
            t_max,
        })
    } else {
        Ok((t_min, t_max))
    }
}

/// Best completion slot for column `idx`. ζ is affine in t, so the minimum
/// sits at an end of the range; ties go to the earlier slot.
pub fn solve_td(
    idx: usize,
    state: &SolverState,
    graph: &TaskGraph,
    params: &SystemParams,
) -> Result<(i64, f64)> {
    let (lo, hi) = feasible_slot_range(idx, state, graph, params)?;
    let a = reduced_cost(idx, lo, state, graph, params);
    let b = reduced_cost(idx, hi, state, graph, params);
    Ok(if b < a { (hi, b) } else { (lo, a) })
}

/// Slot-by-slot version of [`solve_td`].
pub fn solve_td_scan(
    idx: usize,
    state: &SolverState,
    graph: &TaskGraph,
    params: &SystemParams,
) -> Result<(i64, f64)> {
    let (lo, hi) = feasible_slot_range(idx, state, graph, params)?;
    let mut best = (lo, reduced_cost(idx, lo, state, graph, params));
    for t in lo + 1..=hi {
        let z = reduced_cost(idx, t, state, graph, params);
        if z < best.1 {
            best = (t, z);
        }
    }
    Ok(best)
}

fn candidates(state: &SolverState, graph: &TaskGraph, params: &SystemParams) -> Vec<usize> {
    (1..graph.len().saturating_sub(1))
        .filter(|&i| !state.offloaded(i) && !state.blacklist[i])
        .filter(|&i| feasible_slot_range(i, state, graph, params).is_ok())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NppResult {
    pub column: Option<PricedColumn>,
    /// ζ of the returned column, 0 when there is none.
    pub best_reduced_cost: f64,
    pub rounds: usize,
}

/// Alternates CS and TD until the selected column stops changing.
pub fn solve_npp(
    state: &SolverState,
    graph: &TaskGraph,
    params: &SystemParams,
    opts: &SolverOptions,
) -> NppResult {
    let cand = candidates(state, graph, params);
    if cand.is_empty() {
        return NppResult {
            column: None,
            best_reduced_cost: 0.0,
            rounds: 0,
        };
    }
    let start: Vec<(usize, f64)> = cand
        .iter()
        .map(|&i| (i + 1, initial_reduced_cost(i, state, graph, params)))
        .collect();
    let mut l = solve_cs(&start).expect("nonempty") - 1;
    let mut rounds = 0;
    let mut best = solve_td(l, state, graph, params).expect("candidate has a slot");
    while rounds < opts.npp_max_iter.max(1) {
        rounds += 1;
        let priced: Vec<(usize, (i64, f64))> = cand
            .iter()
            .map(|&i| (i, solve_td(i, state, graph, params).expect("candidate has a slot")))
            .collect();
        let pick = solve_cs(&priced.iter().map(|(i, (_, z))| (i + 1, *z)).collect::<Vec<_>>())
            .expect("nonempty")
            - 1;
        best = priced.iter().find(|(i, _)| *i == pick).unwrap().1;
        if pick == l {
            break;
        }
        l = pick;
    }
    let (t_min, t_max) = feasible_slot_range(l, state, graph, params).expect("candidate has a slot");
    NppResult {
        column: Some(PricedColumn {
            node: l + 1,
            reduced_cost: best.1,
            t_min,
            t_max,
            slot: best.0,
        }),
        best_reduced_cost: best.1,
        rounds,
    }
}

/// Schedule after placing `idx` on the server at slot t: descendants at their
/// latest slots, everything else at its earliest.
pub fn admission_schedule(state: &SolverState, graph: &TaskGraph, idx: usize, t: i64) -> OffloadDecision {
    let desc = graph.descendants(idx);
    let mut locations = state.locations.clone();
    locations[idx] = Location::Server;
    let slots = (0..graph.len())
        .map(|i| {
            if i == idx {
                t
            } else if desc[i] {
                state.lc[i]
            } else {
                state.ec[i]
            }
        })
        .collect();
    OffloadDecision::new(locations, slots)
}

/// Relaxed pricing value implied by a lower bound LB: Ψ_u + 𝒦 r̲* = LB.
fn certified_r_underbar(psi_upper: f64, lower: f64, k: f64) -> f64 {
    if k <= 0.0 || (lower - psi_upper).abs() <= 1e-12 * psi_upper.abs().max(1.0) {
        return 0.0;
    }
    ((lower - psi_upper) / k).min(0.0)
}

pub fn solve(graph: &TaskGraph, params: &SystemParams, opts: &SolverOptions) -> Result<SolveResult> {
    if !(opts.epsilon >= 0.0 && opts.epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in [0,1), got {}",
            opts.epsilon
        )));
    }
    params.validate()?;
    let mut state = initial_rmp(graph, params)?;
    let lower = deadline_free_lower_bound(graph, params).value;
    let mut log = Vec::new();
    let max_iter = graph.len().saturating_sub(2);

    let termination = loop {
        if solve_rmp(&mut state, graph, params, opts) == RmpOutcome::Reject {
            // admissions are checked before they are kept, so this is unreachable
            return Err(Error::InfeasibleInstance);
        }
        let npp = solve_npp(&state, graph, params, opts);
        state.r_underbar = certified_r_underbar(state.psi_upper, lower, state.k_const);
        state.psi_lower = (state.psi_upper + state.k_const * state.r_underbar).max(0.0);
        let mut record = IterationRecord {
            iter: log.len(),
            psi_upper: state.psi_upper,
            psi_lower: state.psi_lower,
            r_underbar: state.r_underbar,
            admitted_node: None,
        };

        let stop = if state.r_underbar >= 0.0 {
            Some(Termination::Optimal)
        } else if state.psi_upper <= (1.0 + opts.epsilon) * state.psi_lower {
            Some(Termination::EpsilonBound)
        } else {
            match npp.column {
                Some(c) if c.reduced_cost < 0.0 && state.iterations < max_iter => None,
                _ => Some(Termination::NoImprovingColumn),
            }
        };
        if let Some(t) = stop {
            log.push(record);
            break t;
        }

        let col = npp.column.expect("column present");
        let idx = col.node - 1;
        let trial = admission_schedule(&state, graph, idx, col.slot);
        let psi = location_energy(graph, &trial.locations, params).psi;
        state.iterations += 1;
        if psi < state.psi_upper && check_constraints(graph, &trial, params).is_empty() {
            state.locations = trial.locations.clone();
            state.schedule = trial;
            record.admitted_node = Some(col.node);
        } else {
            state.blacklist[idx] = true;
        }
        log.push(record);
    };

    let report = location_energy(graph, &state.schedule.locations, params);
    Ok(SolveResult {
        report,
        bounds: Bounds {
            psi_lower: state.psi_lower,
            psi_upper: state.psi_upper,
        },
        decision: state.schedule,
        epsilon: opts.epsilon,
        iterations: state.iterations,
        termination,
        log,
    })
}
