use mec_offload::energy::{Location, OffloadDecision};
use mec_offload::evt::{fit_samples, gev_mean};
use mec_offload::schedule::earliest_decision;
use mec_offload::sim::{
    gen_layered_dag, monte_carlo, replication_rng, simulate_execution, Dist, LayeredDagSpec, TraceModel,
};
use mec_offload::trace::{write_trace, TraceRow};
use mec_offload::{validate_graph, SystemParams, TaskGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reaches(g: &TaskGraph, from_source: bool) -> Vec<bool> {
    let n = g.len();
    let mut seen = vec![false; n];
    let start = if from_source { 0 } else { n - 1 };
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        let next = if from_source { g.children(i) } else { g.parents(i) };
        for a in next {
            if !seen[a.node] {
                seen[a.node] = true;
                stack.push(a.node);
            }
        }
    }
    seen
}

#[test]
fn generated_graphs_are_valid_and_connected() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..1000 {
        let n = rng.random_range(2..=60);
        let p = rng.random_range(0.01..=1.0);
        let g = gen_layered_dag(&LayeredDagSpec::new(n, p), &mut rng).unwrap();
        assert_eq!(g.len(), n);
        assert!(validate_graph(&g).is_valid());
        assert!(reaches(&g, true).iter().all(|&b| b));
        assert!(reaches(&g, false).iter().all(|&b| b));
    }
}

#[test]
fn replayed_csv_gives_hand_computed_run() {
    let dir = tempfile::tempdir().unwrap();
    let row = |q_up, r_up, p_up, q_down, r_down, p_down| TraceRow {
        t_ms: 0.0,
        queue_up_bits: q_up,
        queue_down_bits: q_down,
        rate_up_bps: r_up,
        rate_down_bps: r_down,
        power_up_mw: p_up,
        power_down_mw: p_down,
    };
    write_trace(
        dir.path().join("t.csv"),
        &[row(10.0, 5.0, 2.0, 0.0, 10.0, 1.0), row(99.0, 1.0, 9.0, 99.0, 1.0, 9.0)],
    )
    .unwrap();
    let model_json = r#"{
        "queue_up_bits": {"family": "empirical_replay"},
        "queue_down_bits": {"family": "empirical_replay"},
        "rate_up_bps": {"family": "empirical_replay"},
        "rate_down_bps": {"family": "empirical_replay"},
        "power_up": {"family": "empirical_replay"},
        "power_down": {"family": "empirical_replay"},
        "rate_floor_bps": 0.5,
        "replay_csv": "t.csv"
    }"#;
    std::fs::write(dir.path().join("m.json"), model_json).unwrap();
    let model = TraceModel::load(dir.path().join("m.json")).unwrap();

    let g = TaskGraph::from_weights(&[2, 3, 1], &[(1, 2, 10), (2, 3, 20)]).unwrap();
    let p = SystemParams::unit(100);
    let d = OffloadDecision::new(vec![Location::Client, Location::Server, Location::Client], vec![2, 9, 12]);
    let run = simulate_execution(&g, &d, &p, &model, &mut ChaCha8Rng::seed_from_u64(0), 0);
    // upload (10+10)/5 = 4 s at 2·10/5; download (0+20)/10 = 2 s at 1·20/10
    assert_eq!(run.transfers[0].slots, 4);
    assert_eq!(run.transfers[1].slots, 2);
    assert_eq!(run.energy.uplink_energy, 4.0);
    assert_eq!(run.energy.downlink_energy, 2.0);
    assert_eq!(run.energy.psi, 3.0 + 4.0 + 2.0);
    assert_eq!(run.completion_slots, vec![2, 9, 12]);
    assert!(run.deadline_met);
}

#[test]
fn one_replication_report_is_the_run() {
    let g = TaskGraph::from_weights(&[2, 3, 1], &[(1, 2, 10), (2, 3, 20)]).unwrap();
    let p = SystemParams::unit(100);
    let d = OffloadDecision::new(vec![Location::Client, Location::Server, Location::Client], vec![2, 9, 12]);
    let mut model = TraceModel::constant(0.0, 5.0, 1.0);
    model.rate_up_bps = Dist::Lognormal { mu: 1.5, sigma: 0.5 };
    let rep = monte_carlo(&g, &d, &p, &model, 1, 9).unwrap();
    let run = simulate_execution(&g, &d, &p, &model, &mut replication_rng(9, 0), 0);
    assert_eq!(rep.mean_energy, run.energy.psi);
    assert_eq!(rep.energy_p05, run.energy.psi);
    assert_eq!(rep.deadline_violation_rate, if run.deadline_met { 0.0 } else { 1.0 });
}

#[test]
fn violation_rate_falls_as_deadline_grows() {
    let g = TaskGraph::from_weights(&[2, 6, 4, 1], &[(1, 2, 8), (1, 3, 8), (2, 4, 8), (3, 4, 8)]).unwrap();
    let mut model = TraceModel::constant(0.0, 4.0, 1.0);
    model.rate_up_bps = Dist::Uniform { low: 0.5, high: 8.0 };
    model.rate_down_bps = Dist::Uniform { low: 0.5, high: 8.0 };
    let locs = vec![Location::Client, Location::Server, Location::Client, Location::Client];
    let d = earliest_decision(&g, &locs, &SystemParams::unit(1000)).unwrap();
    let mut prev = 1.0;
    for t in [8, 12, 16, 24, 40] {
        let r = monte_carlo(&g, &d, &SystemParams::unit(t), &model, 2000, 5).unwrap();
        assert!(r.deadline_violation_rate <= prev);
        prev = r.deadline_violation_rate;
    }
    assert_eq!(prev, 0.0);
}

#[test]
fn block_maximum_energy_dominates_mean_realized_energy() {
    let rate = Dist::Lognormal { mu: 13.0, sigma: 0.4 };
    let power = Dist::Uniform { low: 0.5, high: 1.5 };
    let mut model = TraceModel::constant(0.0, 1.0, 1.0);
    model.rate_up_bps = rate;
    model.power_up = power;

    // θ_u from block maxima of the same P/R process
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (ln_r, u) = (rand_distr::LogNormal::new(13.0, 0.4).unwrap(), rand_distr::Uniform::new(0.5, 1.5).unwrap());
    let ratios: Vec<f64> = (0..50 * 400)
        .map(|_| rng.sample(u) / rng.sample(ln_r))
        .collect();
    let theta_up = gev_mean(&fit_samples(&ratios, 50).unwrap());

    let g = TaskGraph::from_weights(&[1, 5, 1], &[(1, 2, 1000), (2, 3, 1000)]).unwrap();
    let mut p = SystemParams::unit(1_000_000);
    p.delta_s = 1e-3;
    let d = OffloadDecision::new(vec![Location::Client, Location::Server, Location::Client], vec![1, 2, 3]);
    let r = monte_carlo(&g, &d, &p, &model, 5000, 3).unwrap();
    let up = r.edges.iter().find(|e| e.from == 1).unwrap();
    assert!(up.mean_energy <= 1000.0 * theta_up, "{} > {}", up.mean_energy, 1000.0 * theta_up);
}
