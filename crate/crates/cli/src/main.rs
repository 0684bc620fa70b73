use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mec_offload::energy::{check_constraints, location_energy, Location, OffloadDecision};
use mec_offload::evt::fit_samples;
use mec_offload::export::{write_iteration_log, DecisionExport};
use mec_offload::schedule::earliest_decision;
use mec_offload::sim::{gen_layered_dag, monte_carlo, LayeredDagSpec, TraceModel};
use mec_offload::special::{solve_with_policy, Policy};
use mec_offload::trace::{read_trace, trace_samples};
use mec_offload::{brute_force_optimum, Config, SolverOptions, SystemParams, TaskGraph};

#[derive(Parser)]
#[command(name = "mec-offload", version, about = "Energy-aware DAG offloading under channel uncertainty")]
struct Cli {
    /// System config JSON; built-in testbed defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit GEVs to a trace CSV and emit a config with z and θ filled in.
    Fit(FitArgs),
    /// Solve the offloading problem for a DAG.
    Solve(SolveArgs),
    /// Exhaustive optimum for small DAGs.
    Oracle(DagArg),
    /// Replay a decision against random traces.
    Simulate(SimArgs),
    /// Generate a random layered DAG.
    Gen(GenArgs),
    /// Sweep ε and ε_m and compare against simple baselines.
    Compare(CompareArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, required_unless_present = "paper_defaults")]
    traces: Option<PathBuf>,
    /// Block size; config value when omitted.
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long)]
    eps_m_up: Option<f64>,
    #[arg(long)]
    eps_m_down: Option<f64>,
    /// Payload added to the queue backlog when forming transfer times.
    #[arg(long, default_value_t = 1e4)]
    payload_bits: f64,
    /// Emit the built-in testbed settings without fitting.
    #[arg(long)]
    paper_defaults: bool,
}

#[derive(Args)]
struct DagArg {
    #[arg(long)]
    dag: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    dag: PathBuf,
    #[arg(long, default_value = "auto")]
    policy: Policy,
    /// Overrides the config ε.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Iteration log CSV; defaults to `<out>.iterations.csv` when --out is set.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    dag: PathBuf,
    /// Decision JSON as written by `solve` or `oracle`.
    #[arg(long)]
    decision: PathBuf,
    /// Trace model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long, default_value_t = 0.05)]
    edge_prob: f64,
    /// Largest interior layer; 0 picks ⌈√(N−2)⌉.
    #[arg(long, default_value_t = 0)]
    max_layer_width: usize,
    #[arg(long, default_value_t = 1e6)]
    workload_scale: f64,
    #[arg(long, default_value_t = 1.2e4)]
    bits_scale: f64,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    dag: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.1")]
    eps_grid: Vec<f64>,
    /// Needs gev_v_up/gev_v_down in the config; ε_m^u = ε_m^d at each point.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.15,0.2,0.25,0.3")]
    eps_m_grid: Vec<f64>,
    /// Random feasible-assignment baseline draws.
    #[arg(long, default_value_t = 100)]
    random_draws: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => Config::testbed_defaults(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let out = cli.out.as_deref();
    match cli.cmd {
        Cmd::Fit(a) => cmd_fit(config, a, out),
        Cmd::Solve(a) => cmd_solve(&config, a, out),
        Cmd::Oracle(a) => cmd_oracle(&config, a, out),
        Cmd::Simulate(a) => cmd_simulate(&config, a, out),
        Cmd::Gen(a) => cmd_gen(&config, a, out),
        Cmd::Compare(a) => cmd_compare(&config, a, out),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load_dag(path: &Path) -> Result<TaskGraph> {
    TaskGraph::load(path).with_context(|| format!("loading DAG {}", path.display()))
}

fn cmd_fit(mut config: Config, a: FitArgs, out: Option<&Path>) -> Result<()> {
    if a.paper_defaults {
        let mut d = Config::testbed_defaults();
        d.seed = config.seed;
        return emit(out, &d.to_json());
    }
    let traces = a.traces.expect("clap enforces --traces");
    let rows = read_trace(&traces).with_context(|| format!("reading traces {}", traces.display()))?;
    let k = a.k.unwrap_or(config.block_size_k);
    config.block_size_k = k;
    if let Some(e) = a.eps_m_up {
        config.eps_m_up = e;
    }
    if let Some(e) = a.eps_m_down {
        config.eps_m_down = e;
    }
    let s = trace_samples(&rows, a.payload_bits)?;
    let v_up = fit_samples(&s.v_up.values, k).context("fitting uplink transfer time")?;
    let v_down = fit_samples(&s.v_down.values, k).context("fitting downlink transfer time")?;
    let j = fit_samples(&s.j.values, k).context("fitting uplink energy per bit")?;
    let h = fit_samples(&s.h.values, k).context("fitting downlink energy per bit")?;
    config.apply_fits(v_up, v_down, j, h)?;
    config.system_params()?;
    emit(out, &config.to_json())
}

fn cmd_solve(config: &Config, a: SolveArgs, out: Option<&Path>) -> Result<()> {
    let graph = load_dag(&a.dag)?;
    let params = config.system_params()?;
    let opts = SolverOptions::with_epsilon(a.epsilon.unwrap_or(config.epsilon));
    let r = solve_with_policy(&graph, &params, a.policy, &opts)?;
    let mut e = DecisionExport::new(
        &r.decision,
        r.report.psi,
        r.bounds.psi_lower,
        r.bounds.psi_upper,
        opts.epsilon,
        r.iterations,
    );
    e.policy = Some(r.policy.to_string());
    e.termination = r.termination.map(|t| {
        serde_json::to_value(t)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default()
    });
    let log = a.log.or_else(|| out.map(|p| p.with_extension("iterations.csv")));
    if let Some(l) = log {
        write_iteration_log(&l, &r.log)?;
    }
    emit(out, &e.to_json())
}

fn cmd_oracle(config: &Config, a: DagArg, out: Option<&Path>) -> Result<()> {
    let graph = load_dag(&a.dag)?;
    let params = config.system_params()?;
    let r = brute_force_optimum(&graph, &params)?;
    let mut e = DecisionExport::new(&r.decision, r.psi_star, r.psi_star, r.psi_star, 0.0, 0);
    e.policy = Some("oracle".into());
    e.assignments_enumerated = Some(r.assignments_enumerated);
    emit(out, &e.to_json())
}

fn cmd_simulate(config: &Config, a: SimArgs, out: Option<&Path>) -> Result<()> {
    let graph = load_dag(&a.dag)?;
    let params = config.system_params()?;
    let decision = DecisionExport::load(&a.decision)?.decision();
    let violations = check_constraints(&graph, &decision, &params);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        bail!("decision violates constraints: {}", list.join("; "));
    }
    let model = TraceModel::load(&a.model)?;
    let report = monte_carlo(&graph, &decision, &params, &model, a.reps, config.seed)?;
    emit(out, &to_json(&report))
}

fn cmd_gen(config: &Config, a: GenArgs, out: Option<&Path>) -> Result<()> {
    let spec = LayeredDagSpec {
        nodes: a.nodes,
        edge_prob: a.edge_prob,
        max_layer_width: a.max_layer_width,
        workload_scale: a.workload_scale,
        bits_scale: a.bits_scale,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let graph = gen_layered_dag(&spec, &mut rng)?;
    emit(out, &graph.to_json())
}

#[derive(Serialize)]
struct EpsRow {
    epsilon: f64,
    psi: f64,
    psi_lower: f64,
    offload_pct: f64,
    iterations: usize,
    policy: String,
}

#[derive(Serialize)]
struct EpsMRow {
    eps_m: f64,
    z_up_slots: i64,
    z_down_slots: i64,
    psi: f64,
    offload_pct: f64,
}

#[derive(Serialize)]
struct Baseline {
    name: &'static str,
    psi: f64,
    offload_pct: f64,
    deadline_met: bool,
}

#[derive(Serialize)]
struct RandomBaseline {
    draws: usize,
    feasible: usize,
    mean_psi: Option<f64>,
    min_psi: Option<f64>,
}

#[derive(Serialize)]
struct CompareReport {
    nodes: usize,
    seed: u64,
    energy_unit: Option<String>,
    eps_grid: Vec<EpsRow>,
    eps_m_grid: Vec<EpsMRow>,
    baselines: Vec<Baseline>,
    random: RandomBaseline,
}

fn pct(d: &OffloadDecision) -> f64 {
    100.0 * d.offload_fraction()
}

fn baseline(name: &'static str, graph: &TaskGraph, locs: Vec<Location>, params: &SystemParams) -> Baseline {
    let psi = location_energy(graph, &locs, params).psi;
    let deadline_met = earliest_decision(graph, &locs, params).is_some();
    let d = OffloadDecision::new(locs, vec![0; graph.len()]);
    Baseline {
        name,
        psi,
        offload_pct: pct(&d),
        deadline_met,
    }
}

fn cmd_compare(config: &Config, a: CompareArgs, out: Option<&Path>) -> Result<()> {
    let graph = load_dag(&a.dag)?;
    let params = config.system_params()?;
    let n = graph.len();

    let mut eps_grid = Vec::new();
    for &eps in &a.eps_grid {
        let r = solve_with_policy(&graph, &params, Policy::Auto, &SolverOptions::with_epsilon(eps))?;
        eps_grid.push(EpsRow {
            epsilon: eps,
            psi: r.report.psi,
            psi_lower: r.bounds.psi_lower,
            offload_pct: pct(&r.decision),
            iterations: r.iterations,
            policy: r.policy.to_string(),
        });
    }

    let mut eps_m_grid = Vec::new();
    for &em in &a.eps_m_grid {
        let c = config
            .with_eps_m(em, em)
            .context("the ε_m sweep needs gev_v_up and gev_v_down in the config")?;
        let p = c.system_params()?;
        let r = solve_with_policy(&graph, &p, Policy::Auto, &SolverOptions::with_epsilon(config.epsilon))?;
        eps_m_grid.push(EpsMRow {
            eps_m: em,
            z_up_slots: p.z_up_slots,
            z_down_slots: p.z_down_slots,
            psi: r.report.psi,
            offload_pct: pct(&r.decision),
        });
    }

    let interior = |l: Location| {
        (0..n)
            .map(|i| if graph.is_pinned(i) { Location::Client } else { l })
            .collect::<Vec<_>>()
    };
    let baselines = vec![
        baseline("local_only", &graph, interior(Location::Client), &params),
        baseline("all_offload", &graph, interior(Location::Server), &params),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut feasible = Vec::new();
    for _ in 0..a.random_draws {
        let locs: Vec<Location> = (0..n)
            .map(|i| {
                let server = rng.random_bool(0.5);
                if server && !graph.is_pinned(i) {
                    Location::Server
                } else {
                    Location::Client
                }
            })
            .collect();
        if earliest_decision(&graph, &locs, &params).is_some() {
            feasible.push(location_energy(&graph, &locs, &params).psi);
        }
    }
    let random = RandomBaseline {
        draws: a.random_draws,
        feasible: feasible.len(),
        mean_psi: (!feasible.is_empty()).then(|| feasible.iter().sum::<f64>() / feasible.len() as f64),
        min_psi: feasible.iter().copied().reduce(f64::min),
    };

    let report = CompareReport {
        nodes: n,
        seed: config.seed,
        energy_unit: config.energy_unit.clone(),
        eps_grid,
        eps_m_grid,
        baselines,
        random,
    };
    emit(out, &to_json(&report))
}
