//! Subcommand argument structs and implementations.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use nico_core::em::{marginal_loglik, run_restarts, EmConfig};
use nico_core::fm::fm_reconstruct;
use nico_core::graph::DirectedGraph;
use nico_core::io;
use nico_core::metrics::edge_symmetric_difference;
use nico_core::model::{EndpointMode, MarkovModel, Observation, StateSpace};
use nico_core::mstep::DirichletPriors;
use nico_core::reconstruct::{build_graph, edge_joint_scores, most_likely_order, stationary_distribution};
use nico_core::rng::{derive_rng, purpose};
use nico_core::sampler::{monotone_sample_size, pam_sample_size, BoundInputs, SampleScheme};
use nico_core::simgen::{
    connectivity_radius, random_geometric_graph, random_route, shortest_path_route, shuffle_paths,
};
use nico_core::NicoError;

use crate::{CliError, CliResult, UsageError};

/// Overlays the CLI-provided fields (non-null after serialization) onto the
/// JSON config file; explicit flags win.
pub(crate) fn merge_config<T: Serialize + DeserializeOwned>(
    cli: T,
    config: Option<&Path>,
) -> Result<T, CliError> {
    let Some(path) = config else { return Ok(cli) };
    let file = File::open(path).map_err(NicoError::from)?;
    let mut base: serde_json::Value = serde_json::from_reader(file).map_err(NicoError::from)?;
    if !base.is_object() {
        return Err(UsageError(format!("config {} must hold a JSON object", path.display())).into());
    }
    let overlay = serde_json::to_value(&cli).map_err(NicoError::from)?;
    for (key, value) in overlay.as_object().expect("args serialize to an object") {
        if key == "config" || value.is_null() {
            continue;
        }
        base[key] = value.clone();
    }
    serde_json::from_value(base).map_err(|e| UsageError(format!("bad config: {e}")).into())
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| UsageError(format!("missing required --{flag}")).into::<CliError>())
}

fn report_rejected(diag: &io::ObsDiagnostics) {
    for (line, reason) in &diag.rejected_lines {
        eprintln!("warning: line {line} rejected: {reason}");
    }
}

fn parse_endpoints(s: &str) -> Result<EndpointMode, CliError> {
    match s {
        "known" => Ok(EndpointMode::KnownEndpoints),
        "free" => Ok(EndpointMode::Free),
        other => Err(UsageError(format!("--endpoints expects known|free, got {other:?}")).into()),
    }
}

fn parse_scheme(s: &str) -> Result<SampleScheme, CliError> {
    match s {
        "causal" => Ok(SampleScheme::Causal),
        "uniform" => Ok(SampleScheme::Uniform),
        other => Err(UsageError(format!("--scheme expects causal|uniform, got {other:?}")).into()),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Experiment preset for the generation grid (fig4 = 50 nodes,
    /// 5 sources, 20 destinations, shortest-path routing)
    #[arg(long)]
    pub preset: Option<String>,
    /// Vertices thrown into the unit square
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Connection radius (default: sqrt(log n / n))
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub sources: Option<usize>,
    #[arg(long)]
    pub dests: Option<usize>,
    /// Routing model: shortest | random
    #[arg(long)]
    pub routing: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct SimulateMeta<'a> {
    version: &'a str,
    seed: u64,
    nodes: usize,
    radius: f64,
    sources: Vec<String>,
    dests: Vec<String>,
    routing: &'a str,
    connected: bool,
    observations: usize,
    max_path_len: usize,
    files: Vec<&'a str>,
}

pub fn run_simulate(args: SimulateArgs) -> CliResult {
    let args = merge_config(args, args.config.as_deref().map(Path::new))?;
    if let Some(p) = args.preset.as_deref() {
        if p != "fig4" {
            return Err(UsageError(format!("unknown simulate preset {p:?} (try fig4)")).into());
        }
    }
    let is_fig4 = args.preset.as_deref() == Some("fig4");
    let nodes = args.nodes.unwrap_or(if is_fig4 { 50 } else { 50 });
    let sources = args.sources.unwrap_or(if is_fig4 { 5 } else { 5 });
    let dests = args.dests.unwrap_or(if is_fig4 { 20 } else { 10 });
    let routing = args.routing.clone().unwrap_or_else(|| "shortest".into());
    if routing != "shortest" && routing != "random" {
        return Err(UsageError(format!("--routing expects shortest|random, got {routing:?}")).into());
    }
    let seed = args.seed.unwrap_or(42);
    let radius = args.radius.unwrap_or_else(|| connectivity_radius(nodes));
    let out_dir = require(args.out_dir.clone(), "out-dir")?;
    if sources + dests > nodes {
        return Err(UsageError(format!(
            "{sources} sources + {dests} destinations exceed {nodes} nodes"
        ))
        .into());
    }

    std::fs::create_dir_all(&out_dir).map_err(NicoError::from)?;
    let mut rng = derive_rng(seed, &[purpose::SIM_GRAPH]);
    let geo = random_geometric_graph(nodes, radius, &mut rng);
    if !geo.connected {
        eprintln!("warning: generated graph is not connected (retry cap reached)");
    }
    let space = geo.graph.space().clone();

    let mut vertices: Vec<usize> = (0..nodes).collect();
    let mut pick_rng = derive_rng(seed, &[purpose::SIM_ROUTE, 0]);
    for i in (1..nodes).rev() {
        let j = pick_rng.gen_range(0..=i);
        vertices.swap(i, j);
    }
    let source_ids = &vertices[..sources];
    let dest_ids = &vertices[sources..sources + dests];

    let mut paths = Vec::new();
    for (pi, &s) in source_ids.iter().enumerate() {
        for (di, &d) in dest_ids.iter().enumerate() {
            let path = match routing.as_str() {
                "shortest" => shortest_path_route(&geo.graph, s, d)?,
                _ => {
                    let mut rrng =
                        derive_rng(seed, &[purpose::SIM_ROUTE, 1 + (pi * dests + di) as u64]);
                    random_route(&geo.graph, s, d, &mut rrng, 50 * nodes)?
                }
            };
            paths.push(path);
        }
    }

    let mut shuffle_rng = derive_rng(seed, &[purpose::SIM_SHUFFLE, 0]);
    let free = shuffle_paths(&paths, EndpointMode::Free, &mut shuffle_rng)?;
    let mut known_rng = derive_rng(seed, &[purpose::SIM_SHUFFLE, 1]);
    let known = shuffle_paths(&paths, EndpointMode::KnownEndpoints, &mut known_rng)?;

    geo.graph.write_tsv_file(out_dir.join("graph.tsv"))?;
    io::write_paths_file(out_dir.join("paths.txt"), &space, &paths)?;
    let free_obs: Vec<Observation> = free.into_iter().map(|(o, _)| o).collect();
    io::write_observations_file(out_dir.join("obs.txt"), &space, &free_obs, EndpointMode::Free)?;
    let known_obs: Vec<Observation> = known.into_iter().map(|(o, _)| o).collect();
    io::write_observations_file(
        out_dir.join("obs_known.txt"),
        &space,
        &known_obs,
        EndpointMode::KnownEndpoints,
    )?;

    let meta = SimulateMeta {
        version: env!("CARGO_PKG_VERSION"),
        seed,
        nodes,
        radius,
        sources: source_ids.iter().map(|&s| space.label(s).to_string()).collect(),
        dests: dest_ids.iter().map(|&d| space.label(d).to_string()).collect(),
        routing: &routing,
        connected: geo.connected,
        observations: paths.len(),
        max_path_len: paths.iter().map(Vec::len).max().unwrap_or(0),
        files: vec!["graph.tsv", "paths.txt", "obs.txt", "obs_known.txt"],
    };
    let f = File::create(out_dir.join("meta.json")).map_err(NicoError::from)?;
    serde_json::to_writer_pretty(f, &meta).map_err(NicoError::from)?;
    println!(
        "simulate: {} observations over {} vertices -> {}",
        paths.len(),
        nodes,
        out_dir.display()
    );
    Ok(())
}

// ------------------------------------------------------------------- infer

#[derive(Args, Serialize, Deserialize)]
pub struct InferArgs {
    #[arg(long, value_name = "FILE")]
    pub obs: Option<PathBuf>,
    /// Override the endpoint mode recorded in the file: known | free
    #[arg(long)]
    pub endpoints: Option<String>,
    #[arg(long)]
    pub exact_cap: Option<usize>,
    /// Importance samples per long observation
    #[arg(long)]
    pub samples: Option<usize>,
    /// Proposal: causal | uniform
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Consecutive iterations meeting --tol before stopping
    #[arg(long)]
    pub hits: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub theta_min: Option<f64>,
    /// JSON file with the initial-distribution Dirichlet parameters
    #[arg(long, value_name = "FILE")]
    pub prior_u: Option<PathBuf>,
    /// JSON file with the transition-matrix Dirichlet parameters
    #[arg(long, value_name = "FILE")]
    pub prior_v: Option<PathBuf>,
    /// Output model JSON
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Per-iteration trace CSV
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

fn load_priors(
    prior_u: Option<&Path>,
    prior_v: Option<&Path>,
    n: usize,
) -> Result<Option<DirichletPriors>, CliError> {
    if prior_u.is_none() && prior_v.is_none() {
        return Ok(None);
    }
    let mut priors = DirichletPriors::constant(n, 0.0);
    if let Some(path) = prior_u {
        let u: Vec<f64> =
            serde_json::from_reader(File::open(path).map_err(NicoError::from)?)
                .map_err(NicoError::from)?;
        if u.len() != n {
            return Err(CliError::Data(NicoError::DimensionMismatch(format!(
                "prior u has {} entries for {} states",
                u.len(),
                n
            ))));
        }
        priors.u = ndarray::Array1::from_vec(u);
    }
    if let Some(path) = prior_v {
        let v: Vec<Vec<f64>> =
            serde_json::from_reader(File::open(path).map_err(NicoError::from)?)
                .map_err(NicoError::from)?;
        if v.len() != n || v.iter().any(|row| row.len() != n) {
            return Err(CliError::Data(NicoError::DimensionMismatch(format!(
                "prior v is not {n}x{n}"
            ))));
        }
        for (i, row) in v.into_iter().enumerate() {
            for (j, val) in row.into_iter().enumerate() {
                priors.v[[i, j]] = val;
            }
        }
    }
    Ok(Some(priors))
}

#[derive(Serialize)]
struct RunInfo {
    loglik: f64,
    restart: usize,
    states: usize,
    observations: usize,
    seed: u64,
    converged: bool,
}

pub fn run_infer(args: InferArgs) -> CliResult {
    let args = merge_config(args, args.config.as_deref().map(Path::new))?;
    let obs_path = require(args.obs.clone(), "obs")?;
    let out_path = require(args.out.clone(), "out")?;

    let data = io::read_observations_file(&obs_path)?;
    report_rejected(&data.diagnostics);

    let endpoint_override = match args.endpoints.as_deref() {
        Some(s) => Some(parse_endpoints(s)?),
        None => None,
    };
    let config = EmConfig {
        max_iters: args.max_iters.unwrap_or(200),
        tol: args.tol.unwrap_or(1e-6),
        consecutive_hits: args.hits.unwrap_or(3),
        exact_cap: args.exact_cap.unwrap_or(12),
        samples_per_obs: args.samples.unwrap_or(2000),
        scheme: parse_scheme(args.scheme.as_deref().unwrap_or("causal"))?,
        restarts: args.restarts.unwrap_or(10),
        master_seed: args.seed.unwrap_or(42),
        theta_min: args.theta_min.unwrap_or(1e-12),
        priors: load_priors(args.prior_u.as_deref(), args.prior_v.as_deref(), data.space.len())?,
        endpoint_override,
        ..EmConfig::default()
    };

    let outcome = run_restarts(&data.observations, data.space.len(), &config)?;
    io::write_model_file(&out_path, &data.space, &outcome.best_model)?;

    if let Some(trace_path) = &args.trace {
        let f = File::create(trace_path).map_err(NicoError::from)?;
        let mut w = std::io::BufWriter::new(f);
        writeln!(w, "restart,iter,loglik,q_value,ess_min,seconds").map_err(NicoError::from)?;
        for (r, trace) in outcome.traces.iter().enumerate() {
            for (k, rec) in trace.iterations.iter().enumerate() {
                let ess = rec.ess_min.map_or(String::new(), |e| format!("{e}"));
                let q = if rec.q_value.is_nan() {
                    String::new()
                } else {
                    format!("{}", rec.q_value)
                };
                writeln!(w, "{r},{k},{},{q},{ess},{:.6}", rec.loglik, rec.seconds)
                    .map_err(NicoError::from)?;
            }
        }
    }

    let info = RunInfo {
        loglik: outcome.best_loglik,
        restart: outcome.best_restart,
        states: data.space.len(),
        observations: data.observations.len(),
        seed: config.master_seed,
        converged: outcome.traces[outcome.best_restart].converged,
    };
    let run_path = out_path.with_extension("run.json");
    let f = File::create(&run_path).map_err(NicoError::from)?;
    serde_json::to_writer_pretty(f, &info).map_err(NicoError::from)?;

    println!(
        "infer: best restart {} of {} with marginal loglik {:.6}",
        outcome.best_restart, config.restarts, outcome.best_loglik
    );
    Ok(())
}

// ------------------------------------------------------------- reconstruct

#[derive(Args, Serialize, Deserialize)]
pub struct ReconstructArgs {
    #[arg(long, value_name = "FILE")]
    pub obs: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Output edge list (TSV)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Output joint edge scores (TSV)
    #[arg(long, value_name = "FILE")]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub exact_cap: Option<usize>,
    /// Samples for decoding observations beyond the cap
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Smallest joint score written to --scores
    #[arg(long)]
    pub min_score: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

pub fn run_reconstruct(args: ReconstructArgs) -> CliResult {
    let args = merge_config(args, args.config.as_deref().map(Path::new))?;
    let obs_path = require(args.obs.clone(), "obs")?;
    let model_path = require(args.model.clone(), "model")?;
    let out_path = require(args.out.clone(), "out")?;
    let cap = args.exact_cap.unwrap_or(12);
    let samples = args.samples.unwrap_or(2000);
    let seed = args.seed.unwrap_or(42);

    let (space, model) = io::read_model_file(&model_path)?;
    let violations = nico_core::model::validate_model(&model);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("error: model invariant violated: {v}");
        }
        return Err(CliError::Data(NicoError::InvalidParameter(format!(
            "model file violates {} invariant(s)",
            violations.len()
        ))));
    }
    let data = io::read_observations_file_with_space(&obs_path, &space)?;
    report_rejected(&data.diagnostics);

    let mut paths = Vec::with_capacity(data.observations.len());
    for (idx, obs) in data.observations.iter().enumerate() {
        let mut rng = derive_rng(seed, &[purpose::DECODE, idx as u64]);
        let tau = most_likely_order(&model, obs, cap, samples, &mut rng)?;
        paths.push(nico_core::model::unshuffle(obs, &tau)?);
    }
    let graph = build_graph(&space, &paths);
    graph.write_tsv_file(&out_path)?;
    println!("reconstruct: {} edges -> {}", graph.edge_count(), out_path.display());

    if let Some(scores_path) = &args.scores {
        let min_score = args.min_score.unwrap_or(1e-9);
        let st = stationary_distribution(&model.a)?;
        if st.damped {
            eprintln!("warning: power iteration used the damped chain");
        }
        if st.multiple_stationary {
            eprintln!("warning: stationary distribution is not unique; using uniform");
        }
        let scores = edge_joint_scores(&model)?;
        let f = File::create(scores_path).map_err(NicoError::from)?;
        let mut w = std::io::BufWriter::new(f);
        for i in 0..space.len() {
            for j in 0..space.len() {
                let s = scores[[i, j]];
                if s >= min_score {
                    writeln!(w, "{}\t{}\t{}", space.label(i), space.label(j), s)
                        .map_err(NicoError::from)?;
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------- fm

#[derive(Args, Serialize, Deserialize)]
pub struct FmArgs {
    #[arg(long, value_name = "FILE")]
    pub obs: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

pub fn run_fm(args: FmArgs) -> CliResult {
    let args = merge_config(args, args.config.as_deref().map(Path::new))?;
    let obs_path = require(args.obs.clone(), "obs")?;
    let out_dir = require(args.out_dir.clone(), "out-dir")?;
    let seed = args.seed.unwrap_or(42);
    let restarts = args.restarts.unwrap_or(10);

    let data = io::read_observations_file(&obs_path)?;
    report_rejected(&data.diagnostics);
    std::fs::create_dir_all(&out_dir).map_err(NicoError::from)?;

    let f = File::create(out_dir.join("summary.csv")).map_err(NicoError::from)?;
    let mut summary = std::io::BufWriter::new(f);
    writeln!(summary, "restart,edges,seed").map_err(NicoError::from)?;
    for r in 0..restarts {
        let run_seed = derive_rng(seed, &[purpose::FM, r as u64]).gen::<u64>();
        let graph = fm_reconstruct(&data.space, &data.observations, run_seed)?;
        let name = format!("edges_r{r:02}.tsv");
        graph.write_tsv_file(out_dir.join(&name))?;
        writeln!(summary, "{r},{},{run_seed}", graph.edge_count()).map_err(NicoError::from)?;
    }
    println!("fm: {restarts} reconstructions -> {}", out_dir.display());
    Ok(())
}

// -------------------------------------------------------------------- eval

#[derive(Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Estimated edge list (TSV)
    #[arg(long, value_name = "FILE")]
    pub est: Option<PathBuf>,
    /// Reference edge list (TSV)
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: Option<PathBuf>,
    /// Report JSON (stdout when omitted)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalReport {
    total: usize,
    false_positives: usize,
    false_negatives: usize,
    est_edges: usize,
    ref_edges: usize,
}

pub fn run_eval(args: EvalArgs) -> CliResult {
    let args = merge_config(args, args.config.as_deref().map(Path::new))?;
    let est_path = require(args.est.clone(), "est")?;
    let ref_path = require(args.reference.clone(), "ref")?;
    let est = DirectedGraph::read_tsv_file(&est_path)?;
    let reference = DirectedGraph::read_tsv_file(&ref_path)?;
    let d = edge_symmetric_difference(&est, &reference);
    let report = EvalReport {
        total: d.total,
        false_positives: d.false_positives,
        false_negatives: d.false_negatives,
        est_edges: est.edge_count(),
        ref_edges: reference.edge_count(),
    };
    match &args.out {
        Some(path) => {
            let f = File::create(path).map_err(NicoError::from)?;
            serde_json::to_writer_pretty(f, &report).map_err(NicoError::from)?;
        }
        None => {
            serde_json::to_writer_pretty(std::io::stdout(), &report).map_err(NicoError::from)?;
            println!();
        }
    }
    Ok(())
}

// -------------------------------------------------------------- eval-sweep

#[derive(Args, Serialize, Deserialize)]
pub struct EvalSweepArgs {
    /// Directory of run subdirectories, each holding an edges.tsv
    #[arg(long, value_name = "DIR")]
    pub dir: Option<PathBuf>,
    /// Reference edge list (TSV)
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: Option<PathBuf>,
    /// Summary CSV
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

pub fn run_eval_sweep(args: EvalSweepArgs) -> CliResult {
    let args = merge_config(args, args.config.as_deref().map(Path::new))?;
    let dir = require(args.dir.clone(), "dir")?;
    let ref_path = require(args.reference.clone(), "ref")?;
    let out_path = require(args.out.clone(), "out")?;
    let reference = DirectedGraph::read_tsv_file(&ref_path)?;

    let mut runs: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(NicoError::from)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("edges.tsv").exists())
        .collect();
    runs.sort();

    let f = File::create(&out_path).map_err(NicoError::from)?;
    let mut w = std::io::BufWriter::new(f);
    writeln!(w, "run,edges,symdiff,fp,fn,loglik").map_err(NicoError::from)?;
    for run in &runs {
        let est = DirectedGraph::read_tsv_file(run.join("edges.tsv"))?;
        let d = edge_symmetric_difference(&est, &reference);
        let loglik = std::fs::read_to_string(run.join("run.json"))
            .ok()
            .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
            .and_then(|v| v.get("loglik").and_then(serde_json::Value::as_f64));
        let name = run.file_name().unwrap_or_default().to_string_lossy().to_string();
        let ll = loglik.map_or(String::new(), |v| format!("{v}"));
        writeln!(
            w,
            "{name},{},{},{},{},{ll}",
            est.edge_count(),
            d.total,
            d.false_positives,
            d.false_negatives
        )
        .map_err(NicoError::from)?;
    }
    println!("eval-sweep: {} runs -> {}", runs.len(), out_path.display());
    Ok(())
}

// ------------------------------------------------------------------ bounds

#[derive(Args, Serialize, Deserialize)]
pub struct BoundsArgs {
    /// JSON file with lengths, b, theta_min, lambda, delta, epsilon,
    /// delta_star
    #[arg(long, value_name = "FILE")]
    pub inputs: Option<PathBuf>,
    /// Output CSV (stdout when omitted)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

pub fn run_bounds(args: BoundsArgs) -> CliResult {
    let args = merge_config(args, args.config.as_deref().map(Path::new))?;
    let inputs_path = require(args.inputs.clone(), "inputs")?;
    let inputs: BoundInputs =
        serde_json::from_reader(File::open(&inputs_path).map_err(NicoError::from)?)
            .map_err(NicoError::from)?;

    let mut lines = vec!["m,N_m,b_m,L_pam,L_mono".to_string()];
    for m in 0..inputs.num_observations() {
        let pam = pam_sample_size(&inputs, m)?;
        let mono = match monotone_sample_size(&inputs, m) {
            Ok(l) => l.to_string(),
            Err(NicoError::BoundUndefined(_)) => "undefined".to_string(),
            Err(e) => return Err(e.into()),
        };
        lines.push(format!(
            "{},{},{},{pam},{mono}",
            m + 1,
            inputs.lengths[m],
            inputs.b[m]
        ));
    }
    let text = lines.join("\n") + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(NicoError::from)?,
        None => print!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------- shared

/// Exact-or-sampled decode of every observation into ordered paths.
pub(crate) fn decode_all(
    model: &MarkovModel,
    space: &StateSpace,
    observations: &[Observation],
    cap: usize,
    samples: usize,
    seed: u64,
) -> Result<DirectedGraph, CliError> {
    let mut paths = Vec::with_capacity(observations.len());
    for (idx, obs) in observations.iter().enumerate() {
        let mut rng = derive_rng(seed, &[purpose::DECODE, idx as u64]);
        let tau = most_likely_order(model, obs, cap, samples, &mut rng)?;
        paths.push(nico_core::model::unshuffle(obs, &tau)?);
    }
    Ok(build_graph(space, &paths))
}

/// Ranking log-likelihood used when reporting inferred models.
pub(crate) fn ranked_loglik(
    model: &MarkovModel,
    observations: &[Observation],
    config: &EmConfig,
) -> Result<f64, CliError> {
    marginal_loglik(model, observations, config).map_err(CliError::from)
}
