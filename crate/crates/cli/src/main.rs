//! Command-line driver: parse a model, eliminate states for the requested
//! property, optionally canonicalize the result circuit, then evaluate it
//! over a parameter grid and write the table.

mod grid;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use parmc::acir::{codec, extract, sz_canonicalize, Evaluator, Interval, NodeId};
use parmc::elim::{self, Heuristic};
use parmc::modelio::{self, GridRow};
use parmc::pmc::{Pmc, RewardMap};
use parmc::Rational;

use grid::GridSpec;

#[derive(Parser)]
#[command(
    name = "parmc",
    version,
    about = "Parametric Markov chain analysis by state elimination"
)]
struct Args {
    /// Model file
    #[arg(long, value_name = "PATH")]
    model: PathBuf,

    /// Property to solve
    #[arg(long, value_enum)]
    prop: Property,

    /// Target label (reach and acc)
    #[arg(long, value_name = "LABEL")]
    target: Option<String>,

    /// Reward block (acc)
    #[arg(long, value_name = "NAME")]
    reward: Option<String>,

    /// Numerator reward block (lra)
    #[arg(long, value_name = "NAME")]
    reward_up: Option<String>,

    /// Denominator reward block (lra)
    #[arg(long, value_name = "NAME")]
    reward_low: Option<String>,

    /// Elimination order
    #[arg(long, value_enum, default_value_t = HeuristicArg::TargetBfs)]
    heuristic: HeuristicArg,

    /// Seed for the random heuristic and the signature sampler
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Evaluation grid, e.g. "x=0.002:0.002:0.998,y=0.1:0.1:0.9".
    /// Every model parameter needs exactly one axis.
    #[arg(long, value_name = "AXES")]
    grid: String,

    /// Arithmetic used for grid evaluation
    #[arg(long, value_enum, default_value_t = Arith::Exact)]
    arith: Arith,

    /// Circuit simplification. Constructor-level rewrites are always
    /// applied, so `none` and `local` produce the same circuit; `sz`
    /// additionally merges nodes that agree on random field samples.
    #[arg(long, value_enum, default_value_t = Simplify::Local)]
    simplify: Simplify,

    /// Write the result circuit in binary form
    #[arg(long, value_name = "PATH")]
    emit_dag: Option<PathBuf>,

    /// Write the grid table here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Well-formedness witness, e.g. "x=1/2,y=1/3". Defaults to the grid
    /// centroid; named entries override individual coordinates.
    #[arg(long, value_name = "VALUATION")]
    witness: Option<String>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Property {
    Reach,
    Acc,
    Lra,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Arith {
    Exact,
    Float,
    Interval,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Simplify {
    None,
    Local,
    Sz,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum HeuristicArg {
    NumNew,
    MinProd,
    TargetBfs,
    Random,
    Bfs,
    ReverseBfs,
}

/// Failures split by exit code: misuse of the interface exits 2, errors
/// raised while carrying out a well-formed request exit 1.
enum Failure {
    Usage(String),
    Run(String),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn module<E: std::fmt::Display>(err: E) -> Failure {
    Failure::Run(err.to_string())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(args: Args) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.model)
        .map_err(|e| Failure::Run(format!("{}: {e}", args.model.display())))?;
    let parsed = modelio::parse_model(&text).map_err(module)?;
    let mut pmc = parsed.pmc;
    let rewards = parsed.rewards;
    let params: Vec<String> = pmc.store().params().to_vec();

    let spec = grid::parse_grid(&args.grid).map_err(|e| usage(e.to_string()))?;
    let spec = grid::align_to_parameters(spec, &params).map_err(|e| usage(e.to_string()))?;
    let witness = resolve_witness(args.witness.as_deref(), &spec, &params)?;
    let request = resolve_request(&pmc, &rewards, &args)?;

    let corner: Vec<Rational> = spec.axes.iter().map(|a| a.start.clone()).collect();
    check_transitions_in_unit_interval(&pmc, &corner)?;

    let heuristic = match args.heuristic {
        HeuristicArg::NumNew => Heuristic::NumNew,
        HeuristicArg::MinProd => Heuristic::MinProd,
        HeuristicArg::TargetBfs => Heuristic::TargetBfs,
        HeuristicArg::Random => Heuristic::Random(args.seed),
        HeuristicArg::Bfs => Heuristic::Bfs,
        HeuristicArg::ReverseBfs => Heuristic::ReverseBfs,
    };

    let started = Instant::now();
    let root = solve(&mut pmc, request, heuristic, &witness)?;
    let elimination_ms = started.elapsed().as_millis();

    let nodes_before = Evaluator::new(pmc.store(), &[root]).node_count();
    let started = Instant::now();
    let root = if args.simplify == Simplify::Sz {
        let map = sz_canonicalize(pmc.store_mut(), &[root], 2, args.seed).map_err(module)?;
        map[&root]
    } else {
        root
    };
    let simplification_ms = started.elapsed().as_millis();
    let nodes_after = Evaluator::new(pmc.store(), &[root]).node_count();

    if let Some(path) = &args.emit_dag {
        let (sub, roots) = extract(pmc.store(), &[root]);
        fs::write(path, codec::encode(&sub, &roots))
            .map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    }

    let store = pmc.store();
    let evaluator = Evaluator::new(store, &[root]);
    let points = spec.points();
    let started = Instant::now();
    let rows = evaluate(store, &evaluator, &points, args.arith)?;
    let evaluation_ms = started.elapsed().as_millis();

    match &args.out {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
            modelio::write_dat(&mut BufWriter::new(file), &rows).map_err(module)?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            modelio::write_dat(&mut lock, &rows).map_err(module)?;
            lock.flush().map_err(module)?;
        }
    }

    let mut report = format!(
        "elimination_ms={elimination_ms} simplification_ms={simplification_ms} \
         evaluation_ms={evaluation_ms} nodes_before={nodes_before} nodes_after={nodes_after} \
         points={}",
        rows.len()
    );
    if args.arith == Arith::Interval {
        let max_diameter = rows
            .iter()
            .map(|r| r.values[1] - r.values[0])
            .fold(0.0f64, f64::max);
        report.push_str(&format!(" max_interval_diameter={max_diameter:e}"));
    }
    eprintln!("{report}");
    Ok(())
}

/// The property with its flag inputs resolved against the model, so that
/// flag mistakes surface as usage errors before any analysis starts.
enum Request<'a> {
    Reach(BTreeSet<u32>),
    Acc(BTreeSet<u32>, &'a RewardMap),
    Lra(&'a RewardMap, &'a RewardMap),
}

fn resolve_request<'a>(
    pmc: &Pmc,
    rewards: &'a BTreeMap<String, RewardMap>,
    args: &Args,
) -> Result<Request<'a>, Failure> {
    let target_states = |flag: &Option<String>| -> Result<BTreeSet<u32>, Failure> {
        let name = flag
            .as_ref()
            .ok_or_else(|| usage("this property requires --target <label>"))?;
        pmc.label_states(name)
            .cloned()
            .ok_or_else(|| usage(format!("no state carries label \"{name}\"")))
    };
    let reward_map = |flag: &Option<String>, which: &str| -> Result<&'a RewardMap, Failure> {
        let name = flag
            .as_ref()
            .ok_or_else(|| usage(format!("this property requires {which} <name>")))?;
        rewards
            .get(name)
            .ok_or_else(|| usage(format!("model declares no reward block `{name}`")))
    };
    Ok(match args.prop {
        Property::Reach => Request::Reach(target_states(&args.target)?),
        Property::Acc => {
            Request::Acc(target_states(&args.target)?, reward_map(&args.reward, "--reward")?)
        }
        Property::Lra => Request::Lra(
            reward_map(&args.reward_up, "--reward-up")?,
            reward_map(&args.reward_low, "--reward-low")?,
        ),
    })
}

fn solve(
    pmc: &mut Pmc,
    request: Request<'_>,
    heuristic: Heuristic,
    witness: &[Rational],
) -> Result<NodeId, Failure> {
    match request {
        Request::Reach(targets) => {
            elim::reach_probability(pmc, &targets, heuristic).map_err(module)
        }
        Request::Acc(targets, map) => {
            elim::accumulated_reward(pmc, map, &targets, heuristic, witness).map_err(module)
        }
        Request::Lra(upper, lower) => {
            elim::lra(pmc, upper, lower, heuristic, witness).map_err(module)
        }
    }
}

fn resolve_witness(
    text: Option<&str>,
    spec: &GridSpec,
    params: &[String],
) -> Result<Vec<Rational>, Failure> {
    let mut witness = spec.centroid();
    let Some(text) = text else {
        return Ok(witness);
    };
    let mut seen = vec![false; params.len()];
    for pair in text.split(',') {
        let pair = pair.trim();
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| usage(format!("witness entries take the form name=value, got `{pair}`")))?;
        let name = name.trim();
        let idx = params
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| usage(format!("witness names unknown parameter `{name}`")))?;
        if seen[idx] {
            return Err(usage(format!("witness assigns `{name}` twice")));
        }
        seen[idx] = true;
        witness[idx] = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("cannot parse witness value `{}`", value.trim())))?;
    }
    Ok(witness)
}

/// Spot check at one grid corner that every transition expression lies in
/// (0, 1], i.e. that the valuations swept by the grid keep the graph of the
/// chain intact.
fn check_transitions_in_unit_interval(pmc: &Pmc, corner: &[Rational]) -> Result<(), Failure> {
    let mut nodes: Vec<NodeId> = Vec::new();
    let mut edges: Vec<(u32, u32, usize)> = Vec::new();
    for s in 0..pmc.state_count() as u32 {
        for (&t, &node) in pmc.row(s) {
            match nodes.iter().position(|&n| n == node) {
                Some(i) => edges.push((s, t, i)),
                None => {
                    edges.push((s, t, nodes.len()));
                    nodes.push(node);
                }
            }
        }
    }
    let evaluator = Evaluator::new(pmc.store(), &nodes);
    let values: Vec<Rational> = evaluator.eval(pmc.store(), corner).map_err(module)?;
    let one = Rational::one();
    for (s, t, slot) in edges {
        let v = &values[slot];
        if !v.is_positive() || *v > one {
            return Err(Failure::Run(format!(
                "transition {s} -> {t} evaluates to {v} at the first grid point; \
                 probabilities must stay in (0, 1] across the grid"
            )));
        }
    }
    Ok(())
}

fn evaluate(
    store: &parmc::acir::DagStore,
    evaluator: &Evaluator,
    points: &[Vec<Rational>],
    arith: Arith,
) -> Result<Vec<GridRow>, Failure> {
    let describe = |point: &[Rational], err: parmc::acir::EvalError| {
        let coords: Vec<String> = point.iter().map(|v| v.to_string()).collect();
        Failure::Run(format!("evaluation failed at ({}): {err}", coords.join(", ")))
    };
    match arith {
        Arith::Exact => points
            .par_iter()
            .map(|point| {
                let mut vals: Vec<Rational> =
                    evaluator.eval(store, point).map_err(|e| describe(point, e))?;
                let value = vals.pop().expect("one root");
                Ok(GridRow {
                    point: point.iter().map(Rational::to_f64).collect(),
                    values: vec![value.to_f64()],
                })
            })
            .collect(),
        Arith::Float => points
            .par_iter()
            .map(|point| {
                let coords: Vec<f64> = point.iter().map(Rational::to_f64).collect();
                let mut vals: Vec<f64> =
                    evaluator.eval(store, &coords).map_err(|e| describe(point, e))?;
                let value = vals.pop().expect("one root");
                Ok(GridRow { point: coords, values: vec![value] })
            })
            .collect(),
        Arith::Interval => points
            .par_iter()
            .map(|point| {
                let coords: Vec<Interval> = point.iter().map(Interval::enclosing).collect();
                let mut vals: Vec<Interval> =
                    evaluator.eval(store, &coords).map_err(|e| describe(point, e))?;
                let value = vals.pop().expect("one root");
                Ok(GridRow {
                    point: point.iter().map(Rational::to_f64).collect(),
                    values: vec![value.lo(), value.hi()],
                })
            })
            .collect(),
    }
}
