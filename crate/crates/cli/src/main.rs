//! Command-line experiments: trace generation, predictor training and
//! prediction, link expiration times, routing comparison, and the evaluation
//! pipelines.
//!
//! Exit codes: 0 on success, 1 on a runtime error, 2 on bad arguments.

mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::info;

use mobipred::experiment::{
    paper_eval, run_grid, rwm_node_series, scenario_net_config, train_scenario_predictors, write_grid_table,
    GridExperimentConfig, PaperEvalConfig,
};
use mobipred::io::{
    load_scenario, save_scenario, write_error_curve, write_let_matrix, write_reports_json, write_summary_csv,
    TraceTable,
};
use mobipred::mobility::{build_four_node_scenario, Coord, LocationSeries, RwmParams, Territory};
use mobipred::par::Execution;
use mobipred::predictor::{fit_coordinate_model, CoordinateModel, NetConfig, NodePredictor, DEFAULT_MARGIN};
use mobipred::routing::{
    let_matrix, run_comparison, GroundTruthForecaster, NeuralForecaster, Policy, SimulationConfig,
};
use mobipred::seed;
use mobipred::stability::{predicted_let, FitQuantity};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "mobipred",
    version,
    about = "Mobility prediction and stable-path routing experiments"
)]
struct Cli {
    /// Root seed; every stochastic component derives its own stream from it [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON experiment configuration; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Log more (-v info, -vv debug)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate Random Waypoint traces and write them as CSV
    GenTrace(GenTraceArgs),
    /// Train a predictor for one coordinate of one node
    Train(TrainArgs),
    /// Forecast a coordinate with a trained model
    Predict(PredictArgs),
    /// Predicted link expiration time between two nodes
    Let(LetArgs),
    /// Compare route selection policies on a scenario
    RouteSim(RouteSimArgs),
    /// Train per-node predictors for a scenario and save them
    TrainScenario(TrainScenarioArgs),
    /// Write a built-in scenario file
    Scenario(ScenarioArgs),
    /// Single-node evaluation: train x and y, write predictions and errors
    PaperEval(PaperEvalArgs),
    /// Structure selection grid over input and hidden layer sizes
    Grid(GridArgs),
}

#[derive(Args, Clone, Default)]
struct RwmArgs {
    /// Minimum speed in m/s [default: 0]
    #[arg(long)]
    vmin: Option<f64>,
    /// Maximum speed in m/s [default: 20]
    #[arg(long)]
    vmax: Option<f64>,
    /// Maximum pause in seconds [default: 60]
    #[arg(long)]
    pause_max: Option<f64>,
    /// Trace duration in seconds [default: 4000]
    #[arg(long)]
    duration: Option<f64>,
    /// Territory as WIDTHxHEIGHT in metres [default: 1000x1000]
    #[arg(long)]
    territory: Option<String>,
}

#[derive(Args, Clone, Default)]
struct NetArgs {
    /// Input neurons (history length) [default: 8]
    #[arg(long)]
    ne: Option<usize>,
    /// Hidden neurons [default: 5]
    #[arg(long)]
    nc: Option<usize>,
    /// Prediction steps per training window [default: 3]
    #[arg(long)]
    horizon: Option<usize>,
    /// Fed-back outputs the gradient chains through [default: min(horizon - 1, ne)]
    #[arg(long)]
    feedback: Option<usize>,
    /// Training epochs [default: 500]
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate [default: 0.05]
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
struct GenTraceArgs {
    #[command(flatten)]
    rwm: RwmArgs,
    /// Sampling interval in seconds [default: 10]
    #[arg(long)]
    interval: Option<f64>,
    /// Number of nodes, named n0, n1, ...
    #[arg(long, default_value_t = 1)]
    nodes: usize,
    /// Output trace CSV
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Input trace CSV
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Node to train on; may be omitted when the trace holds one node
    #[arg(long)]
    node: Option<String>,
    /// Coordinate to model
    #[arg(long, default_value = "x")]
    coord: Coord,
    #[command(flatten)]
    net: NetArgs,
    /// Samples used for training; the rest is monitored as held-out data [default: half]
    #[arg(long)]
    split: Option<usize>,
    /// Output model JSON
    #[arg(long, value_name = "MODEL")]
    out: Option<PathBuf>,
    /// Also write the per-epoch error curve CSV here
    #[arg(long, value_name = "FILE")]
    errors: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON
    #[arg(long, value_name = "MODEL")]
    model: PathBuf,
    /// Trace CSV holding the node's history
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Node id [default: the one stored in the model]
    #[arg(long)]
    node: Option<String>,
    /// Time of the last observed sample
    #[arg(long)]
    at: f64,
    /// Steps to predict [default: the model's horizon]
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantityArg {
    Distance,
    Squared,
}

impl From<QuantityArg> for FitQuantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::Distance => FitQuantity::Distance,
            QuantityArg::Squared => FitQuantity::Squared,
        }
    }
}

#[derive(Args)]
struct LetArgs {
    /// Comma-separated model files of node A (x and y, optionally z)
    #[arg(long, value_delimiter = ',', required = true)]
    model_a: Vec<PathBuf>,
    /// Comma-separated model files of node B
    #[arg(long, value_delimiter = ',', required = true)]
    model_b: Vec<PathBuf>,
    /// Trace CSV with both nodes' histories
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Time of the last observed sample
    #[arg(long)]
    at: f64,
    /// Transmission range in metres [default: 250]
    #[arg(long)]
    range: Option<f64>,
    /// Predicted positions to fit
    #[arg(long, default_value_t = 3)]
    steps: usize,
    /// Quantity the polynomial is fitted to
    #[arg(long, value_enum, default_value = "distance")]
    quantity: QuantityArg,
    /// Also write the result as a LET matrix CSV
    #[arg(long, value_name = "FILE")]
    matrix: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ForecasterArg {
    /// Trained recurrent predictors
    Neural,
    /// Exact future positions from the scenario traces
    Truth,
}

#[derive(Args)]
struct RouteSimArgs {
    /// Scenario JSON
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Directory of <node>_<coord>.json models; trained in memory when absent
    #[arg(long, value_name = "DIR")]
    models: Option<PathBuf>,
    /// Transmission range in metres [default: the scenario's]
    #[arg(long)]
    range: Option<f64>,
    /// Comma-separated policies: stable, shortest
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "neural")]
    forecaster: ForecasterArg,
    #[arg(long, value_enum, default_value = "distance")]
    quantity: QuantityArg,
    /// Net settings for in-memory training; --horizon also sets the
    /// prediction steps used for link expiration times
    #[command(flatten)]
    net: NetArgs,
    /// Report JSON
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Summary CSV [default: the report path with a .csv extension]
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
    /// Also write the LET matrix at route setup
    #[arg(long, value_name = "FILE")]
    let_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct TrainScenarioArgs {
    /// Scenario JSON
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Last training sample time [default: the scenario's setup time]
    #[arg(long)]
    until: Option<f64>,
    #[command(flatten)]
    net: NetArgs,
    /// Output model directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in scenario name
    #[arg(long, default_value = "four-node")]
    name: String,
    /// Output scenario JSON
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the scenario's sampled positions as a trace CSV
    #[arg(long, value_name = "FILE")]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct PaperEvalArgs {
    #[command(flatten)]
    rwm: RwmArgs,
    #[command(flatten)]
    net: NetArgs,
    /// Sampling interval in seconds [default: 10]
    #[arg(long)]
    interval: Option<f64>,
    /// Samples taken from the trace [default: 400]
    #[arg(long)]
    samples: Option<usize>,
    /// Training samples; the rest are held out [default: 200]
    #[arg(long)]
    split: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    rwm: RwmArgs,
    #[command(flatten)]
    net: NetArgs,
    /// Coordinate series to evaluate [default: 10]
    #[arg(long)]
    series: Option<usize>,
    /// Samples per series [default: 400]
    #[arg(long)]
    samples: Option<usize>,
    /// Training samples per series [default: 200]
    #[arg(long)]
    split: Option<usize>,
    /// Sampling interval in seconds [default: 10]
    #[arg(long)]
    interval: Option<f64>,
    /// Smallest input layer size [default: 4]
    #[arg(long)]
    ne_min: Option<usize>,
    /// Largest input layer size [default: 12]
    #[arg(long)]
    ne_max: Option<usize>,
    /// Smallest hidden layer size [default: 3]
    #[arg(long)]
    nc_min: Option<usize>,
    /// Largest hidden layer size [default: 8]
    #[arg(long)]
    nc_max: Option<usize>,
    /// Run every training job on the calling thread
    #[arg(long)]
    sequential: bool,
    /// Output error table CSV
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Global settings after merging flags over the config file.
struct Ctx {
    seed: u64,
    cfg: ExperimentConfig,
}

/// Exits with status 2 and usage, like any other argument error.
fn missing(flag: &str) -> ! {
    Cli::command()
        .error(
            ErrorKind::MissingRequiredArgument,
            format!("the following required argument was not provided: --{flag}"),
        )
        .exit()
}

fn require(value: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str) -> PathBuf {
    value.or_else(|| fallback.clone()).unwrap_or_else(|| missing(flag))
}

fn parse_territory(s: &str) -> Result<Territory> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("territory '{s}' is not WIDTHxHEIGHT"))?;
    let w: f64 = w.trim().parse().with_context(|| format!("territory width '{w}'"))?;
    let h: f64 = h.trim().parse().with_context(|| format!("territory height '{h}'"))?;
    Ok(Territory::rect(w, h)?)
}

impl Ctx {
    fn rwm(&self, a: &RwmArgs) -> Result<RwmParams> {
        let c = &self.cfg.rwm;
        let d = RwmParams::default();
        let territory = match a.territory.as_ref().or(c.territory.as_ref()) {
            Some(t) => parse_territory(t)?,
            None => d.territory,
        };
        let p = RwmParams {
            territory,
            v_min: a.vmin.or(c.v_min).unwrap_or(d.v_min),
            v_max: a.vmax.or(c.v_max).unwrap_or(d.v_max),
            pause_max: a.pause_max.or(c.pause_max).unwrap_or(d.pause_max),
            duration: a.duration.or(c.duration).unwrap_or(d.duration),
            seed: self.seed,
        };
        p.validate()?;
        Ok(p)
    }

    fn net(&self, a: &NetArgs, base: NetConfig) -> Result<NetConfig> {
        let c = &self.cfg.net;
        let n_input = a.ne.or(c.n_input).unwrap_or(base.n_input);
        let horizon = a.horizon.or(c.horizon).unwrap_or(base.horizon);
        let cfg = NetConfig {
            n_input,
            n_hidden: a.nc.or(c.n_hidden).unwrap_or(base.n_hidden),
            n_feedback: a
                .feedback
                .or(c.n_feedback)
                .unwrap_or(NetConfig::default_feedback(n_input, horizon)),
            horizon,
            learning_rate: a.lr.or(c.learning_rate).unwrap_or(base.learning_rate),
            epochs: a.epochs.or(c.epochs).unwrap_or(base.epochs),
            seed: base.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn interval(&self, flag: Option<f64>) -> f64 {
        flag.or(self.cfg.sample_interval).unwrap_or(10.0)
    }
}

fn load_series(path: &Path) -> Result<BTreeMap<String, LocationSeries>> {
    let table = TraceTable::load(path).with_context(|| format!("reading trace {}", path.display()))?;
    Ok(table.to_series()?)
}

fn pick_node<'a>(all: &'a BTreeMap<String, LocationSeries>, node: Option<&str>) -> Result<&'a LocationSeries> {
    match node {
        Some(id) => all.get(id).ok_or_else(|| anyhow!("trace has no node '{id}'")),
        None if all.len() == 1 => Ok(all.values().next().expect("one node")),
        None => bail!("trace holds {} nodes; choose one with --node", all.len()),
    }
}

fn sample_index(series: &LocationSeries, at: f64) -> Result<usize> {
    series
        .index_at(at)
        .ok_or_else(|| anyhow!("t={at} is not a sample time of node '{}'", series.node_id))
}

fn cmd_gen_trace(ctx: &Ctx, a: GenTraceArgs) -> Result<()> {
    let out = require(a.out, &ctx.cfg.out, "out");
    let rwm = ctx.rwm(&a.rwm)?;
    let interval = ctx.interval(a.interval);
    if !(interval > 0.0) {
        bail!("interval must be > 0");
    }
    if a.nodes == 0 {
        bail!("--nodes must be at least 1");
    }
    let count = (rwm.duration / interval + 1e-9).floor() as usize + 1;
    let series = (0..a.nodes)
        .map(|i| rwm_node_series(&rwm, ctx.seed, &format!("n{i}"), interval, count))
        .collect::<mobipred::Result<Vec<_>>>()?;
    TraceTable::from_series(&series)?.save(&out)?;
    info!("wrote {} samples for {} node(s) to {}", count, a.nodes, out.display());
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let trace = require(a.trace, &ctx.cfg.trace, "trace");
    let out = require(a.out, &ctx.cfg.out, "out");
    let all = load_series(&trace)?;
    let series = pick_node(&all, a.node.as_deref())?;
    let values = series
        .coord(a.coord)
        .ok_or_else(|| anyhow!("trace has no {} coordinate", a.coord))?;
    let split = a.split.or(ctx.cfg.split).unwrap_or(values.len() / 2);
    let base = NetConfig::default().with_seed(seed::derive(ctx.seed, &format!("net/{}", a.coord)));
    let cfg = ctx.net(&a.net, base)?;
    let t = Instant::now();
    let (mut model, curve) = fit_coordinate_model(values, split, cfg, DEFAULT_MARGIN)?;
    model.node_id = Some(series.node_id.clone());
    model.coord = Some(a.coord);
    model.save(&out)?;
    if let Some(path) = a.errors {
        write_error_curve(File::create(&path)?, &curve)?;
    }
    if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
        info!(
            "trained {} epochs in {:.1?}: E_train {} -> {}, E_gener {:?}",
            curve.len(),
            t.elapsed(),
            first.train,
            last.train,
            last.gener
        );
    }
    Ok(())
}

fn cmd_predict(ctx: &Ctx, a: PredictArgs) -> Result<()> {
    let trace = require(a.trace, &ctx.cfg.trace, "trace");
    let model = CoordinateModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let coord = model.coord.unwrap_or(Coord::X);
    let all = load_series(&trace)?;
    let node = a.node.as_deref().or(model.node_id.as_deref());
    let series = pick_node(&all, node)?;
    let index = sample_index(series, a.at)?;
    let values = series
        .coord(coord)
        .ok_or_else(|| anyhow!("trace has no {coord} coordinate"))?;
    let steps = a.steps.unwrap_or(model.net.config.horizon);
    let preds = model.forecast(&values[..=index], steps)?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "time,{coord}")?;
    for (k, p) in preds.iter().enumerate() {
        writeln!(stdout, "{},{}", series.time(index + k + 1), p)?;
    }
    Ok(())
}

fn load_predictor(files: &[PathBuf]) -> Result<(String, NodePredictor)> {
    let models = files
        .iter()
        .map(|f| CoordinateModel::load(f).with_context(|| format!("loading {}", f.display())))
        .collect::<Result<Vec<_>>>()?;
    let id = models
        .iter()
        .find_map(|m| m.node_id.clone())
        .ok_or_else(|| anyhow!("models carry no node id"))?;
    if models.iter().any(|m| m.node_id.as_deref().is_some_and(|n| n != id)) {
        bail!("models in one list belong to different nodes");
    }
    Ok((id, NodePredictor::from_models(models)?))
}

fn cmd_let(ctx: &Ctx, a: LetArgs) -> Result<()> {
    let trace = require(a.trace, &ctx.cfg.trace, "trace");
    let (id_a, pa) = load_predictor(&a.model_a)?;
    let (id_b, pb) = load_predictor(&a.model_b)?;
    let all = load_series(&trace)?;
    let sa = pick_node(&all, Some(&id_a))?;
    let sb = pick_node(&all, Some(&id_b))?;
    let index = sample_index(sa, a.at)?;
    let range = a.range.or(ctx.cfg.transmission_range).unwrap_or(250.0);
    let l = predicted_let(&pa, sa, &pb, sb, index, range, a.steps, a.quantity.into())?;
    println!("{l}");
    if let Some(path) = a.matrix {
        write_let_matrix(File::create(path)?, &[(sa.time(index), id_a, id_b, l)])?;
    }
    Ok(())
}

fn model_path(dir: &Path, node: &str, coord: Coord) -> PathBuf {
    dir.join(format!("{node}_{coord}.json"))
}

fn load_model_dir(dir: &Path, nodes: impl Iterator<Item = String>) -> Result<BTreeMap<String, NodePredictor>> {
    let mut out = BTreeMap::new();
    for id in nodes {
        let mut models = Vec::new();
        for c in [Coord::X, Coord::Y, Coord::Z] {
            let p = model_path(dir, &id, c);
            if p.exists() {
                models.push(CoordinateModel::load(&p).with_context(|| format!("loading {}", p.display()))?);
            }
        }
        let predictor = NodePredictor::from_models(models).with_context(|| format!("models for node '{id}'"))?;
        out.insert(id, predictor);
    }
    Ok(out)
}

fn parse_policies(list: &[String]) -> Result<Vec<Policy>> {
    let policies = list
        .iter()
        .map(|p| p.parse::<Policy>())
        .collect::<mobipred::Result<Vec<_>>>()?;
    if policies.is_empty() {
        bail!("no policies given");
    }
    Ok(policies)
}

fn cmd_route_sim(ctx: &Ctx, a: RouteSimArgs) -> Result<()> {
    let scenario_path = require(a.scenario, &ctx.cfg.scenario, "scenario");
    let out = require(a.out, &ctx.cfg.out, "out");
    let scenario = load_scenario(&scenario_path).with_context(|| format!("loading {}", scenario_path.display()))?;
    let policy_names = a
        .policies
        .or_else(|| ctx.cfg.policies.clone())
        .unwrap_or_else(|| vec!["stable".into(), "shortest".into()]);
    let policies = parse_policies(&policy_names)?;
    let config = SimulationConfig {
        range: a
            .range
            .or(ctx.cfg.transmission_range)
            .unwrap_or(scenario.transmission_range),
        horizon: a.net.horizon.or(ctx.cfg.net.horizon).unwrap_or(3),
        max_hops: None,
        quantity: a.quantity.into(),
        execution: Execution::default(),
    };
    let setup = scenario.series[&scenario.source]
        .index_at(scenario.setup_time)
        .ok_or_else(|| anyhow!("setup time {} is not a sample time", scenario.setup_time))?;

    let predictors;
    let neural;
    let truth = GroundTruthForecaster { scenario: &scenario };
    let forecaster: &dyn mobipred::routing::Forecaster = match a.forecaster {
        ForecasterArg::Truth => &truth,
        ForecasterArg::Neural => {
            predictors = match a.models.or_else(|| ctx.cfg.models.clone()) {
                Some(dir) => load_model_dir(&dir, scenario.node_ids().map(String::from))?,
                None => {
                    let net = ctx.net(&a.net, scenario_net_config(ctx.seed))?;
                    train_scenario_predictors(&scenario, setup, net, DEFAULT_MARGIN, Execution::default())?
                }
            };
            neural = NeuralForecaster {
                scenario: &scenario,
                predictors: &predictors,
            };
            &neural
        }
    };

    let reports = run_comparison(&scenario, &policies, forecaster, &config)?;
    write_reports_json(File::create(&out)?, &reports)?;
    let summary = a.summary.unwrap_or_else(|| out.with_extension("csv"));
    write_summary_csv(File::create(&summary)?, &reports)?;
    if let Some(path) = a.let_matrix {
        write_let_matrix(File::create(path)?, &let_matrix(&scenario, forecaster, setup, &config)?)?;
    }
    for r in &reports {
        let path = r.chosen_path.as_ref().map_or("none".to_string(), |p| p.join("-"));
        println!(
            "{}: path {path}, lifetime {} s, interruptions {}, rediscoveries {}",
            r.policy, r.realized_lifetime, r.interruptions, r.rediscoveries
        );
    }
    Ok(())
}

fn cmd_train_scenario(ctx: &Ctx, a: TrainScenarioArgs) -> Result<()> {
    let scenario_path = require(a.scenario, &ctx.cfg.scenario, "scenario");
    let out = require(a.out, &ctx.cfg.out, "out");
    let scenario = load_scenario(&scenario_path)?;
    let until = a.until.unwrap_or(scenario.setup_time);
    let index = scenario.series[&scenario.source]
        .index_at(until)
        .ok_or_else(|| anyhow!("t={until} is not a sample time"))?;
    let net = ctx.net(&a.net, scenario_net_config(ctx.seed))?;
    let predictors = train_scenario_predictors(&scenario, index, net, DEFAULT_MARGIN, Execution::default())?;
    fs::create_dir_all(&out)?;
    for (id, p) in &predictors {
        for m in [Some(&p.x), Some(&p.y), p.z.as_ref()].into_iter().flatten() {
            m.save(&model_path(&out, id, m.coord.unwrap_or(Coord::X)))?;
        }
    }
    info!("saved predictors for {} nodes to {}", predictors.len(), out.display());
    Ok(())
}

fn cmd_scenario(ctx: &Ctx, a: ScenarioArgs) -> Result<()> {
    let out = require(a.out, &ctx.cfg.out, "out");
    let scenario = match a.name.as_str() {
        "four-node" => build_four_node_scenario(),
        other => bail!("unknown scenario '{other}' (available: four-node)"),
    };
    save_scenario(&scenario, &out)?;
    if let Some(path) = a.trace_out {
        TraceTable::from_series(scenario.series.values())?.save(&path)?;
    }
    Ok(())
}

fn cmd_paper_eval(ctx: &Ctx, a: PaperEvalArgs) -> Result<()> {
    let out = require(a.out, &ctx.cfg.out, "out");
    let d = PaperEvalConfig::default();
    let cfg = PaperEvalConfig {
        rwm: ctx.rwm(&a.rwm)?,
        sample_interval: ctx.interval(a.interval),
        samples: a.samples.or(ctx.cfg.samples).unwrap_or(d.samples),
        split: a.split.or(ctx.cfg.split).unwrap_or(d.split),
        net: ctx.net(&a.net, d.net)?,
        margin: d.margin,
        seed: ctx.seed,
    };
    let t = Instant::now();
    let s = paper_eval(&cfg, &out)?;
    println!(
        "E_train x {} y {}; E_gener x {} y {} (persistence x {} y {}); {:.1?}",
        s.x.e_train,
        s.y.e_train,
        s.x.e_gener,
        s.y.e_gener,
        s.x.persistence_gener,
        s.y.persistence_gener,
        t.elapsed()
    );
    Ok(())
}

fn cmd_grid(ctx: &Ctx, a: GridArgs) -> Result<()> {
    let out = require(a.out, &ctx.cfg.out, "out");
    let d = GridExperimentConfig::default();
    let g = &ctx.cfg.grid;
    let cfg = GridExperimentConfig {
        rwm: ctx.rwm(&a.rwm)?,
        n_series: a.series.or(g.series).unwrap_or(d.n_series),
        sample_interval: ctx.interval(a.interval),
        samples: a.samples.or(ctx.cfg.samples).unwrap_or(d.samples),
        split: a.split.or(ctx.cfg.split).unwrap_or(d.split),
        n_input_min: a.ne_min.or(g.n_input_min).unwrap_or(d.n_input_min),
        n_input_max: a.ne_max.or(g.n_input_max).unwrap_or(d.n_input_max),
        n_hidden_min: a.nc_min.or(g.n_hidden_min).unwrap_or(d.n_hidden_min),
        n_hidden_max: a.nc_max.or(g.n_hidden_max).unwrap_or(d.n_hidden_max),
        net: ctx.net(&a.net, d.net)?,
        margin: d.margin,
        seed: ctx.seed,
        execution: if a.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    let t = Instant::now();
    let result = run_grid(&cfg)?;
    write_grid_table(File::create(&out)?, &result)?;
    println!(
        "selected n_input {} n_hidden {} ({} combinations, {:.1?})",
        result.best_n_input,
        result.best_n_hidden,
        result.table.len(),
        t.elapsed()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        cfg,
    };
    match cli.command {
        Command::GenTrace(a) => cmd_gen_trace(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Predict(a) => cmd_predict(&ctx, a),
        Command::Let(a) => cmd_let(&ctx, a),
        Command::RouteSim(a) => cmd_route_sim(&ctx, a),
        Command::TrainScenario(a) => cmd_train_scenario(&ctx, a),
        Command::Scenario(a) => cmd_scenario(&ctx, a),
        Command::PaperEval(a) => cmd_paper_eval(&ctx, a),
        Command::Grid(a) => cmd_grid(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn territory_parsing() {
        let t = parse_territory("500x300").unwrap();
        assert_eq!((t.x_max, t.y_max), (500.0, 300.0));
        assert!(parse_territory("500").is_err());
        assert!(parse_territory("ax3").is_err());
    }
}
