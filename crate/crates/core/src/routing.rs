//! Connectivity snapshots, path enumeration and route selection, plus a
//! route-lifetime simulation comparing selection policies.
//!
//! The simulation sets a route up at a sample time, then follows the exact
//! continuous traces to find when a link on it really breaks. On a break it
//! rediscovers at the next sample time (on-demand repair).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::mobility::{distance, first_exit_time, Position, Scenario};
use crate::par::Execution;
use crate::predictor::NodePredictor;
use crate::stability::{let_from_tracks, path_expiration_time, ExpirationTime, FitQuantity, Track};

/// Unit-disk connectivity at one instant. Nodes are kept in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologySnapshot {
    pub time: f64,
    pub ids: Vec<String>,
    pub positions: Vec<Position>,
    /// Sorted neighbour indices per node.
    pub adjacency: Vec<Vec<usize>>,
}

impl TopologySnapshot {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|probe| probe.as_str().cmp(id)).ok()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Links every pair of nodes at most `range` apart (boundary inclusive).
pub fn build_topology(time: f64, positions: &[(String, Position)], range: f64) -> Result<TopologySnapshot> {
    if !(range > 0.0) {
        return Err(param("range must be > 0"));
    }
    let mut nodes: Vec<(String, Position)> = positions.to_vec();
    nodes.sort_by(|a, b| a.0.cmp(&b.0));
    if nodes.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(param("duplicate node id in topology"));
    }
    let n = nodes.len();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if distance(&nodes[i].1, &nodes[j].1) <= range {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }
    let (ids, positions) = nodes.into_iter().unzip();
    Ok(TopologySnapshot {
        time,
        ids,
        positions,
        adjacency,
    })
}

/// A loop-free route from `nodes[0]` to the last node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<String>,
    /// Predicted path expiration time, once computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pet: Option<ExpirationTime>,
}

impl Path {
    pub fn new(nodes: Vec<String>) -> Self {
        Path { nodes, pet: None }
    }

    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn links(&self) -> impl Iterator<Item = (&str, &str)> {
        self.nodes.windows(2).map(|w| (w[0].as_str(), w[1].as_str()))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.nodes.join("-"))
    }
}

/// All simple paths of at most `max_hops` hops, depth-first with
/// neighbours visited in id order.
pub fn enumerate_paths(
    snapshot: &TopologySnapshot,
    source: &str,
    destination: &str,
    max_hops: usize,
) -> Result<Vec<Path>> {
    let s = snapshot
        .index_of(source)
        .ok_or_else(|| param(format!("unknown source '{source}'")))?;
    let d = snapshot
        .index_of(destination)
        .ok_or_else(|| param(format!("unknown destination '{destination}'")))?;
    let to_path = |idx: &[usize]| Path::new(idx.iter().map(|&i| snapshot.ids[i].clone()).collect());
    if s == d {
        return Ok(vec![to_path(&[s])]);
    }

    let mut out = Vec::new();
    let mut on_path = vec![false; snapshot.ids.len()];
    let mut stack = vec![s];
    on_path[s] = true;
    // Each frame remembers how far through its neighbour list it has got.
    let mut cursor = vec![0usize];
    while let Some(&node) = stack.last() {
        let depth = stack.len() - 1;
        let next = if depth < max_hops {
            let adj = &snapshot.adjacency[node];
            let c = cursor.last_mut().expect("frame per stack entry");
            let mut found = None;
            while *c < adj.len() {
                let cand = adj[*c];
                *c += 1;
                if !on_path[cand] {
                    found = Some(cand);
                    break;
                }
            }
            found
        } else {
            None
        };
        match next {
            Some(v) if v == d => {
                stack.push(v);
                out.push(to_path(&stack));
                stack.pop();
            }
            Some(v) => {
                on_path[v] = true;
                stack.push(v);
                cursor.push(0);
            }
            None => {
                on_path[node] = false;
                stack.pop();
                cursor.pop();
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "shortest")]
    ShortestHop,
    #[serde(rename = "stable")]
    StablePath,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::ShortestHop => "shortest",
            Policy::StablePath => "stable",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "shortest" | "shortest-hop" => Ok(Policy::ShortestHop),
            "stable" | "stable-path" => Ok(Policy::StablePath),
            other => Err(param(format!("unknown policy '{other}'"))),
        }
    }
}

/// PET of `path` from per-link expiration times. A zero-hop path never
/// expires.
pub fn path_pet<F>(path: &Path, mut link_let: F) -> Result<ExpirationTime>
where
    F: FnMut(&str, &str) -> Result<ExpirationTime>,
{
    let lets = path.links().map(|(a, b)| link_let(a, b)).collect::<Result<Vec<_>>>()?;
    if lets.is_empty() {
        return Ok(ExpirationTime::BeyondHorizon);
    }
    path_expiration_time(&lets)
}

/// Picks one path under `policy`.
///
/// Shortest-hop takes the fewest hops, then the lexicographically smallest
/// node sequence. Stable-path takes the largest PET, then fewest hops, then
/// the smallest node sequence; the returned path carries its PET.
pub fn select_path<F>(paths: &[Path], policy: Policy, link_let: F) -> Result<Path>
where
    F: FnMut(&str, &str) -> Result<ExpirationTime>,
{
    if paths.is_empty() {
        return Err(Error::NoRoute {
            source_node: String::new(),
            destination: String::new(),
        });
    }
    match policy {
        Policy::ShortestHop => Ok(paths
            .iter()
            .min_by(|a, b| a.hops().cmp(&b.hops()).then_with(|| a.nodes.cmp(&b.nodes)))
            .expect("non-empty")
            .clone()),
        Policy::StablePath => {
            let mut link_let = link_let;
            let mut scored = Vec::with_capacity(paths.len());
            for p in paths {
                let mut p = p.clone();
                p.pet = Some(path_pet(&p, &mut link_let)?);
                scored.push(p);
            }
            Ok(scored
                .into_iter()
                .min_by(|a, b| {
                    b.pet
                        .cmp(&a.pet)
                        .then_with(|| a.hops().cmp(&b.hops()))
                        .then_with(|| a.nodes.cmp(&b.nodes))
                })
                .expect("non-empty"))
        }
    }
}

/// Source of predicted node positions for the simulation.
pub trait Forecaster: Sync {
    /// Positions of `node` at the `steps` sample times after `index`.
    fn forecast(&self, node: &str, index: usize, steps: usize) -> Result<Vec<Position>>;
}

/// Forecasts with trained per-node predictors from the scenario's samples.
pub struct NeuralForecaster<'a> {
    pub scenario: &'a Scenario,
    pub predictors: &'a BTreeMap<String, NodePredictor>,
}

impl Forecaster for NeuralForecaster<'_> {
    fn forecast(&self, node: &str, index: usize, steps: usize) -> Result<Vec<Position>> {
        let predictor = self
            .predictors
            .get(node)
            .ok_or_else(|| param(format!("no predictor for node '{node}'")))?;
        let series = self
            .scenario
            .series
            .get(node)
            .ok_or_else(|| param(format!("no series for node '{node}'")))?;
        predictor.forecast(series, index, steps)
    }
}

/// Reads future positions straight off the continuous traces.
pub struct GroundTruthForecaster<'a> {
    pub scenario: &'a Scenario,
}

impl Forecaster for GroundTruthForecaster<'_> {
    fn forecast(&self, node: &str, index: usize, steps: usize) -> Result<Vec<Position>> {
        let trace = self
            .scenario
            .traces
            .get(node)
            .ok_or_else(|| param(format!("no trace for node '{node}'")))?;
        Ok((1..=steps)
            .map(|k| trace.position_at(self.scenario.time(index + k)))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub range: f64,
    /// Prediction steps used for link expiration times.
    pub horizon: usize,
    /// Defaults to node count − 1.
    pub max_hops: Option<usize>,
    pub quantity: FitQuantity,
    pub execution: Execution,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            range: 250.0,
            horizon: 3,
            max_hops: None,
            quantity: FitQuantity::Distance,
            execution: Execution::default(),
        }
    }
}

/// One established route and how long it really lasted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteEpisode {
    pub setup_time: f64,
    pub path: Vec<String>,
    pub predicted_pet: ExpirationTime,
    /// Ground-truth time the first link broke; `None` if it survived the run.
    pub break_time: Option<f64>,
    pub lifetime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub policy: Policy,
    /// The first route established (normally at setup).
    pub chosen_path: Option<Vec<String>>,
    pub predicted_pet: Option<ExpirationTime>,
    /// Ground-truth lifetime of the first route; 0 when none was found.
    pub realized_lifetime: f64,
    /// Routes that broke before the end of the run.
    pub interruptions: usize,
    /// Route discovery attempts after the initial one.
    pub rediscoveries: usize,
    pub no_route_at_setup: bool,
    pub episodes: Vec<RouteEpisode>,
}

/// Ground-truth break time of `path` after `from`, if before `until`.
pub fn path_break_time(scenario: &Scenario, path: &Path, range: f64, from: f64, until: f64) -> Result<Option<f64>> {
    let mut earliest: Option<f64> = None;
    for (a, b) in path.links() {
        let ta = scenario
            .traces
            .get(a)
            .ok_or_else(|| param(format!("no trace for '{a}'")))?;
        let tb = scenario
            .traces
            .get(b)
            .ok_or_else(|| param(format!("no trace for '{b}'")))?;
        if let Some(t) = first_exit_time(ta, tb, range, from, until) {
            earliest = Some(earliest.map_or(t, |e: f64| e.min(t)));
        }
    }
    Ok(earliest)
}

/// Predicted link expiration times at one sample index, with per-node
/// forecasts computed once.
struct LinkOracle<'a> {
    scenario: &'a Scenario,
    forecaster: &'a dyn Forecaster,
    index: usize,
    config: &'a SimulationConfig,
    tracks: BTreeMap<String, Track>,
}

impl<'a> LinkOracle<'a> {
    fn new(scenario: &'a Scenario, forecaster: &'a dyn Forecaster, index: usize, config: &'a SimulationConfig) -> Self {
        LinkOracle {
            scenario,
            forecaster,
            index,
            config,
            tracks: BTreeMap::new(),
        }
    }

    fn track(&mut self, node: &str) -> Result<Track> {
        if let Some(t) = self.tracks.get(node) {
            return Ok(t.clone());
        }
        let steps = self.config.horizon;
        let times = (1..=steps).map(|k| self.scenario.time(self.index + k)).collect();
        let track = Track::new(times, self.forecaster.forecast(node, self.index, steps)?)?;
        self.tracks.insert(node.to_string(), track.clone());
        Ok(track)
    }

    fn link_let(&mut self, a: &str, b: &str) -> Result<ExpirationTime> {
        let ta = self.track(a)?;
        let tb = self.track(b)?;
        let pos = |id: &str| self.scenario.series[id].position(self.index);
        let_from_tracks(
            self.scenario.time(self.index),
            pos(a),
            pos(b),
            &ta,
            &tb,
            self.config.range,
            self.config.quantity,
        )
    }
}

/// Predicted LET of every node pair at sample `index`, pairs in id order.
pub fn let_matrix(
    scenario: &Scenario,
    forecaster: &dyn Forecaster,
    index: usize,
    config: &SimulationConfig,
) -> Result<Vec<(f64, String, String, ExpirationTime)>> {
    let ids: Vec<&str> = scenario.node_ids().collect();
    let mut oracle = LinkOracle::new(scenario, forecaster, index, config);
    let mut out = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            out.push((
                scenario.time(index),
                a.to_string(),
                b.to_string(),
                oracle.link_let(a, b)?,
            ));
        }
    }
    Ok(out)
}

fn simulate(
    scenario: &Scenario,
    policy: Policy,
    forecaster: &dyn Forecaster,
    config: &SimulationConfig,
) -> Result<SimulationReport> {
    let n = scenario.sample_count();
    let end = scenario.end_time();
    let max_hops = config.max_hops.unwrap_or(scenario.traces.len().saturating_sub(1));
    let mut idx = (0..n)
        .find(|&i| scenario.time(i) >= scenario.setup_time - 1e-9)
        .ok_or_else(|| Error::Range(format!("setup time {} is after the scenario ends", scenario.setup_time)))?;

    let mut report = SimulationReport {
        policy,
        chosen_path: None,
        predicted_pet: None,
        realized_lifetime: 0.0,
        interruptions: 0,
        rediscoveries: 0,
        no_route_at_setup: false,
        episodes: Vec::new(),
    };
    let mut attempts = 0usize;
    while idx < n {
        let t = scenario.time(idx);
        attempts += 1;
        let snapshot = build_topology(t, &scenario.positions(idx), config.range)?;
        let paths = enumerate_paths(&snapshot, &scenario.source, &scenario.destination, max_hops)?;
        if paths.is_empty() {
            if attempts == 1 {
                report.no_route_at_setup = true;
            }
            idx += 1;
            continue;
        }
        let mut oracle = LinkOracle::new(scenario, forecaster, idx, config);
        let mut chosen = select_path(&paths, policy, |a, b| oracle.link_let(a, b))?;
        let pet = match chosen.pet {
            Some(p) => p,
            None => path_pet(&chosen, |a, b| oracle.link_let(a, b))?,
        };
        chosen.pet = Some(pet);
        let break_time = path_break_time(scenario, &chosen, config.range, t, end)?;
        report.episodes.push(RouteEpisode {
            setup_time: t,
            path: chosen.nodes.clone(),
            predicted_pet: pet,
            break_time,
            lifetime: break_time.unwrap_or(end) - t,
        });
        match break_time {
            None => break,
            Some(tb) => {
                report.interruptions += 1;
                idx = (idx + 1..n).find(|&i| scenario.time(i) > tb).unwrap_or(n);
            }
        }
    }
    report.rediscoveries = attempts.saturating_sub(1);
    if let Some(first) = report.episodes.first() {
        report.chosen_path = Some(first.path.clone());
        report.predicted_pet = Some(first.predicted_pet);
        report.realized_lifetime = first.lifetime;
    }
    Ok(report)
}

/// Runs the route-lifetime simulation once per policy.
pub fn run_comparison(
    scenario: &Scenario,
    policies: &[Policy],
    forecaster: &dyn Forecaster,
    config: &SimulationConfig,
) -> Result<Vec<SimulationReport>> {
    config
        .execution
        .map(policies, |&p| simulate(scenario, p, forecaster, config))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::{build_four_node_scenario, ContinuousTrace};
    use ExpirationTime::{BeyondHorizon, Finite};

    fn snap(points: &[(&str, f64, f64)], range: f64) -> TopologySnapshot {
        let pos: Vec<(String, Position)> = points.iter().map(|&(id, x, y)| (id.to_string(), [x, y, 0.0])).collect();
        build_topology(0.0, &pos, range).unwrap()
    }

    fn names(paths: &[Path]) -> Vec<String> {
        paths.iter().map(|p| p.to_string()).collect()
    }

    #[test]
    fn boundary_distance_is_connected() {
        let s = snap(&[("a", 0.0, 0.0), ("b", 250.0, 0.0)], 250.0);
        assert!(s.has_edge(0, 1));
        let s = snap(&[("a", 0.0, 0.0), ("b", 250.1, 0.0)], 250.0);
        assert!(!s.has_edge(0, 1));
    }

    #[test]
    fn four_node_topology_and_paths() {
        let sc = build_four_node_scenario();
        let idx = sc.series["A"].index_at(0.0).unwrap();
        let s = build_topology(0.0, &sc.positions(idx), 250.0).unwrap();
        let e = |a: &str, b: &str| s.has_edge(s.index_of(a).unwrap(), s.index_of(b).unwrap());
        assert!(e("A", "B") && e("A", "C") && e("B", "D") && e("C", "D"));
        assert!(!e("B", "C") && !e("A", "D"));
        let paths = enumerate_paths(&s, "A", "D", 2).unwrap();
        assert_eq!(names(&paths), vec!["A-B-D", "A-C-D"]);
    }

    #[test]
    fn trivial_and_disconnected_enumeration() {
        let s = snap(&[("a", 0.0, 0.0), ("b", 1000.0, 0.0)], 250.0);
        assert_eq!(names(&enumerate_paths(&s, "a", "a", 3).unwrap()), vec!["a"]);
        assert!(enumerate_paths(&s, "a", "b", 3).unwrap().is_empty());
        assert!(enumerate_paths(&s, "a", "zz", 3).is_err());
    }

    #[test]
    fn stable_policy_prefers_longer_lived_path() {
        let paths = vec![
            Path::new(vec!["A".into(), "B".into(), "D".into()]),
            Path::new(vec!["A".into(), "C".into(), "D".into()]),
        ];
        let lets = |a: &str, b: &str| -> Result<ExpirationTime> {
            Ok(match (a, b) {
                ("A", "B") => Finite(5.0),
                ("A", "C") => Finite(40.0),
                _ => BeyondHorizon,
            })
        };
        let stable = select_path(&paths, Policy::StablePath, lets).unwrap();
        assert_eq!(stable.to_string(), "A-C-D");
        assert_eq!(stable.pet, Some(Finite(40.0)));
        let shortest = select_path(&paths, Policy::ShortestHop, lets).unwrap();
        assert_eq!(shortest.to_string(), "A-B-D");
    }

    #[test]
    fn single_candidate_under_both_policies() {
        let paths = vec![Path::new(vec!["x".into(), "y".into()])];
        for p in [Policy::ShortestHop, Policy::StablePath] {
            let chosen = select_path(&paths, p, |_, _| Ok(Finite(1.0))).unwrap();
            assert_eq!(chosen.nodes, paths[0].nodes);
        }
        assert!(matches!(
            select_path(&[], Policy::StablePath, |_, _| Ok(Finite(1.0))),
            Err(Error::NoRoute { .. })
        ));
    }

    #[test]
    fn beyond_horizon_outranks_finite_and_ties_prefer_fewer_hops() {
        let p = |s: &str| Path::new(s.split('-').map(String::from).collect());
        let paths = vec![p("a-b-c-d"), p("a-e-d"), p("a-f-d")];
        let chosen = select_path(&paths, Policy::StablePath, |_, _| Ok(BeyondHorizon)).unwrap();
        assert_eq!(chosen.to_string(), "a-e-d");
        let chosen = select_path(&paths, Policy::StablePath, |a, _| {
            Ok(if a == "c" { BeyondHorizon } else { Finite(1e9) })
        })
        .unwrap();
        assert_eq!(chosen.to_string(), "a-e-d");
    }

    #[test]
    fn static_connected_nodes_never_interrupt() {
        let mut traces = BTreeMap::new();
        for (id, x) in [("a", 0.0), ("b", 100.0), ("c", 200.0)] {
            traces.insert(
                id.to_string(),
                ContinuousTrace::stationary([x, 0.0, 0.0], 0.0, 100.0).unwrap(),
            );
        }
        let sc = Scenario::new("static", "", traces, "a", "c", 250.0, 10.0, 0.0, 11, 0.0).unwrap();
        let gt = GroundTruthForecaster { scenario: &sc };
        let reports = run_comparison(
            &sc,
            &[Policy::StablePath, Policy::ShortestHop],
            &gt,
            &SimulationConfig::default(),
        )
        .unwrap();
        for r in reports {
            assert_eq!(r.interruptions, 0);
            assert_eq!(r.realized_lifetime, 100.0);
            assert_eq!(r.chosen_path.as_deref(), Some(&["a".to_string(), "c".to_string()][..]));
        }
    }

    #[test]
    fn isolated_source_reports_no_route() {
        let mut traces = BTreeMap::new();
        traces.insert(
            "s".to_string(),
            ContinuousTrace::stationary([0.0; 3], 0.0, 50.0).unwrap(),
        );
        traces.insert(
            "d".to_string(),
            ContinuousTrace::stationary([900.0, 0.0, 0.0], 0.0, 50.0).unwrap(),
        );
        let sc = Scenario::new("iso", "", traces, "s", "d", 250.0, 10.0, 0.0, 6, 0.0).unwrap();
        let gt = GroundTruthForecaster { scenario: &sc };
        let r = &run_comparison(&sc, &[Policy::StablePath], &gt, &SimulationConfig::default()).unwrap()[0];
        assert!(r.no_route_at_setup);
        assert_eq!(r.realized_lifetime, 0.0);
        assert!(r.chosen_path.is_none());
        assert_eq!(r.interruptions, 0);
    }

    #[test]
    fn four_node_with_exact_forecasts() {
        let sc = build_four_node_scenario();
        let gt = GroundTruthForecaster { scenario: &sc };
        let cfg = SimulationConfig {
            execution: Execution::Sequential,
            ..Default::default()
        };
        let reports = run_comparison(&sc, &[Policy::StablePath, Policy::ShortestHop], &gt, &cfg).unwrap();
        let (stable, shortest) = (&reports[0], &reports[1]);
        assert_eq!(stable.chosen_path.as_ref().unwrap().join("-"), "A-C-D");
        assert_eq!(shortest.chosen_path.as_ref().unwrap().join("-"), "A-B-D");
        assert!((shortest.realized_lifetime - 4.0).abs() < 1e-9);
        assert!(stable.realized_lifetime > shortest.realized_lifetime);
        assert_eq!(stable.interruptions, 0);
        assert!(shortest.interruptions >= 1);
    }
}
