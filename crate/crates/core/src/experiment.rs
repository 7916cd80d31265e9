//! End-to-end pipelines: the single-node prediction evaluation, the
//! structure-selection grid, and predictor training for routing scenarios.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::mobility::{generate_rwm_trace, sample_trace, Coord, LocationSeries, RwmParams, Scenario};
use crate::par::Execution;
use crate::predictor::{
    evaluate, fit_coordinate_model, grid_select, persistence_error, CoordinateModel, EpochError, GridResult, GridSpec,
    NetConfig, NodePredictor, DEFAULT_MARGIN,
};
use crate::seed;

/// Seed component name of a node's Random Waypoint trace.
pub fn trace_component(node_id: &str) -> String {
    format!("rwm/{node_id}")
}

/// Random Waypoint trace of `node_id` under root seed `root`, sampled from
/// t = 0.
pub fn rwm_node_series(
    rwm: &RwmParams,
    root: u64,
    node_id: &str,
    interval: f64,
    count: usize,
) -> Result<LocationSeries> {
    let params = RwmParams {
        seed: seed::derive(root, &trace_component(node_id)),
        ..*rwm
    };
    sample_trace(&generate_rwm_trace(&params)?, node_id, interval, 0.0, count)
}

/// Settings for the single-node evaluation: one Random Waypoint trace,
/// sampled regularly, with x and y each trained on the first `split`
/// samples and evaluated on the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PaperEvalConfig {
    pub rwm: RwmParams,
    pub sample_interval: f64,
    pub samples: usize,
    pub split: usize,
    pub net: NetConfig,
    pub margin: f64,
    /// Root seed; the trace and both nets derive their seeds from it.
    pub seed: u64,
}

impl Default for PaperEvalConfig {
    fn default() -> Self {
        PaperEvalConfig {
            rwm: RwmParams::default(),
            sample_interval: 10.0,
            samples: 400,
            split: 200,
            net: NetConfig::default(),
            margin: DEFAULT_MARGIN,
            seed: 0,
        }
    }
}

impl PaperEvalConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.rwm.validate()?;
        self.net.validate()?;
        let need = self.net.n_input + self.net.horizon;
        if self.split < need || self.samples < self.split + need {
            return Err(param(format!(
                "split {} of {} samples leaves a part shorter than n_input + horizon = {need}",
                self.split, self.samples
            )));
        }
        let last = (self.samples - 1) as f64 * self.sample_interval;
        if last > self.rwm.duration {
            return Err(param(format!(
                "{} samples at {} s need a trace of at least {last} s",
                self.samples, self.sample_interval
            )));
        }
        Ok(())
    }

    /// The sampled trace this configuration evaluates on.
    pub fn series(&self) -> Result<LocationSeries> {
        rwm_node_series(&self.rwm, self.seed, "n0", self.sample_interval, self.samples)
    }
}

/// Results for one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordEval {
    pub coord: Coord,
    pub model: CoordinateModel,
    pub curve: Vec<EpochError>,
    pub e_train: f64,
    pub e_gener: f64,
    /// Persistence error over the test-part windows.
    pub persistence_gener: f64,
    /// `preds[i][k]` is the (k+1)-step prediction for sample `i`, made from
    /// the `n_input` samples ending at `i − k − 1`; `None` where that window
    /// would reach outside the part (train or test) containing it.
    pub preds: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaperEvalRun {
    pub config: PaperEvalConfig,
    pub series: LocationSeries,
    pub x: CoordEval,
    pub y: CoordEval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordSummary {
    pub e_train: f64,
    pub e_gener: f64,
    pub persistence_gener: f64,
    pub first_epoch_train: f64,
    pub final_epoch_train: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperEvalSummary {
    pub seed: u64,
    pub x: CoordSummary,
    pub y: CoordSummary,
}

impl PaperEvalSummary {
    pub fn e_gener(&self) -> f64 {
        self.x.e_gener + self.y.e_gener
    }

    pub fn persistence_gener(&self) -> f64 {
        self.x.persistence_gener + self.y.persistence_gener
    }
}

impl CoordEval {
    fn summary(&self) -> CoordSummary {
        CoordSummary {
            e_train: self.e_train,
            e_gener: self.e_gener,
            persistence_gener: self.persistence_gener,
            first_epoch_train: self.curve.first().map_or(f64::NAN, |e| e.train),
            final_epoch_train: self.curve.last().map_or(f64::NAN, |e| e.train),
        }
    }
}

impl PaperEvalRun {
    pub fn summary(&self) -> PaperEvalSummary {
        PaperEvalSummary {
            seed: self.config.seed,
            x: self.x.summary(),
            y: self.y.summary(),
        }
    }

    /// Epoch curve with x and y errors summed.
    pub fn combined_curve(&self) -> Vec<EpochError> {
        self.x
            .curve
            .iter()
            .zip(&self.y.curve)
            .map(|(a, b)| EpochError {
                epoch: a.epoch,
                train: a.train + b.train,
                gener: a.gener.zip(b.gener).map(|(g, h)| g + h),
            })
            .collect()
    }

    fn part(&self, i: usize) -> &'static str {
        if i < self.config.split {
            "train"
        } else {
            "test"
        }
    }
}

fn eval_coord(cfg: &PaperEvalConfig, coord: Coord, values: &[f64]) -> Result<CoordEval> {
    let net_cfg = cfg.net.with_seed(seed::derive(cfg.seed, &format!("net/{coord}")));
    let (mut model, curve) = fit_coordinate_model(values, cfg.split, net_cfg, cfg.margin)?;
    model.coord = Some(coord);
    let scaled = model.scaler.scale_series(values);
    let (e_train, e_gener) = evaluate(&model.net, &scaled, cfg.split)?;
    let (ne, h) = (net_cfg.n_input, net_cfg.horizon);
    let persistence_gener = persistence_error(&scaled[cfg.split..], ne, h)?;

    let mut preds = vec![vec![None; h]; values.len()];
    for (part_start, part_end) in [(0, cfg.split), (cfg.split, values.len())] {
        for w in part_start..=part_end.saturating_sub(ne + 1) {
            let out = model.net.predict_multi_step(&scaled[w..w + ne], h)?.outputs();
            for (k, s) in out.into_iter().enumerate() {
                let i = w + ne + k;
                if i < part_end {
                    preds[i][k] = Some(model.scaler.unscale(s));
                }
            }
        }
    }
    Ok(CoordEval {
        coord,
        model,
        curve,
        e_train,
        e_gener,
        persistence_gener,
        preds,
    })
}

/// Runs the evaluation in memory.
pub fn run_paper_eval(cfg: &PaperEvalConfig) -> Result<PaperEvalRun> {
    cfg.validate()?;
    let series = cfg.series()?;
    let x = eval_coord(cfg, Coord::X, &series.x)?;
    let y = eval_coord(cfg, Coord::Y, &series.y)?;
    Ok(PaperEvalRun {
        config: *cfg,
        series,
        x,
        y,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut wr = csv::Writer::from_path(path)?;
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(&r)?;
    }
    wr.flush()?;
    Ok(())
}

fn write_coord_pred(run: &PaperEvalRun, c: &CoordEval, path: &Path) -> Result<()> {
    let h = run.config.net.horizon;
    let mut header: Vec<String> = ["time", "part", "actual"].map(String::from).to_vec();
    header.extend((1..=h).map(|k| format!("pred_{k}")));
    let actual = run.series.coord(c.coord).expect("x and y always present");
    write_csv(
        path,
        &header,
        (0..run.series.len()).map(|i| {
            let mut row = vec![
                run.series.time(i).to_string(),
                run.part(i).to_string(),
                actual[i].to_string(),
            ];
            row.extend(c.preds[i].iter().map(|p| fmt_opt(*p)));
            row
        }),
    )
}

/// Writes `x_pred.csv`, `y_pred.csv`, `trajectory.csv`, `errors.csv`,
/// `x_errors.csv`, `y_errors.csv`, `summary.json` and both models into
/// `dir`.
pub fn write_paper_eval(run: &PaperEvalRun, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_coord_pred(run, &run.x, &dir.join("x_pred.csv"))?;
    write_coord_pred(run, &run.y, &dir.join("y_pred.csv"))?;
    let header = ["time", "part", "x", "y", "x_pred", "y_pred"].map(String::from);
    write_csv(
        &dir.join("trajectory.csv"),
        &header,
        (0..run.series.len()).map(|i| {
            vec![
                run.series.time(i).to_string(),
                run.part(i).to_string(),
                run.series.x[i].to_string(),
                run.series.y[i].to_string(),
                fmt_opt(run.x.preds[i][0]),
                fmt_opt(run.y.preds[i][0]),
            ]
        }),
    )?;
    crate::io::write_error_curve(fs::File::create(dir.join("errors.csv"))?, &run.combined_curve())?;
    crate::io::write_error_curve(fs::File::create(dir.join("x_errors.csv"))?, &run.x.curve)?;
    crate::io::write_error_curve(fs::File::create(dir.join("y_errors.csv"))?, &run.y.curve)?;
    let mut f = fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &run.summary())?;
    f.write_all(b"\n")?;
    run.x.model.save(&dir.join("model_x.json"))?;
    run.y.model.save(&dir.join("model_y.json"))?;
    Ok(())
}

/// Runs the evaluation and writes its outputs.
pub fn paper_eval(cfg: &PaperEvalConfig, dir: &Path) -> Result<PaperEvalSummary> {
    let run = run_paper_eval(cfg)?;
    write_paper_eval(&run, dir)?;
    Ok(run.summary())
}

/// The evaluation repeated for each seed.
pub fn multi_seed_eval(cfg: &PaperEvalConfig, seeds: &[u64], execution: Execution) -> Result<Vec<PaperEvalSummary>> {
    execution
        .map(seeds, |&s| run_paper_eval(&cfg.with_seed(s)).map(|r| r.summary()))
        .into_iter()
        .collect()
}

/// Settings for the structure-selection grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridExperimentConfig {
    pub rwm: RwmParams,
    /// Coordinate series: x and y of `ceil(n_series / 2)` independent nodes.
    pub n_series: usize,
    pub sample_interval: f64,
    pub samples: usize,
    pub split: usize,
    pub n_input_min: usize,
    pub n_input_max: usize,
    pub n_hidden_min: usize,
    pub n_hidden_max: usize,
    /// Template for every trained net.
    pub net: NetConfig,
    pub margin: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for GridExperimentConfig {
    fn default() -> Self {
        GridExperimentConfig {
            rwm: RwmParams::default(),
            n_series: 10,
            sample_interval: 10.0,
            samples: 400,
            split: 200,
            n_input_min: 4,
            n_input_max: 12,
            n_hidden_min: 3,
            n_hidden_max: 8,
            net: NetConfig::default(),
            margin: DEFAULT_MARGIN,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl GridExperimentConfig {
    pub fn series(&self) -> Result<Vec<Vec<f64>>> {
        let nodes = self.n_series.div_ceil(2);
        let mut out = Vec::with_capacity(self.n_series);
        for n in 0..nodes {
            let rwm = RwmParams {
                seed: seed::derive(self.seed, &format!("grid-trace/{n}")),
                ..self.rwm
            };
            let s = sample_trace(
                &generate_rwm_trace(&rwm)?,
                &format!("n{n}"),
                self.sample_interval,
                0.0,
                self.samples,
            )?;
            out.push(s.x);
            out.push(s.y);
        }
        out.truncate(self.n_series);
        Ok(out)
    }
}

pub fn run_grid(cfg: &GridExperimentConfig) -> Result<GridResult> {
    let series = cfg.series()?;
    let spec = GridSpec {
        base: cfg.net.with_seed(seed::derive(cfg.seed, "grid")),
        split: cfg.split,
        margin: cfg.margin,
        execution: cfg.execution,
    };
    grid_select(
        &series,
        cfg.n_input_min..=cfg.n_input_max,
        cfg.n_hidden_min..=cfg.n_hidden_max,
        &spec,
    )
}

/// `n_input,n_hidden,mean_gener,selected,gener_0,..`: one row per
/// combination, the chosen one marked `1`.
pub fn write_grid_table<W: Write>(w: W, result: &GridResult) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let n = result.table.first().map_or(0, |c| c.per_series.len());
    let mut header: Vec<String> = ["n_input", "n_hidden", "mean_gener", "selected"]
        .map(String::from)
        .to_vec();
    header.extend((0..n).map(|s| format!("gener_{s}")));
    wr.write_record(&header)?;
    for c in &result.table {
        let selected = c.n_input == result.best_n_input && c.n_hidden == result.best_n_hidden;
        let mut row = vec![
            c.n_input.to_string(),
            c.n_hidden.to_string(),
            c.mean_gener.to_string(),
            u8::from(selected).to_string(),
        ];
        row.extend(c.per_series.iter().map(f64::to_string));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Trains one predictor per scenario node on its samples up to and
/// including `until`.
pub fn train_scenario_predictors(
    scenario: &Scenario,
    until: usize,
    config: NetConfig,
    margin: f64,
    execution: Execution,
) -> Result<BTreeMap<String, NodePredictor>> {
    let nodes: Vec<(&String, &LocationSeries)> = scenario.series.iter().collect();
    execution
        .map(&nodes, |(id, s)| {
            NodePredictor::fit(s, until, config, margin).map(|p| ((*id).clone(), p))
        })
        .into_iter()
        .collect()
}

/// Net settings used for the routing scenarios.
pub fn scenario_net_config(seed: u64) -> NetConfig {
    NetConfig::default()
        .with_learning_rate(0.5)
        .with_epochs(500)
        .with_seed(seed::derive(seed, "scenario"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PaperEvalConfig {
        let mut cfg = PaperEvalConfig {
            samples: 60,
            split: 30,
            ..Default::default()
        };
        cfg.rwm.duration = 600.0;
        cfg.net = NetConfig::new(4, 3, 3).with_epochs(20).with_learning_rate(0.5);
        cfg
    }

    #[test]
    fn predictions_stay_inside_their_part() {
        let run = run_paper_eval(&small()).unwrap();
        let h = 3;
        for (i, p) in run.x.preds.iter().enumerate() {
            for k in 0..h {
                let first_history = i as isize - k as isize - 4;
                let in_train = i < 30 && first_history >= 0;
                let in_test = i >= 30 && first_history >= 30;
                assert_eq!(p[k].is_some(), in_train || in_test, "sample {i} step {}", k + 1);
            }
        }
    }

    #[test]
    fn combined_curve_sums_coordinates() {
        let run = run_paper_eval(&small()).unwrap();
        let c = run.combined_curve();
        assert_eq!(c.len(), 20);
        assert_eq!(c[3].train, run.x.curve[3].train + run.y.curve[3].train);
    }

    #[test]
    fn too_short_configs_are_rejected() {
        let mut cfg = small();
        cfg.split = 5;
        assert!(run_paper_eval(&cfg).is_err());
        let mut cfg = small();
        cfg.samples = 1000;
        assert!(run_paper_eval(&cfg).is_err());
    }

    #[test]
    fn grid_series_are_distinct() {
        let cfg = GridExperimentConfig {
            n_series: 3,
            ..Default::default()
        };
        let s = cfg.series().unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|v| v.len() == 400));
        assert_ne!(s[0], s[2]);
    }
}
