//! Trained per-coordinate models and their on-disk form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{NetConfig, RecurrentNet};
use super::scaler::Scaler;
use super::train::{train_monitored, EpochError};
use crate::error::{param, Error, Result};
use crate::mobility::{Coord, LocationSeries, Position};
use crate::seed;

pub const MODEL_VERSION: &str = "1";

/// Default scaling margin: training extremes map to 0.1 and 0.9.
pub const DEFAULT_MARGIN: f64 = 0.1;

/// A network plus the scaler of the series it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateModel {
    pub node_id: Option<String>,
    pub coord: Option<Coord>,
    pub net: RecurrentNet,
    pub scaler: Scaler,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coord: Option<Coord>,
    config: NetConfig,
    scaler: Scaler,
    w_in_hidden: Vec<f64>,
    w_hidden_out: Vec<f64>,
}

impl CoordinateModel {
    /// Predicts `steps` values in metres following `history` (metres; only
    /// the last `n_input` values are used).
    pub fn forecast(&self, history: &[f64], steps: usize) -> Result<Vec<f64>> {
        let n = self.net.config.n_input;
        if history.len() < n {
            return Err(param(format!("need {n} history values, got {}", history.len())));
        }
        let scaled = self.scaler.scale_series(&history[history.len() - n..]);
        let trace = self.net.predict_multi_step(&scaled, steps)?;
        Ok(trace.outputs().into_iter().map(|s| self.scaler.unscale(s)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION.to_string(),
            node_id: self.node_id.clone(),
            coord: self.coord,
            config: self.net.config,
            scaler: self.scaler,
            w_in_hidden: self.net.w_in_hidden.clone(),
            w_hidden_out: self.net.w_hidden_out.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version '{}'", file.version)));
        }
        let net = RecurrentNet::from_weights(file.config, file.w_in_hidden, file.w_hidden_out)?;
        Ok(CoordinateModel {
            node_id: file.node_id,
            coord: file.coord,
            net,
            scaler: file.scaler,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Trains one coordinate series: the scaler is fitted on `values[..split]`,
/// the net trained on that part, and the rest monitored as held-out data
/// when it is long enough.
pub fn fit_coordinate_model(
    values: &[f64],
    split: usize,
    config: NetConfig,
    margin: f64,
) -> Result<(CoordinateModel, Vec<EpochError>)> {
    if split == 0 || split > values.len() {
        return Err(param(format!("split {split} outside 1..={}", values.len())));
    }
    let scaler = Scaler::fit(&values[..split], margin)?;
    let scaled = scaler.scale_series(values);
    let (train_part, test_part) = scaled.split_at(split);
    let test = (test_part.len() >= config.n_input + config.horizon).then_some(test_part);
    let (net, curve) = train_monitored(RecurrentNet::new(config)?, train_part, test)?;
    Ok((
        CoordinateModel {
            node_id: None,
            coord: None,
            net,
            scaler,
        },
        curve,
    ))
}

/// Per-coordinate models for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePredictor {
    pub x: CoordinateModel,
    pub y: CoordinateModel,
    pub z: Option<CoordinateModel>,
}

impl NodePredictor {
    /// Trains x, y (and z when present) on `series[..=until]`.
    ///
    /// Each coordinate's seed derives from `config.seed`, the node id and
    /// the coordinate name.
    pub fn fit(series: &LocationSeries, until: usize, config: NetConfig, margin: f64) -> Result<Self> {
        let split = until + 1;
        let fit = |coord: Coord, values: &[f64]| -> Result<CoordinateModel> {
            let cfg = config.with_seed(seed::derive(config.seed, &format!("node/{}/{coord}", series.node_id)));
            let (mut m, _) = fit_coordinate_model(&values[..split.min(values.len())], split, cfg, margin)?;
            m.node_id = Some(series.node_id.clone());
            m.coord = Some(coord);
            Ok(m)
        };
        Ok(NodePredictor {
            x: fit(Coord::X, &series.x)?,
            y: fit(Coord::Y, &series.y)?,
            z: series.z.as_deref().map(|z| fit(Coord::Z, z)).transpose()?,
        })
    }

    /// Assembles a predictor from loose coordinate models, matched by their
    /// `coord` tags.
    pub fn from_models(models: Vec<CoordinateModel>) -> Result<Self> {
        let mut x = None;
        let mut y = None;
        let mut z = None;
        for m in models {
            let slot = match m.coord {
                Some(Coord::X) => &mut x,
                Some(Coord::Y) => &mut y,
                Some(Coord::Z) => &mut z,
                None => return Err(param("model file lacks a coordinate tag")),
            };
            if slot.replace(m).is_some() {
                return Err(param("duplicate model for one coordinate"));
            }
        }
        match (x, y) {
            (Some(x), Some(y)) => Ok(NodePredictor { x, y, z }),
            _ => Err(param("a node predictor needs both x and y models")),
        }
    }

    /// Minimum history length needed by every coordinate model.
    pub fn history_len(&self) -> usize {
        [Some(&self.x), Some(&self.y), self.z.as_ref()]
            .into_iter()
            .flatten()
            .map(|m| m.net.config.n_input)
            .max()
            .unwrap_or(0)
    }

    /// Predicted positions at the `steps` sample times after `index`.
    pub fn forecast(&self, series: &LocationSeries, index: usize, steps: usize) -> Result<Vec<Position>> {
        if index >= series.len() {
            return Err(param(format!("sample index {index} beyond series end")));
        }
        let upto = index + 1;
        let need = self.history_len();
        if upto < need {
            return Err(param(format!(
                "node '{}' has {upto} samples at index {index}, predictor needs {need}",
                series.node_id
            )));
        }
        let xs = self.x.forecast(&series.x[..upto], steps)?;
        let ys = self.y.forecast(&series.y[..upto], steps)?;
        let zs = match (&self.z, &series.z) {
            (Some(m), Some(z)) => Some(m.forecast(&z[..upto], steps)?),
            _ => None,
        };
        Ok((0..steps)
            .map(|k| [xs[k], ys[k], zs.as_ref().map_or(0.0, |z| z[k])])
            .collect())
    }
}
