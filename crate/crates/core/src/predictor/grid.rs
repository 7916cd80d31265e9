//! Structure selection over (n_input, n_hidden) by generalisation error.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::model::fit_coordinate_model;
use super::net::NetConfig;
use super::scaler::Scaler;
use super::train::series_error;
use crate::error::{param, Result};
use crate::par::Execution;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Template for every trained net; `n_input`, `n_hidden`, `n_feedback`
    /// and `seed` are overridden per job.
    pub base: NetConfig,
    /// Points per series used for training; the rest is held out.
    pub split: usize,
    pub margin: f64,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n_input: usize,
    pub n_hidden: usize,
    /// Generalisation error per series, in series order.
    pub per_series: Vec<f64>,
    pub mean_gener: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_n_input: usize,
    pub best_n_hidden: usize,
    /// One cell per combination, n_input major.
    pub table: Vec<GridCell>,
    /// The (n_input, n_hidden) minimising each series' own error.
    pub per_series_best: Vec<(usize, usize)>,
}

/// Index of the smallest value; the first wins ties.
fn argmin(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Trains one net per (series, n_input, n_hidden) and picks the combination
/// with the lowest mean generalisation error.
///
/// Ties resolve towards smaller `n_input`, then smaller `n_hidden`.
pub fn grid_select(
    series_set: &[Vec<f64>],
    n_input_range: RangeInclusive<usize>,
    n_hidden_range: RangeInclusive<usize>,
    spec: &GridSpec,
) -> Result<GridResult> {
    if series_set.is_empty() {
        return Err(param("grid selection needs at least one series"));
    }
    if n_input_range.is_empty()
        || n_hidden_range.is_empty()
        || *n_input_range.start() == 0
        || *n_hidden_range.start() == 0
    {
        return Err(param("grid ranges must be non-empty and start at 1 or more"));
    }
    let combos: Vec<(usize, usize)> = n_input_range
        .flat_map(|ne| n_hidden_range.clone().map(move |nc| (ne, nc)))
        .collect();
    let jobs: Vec<(usize, usize, usize)> = combos
        .iter()
        .flat_map(|&(ne, nc)| (0..series_set.len()).map(move |s| (s, ne, nc)))
        .collect();

    let errors: Vec<Result<f64>> = spec.execution.map(&jobs, |&(s, ne, nc)| {
        let values = &series_set[s];
        let mut cfg = spec.base;
        cfg.n_input = ne;
        cfg.n_hidden = nc;
        cfg.n_feedback = NetConfig::default_feedback(ne, cfg.horizon);
        cfg.seed = seed::derive(spec.base.seed, &format!("grid/{s}/{ne}/{nc}"));
        let (model, _) = fit_coordinate_model(&values[..spec.split.min(values.len())], spec.split, cfg, spec.margin)?;
        let scaler: &Scaler = &model.scaler;
        let test = scaler.scale_series(&values[spec.split..]);
        series_error(&model.net, &test)
    });
    let errors = errors.into_iter().collect::<Result<Vec<f64>>>()?;

    let n_series = series_set.len();
    let table: Vec<GridCell> = combos
        .iter()
        .zip(errors.chunks(n_series))
        .map(|(&(ne, nc), errs)| GridCell {
            n_input: ne,
            n_hidden: nc,
            per_series: errs.to_vec(),
            mean_gener: errs.iter().sum::<f64>() / n_series as f64,
        })
        .collect();

    let best = &table[argmin(table.iter().map(|c| c.mean_gener)).expect("non-empty table")];
    let per_series_best = (0..n_series)
        .map(|s| {
            let i = argmin(table.iter().map(|c| c.per_series[s])).expect("non-empty table");
            (table[i].n_input, table[i].n_hidden)
        })
        .collect();
    Ok(GridResult {
        best_n_input: best.n_input,
        best_n_hidden: best.n_hidden,
        table,
        per_series_best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec {
            base: NetConfig::new(2, 2, 3).with_epochs(5).with_learning_rate(0.5),
            split: 30,
            margin: 0.1,
            execution: Execution::Sequential,
        }
    }

    fn wave(phase: f64) -> Vec<f64> {
        (0..60)
            .map(|i| 500.0 + 300.0 * (0.2 * i as f64 + phase).sin())
            .collect()
    }

    #[test]
    fn single_combination_is_returned() {
        let r = grid_select(&[wave(0.0)], 4..=4, 3..=3, &spec()).unwrap();
        assert_eq!((r.best_n_input, r.best_n_hidden), (4, 3));
        assert_eq!(r.table.len(), 1);
    }

    #[test]
    fn selection_is_table_argmin() {
        let r = grid_select(&[wave(0.0), wave(1.0)], 2..=4, 1..=3, &spec()).unwrap();
        assert_eq!(r.table.len(), 9);
        let min = r.table.iter().map(|c| c.mean_gener).fold(f64::INFINITY, f64::min);
        let chosen = r
            .table
            .iter()
            .find(|c| c.n_input == r.best_n_input && c.n_hidden == r.best_n_hidden)
            .unwrap();
        assert_eq!(chosen.mean_gener, min);
        assert_eq!(r.per_series_best.len(), 2);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let set = [wave(0.0), wave(2.0)];
        let a = grid_select(&set, 2..=3, 1..=2, &spec()).unwrap();
        let b = grid_select(
            &set,
            2..=3,
            1..=2,
            &GridSpec {
                execution: Execution::Parallel,
                ..spec()
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ties_prefer_smaller_sizes() {
        assert_eq!(argmin([3.0, 1.0, 1.0, 2.0].into_iter()), Some(1));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(grid_select(&[], 2..=3, 1..=2, &spec()).is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 3..=2;
        assert!(grid_select(&[wave(0.0)], empty, 1..=2, &spec()).is_err());
    }
}
