//! Gradient-descent training and the windowed error measure.
//!
//! Training and evaluation both slide a window over a scaled series: the
//! first `n_input` values are the history, the next `horizon` the targets.
//! The error of a set of windows is the sum over windows of each window's
//! `Σ_k ½ (ŝ(t+k) − s(t+k))²`.

use serde::{Deserialize, Serialize};

use super::bptt::{accumulate, window_loss, Scratch};
use super::net::RecurrentNet;
use crate::error::{param, Result};

/// Error totals recorded after one training epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochError {
    pub epoch: usize,
    /// Sum of the window errors seen while updating during this epoch.
    pub train: f64,
    /// Error on the held-out series after this epoch, when one was given.
    pub gener: Option<f64>,
}

/// `(history, targets)` pairs over `series`, in series order.
pub fn windows(series: &[f64], n_input: usize, horizon: usize) -> impl Iterator<Item = (&[f64], &[f64])> {
    let width = n_input + horizon;
    series.windows(width).map(move |w| (&w[..n_input], &w[n_input..]))
}

fn require_length(series: &[f64], net: &RecurrentNet, what: &str) -> Result<()> {
    let need = net.config.n_input + net.config.horizon;
    if series.len() < need {
        return Err(param(format!(
            "{what} has {} points; at least n_input + horizon = {need} are needed",
            series.len()
        )));
    }
    Ok(())
}

/// Trains `net` on a scaled series with per-window gradient steps.
pub fn train(net: RecurrentNet, series: &[f64]) -> Result<(RecurrentNet, Vec<EpochError>)> {
    train_monitored(net, series, None)
}

/// Like [`train`], also recording the held-out error after every epoch.
pub fn train_monitored(
    mut net: RecurrentNet,
    series: &[f64],
    test: Option<&[f64]>,
) -> Result<(RecurrentNet, Vec<EpochError>)> {
    net.validate()?;
    require_length(series, &net, "training series")?;
    if let Some(t) = test {
        require_length(t, &net, "test series")?;
    }
    let cfg = net.config;
    let lr = cfg.learning_rate;
    let mut scratch = Scratch::default();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut total = 0.0;
        for (history, targets) in windows(series, cfg.n_input, cfg.horizon) {
            let trace = net.predict_multi_step(history, cfg.horizon)?;
            total += accumulate(&net, &trace, targets, &mut scratch);
            if lr != 0.0 {
                let split = net.w_in_hidden.len();
                let (g_ih, g_ho) = scratch.grad.split_at(split);
                for (w, g) in net.w_in_hidden.iter_mut().zip(g_ih) {
                    *w -= lr * g;
                }
                for (w, g) in net.w_hidden_out.iter_mut().zip(g_ho) {
                    *w -= lr * g;
                }
            }
        }
        let gener = test.map(|t| series_error(&net, t)).transpose()?;
        curve.push(EpochError {
            epoch,
            train: total,
            gener,
        });
    }
    if !net.params().all(f64::is_finite) {
        return Err(crate::Error::Numeric("training diverged to non-finite weights".into()));
    }
    Ok((net, curve))
}

/// Windowed error of `net` over a whole scaled series.
pub fn series_error(net: &RecurrentNet, series: &[f64]) -> Result<f64> {
    require_length(series, net, "series")?;
    let cfg = &net.config;
    let mut total = 0.0;
    for (history, targets) in windows(series, cfg.n_input, cfg.horizon) {
        let trace = net.predict_multi_step(history, cfg.horizon)?;
        total += window_loss(&trace, targets);
    }
    Ok(total)
}

/// Training and generalisation error with the series split at `split`.
///
/// Windows never straddle the split: test windows take their history from
/// the test part only.
pub fn evaluate(net: &RecurrentNet, series: &[f64], split: usize) -> Result<(f64, f64)> {
    if split > series.len() {
        return Err(param(format!("split {split} exceeds series length {}", series.len())));
    }
    let (train, test) = series.split_at(split);
    Ok((series_error(net, train)?, series_error(net, test)?))
}

/// Error of the persistence forecaster (every step predicts the last
/// observed value) over the same windows the network would see.
pub fn persistence_error(series: &[f64], n_input: usize, horizon: usize) -> Result<f64> {
    if n_input == 0 || horizon == 0 || series.len() < n_input + horizon {
        return Err(param("series too short for the persistence baseline"));
    }
    let mut total = 0.0;
    for (history, targets) in windows(series, n_input, horizon) {
        let last = history[history.len() - 1];
        for r in targets {
            let e = last - r;
            total += 0.5 * e * e;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::net::NetConfig;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.1 + 0.8 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_learning_rate_leaves_weights_unchanged() {
        let cfg = NetConfig::new(4, 3, 3)
            .with_learning_rate(0.0)
            .with_epochs(5)
            .with_seed(2);
        let net = RecurrentNet::new(cfg).unwrap();
        let (trained, curve) = train(net.clone(), &ramp(40)).unwrap();
        assert_eq!(trained, net);
        assert_eq!(curve.len(), 5);
        assert_eq!(curve[0].train, curve[4].train);
    }

    #[test]
    fn ramp_training_converges() {
        // Measured baseline: the final epoch lands below 1% of the first;
        // the committed bound is 10%.
        let cfg = NetConfig::default()
            .with_learning_rate(0.5)
            .with_epochs(300)
            .with_seed(1);
        let (_, curve) = train(RecurrentNet::new(cfg).unwrap(), &ramp(60)).unwrap();
        let first = curve[0].train;
        let last = curve[curve.len() - 1].train;
        assert!(last < 0.1 * first, "first {first}, last {last}");
    }

    #[test]
    fn trained_ramp_is_continued_in_closed_loop() {
        let series = ramp(60);
        let cfg = NetConfig::default()
            .with_learning_rate(0.5)
            .with_epochs(1500)
            .with_seed(4);
        let (net, _) = train(RecurrentNet::new(cfg).unwrap(), &series).unwrap();
        let start = 30;
        let out = net.predict_multi_step(&series[start..start + 8], 3).unwrap().outputs();
        let mse: f64 = out
            .iter()
            .zip(&series[start + 8..start + 11])
            .map(|(p, r)| (p - r) * (p - r))
            .sum::<f64>()
            / 3.0;
        assert!(mse < 1e-3, "mse {mse}");
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = NetConfig::new(5, 3, 3)
            .with_learning_rate(0.3)
            .with_epochs(20)
            .with_seed(8);
        let a = train(RecurrentNet::new(cfg).unwrap(), &ramp(50)).unwrap();
        let b = train(RecurrentNet::new(cfg).unwrap(), &ramp(50)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_short_series_is_rejected() {
        let net = RecurrentNet::new(NetConfig::default()).unwrap();
        assert!(train(net.clone(), &ramp(10)).is_err());
        assert!(train(net.clone(), &ramp(11)).is_ok_and(|(_, c)| c.len() == 500));
        assert!(evaluate(&net, &ramp(30), 25).is_err());
    }

    #[test]
    fn constant_series_error_vanishes() {
        let series = vec![0.5; 60];
        let cfg = NetConfig::default()
            .with_learning_rate(0.5)
            .with_epochs(200)
            .with_seed(3);
        let (net, _) = train(RecurrentNet::new(cfg).unwrap(), &series[..30]).unwrap();
        let (_, gener) = evaluate(&net, &series, 30).unwrap();
        assert!(gener < 1e-4, "{gener}");
    }

    #[test]
    fn untrained_net_has_positive_error() {
        let net = RecurrentNet::new(NetConfig::default().with_seed(5)).unwrap();
        let (tr, ge) = evaluate(&net, &ramp(40), 20).unwrap();
        assert!(tr > 0.0 && ge > 0.0);
    }

    #[test]
    fn persistence_is_exact_on_constants() {
        assert_eq!(persistence_error(&[0.3; 20], 8, 3).unwrap(), 0.0);
        // One window, three targets each 0.1 above the last observation.
        let s = [0.0, 0.0, 0.1, 0.1, 0.1];
        assert!((persistence_error(&s, 2, 3).unwrap() - 0.015).abs() < 1e-15);
    }
}
