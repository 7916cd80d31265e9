//! Back propagation through time over a closed-loop prediction horizon.
//!
//! The error over one window is `J = Σ_k ½ (ŝ(t+k) − r(t+k))²`. Because every
//! output is fed back into the input window, `ŝ(t+k)` depends on each weight
//! both directly and through the earlier predictions it consumes:
//!
//! ```text
//! dŝ_k/dω = ∂ŝ_k/∂ω + Σ_{j=1..n} ∂ŝ_k/∂ŝ_{k−j} · dŝ_{k−j}/dω
//! ∂ŝ_k/∂ŝ_{k−j} = f'(I_s) Σ_c ω_cs f'(I_c) ω_{e(j),c}
//! ```
//!
//! where `e(j)` is the input slot holding `ŝ_{k−j}`. The total derivatives
//! are accumulated forward in `k`, one parameter vector per step.

use serde::{Deserialize, Serialize};

use super::net::{sigmoid_prime_from_output, ForwardTrace, RecurrentNet};
use crate::error::{param, Result};

/// Gradient of `J` with the same layout as the network weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub w_in_hidden: Vec<f64>,
    pub w_hidden_out: Vec<f64>,
}

impl Gradient {
    pub fn zeros_like(net: &RecurrentNet) -> Self {
        Gradient {
            w_in_hidden: vec![0.0; net.w_in_hidden.len()],
            w_hidden_out: vec![0.0; net.w_hidden_out.len()],
        }
    }

    fn from_flat(net: &RecurrentNet, flat: Vec<f64>) -> Self {
        let split = net.w_in_hidden.len();
        let mut w_in_hidden = flat;
        let w_hidden_out = w_in_hidden.split_off(split);
        Gradient {
            w_in_hidden,
            w_hidden_out,
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.w_in_hidden.iter().chain(&self.w_hidden_out).copied()
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|v| v == 0.0)
    }

    /// Largest component-wise discrepancy against `other`.
    ///
    /// Components where both magnitudes are below `abs_floor` are compared
    /// absolutely; all others relative to the larger magnitude.
    pub fn max_discrepancy(&self, other: &Gradient, abs_floor: f64) -> f64 {
        self.values()
            .zip(other.values())
            .map(|(a, b)| {
                let scale = a.abs().max(b.abs());
                if scale < abs_floor {
                    (a - b).abs()
                } else {
                    (a - b).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }
}

fn check_window(net: &RecurrentNet, history: &[f64], targets: &[f64]) -> Result<()> {
    if history.len() != net.config.n_input {
        return Err(param(format!(
            "history has {} values, network expects {}",
            history.len(),
            net.config.n_input
        )));
    }
    if targets.is_empty() {
        return Err(param("targets must hold at least one value"));
    }
    Ok(())
}

/// `J` for one window, via a full closed-loop prediction of
/// `targets.len()` steps.
pub fn loss(net: &RecurrentNet, history: &[f64], targets: &[f64]) -> Result<f64> {
    check_window(net, history, targets)?;
    let trace = net.predict_multi_step(history, targets.len())?;
    Ok(window_loss(&trace, targets))
}

pub(crate) fn window_loss(trace: &ForwardTrace, targets: &[f64]) -> f64 {
    let mut j = 0.0;
    for (s, r) in trace.steps.iter().zip(targets) {
        let e = s.output - r;
        j += 0.5 * e * e;
    }
    j
}

/// Reusable buffers for repeated gradient evaluations of one network shape.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    /// Total derivative dŝ_k/dω for each step so far, flattened.
    dsdw: Vec<f64>,
    pub(crate) grad: Vec<f64>,
}

/// Accumulates the window gradient into `scratch.grad` (overwritten) and
/// returns `J`. `trace` must be the forward trace of this window.
pub(crate) fn accumulate(net: &RecurrentNet, trace: &ForwardTrace, targets: &[f64], scratch: &mut Scratch) -> f64 {
    let cfg = &net.config;
    let n_in = cfg.n_input;
    let n_h = cfg.n_hidden;
    let p_ih = cfg.n_in_hidden();
    let p = cfg.n_params();
    let horizon = targets.len();

    scratch.grad.clear();
    scratch.grad.resize(p, 0.0);
    scratch.dsdw.clear();
    scratch.dsdw.resize(p * horizon, 0.0);

    let mut j_total = 0.0;
    for (k, (st, &r)) in trace.steps.iter().zip(targets).enumerate() {
        let fs = sigmoid_prime_from_output(st.output);
        let (done, rest) = scratch.dsdw.split_at_mut(k * p);
        let d = &mut rest[..p];

        // Direct dependence on the weights at this step.
        for c in 0..n_h {
            let oc = st.hidden_out[c];
            let common = fs * net.w_hidden_out[c] * sigmoid_prime_from_output(oc);
            for e in 0..n_in {
                d[e * n_h + c] = common * st.input[e];
            }
            d[n_in * n_h + c] = common * 1.0;
            d[p_ih + c] = fs * oc;
        }
        d[p_ih + n_h] = fs * 1.0;

        // Indirect dependence through fed-back predictions ŝ_{k−j}.
        let depth = k.min(cfg.n_feedback).min(n_in);
        for jj in 1..=depth {
            let slot = n_in - jj;
            let mut sens = 0.0;
            for c in 0..n_h {
                let oc = st.hidden_out[c];
                sens += net.w_hidden_out[c] * sigmoid_prime_from_output(oc) * net.w_ec(slot, c);
            }
            let sens = fs * sens;
            let prev = &done[(k - jj) * p..(k - jj + 1) * p];
            for (di, pi) in d.iter_mut().zip(prev) {
                *di += sens * pi;
            }
        }

        let err = st.output - r;
        j_total += 0.5 * err * err;
        for (g, di) in scratch.grad.iter_mut().zip(d.iter()) {
            *g += err * di;
        }
    }
    j_total
}

/// Gradient of `J` with respect to every weight, and `J` itself.
pub fn bptt_gradient(net: &RecurrentNet, history: &[f64], targets: &[f64]) -> Result<(Gradient, f64)> {
    check_window(net, history, targets)?;
    let trace = net.predict_multi_step(history, targets.len())?;
    let mut scratch = Scratch::default();
    let j = accumulate(net, &trace, targets, &mut scratch);
    Ok((Gradient::from_flat(net, scratch.grad), j))
}

/// Central finite-difference approximation of the gradient of `J`.
///
/// Independent of [`bptt_gradient`]: every component perturbs one weight and
/// re-runs the full closed-loop prediction.
pub fn finite_diff_gradient(net: &RecurrentNet, history: &[f64], targets: &[f64], step: f64) -> Result<Gradient> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(param("finite-difference step must be > 0"));
    }
    check_window(net, history, targets)?;
    let mut probe = net.clone();
    let mut flat = Vec::with_capacity(net.config.n_params());
    for i in 0..net.config.n_params() {
        let w = *probe.param_mut(i);
        *probe.param_mut(i) = w + step;
        let up = loss(&probe, history, targets)?;
        *probe.param_mut(i) = w - step;
        let down = loss(&probe, history, targets)?;
        *probe.param_mut(i) = w;
        flat.push((up - down) / (2.0 * step));
    }
    Ok(Gradient::from_flat(net, flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::net::NetConfig;
    use crate::seed;
    use rand::Rng;

    fn random_case(seed_value: u64, n_in: usize, n_h: usize, horizon: usize) -> (RecurrentNet, Vec<f64>, Vec<f64>) {
        let cfg = NetConfig::new(n_in, n_h, horizon).with_seed(seed_value);
        let net = RecurrentNet::new(cfg).unwrap();
        let mut rng = seed::rng(seed_value ^ 0xabcd);
        let history = (0..n_in).map(|_| rng.gen_range(0.1..0.9)).collect();
        let targets = (0..horizon).map(|_| rng.gen_range(0.1..0.9)).collect();
        (net, history, targets)
    }

    #[test]
    fn small_net_matches_finite_differences() {
        let (net, h, r) = random_case(1, 3, 2, 3);
        assert_eq!(net.config.n_feedback, 2);
        let (g, _) = bptt_gradient(&net, &h, &r).unwrap();
        let fd = finite_diff_gradient(&net, &h, &r, 1e-6).unwrap();
        assert!(g.max_discrepancy(&fd, 1e-8) < 1e-5);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let (net, h, _) = random_case(2, 4, 3, 3);
        let r = net.predict_multi_step(&h, 3).unwrap().outputs();
        let (g, j) = bptt_gradient(&net, &h, &r).unwrap();
        assert_eq!(j, 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn one_step_gradient_is_plain_backprop() {
        let (net, h, r) = random_case(3, 4, 3, 1);
        let (g, _) = bptt_gradient(&net, &h, &r).unwrap();
        let st = net.forward_one(&h).unwrap();
        let err = st.output - r[0];
        let fs = st.output * (1.0 - st.output);
        let n_h = net.config.n_hidden;
        for c in 0..n_h {
            let oc = st.hidden_out[c];
            assert_eq!(g.w_hidden_out[c], err * (fs * oc));
            let fc = oc * (1.0 - oc);
            for e in 0..=net.config.n_input {
                let o_e = if e < net.config.n_input { h[e] } else { 1.0 };
                assert_eq!(g.w_in_hidden[e * n_h + c], err * (fs * net.w_hidden_out[c] * fc * o_e));
            }
        }
        assert_eq!(g.w_hidden_out[n_h], err * (fs * 1.0));
    }

    #[test]
    fn zero_weight_net_matches_oracle_absolutely() {
        let net = RecurrentNet::zeros(NetConfig::new(3, 2, 3)).unwrap();
        let h = [0.2, 0.5, 0.7];
        let r = [0.9, 0.1, 0.6];
        let (g, _) = bptt_gradient(&net, &h, &r).unwrap();
        let fd = finite_diff_gradient(&net, &h, &r, 1e-6).unwrap();
        let worst = g
            .values()
            .zip(fd.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn perturbed_loss_is_deterministic() {
        let (mut net, h, r) = random_case(4, 3, 2, 3);
        *net.param_mut(2) += 1e-6;
        assert_eq!(loss(&net, &h, &r).unwrap(), loss(&net, &h, &r).unwrap());
    }

    #[test]
    fn oracle_agreement_degrades_with_coarse_steps() {
        let (net, h, r) = random_case(5, 4, 3, 3);
        let (g, _) = bptt_gradient(&net, &h, &r).unwrap();
        let fine = g.max_discrepancy(&finite_diff_gradient(&net, &h, &r, 1e-5).unwrap(), 1e-8);
        let coarse = g.max_discrepancy(&finite_diff_gradient(&net, &h, &r, 1e-2).unwrap(), 1e-8);
        assert!(fine < 1e-5);
        assert!(coarse > fine);
        assert!(coarse < 1e-1);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let (net, h, r) = random_case(6, 3, 2, 3);
        assert!(bptt_gradient(&net, &h[..2], &r).is_err());
        assert!(bptt_gradient(&net, &h, &[]).is_err());
        assert!(finite_diff_gradient(&net, &h, &r, 0.0).is_err());
    }

    #[test]
    fn truncated_feedback_drops_recurrent_terms() {
        let (mut net, h, r) = random_case(7, 4, 3, 4);
        let full = bptt_gradient(&net, &h, &r).unwrap().0;
        net.config.n_feedback = 1;
        let truncated = bptt_gradient(&net, &h, &r).unwrap().0;
        assert_ne!(full, truncated);
    }
}
