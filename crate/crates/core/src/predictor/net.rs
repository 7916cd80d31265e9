//! Network definition and the closed-loop forward pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::seed;

/// Logistic sigmoid, evaluated without overflow for any finite input.
///
/// The result is kept strictly inside (0, 1): far in the tails, where the
/// exact value rounds to 0 or 1, it is pinned to the nearest representable
/// interior value.
pub fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Derivative of the sigmoid expressed through its output `y = f(x)`.
#[inline]
pub fn sigmoid_prime_from_output(y: f64) -> f64 {
    y * (1.0 - y)
}

/// Size and training hyper-parameters for one scalar-series predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Input neurons: length of the tapped delay line.
    pub n_input: usize,
    pub n_hidden: usize,
    /// How many fed-back outputs the gradient chains through. Values below
    /// `min(horizon - 1, n_input)` truncate the recurrent terms.
    pub n_feedback: usize,
    /// Prediction steps per window.
    pub horizon: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::new(8, 5, 3)
    }
}

impl NetConfig {
    /// A config with the default feedback depth, ε = 0.05, 500 epochs and
    /// seed 0.
    pub fn new(n_input: usize, n_hidden: usize, horizon: usize) -> Self {
        NetConfig {
            n_input,
            n_hidden,
            n_feedback: Self::default_feedback(n_input, horizon),
            horizon,
            learning_rate: 0.05,
            epochs: 500,
            seed: 0,
        }
    }

    /// `min(horizon - 1, n_input)`, floored at one.
    pub fn default_feedback(n_input: usize, horizon: usize) -> usize {
        horizon.saturating_sub(1).min(n_input).max(1)
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_input == 0 || self.n_hidden == 0 || self.horizon == 0 {
            return Err(param("n_input, n_hidden and horizon must all be >= 1"));
        }
        if self.n_feedback == 0 || self.n_feedback > self.n_input {
            return Err(param(format!(
                "n_feedback {} must lie in [1, n_input = {}]",
                self.n_feedback, self.n_input
            )));
        }
        // Zero is accepted: it freezes the weights.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(param("learning rate must be finite and non-negative"));
        }
        Ok(())
    }

    /// Weights between input (plus bias) and hidden layer.
    pub fn n_in_hidden(&self) -> usize {
        (self.n_input + 1) * self.n_hidden
    }

    pub fn n_params(&self) -> usize {
        self.n_in_hidden() + self.n_hidden + 1
    }
}

/// Three-layer network with a single sigmoid output.
///
/// `w_in_hidden` is row-major with one row per input neuron and the bias row
/// last: the weight from input `e` to hidden `c` sits at `e * n_hidden + c`.
/// `w_hidden_out` holds one weight per hidden neuron followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentNet {
    pub config: NetConfig,
    pub w_in_hidden: Vec<f64>,
    pub w_hidden_out: Vec<f64>,
}

/// Activations recorded for one prediction step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub input: Vec<f64>,
    pub hidden_in: Vec<f64>,
    pub hidden_out: Vec<f64>,
    pub output_in: f64,
    pub output: f64,
}

/// All steps of one closed-loop prediction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardTrace {
    pub steps: Vec<StepTrace>,
}

impl ForwardTrace {
    pub fn outputs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.output).collect()
    }

    /// The input window the next step would consume.
    pub fn next_input(&self) -> Option<Vec<f64>> {
        let last = self.steps.last()?;
        let mut w = last.input[1..].to_vec();
        w.push(last.output);
        Some(w)
    }
}

impl RecurrentNet {
    /// Random weights, uniform in [-0.5, 0.5], from `config.seed`.
    pub fn new(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(config.seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-0.5..=0.5)).collect() };
        let w_in_hidden = draw(config.n_in_hidden());
        let w_hidden_out = draw(config.n_hidden + 1);
        Ok(RecurrentNet {
            config,
            w_in_hidden,
            w_hidden_out,
        })
    }

    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        Ok(RecurrentNet {
            config,
            w_in_hidden: vec![0.0; config.n_in_hidden()],
            w_hidden_out: vec![0.0; config.n_hidden + 1],
        })
    }

    pub fn from_weights(config: NetConfig, w_in_hidden: Vec<f64>, w_hidden_out: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let net = RecurrentNet {
            config,
            w_in_hidden,
            w_hidden_out,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.w_in_hidden.len() != self.config.n_in_hidden() || self.w_hidden_out.len() != self.config.n_hidden + 1 {
            return Err(param("weight shapes do not match the network config"));
        }
        if !self.params().all(f64::is_finite) {
            return Err(param("network weights must be finite"));
        }
        Ok(())
    }

    /// Weight from input `e` (`e == n_input` is the bias) to hidden `c`.
    #[inline]
    pub fn w_ec(&self, e: usize, c: usize) -> f64 {
        self.w_in_hidden[e * self.config.n_hidden + c]
    }

    /// All weights, input-to-hidden first.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.w_in_hidden.iter().chain(&self.w_hidden_out).copied()
    }

    pub(crate) fn param_mut(&mut self, index: usize) -> &mut f64 {
        let split = self.w_in_hidden.len();
        if index < split {
            &mut self.w_in_hidden[index]
        } else {
            &mut self.w_hidden_out[index - split]
        }
    }

    /// One forward pass. `input` must hold `n_input` values.
    pub fn forward_one(&self, input: &[f64]) -> Result<StepTrace> {
        if input.len() != self.config.n_input {
            return Err(param(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.config.n_input
            )));
        }
        Ok(self.step(input))
    }

    pub(crate) fn step(&self, input: &[f64]) -> StepTrace {
        let n_in = self.config.n_input;
        let n_h = self.config.n_hidden;
        let mut hidden_in = Vec::with_capacity(n_h);
        let mut hidden_out = Vec::with_capacity(n_h);
        for c in 0..n_h {
            let mut acc = self.w_ec(n_in, c);
            for (e, &o) in input.iter().enumerate() {
                acc += self.w_ec(e, c) * o;
            }
            hidden_in.push(acc);
            hidden_out.push(sigmoid(acc));
        }
        let mut output_in = self.w_hidden_out[n_h];
        for (w, o) in self.w_hidden_out.iter().zip(&hidden_out) {
            output_in += w * o;
        }
        StepTrace {
            input: input.to_vec(),
            hidden_in,
            hidden_out,
            output_in,
            output: sigmoid(output_in),
        }
    }

    /// Closed-loop prediction of `horizon` steps from the last `n_input`
    /// observations.
    ///
    /// Each step shifts the input window left by one and appends the
    /// previous step's output.
    pub fn predict_multi_step(&self, history: &[f64], horizon: usize) -> Result<ForwardTrace> {
        if horizon == 0 {
            return Err(param("horizon must be >= 1"));
        }
        if history.len() != self.config.n_input {
            return Err(param(format!(
                "history has {} values, network expects {}",
                history.len(),
                self.config.n_input
            )));
        }
        Ok(self.run_from(history.to_vec(), horizon, ForwardTrace::default()))
    }

    /// Extends a closed-loop prediction by `steps` more steps.
    pub fn continue_prediction(&self, trace: &ForwardTrace, steps: usize) -> Result<ForwardTrace> {
        let window = trace
            .next_input()
            .ok_or_else(|| param("cannot continue an empty forward trace"))?;
        Ok(self.run_from(window, steps, trace.clone()))
    }

    fn run_from(&self, mut window: Vec<f64>, steps: usize, mut trace: ForwardTrace) -> ForwardTrace {
        trace.steps.reserve(steps);
        for _ in 0..steps {
            let s = self.step(&window);
            window.remove(0);
            window.push(s.output);
            trace.steps.push(s);
        }
        trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_one_half() {
        let net = RecurrentNet::zeros(NetConfig::new(3, 4, 3)).unwrap();
        let s = net.forward_one(&[0.3, -2.0, 9.0]).unwrap();
        assert!(s.hidden_out.iter().all(|&o| o == 0.5));
        assert_eq!(s.output, 0.5);
        let t = net.predict_multi_step(&[0.1, 0.2, 0.3], 3).unwrap();
        assert_eq!(t.outputs(), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn sigmoid_derivative_at_zero() {
        assert_eq!(sigmoid_prime_from_output(sigmoid(0.0)), 0.25);
    }

    #[test]
    fn two_sigmoid_composition() {
        // One hidden unit fed by a single input with weight 1; the output
        // sees the hidden unit with weight 1. Biases are zero.
        let cfg = NetConfig::new(1, 1, 1);
        let net = RecurrentNet::from_weights(cfg, vec![1.0, 0.0], vec![1.0, 0.0]).unwrap();
        let out = net.forward_one(&[0.0]).unwrap().output;
        let expected = 1.0 / (1.0 + (-0.5f64).exp());
        assert_eq!(out, expected);
        assert!((out - 0.62246).abs() < 1e-5);
    }

    #[test]
    fn single_step_prediction_equals_forward_one() {
        let net = RecurrentNet::new(NetConfig::new(4, 3, 1).with_seed(11)).unwrap();
        let h = [0.2, 0.4, 0.1, 0.7];
        let t = net.predict_multi_step(&h, 1).unwrap();
        assert_eq!(t.steps[0], net.forward_one(&h).unwrap());
    }

    #[test]
    fn sigmoid_stays_inside_unit_interval() {
        for x in [-1e300, -800.0, -40.0, 0.0, 40.0, 800.0, 1e300] {
            let y = sigmoid(x);
            assert!(y > 0.0 && y < 1.0, "f({x}) = {y}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = NetConfig::new(3, 2, 3);
        assert_eq!(c.n_feedback, 2);
        assert_eq!(NetConfig::new(8, 5, 1).n_feedback, 1);
        c.n_feedback = 4;
        assert!(c.validate().is_err());
        assert!(NetConfig::new(0, 2, 3).validate().is_err());
        assert!(RecurrentNet::from_weights(NetConfig::new(2, 2, 1), vec![0.0; 5], vec![0.0; 3]).is_err());
    }
}
