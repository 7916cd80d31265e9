//! Recurrent multi-step predictor for one scalar coordinate series.
//!
//! The network has `n_input` inputs forming a tapped delay line, one hidden
//! layer and a single sigmoid output. Inputs and hidden layer each carry a
//! bias unit. Multi-step prediction runs closed-loop: every output is
//! shifted into the input window to produce the next one. Weights are
//! trained with back propagation through time over the whole horizon.

mod bptt;
mod grid;
mod model;
mod net;
mod scaler;
mod train;

pub use bptt::{bptt_gradient, finite_diff_gradient, loss, Gradient};
pub use grid::{grid_select, GridCell, GridResult, GridSpec};
pub use model::{fit_coordinate_model, CoordinateModel, NodePredictor, DEFAULT_MARGIN, MODEL_VERSION};
pub use net::{sigmoid, sigmoid_prime_from_output, ForwardTrace, NetConfig, RecurrentNet, StepTrace};
pub use scaler::{Scaler, CLAMP_HIGH, CLAMP_LOW};
pub use train::{evaluate, persistence_error, series_error, train, train_monitored, windows, EpochError};
