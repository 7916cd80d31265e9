use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Scaled values outside (0, 1) are clamped into this band.
pub const CLAMP_LOW: f64 = 0.001;
pub const CLAMP_HIGH: f64 = 0.999;

/// Affine map from metres into the sigmoid's output range.
///
/// `scaled = margin + (value − offset) · gain`. The training window's
/// minimum maps to `margin` and its maximum to `1 − margin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub offset: f64,
    pub gain: f64,
    pub margin: f64,
}

impl Scaler {
    /// Fits the map on `values` (the training window).
    ///
    /// A constant window maps to 0.5, with the gain chosen as if the window
    /// spanned `max(|value|, 1)` metres.
    pub fn fit(values: &[f64], margin: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(param("cannot fit a scaler on an empty series"));
        }
        if !(0.0..0.5).contains(&margin) {
            return Err(param(format!("margin {margin} must lie in [0, 0.5)")));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(param("series contains non-finite values"));
        }
        let span = hi - lo;
        if span > 0.0 {
            Ok(Scaler {
                offset: lo,
                gain: (1.0 - 2.0 * margin) / span,
                margin,
            })
        } else {
            let gain = (1.0 - 2.0 * margin) / lo.abs().max(1.0);
            Ok(Scaler {
                offset: lo - (0.5 - margin) / gain,
                gain,
                margin,
            })
        }
    }

    pub fn scale(&self, value: f64) -> f64 {
        self.margin + (value - self.offset) * self.gain
    }

    pub fn unscale(&self, scaled: f64) -> f64 {
        (scaled - self.margin) / self.gain + self.offset
    }

    /// Scales `values`, clamping anything outside (0, 1) into
    /// [`CLAMP_LOW`, `CLAMP_HIGH`] with a single warning.
    pub fn scale_series(&self, values: &[f64]) -> Vec<f64> {
        let mut clamped = 0usize;
        let out = values
            .iter()
            .map(|&v| {
                let s = self.scale(v);
                if s <= 0.0 || s >= 1.0 {
                    clamped += 1;
                    s.clamp(CLAMP_LOW, CLAMP_HIGH)
                } else {
                    s
                }
            })
            .collect();
        if clamped > 0 {
            warn!("{clamped} scaled value(s) fell outside (0, 1) and were clamped");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn endpoints_map_to_margins() {
        let s = Scaler::fit(&[0.0, 100.0], 0.1).unwrap();
        assert!((s.scale(0.0) - 0.1).abs() < 1e-15);
        assert!((s.scale(100.0) - 0.9).abs() < 1e-15);
        assert!((s.scale(50.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_series_maps_to_half() {
        let s = Scaler::fit(&[7.0, 7.0, 7.0], 0.1).unwrap();
        assert!(s.gain > 0.0);
        assert!((s.scale(7.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = seed::rng(99);
        let train: Vec<f64> = (0..200).map(|_| rng.gen_range(120.0..880.0)).collect();
        let s = Scaler::fit(&train, 0.1).unwrap();
        for _ in 0..1000 {
            let x = rng.gen_range(1.0..1000.0);
            let back = s.unscale(s.scale(x));
            assert!(((back - x) / x).abs() < 1e-12, "{x} -> {back}");
        }
    }

    #[test]
    fn out_of_range_values_are_clamped() {
        let s = Scaler::fit(&[0.0, 100.0], 0.1).unwrap();
        let v = s.scale_series(&[-1000.0, 50.0, 1000.0]);
        assert_eq!(v[0], CLAMP_LOW);
        assert_eq!(v[2], CLAMP_HIGH);
        assert!(Scaler::fit(&[], 0.1).is_err());
        assert!(Scaler::fit(&[1.0], 0.5).is_err());
    }
}
