//! Link and path expiration times from predicted node positions.
//!
//! Two nodes' predicted positions give a series of future distances. A
//! polynomial through those distances models the separation over the
//! prediction window; the link expires when that polynomial first rises
//! through the transmission range. A path expires with its weakest link.

use std::cmp::Ordering;
use std::fmt;

use log::warn;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{param, Error, Result};
use crate::mobility::{distance, LocationSeries, Position};
use crate::predictor::NodePredictor;

/// Seconds until expiry, or the sentinel for "survives the whole window".
#[derive(Debug, Clone, Copy)]
pub enum ExpirationTime {
    Finite(f64),
    BeyondHorizon,
}

impl ExpirationTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExpirationTime::Finite(v) => Some(v),
            ExpirationTime::BeyondHorizon => None,
        }
    }

    pub fn is_beyond_horizon(self) -> bool {
        matches!(self, ExpirationTime::BeyondHorizon)
    }
}

impl Ord for ExpirationTime {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExpirationTime::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.total_cmp(b),
            (Finite(_), BeyondHorizon) => Ordering::Less,
            (BeyondHorizon, Finite(_)) => Ordering::Greater,
            (BeyondHorizon, BeyondHorizon) => Ordering::Equal,
        }
    }
}

impl PartialOrd for ExpirationTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for ExpirationTime {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExpirationTime {}

pub const BEYOND_HORIZON: &str = "beyond-horizon";

impl fmt::Display for ExpirationTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpirationTime::Finite(v) => write!(f, "{v}"),
            ExpirationTime::BeyondHorizon => f.write_str(BEYOND_HORIZON),
        }
    }
}

impl Serialize for ExpirationTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExpirationTime::Finite(v) => s.serialize_f64(*v),
            ExpirationTime::BeyondHorizon => s.serialize_str(BEYOND_HORIZON),
        }
    }
}

impl<'de> Deserialize<'de> for ExpirationTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ExpirationTime::Finite(v)),
            Raw::Text(t) if t == BEYOND_HORIZON => Ok(ExpirationTime::BeyondHorizon),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad expiration time '{t}'"))),
        }
    }
}

/// What the polynomial is fitted to.
///
/// `Distance` fits the distances themselves. `Squared` fits their
/// squares and compares against the squared range; the crossing time is the
/// same, and for constant-velocity relative motion the squared distance is
/// exactly quadratic, so three or more points reproduce it without error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitQuantity {
    #[default]
    Distance,
    Squared,
}

/// Predicted positions at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub times: Vec<f64>,
    pub positions: Vec<Position>,
}

impl Track {
    pub fn new(times: Vec<f64>, positions: Vec<Position>) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(param("track times and positions differ in length"));
        }
        Ok(Track { times, positions })
    }
}

/// Separation of two nodes at future times `times`, seen from `base_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSeries {
    pub base_time: f64,
    /// Separation at `base_time`, when known.
    pub base_distance: Option<f64>,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub quantity: FitQuantity,
}

impl DistanceSeries {
    pub fn new(base_time: f64, times: Vec<f64>, distances: Vec<f64>) -> Result<Self> {
        let s = DistanceSeries {
            base_time,
            base_distance: None,
            times,
            distances,
            quantity: FitQuantity::Distance,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_base_distance(mut self, d: f64) -> Self {
        self.base_distance = Some(d);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.distances.len() {
            return Err(param("distance series times and values differ in length"));
        }
        if self.times.first().is_some_and(|&t| t <= self.base_time) {
            return Err(param("predicted times must follow the base time"));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(param("predicted times must be strictly increasing"));
        }
        if self.distances.iter().chain(&self.base_distance).any(|d| !(*d >= 0.0)) {
            return Err(param("distances must be non-negative"));
        }
        Ok(())
    }

    /// The same series with every distance squared.
    pub fn squared(&self) -> Self {
        if self.quantity == FitQuantity::Squared {
            return self.clone();
        }
        DistanceSeries {
            base_time: self.base_time,
            base_distance: self.base_distance.map(|d| d * d),
            times: self.times.clone(),
            distances: self.distances.iter().map(|d| d * d).collect(),
            quantity: FitQuantity::Squared,
        }
    }
}

/// Euclidean distance between two tracks at each shared time.
pub fn distances(base_time: f64, a: &Track, b: &Track) -> Result<DistanceSeries> {
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| x != y) {
        return Err(param("tracks are not aligned in time"));
    }
    let d = a
        .positions
        .iter()
        .zip(&b.positions)
        .map(|(p, q)| distance(p, q))
        .collect();
    DistanceSeries::new(base_time, a.times.clone(), d)
}

/// Interpolating polynomial through a [`DistanceSeries`].
///
/// Coefficients are in descending powers of the shifted time
/// `s = t − time_origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistancePolynomial {
    pub coefficients: Vec<f64>,
    pub time_origin: f64,
    pub base_time: f64,
    pub base_value: Option<f64>,
    /// Last fitted time; the polynomial is never evaluated beyond it.
    pub last_time: f64,
    /// Smallest gap between consecutive times, base time included.
    pub min_spacing: f64,
    pub quantity: FitQuantity,
}

impl DistancePolynomial {
    /// Value at absolute time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let s = t - self.time_origin;
        self.coefficients.iter().fold(0.0, |acc, &a| acc * s + a)
    }

    /// Largest absolute residual of the interpolation system on `series`.
    pub fn residual(&self, series: &DistanceSeries) -> f64 {
        series
            .times
            .iter()
            .zip(&series.distances)
            .map(|(&t, &d)| (self.eval(t) - d).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty column");
        if a[pivot][col] == 0.0 || !a[pivot][col].is_finite() {
            return Err(Error::Numeric("singular interpolation system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "interpolation system produced non-finite coefficients".into(),
        ));
    }
    Ok(x)
}

/// Fits the degree-(N−1) polynomial through all N points of `series`.
///
/// Times are shifted so the first point sits at zero before the
/// Vandermonde system is solved.
pub fn fit_polynomial(series: &DistanceSeries) -> Result<DistancePolynomial> {
    let n = series.times.len();
    if n < 2 {
        return Err(param("at least two points are needed for a fit"));
    }
    if series.times.len() != series.distances.len() {
        return Err(param("distance series times and values differ in length"));
    }
    if n > 6 {
        warn!(
            "fitting a degree-{} polynomial; high-degree interpolation is fragile",
            n - 1
        );
    }
    let origin = series.times[0];
    let shifted: Vec<f64> = series.times.iter().map(|t| t - origin).collect();
    let mut sorted = shifted.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Numeric("duplicate fit times make the system singular".into()));
    }
    let matrix = shifted
        .iter()
        .map(|&s| (0..n).map(|i| s.powi((n - 1 - i) as i32)).collect())
        .collect();
    let coefficients = solve_dense(matrix, series.distances.clone())?;

    let min_spacing = std::iter::once(series.base_time)
        .chain(series.times.iter().copied())
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    Ok(DistancePolynomial {
        coefficients,
        time_origin: origin,
        base_time: series.base_time,
        base_value: series.base_distance,
        last_time: series.times[n - 1],
        min_spacing,
        quantity: series.quantity,
    })
}

/// Time after `poly.base_time` at which the modelled separation first rises
/// through `range`.
///
/// The window is `[base_time, min(horizon_end, last fitted time)]`; the
/// polynomial is never extrapolated past it. Returns 0 if the link is
/// already broken at the base time, and [`ExpirationTime::BeyondHorizon`]
/// if no upward crossing occurs in the window. Crossings are located by a
/// scan at a hundredth of the sample spacing, then bisection.
pub fn link_expiration_time(poly: &DistancePolynomial, range: f64, horizon_end: f64) -> Result<ExpirationTime> {
    if !(range > 0.0) {
        return Err(param("range must be > 0"));
    }
    if !(horizon_end > poly.base_time) {
        return Err(param("horizon end must follow the base time"));
    }
    let threshold = match poly.quantity {
        FitQuantity::Distance => range,
        FitQuantity::Squared => range * range,
    };
    let base = poly.base_time;
    if poly.base_value.is_some_and(|d| d > threshold) || poly.eval(base) > threshold {
        return Ok(ExpirationTime::Finite(0.0));
    }
    let end = horizon_end.min(poly.last_time);
    let step = poly.min_spacing / 100.0;
    let n_steps = ((end - base) / step).ceil().max(1.0) as usize;
    let mut prev = base;
    for i in 1..=n_steps {
        let t = if i == n_steps { end } else { base + i as f64 * step };
        if poly.eval(t) > threshold {
            let (mut lo, mut hi) = (prev, t);
            while hi - lo > 1e-9 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if poly.eval(mid) > threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(ExpirationTime::Finite(0.5 * (lo + hi) - base));
        }
        prev = t;
    }
    Ok(ExpirationTime::BeyondHorizon)
}

/// Expiration time of a path: the minimum over its links, with
/// [`ExpirationTime::BeyondHorizon`] ranking above every finite value.
pub fn path_expiration_time(link_lets: &[ExpirationTime]) -> Result<ExpirationTime> {
    link_lets
        .iter()
        .copied()
        .min()
        .ok_or_else(|| param("a path needs at least one link"))
}

/// Link expiration time from current and predicted positions of two nodes.
///
/// `current_*` are the positions at `base_time`; the tracks hold the
/// predictions at later times.
pub fn let_from_tracks(
    base_time: f64,
    current_a: Position,
    current_b: Position,
    predicted_a: &Track,
    predicted_b: &Track,
    range: f64,
    quantity: FitQuantity,
) -> Result<ExpirationTime> {
    let series = distances(base_time, predicted_a, predicted_b)?.with_base_distance(distance(&current_a, &current_b));
    let series = match quantity {
        FitQuantity::Distance => series,
        FitQuantity::Squared => series.squared(),
    };
    let end = *series.times.last().ok_or_else(|| param("no predicted positions"))?;
    if series.times.len() == 1 {
        // A single prediction cannot be fitted; treat separation as linear
        // between now and then.
        let mut two = series.clone();
        two.times.insert(0, base_time);
        two.distances.insert(0, series.base_distance.unwrap_or(0.0));
        let mut poly = fit_polynomial(&two)?;
        poly.min_spacing = end - base_time;
        return link_expiration_time(&poly, range, end);
    }
    link_expiration_time(&fit_polynomial(&series)?, range, end)
}

/// Predicted link expiration time between two nodes at sample `index`.
///
/// Each node forecasts `steps` positions with its own predictor; the
/// predictions feed [`let_from_tracks`].
#[allow(clippy::too_many_arguments)]
pub fn predicted_let(
    predictor_a: &NodePredictor,
    series_a: &LocationSeries,
    predictor_b: &NodePredictor,
    series_b: &LocationSeries,
    index: usize,
    range: f64,
    steps: usize,
    quantity: FitQuantity,
) -> Result<ExpirationTime> {
    if series_a.sample_interval != series_b.sample_interval || series_a.start_time != series_b.start_time {
        return Err(param("node series are sampled on different grids"));
    }
    let times: Vec<f64> = (1..=steps).map(|k| series_a.time(index + k)).collect();
    let pa = Track::new(times.clone(), predictor_a.forecast(series_a, index, steps)?)?;
    let pb = Track::new(times, predictor_b.forecast(series_b, index, steps)?)?;
    let_from_tracks(
        series_a.time(index),
        series_a.position(index),
        series_b.position(index),
        &pa,
        &pb,
        range,
        quantity,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExpirationTime::{BeyondHorizon, Finite};

    fn static_track(times: &[f64], p: Position) -> Track {
        Track::new(times.to_vec(), vec![p; times.len()]).unwrap()
    }

    #[test]
    fn distances_examples() {
        let t = [1.0, 2.0, 3.0];
        let a = static_track(&t, [0.0; 3]);
        assert_eq!(distances(0.0, &a, &a).unwrap().distances, vec![0.0; 3]);
        let b = static_track(&t, [3.0, 4.0, 0.0]);
        assert_eq!(distances(0.0, &a, &b).unwrap().distances, vec![5.0; 3]);
        let moving = Track::new(t.to_vec(), t.iter().map(|&s| [200.0 + 10.0 * s, 0.0, 0.0]).collect()).unwrap();
        assert_eq!(
            distances(0.0, &a, &moving).unwrap().distances,
            vec![210.0, 220.0, 230.0]
        );
        let shifted = static_track(&[1.0, 2.0, 4.0], [0.0; 3]);
        assert!(distances(0.0, &a, &shifted).is_err());
    }

    #[test]
    fn two_point_line() {
        let s = DistanceSeries::new(-10.0, vec![0.0, 10.0], vec![100.0, 120.0]).unwrap();
        let p = fit_polynomial(&s).unwrap();
        assert!((p.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((p.coefficients[1] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_give_zero_curvature() {
        let s = DistanceSeries::new(0.0, vec![1.0, 2.0, 3.0], vec![210.0, 220.0, 230.0]).unwrap();
        let p = fit_polynomial(&s).unwrap();
        assert_eq!(p.time_origin, 1.0);
        assert!(p.coefficients[0].abs() < 1e-9);
        assert!((p.coefficients[1] - 10.0).abs() < 1e-9);
        assert!((p.coefficients[2] - 210.0).abs() < 1e-9);
        assert!((p.eval(0.0) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_is_interpolated_exactly() {
        let s = DistanceSeries::new(0.0, vec![1.0, 2.0, 3.0], vec![1.0, 4.0, 9.0]).unwrap();
        let p = fit_polynomial(&s).unwrap();
        assert!((p.eval(2.5) - 6.25).abs() < 1e-12);
    }

    #[test]
    fn duplicate_times_are_numeric_errors() {
        let s = DistanceSeries {
            base_time: 0.0,
            base_distance: None,
            times: vec![1.0, 1.0],
            distances: vec![3.0, 4.0],
            quantity: FitQuantity::Distance,
        };
        assert!(matches!(fit_polynomial(&s), Err(Error::Numeric(_))));
    }

    #[test]
    fn linear_separation_crosses_at_five_seconds() {
        let s = DistanceSeries::new(0.0, vec![1.0, 2.0, 3.0, 6.0], vec![210.0, 220.0, 230.0, 260.0]).unwrap();
        let p = fit_polynomial(&s).unwrap();
        let t = link_expiration_time(&p, 250.0, 6.0).unwrap().finite().unwrap();
        assert!((t - 5.0).abs() < 1e-6, "{t}");
    }

    #[test]
    fn constant_separation_never_breaks() {
        let s = DistanceSeries::new(0.0, vec![10.0, 20.0, 30.0], vec![100.0; 3]).unwrap();
        assert_eq!(
            link_expiration_time(&fit_polynomial(&s).unwrap(), 250.0, 30.0).unwrap(),
            BeyondHorizon
        );
    }

    #[test]
    fn already_broken_link_expires_now() {
        let s = DistanceSeries::new(0.0, vec![10.0, 20.0], vec![300.0; 2]).unwrap();
        assert_eq!(
            link_expiration_time(&fit_polynomial(&s).unwrap(), 250.0, 20.0).unwrap(),
            Finite(0.0)
        );
        let s = DistanceSeries::new(0.0, vec![10.0, 20.0], vec![100.0; 2])
            .unwrap()
            .with_base_distance(260.0);
        assert_eq!(
            link_expiration_time(&fit_polynomial(&s).unwrap(), 250.0, 20.0).unwrap(),
            Finite(0.0)
        );
    }

    #[test]
    fn no_extrapolation_past_the_window() {
        // Rising line that would cross at t = 40, after the last point.
        let s = DistanceSeries::new(0.0, vec![10.0, 20.0, 30.0], vec![160.0, 190.0, 220.0]).unwrap();
        let p = fit_polynomial(&s).unwrap();
        assert_eq!(link_expiration_time(&p, 250.0, 100.0).unwrap(), BeyondHorizon);
    }

    #[test]
    fn pet_examples() {
        assert_eq!(
            path_expiration_time(&[Finite(30.0), Finite(10.0), Finite(25.0)]).unwrap(),
            Finite(10.0)
        );
        assert_eq!(
            path_expiration_time(&[BeyondHorizon, Finite(12.0)]).unwrap(),
            Finite(12.0)
        );
        assert_eq!(path_expiration_time(&[Finite(7.5)]).unwrap(), Finite(7.5));
        assert_eq!(
            path_expiration_time(&[BeyondHorizon, BeyondHorizon]).unwrap(),
            BeyondHorizon
        );
        assert!(path_expiration_time(&[]).is_err());
    }

    #[test]
    fn expiration_time_serde() {
        let v = vec![Finite(1.5), BeyondHorizon];
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, "[1.5,\"beyond-horizon\"]");
        let back: Vec<ExpirationTime> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn tracks_are_symmetric() {
        let t = [5.0, 10.0, 15.0];
        let a = Track::new(t.to_vec(), t.iter().map(|&s| [s * 3.0, 1.0, 0.0]).collect()).unwrap();
        let b = Track::new(t.to_vec(), t.iter().map(|&s| [-s * 9.0, 40.0, 0.0]).collect()).unwrap();
        for q in [FitQuantity::Distance, FitQuantity::Squared] {
            let ab = let_from_tracks(0.0, [0.0, 1.0, 0.0], [0.0, 40.0, 0.0], &a, &b, 100.0, q).unwrap();
            let ba = let_from_tracks(0.0, [0.0, 40.0, 0.0], [0.0, 1.0, 0.0], &b, &a, 100.0, q).unwrap();
            assert_eq!(ab, ba);
            assert!(ab.finite().is_some());
        }
    }

    #[test]
    fn single_step_prediction_uses_linear_separation() {
        let a = static_track(&[10.0], [0.0; 3]);
        let b = static_track(&[10.0], [300.0, 0.0, 0.0]);
        let t = let_from_tracks(0.0, [0.0; 3], [200.0, 0.0, 0.0], &a, &b, 250.0, FitQuantity::Distance).unwrap();
        assert!((t.finite().unwrap() - 5.0).abs() < 1e-6);
    }
}
