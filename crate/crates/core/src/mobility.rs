//! Random Waypoint mobility: trace generation, sampling, and scenarios.
//!
//! A [`ContinuousTrace`] is the exact piecewise-linear ground truth of one
//! node's motion. Sampling it at a fixed interval yields a
//! [`LocationSeries`], which is what predictors consume. Positions are
//! always three-dimensional internally; two-dimensional traces keep `z = 0`
//! and report `has_z() == false`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::seed;

pub type Position = [f64; 3];

pub fn distance(a: &Position, b: &Position) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Rectangular (optionally box-shaped) region nodes move within.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Territory {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<(f64, f64)>,
}

impl Default for Territory {
    fn default() -> Self {
        Territory {
            x_min: 0.0,
            x_max: 1000.0,
            y_min: 0.0,
            y_max: 1000.0,
            z: None,
        }
    }
}

impl Territory {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let t = Territory {
            x_min,
            x_max,
            y_min,
            y_max,
            z: None,
        };
        t.validate()?;
        Ok(t)
    }

    /// `width × height` metres anchored at the origin.
    pub fn rect(width: f64, height: f64) -> Result<Self> {
        Self::new(0.0, width, 0.0, height)
    }

    pub fn with_z(mut self, z_min: f64, z_max: f64) -> Result<Self> {
        self.z = Some((z_min, z_max));
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ordered(self.x_min, self.x_max) || !ordered(self.y_min, self.y_max) {
            return Err(param(format!("degenerate territory {self:?}")));
        }
        if let Some((lo, hi)) = self.z {
            if !ordered(lo, hi) {
                return Err(param(format!("degenerate territory z range {lo}..{hi}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Position) -> bool {
        let (z_lo, z_hi) = self.z.unwrap_or((0.0, 0.0));
        (self.x_min..=self.x_max).contains(&p[0])
            && (self.y_min..=self.y_max).contains(&p[1])
            && (z_lo..=z_hi).contains(&p[2])
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Position {
        let x = self.x_min + (self.x_max - self.x_min) * rng.gen::<f64>();
        let y = self.y_min + (self.y_max - self.y_min) * rng.gen::<f64>();
        let z = match self.z {
            Some((lo, hi)) => lo + (hi - lo) * rng.gen::<f64>(),
            None => 0.0,
        };
        [x, y, z]
    }
}

/// Parameters of one Random Waypoint run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwmParams {
    pub territory: Territory,
    /// Speed interval in m/s.
    pub v_min: f64,
    pub v_max: f64,
    /// Pauses are drawn uniformly from `[0, pause_max]` seconds.
    pub pause_max: f64,
    pub duration: f64,
    pub seed: u64,
}

impl Default for RwmParams {
    fn default() -> Self {
        RwmParams {
            territory: Territory::default(),
            v_min: 0.0,
            v_max: 20.0,
            pause_max: 60.0,
            duration: 4000.0,
            seed: 0,
        }
    }
}

impl RwmParams {
    pub fn validate(&self) -> Result<()> {
        self.territory.validate()?;
        if !(self.v_min >= 0.0 && self.v_min <= self.v_max && self.v_max.is_finite()) {
            return Err(param(format!(
                "speed interval [{}, {}] must satisfy 0 <= v_min <= v_max",
                self.v_min, self.v_max
            )));
        }
        if !(self.pause_max >= 0.0 && self.pause_max.is_finite()) {
            return Err(param(format!("pause_max {} must be >= 0", self.pause_max)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(param(format!("duration {} must be > 0", self.duration)));
        }
        Ok(())
    }
}

/// A point where a node arrives, then holds still for `pause` seconds.
///
/// `leg_speed` is the speed of the leg that ended here (0 for the first
/// waypoint of a trace).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub arrival_time: f64,
    pub position: Position,
    pub leg_speed: f64,
    pub pause: f64,
}

impl Waypoint {
    pub fn departure_time(&self) -> f64 {
        self.arrival_time + self.pause
    }
}

/// One constant-velocity piece of a trace, valid on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub origin: Position,
    pub velocity: Position,
}

impl Segment {
    pub fn position_at(&self, t: f64) -> Position {
        let dt = t - self.start;
        [
            self.origin[0] + self.velocity[0] * dt,
            self.origin[1] + self.velocity[1] * dt,
            self.origin[2] + self.velocity[2] * dt,
        ]
    }
}

/// Exact piecewise-linear trajectory of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousTrace {
    waypoints: Vec<Waypoint>,
    #[serde(default)]
    has_z: bool,
}

impl ContinuousTrace {
    /// Builds a trace from explicit waypoints.
    ///
    /// Each leg's `leg_speed` must agree with the distance and travel time
    /// between consecutive waypoints (relative tolerance 1e-9).
    pub fn from_waypoints(waypoints: Vec<Waypoint>, has_z: bool) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(param("a trace needs at least one waypoint"));
        }
        for w in &waypoints {
            let finite = w.position.iter().all(|v| v.is_finite()) && w.arrival_time.is_finite() && w.pause.is_finite();
            if !finite || w.pause < 0.0 || w.leg_speed < 0.0 {
                return Err(param(format!("invalid waypoint {w:?}")));
            }
            if !has_z && w.position[2] != 0.0 {
                return Err(param("2D trace with non-zero z coordinate"));
            }
        }
        for pair in waypoints.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.arrival_time <= a.arrival_time {
                return Err(param("waypoint arrival times must be strictly increasing"));
            }
            let travel = b.arrival_time - a.departure_time();
            if travel <= 0.0 {
                return Err(param(format!(
                    "waypoint at {} departs after the next arrival",
                    a.arrival_time
                )));
            }
            let expected = distance(&a.position, &b.position) / travel;
            if (expected - b.leg_speed).abs() > 1e-9 * expected.max(1.0) {
                return Err(param(format!(
                    "leg ending at {} has speed {} but covers it at {}",
                    b.arrival_time, b.leg_speed, expected
                )));
            }
        }
        Ok(ContinuousTrace { waypoints, has_z })
    }

    /// A node that sits at `position` over `[start, end]`.
    pub fn stationary(position: Position, start: f64, end: f64) -> Result<Self> {
        if !(end >= start) {
            return Err(param("stationary trace needs end >= start"));
        }
        Self::from_waypoints(
            vec![Waypoint {
                arrival_time: start,
                position,
                leg_speed: 0.0,
                pause: end - start,
            }],
            position[2] != 0.0,
        )
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn has_z(&self) -> bool {
        self.has_z
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints[0].arrival_time
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].departure_time()
    }

    /// Position at time `t`, clamped to the trace's time span.
    pub fn position_at(&self, t: f64) -> Position {
        let t = t.clamp(self.start_time(), self.end_time());
        // Index of the last waypoint that has been reached by `t`.
        let i = self.waypoints.partition_point(|w| w.arrival_time <= t) - 1;
        let w = &self.waypoints[i];
        if t <= w.departure_time() || i + 1 == self.waypoints.len() {
            return w.position;
        }
        let next = &self.waypoints[i + 1];
        let from = w.position;
        let to = next.position;
        let length = distance(&from, &to);
        if length == 0.0 {
            return from;
        }
        let travelled = next.leg_speed * (t - w.departure_time());
        let mut p = [0.0; 3];
        for k in 0..3 {
            let v = from[k] + (to[k] - from[k]) / length * travelled;
            // Rounding must not carry the node past the leg's endpoints.
            p[k] = v.clamp(from[k].min(to[k]), from[k].max(to[k]));
        }
        p
    }

    /// The trace as constant-velocity pieces covering its whole span.
    ///
    /// Pauses appear as zero-velocity segments. Velocities are derived from
    /// waypoint positions and times, so each segment reproduces its end
    /// waypoint exactly up to rounding.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::with_capacity(self.waypoints.len() * 2);
        for (i, w) in self.waypoints.iter().enumerate() {
            if w.pause > 0.0 {
                out.push(Segment {
                    start: w.arrival_time,
                    end: w.departure_time(),
                    origin: w.position,
                    velocity: [0.0; 3],
                });
            }
            if let Some(next) = self.waypoints.get(i + 1) {
                let dt = next.arrival_time - w.departure_time();
                let mut velocity = [0.0; 3];
                for k in 0..3 {
                    velocity[k] = (next.position[k] - w.position[k]) / dt;
                }
                out.push(Segment {
                    start: w.departure_time(),
                    end: next.arrival_time,
                    origin: w.position,
                    velocity,
                });
            }
        }
        if out.is_empty() {
            let w = &self.waypoints[0];
            out.push(Segment {
                start: w.arrival_time,
                end: w.arrival_time,
                origin: w.position,
                velocity: [0.0; 3],
            });
        }
        out
    }
}

/// Generates a Random Waypoint trace over `[0, params.duration]`.
///
/// The node starts at a uniform point of the territory, pauses, then
/// repeatedly travels in a straight line at a uniform speed towards a
/// uniform destination and pauses again. A zero speed draw is redrawn;
/// `v_min == v_max == 0` therefore yields a node that never moves. The final
/// leg or pause is cut at `duration`.
pub fn generate_rwm_trace(params: &RwmParams) -> Result<ContinuousTrace> {
    params.validate()?;
    let mut rng = seed::rng(params.seed);
    let territory = &params.territory;
    let duration = params.duration;

    let mut position = territory.sample(&mut rng);
    if params.v_max == 0.0 {
        return ContinuousTrace::from_waypoints(
            vec![Waypoint {
                arrival_time: 0.0,
                position,
                leg_speed: 0.0,
                pause: duration,
            }],
            territory.z.is_some(),
        );
    }

    let mut waypoints = Vec::new();
    let mut t = 0.0;
    let mut leg_speed = 0.0;
    loop {
        let pause = params.pause_max * rng.gen::<f64>();
        if t + pause >= duration {
            waypoints.push(Waypoint {
                arrival_time: t,
                position,
                leg_speed,
                pause: duration - t,
            });
            break;
        }
        waypoints.push(Waypoint {
            arrival_time: t,
            position,
            leg_speed,
            pause,
        });
        let depart = t + pause;

        let (destination, length) = loop {
            let d = territory.sample(&mut rng);
            let len = distance(&position, &d);
            if len > 0.0 {
                break (d, len);
            }
        };
        let speed = loop {
            let s = params.v_min + (params.v_max - params.v_min) * rng.gen::<f64>();
            if s > 0.0 {
                break s;
            }
        };
        let arrival = depart + length / speed;
        if arrival >= duration {
            let travelled = speed * (duration - depart);
            let mut end = [0.0; 3];
            for k in 0..3 {
                let v = position[k] + (destination[k] - position[k]) / length * travelled;
                end[k] = v.clamp(position[k].min(destination[k]), position[k].max(destination[k]));
            }
            waypoints.push(Waypoint {
                arrival_time: duration,
                position: end,
                leg_speed: speed,
                pause: 0.0,
            });
            break;
        }
        t = arrival;
        position = destination;
        leg_speed = speed;
    }
    Ok(ContinuousTrace {
        waypoints,
        has_z: territory.z.is_some(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coord {
    X,
    Y,
    Z,
}

impl Coord {
    pub fn index(self) -> usize {
        match self {
            Coord::X => 0,
            Coord::Y => 1,
            Coord::Z => 2,
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coord::X => "x",
            Coord::Y => "y",
            Coord::Z => "z",
        })
    }
}

impl FromStr for Coord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Coord::X),
            "y" | "Y" => Ok(Coord::Y),
            "z" | "Z" => Ok(Coord::Z),
            other => Err(param(format!("unknown coordinate '{other}'"))),
        }
    }
}

/// Regularly sampled positions of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationSeries {
    pub node_id: String,
    pub sample_interval: f64,
    pub start_time: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
}

impl LocationSeries {
    pub fn new(
        node_id: impl Into<String>,
        sample_interval: f64,
        start_time: f64,
        x: Vec<f64>,
        y: Vec<f64>,
        z: Option<Vec<f64>>,
    ) -> Result<Self> {
        let s = LocationSeries {
            node_id: node_id.into(),
            sample_interval,
            start_time,
            x,
            y,
            z,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(param("sample interval must be > 0"));
        }
        if self.x.is_empty() || self.x.len() != self.y.len() {
            return Err(param("x and y must be non-empty and of equal length"));
        }
        if let Some(z) = &self.z {
            if z.len() != self.x.len() {
                return Err(param("z must match x and y in length"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start_time + index as f64 * self.sample_interval
    }

    /// Index of the sample taken at `t`, if `t` lies on the sampling grid
    /// (to within a millionth of the interval).
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start_time) / self.sample_interval).round();
        if k < 0.0 || k as usize >= self.len() {
            return None;
        }
        let k = k as usize;
        ((self.time(k) - t).abs() <= 1e-6 * self.sample_interval).then_some(k)
    }

    pub fn position(&self, index: usize) -> Position {
        let z = self.z.as_ref().map_or(0.0, |z| z[index]);
        [self.x[index], self.y[index], z]
    }

    pub fn coord(&self, coord: Coord) -> Option<&[f64]> {
        match coord {
            Coord::X => Some(&self.x),
            Coord::Y => Some(&self.y),
            Coord::Z => self.z.as_deref(),
        }
    }

    /// Coordinates the series actually carries.
    pub fn coords(&self) -> Vec<Coord> {
        let mut c = vec![Coord::X, Coord::Y];
        if self.z.is_some() {
            c.push(Coord::Z);
        }
        c
    }
}

/// Samples `trace` at `start + k·interval` for `k = 0..count`.
pub fn sample_trace(
    trace: &ContinuousTrace,
    node_id: &str,
    interval: f64,
    start: f64,
    count: usize,
) -> Result<LocationSeries> {
    if !(interval > 0.0 && interval.is_finite()) || count == 0 {
        return Err(param("sampling needs interval > 0 and count >= 1"));
    }
    let last = start + (count - 1) as f64 * interval;
    if start < trace.start_time() || last > trace.end_time() {
        return Err(Error::Range(format!(
            "sampling window [{start}, {last}] exceeds trace span [{}, {}]",
            trace.start_time(),
            trace.end_time()
        )));
    }
    let mut x = Vec::with_capacity(count);
    let mut y = Vec::with_capacity(count);
    let mut z = trace.has_z().then(|| Vec::with_capacity(count));
    for k in 0..count {
        let p = trace.position_at(start + k as f64 * interval);
        x.push(p[0]);
        y.push(p[1]);
        if let Some(z) = z.as_mut() {
            z.push(p[2]);
        }
    }
    LocationSeries::new(node_id, interval, start, x, y, z)
}

/// First time in `[from, until]` at which the distance between two traces
/// exceeds `range`, computed exactly on the piecewise-linear geometry.
///
/// Returns `Some(from)` if the nodes are already out of range at `from`, and
/// `None` if they stay within range throughout.
pub fn first_exit_time(a: &ContinuousTrace, b: &ContinuousTrace, range: f64, from: f64, until: f64) -> Option<f64> {
    if distance(&a.position_at(from), &b.position_at(from)) > range {
        return Some(from);
    }
    let mut cuts: Vec<f64> = a
        .waypoints()
        .iter()
        .chain(b.waypoints())
        .flat_map(|w| [w.arrival_time, w.departure_time()])
        .filter(|&t| t > from && t < until)
        .collect();
    cuts.push(from);
    cuts.push(until);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let r2 = range * range;
    for piece in cuts.windows(2) {
        let (t0, t1) = (piece[0], piece[1]);
        let pa = a.position_at(t0);
        let pb = b.position_at(t0);
        let qa = a.position_at(t1);
        let qb = b.position_at(t1);
        let len = t1 - t0;
        let mut rel = [0.0; 3];
        let mut vel = [0.0; 3];
        for k in 0..3 {
            rel[k] = pb[k] - pa[k];
            vel[k] = ((qb[k] - qa[k]) - rel[k]) / len;
        }
        let qa2: f64 = vel.iter().map(|v| v * v).sum();
        let qb1: f64 = rel.iter().zip(&vel).map(|(r, v)| r * v).sum();
        let qc: f64 = rel.iter().map(|r| r * r).sum::<f64>() - r2;
        if qc > 0.0 {
            return Some(t0);
        }
        if qa2 == 0.0 {
            continue;
        }
        // Larger root of qa2·τ² + 2·qb1·τ + qc, with qc <= 0 so it is >= 0.
        let disc = (qb1 * qb1 - qa2 * qc).max(0.0).sqrt();
        let tau = if qb1 >= 0.0 {
            if qb1 + disc == 0.0 {
                0.0
            } else {
                -qc / (qb1 + disc)
            }
        } else {
            (disc - qb1) / qa2
        };
        if tau < len {
            return Some(t0 + tau);
        }
    }
    None
}

/// A named set of node traces with a designated flow and radio range.
///
/// Sampled series are derived from the continuous traces, so a scenario is
/// fully described by its traces and sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub traces: BTreeMap<String, ContinuousTrace>,
    pub series: BTreeMap<String, LocationSeries>,
    pub source: String,
    pub destination: String,
    pub transmission_range: f64,
    /// Time at which the route is first set up.
    pub setup_time: f64,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        traces: BTreeMap<String, ContinuousTrace>,
        source: impl Into<String>,
        destination: impl Into<String>,
        transmission_range: f64,
        sample_interval: f64,
        start_time: f64,
        sample_count: usize,
        setup_time: f64,
    ) -> Result<Self> {
        let source = source.into();
        let destination = destination.into();
        if source == destination {
            return Err(param("scenario source and destination must differ"));
        }
        for id in [&source, &destination] {
            if !traces.contains_key(id) {
                return Err(param(format!("scenario has no node '{id}'")));
            }
        }
        if !(transmission_range > 0.0) {
            return Err(param("transmission range must be > 0"));
        }
        let series = traces
            .iter()
            .map(|(id, tr)| sample_trace(tr, id, sample_interval, start_time, sample_count).map(|s| (id.clone(), s)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Scenario {
            name: name.into(),
            description: description.into(),
            traces,
            series,
            source,
            destination,
            transmission_range,
            setup_time,
        })
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.traces.keys().map(String::as_str)
    }

    fn any_series(&self) -> &LocationSeries {
        self.series.values().next().expect("scenario has nodes")
    }

    pub fn sample_interval(&self) -> f64 {
        self.any_series().sample_interval
    }

    pub fn start_time(&self) -> f64 {
        self.any_series().start_time
    }

    pub fn sample_count(&self) -> usize {
        self.any_series().len()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.any_series().time(index)
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.sample_count() - 1)
    }

    /// Sampled positions of every node at sample `index`, in id order.
    pub fn positions(&self, index: usize) -> Vec<(String, Position)> {
        self.series
            .iter()
            .map(|(id, s)| (id.clone(), s.position(index)))
            .collect()
    }
}

pub const FOUR_NODE_RANGE: f64 = 250.0;
pub const FOUR_NODE_INTERVAL: f64 = 5.0;
pub const FOUR_NODE_START: f64 = -200.0;
pub const FOUR_NODE_SAMPLES: usize = 61;

/// The four-node scenario: A sends to D through either B or C.
///
/// Constants (metres, seconds; route set up at t = 0, history from t = -200):
///
/// - A is static at (0, 0); D is static at (300, 0).
/// - B shuttles along x = 150 between y = -400 and y = 400 at 10 m/s. At
///   t = 0 it is at (150, 160) heading +y, so (A,B) and (B,D) break at
///   exactly t = 4 s, when y = 200.
/// - C drifts towards A at 1 m/s along (-0.8, 0.6), passing (160, -120) at
///   t = 0, and stays within range of both A and D until t = 100.
/// - B and C are 280 m apart at t = 0, so the only two-hop routes are
///   A-B-D and A-C-D.
pub fn build_four_node_scenario() -> Scenario {
    let wp = |t: f64, x: f64, y: f64, speed: f64| Waypoint {
        arrival_time: t,
        position: [x, y, 0.0],
        leg_speed: speed,
        pause: 0.0,
    };
    let end = FOUR_NODE_START + (FOUR_NODE_SAMPLES - 1) as f64 * FOUR_NODE_INTERVAL;
    let mut traces = BTreeMap::new();
    traces.insert(
        "A".to_string(),
        ContinuousTrace::stationary([0.0, 0.0, 0.0], FOUR_NODE_START, end).expect("valid A"),
    );
    traces.insert(
        "B".to_string(),
        ContinuousTrace::from_waypoints(
            vec![
                wp(-200.0, 150.0, -240.0, 0.0),
                wp(-136.0, 150.0, 400.0, 10.0),
                wp(-56.0, 150.0, -400.0, 10.0),
                wp(24.0, 150.0, 400.0, 10.0),
                wp(100.0, 150.0, -360.0, 10.0),
            ],
            false,
        )
        .expect("valid B"),
    );
    traces.insert(
        "C".to_string(),
        ContinuousTrace::from_waypoints(vec![wp(-200.0, 320.0, -240.0, 0.0), wp(100.0, 80.0, -60.0, 1.0)], false)
            .expect("valid C"),
    );
    traces.insert(
        "D".to_string(),
        ContinuousTrace::stationary([300.0, 0.0, 0.0], FOUR_NODE_START, end).expect("valid D"),
    );
    Scenario::new(
        "four-node",
        "A static at (0,0); D static at (300,0); B shuttles on x=150 between y=-400 and \
         y=400 at 10 m/s, at (150,160) heading +y at t=0; C drifts towards A at 1 m/s, \
         at (160,-120) at t=0. Range 250 m; route setup at t=0.",
        traces,
        "A",
        "D",
        FOUR_NODE_RANGE,
        FOUR_NODE_INTERVAL,
        FOUR_NODE_START,
        FOUR_NODE_SAMPLES,
        0.0,
    )
    .expect("four-node constants are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_leg() -> ContinuousTrace {
        ContinuousTrace::from_waypoints(
            vec![
                Waypoint {
                    arrival_time: 0.0,
                    position: [0.0, 0.0, 0.0],
                    leg_speed: 0.0,
                    pause: 0.0,
                },
                Waypoint {
                    arrival_time: 100.0,
                    position: [1000.0, 0.0, 0.0],
                    leg_speed: 10.0,
                    pause: 0.0,
                },
            ],
            false,
        )
        .unwrap()
    }

    #[test]
    fn zero_speed_node_never_moves() {
        let params = RwmParams {
            v_min: 0.0,
            v_max: 0.0,
            duration: 100.0,
            seed: 3,
            ..Default::default()
        };
        let trace = generate_rwm_trace(&params).unwrap();
        let s = sample_trace(&trace, "n", 1.0, 0.0, 101).unwrap();
        assert!(s.x.iter().all(|&x| x == s.x[0]));
        assert!(s.y.iter().all(|&y| y == s.y[0]));
    }

    #[test]
    fn same_seed_same_trace() {
        let params = RwmParams {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(
            generate_rwm_trace(&params).unwrap(),
            generate_rwm_trace(&params).unwrap()
        );
    }

    #[test]
    fn default_speed_interval_is_respected() {
        let params = RwmParams {
            seed: 9,
            ..Default::default()
        };
        let trace = generate_rwm_trace(&params).unwrap();
        assert_eq!(trace.start_time(), 0.0);
        assert_eq!(trace.end_time(), 4000.0);
        for w in trace.waypoints() {
            assert!(params.territory.contains(&w.position));
            assert!((0.0..=20.0).contains(&w.leg_speed));
        }
    }

    #[test]
    fn straight_leg_samples_are_exact() {
        let s = sample_trace(&straight_leg(), "n", 1.0, 0.0, 101).unwrap();
        for (k, &x) in s.x.iter().enumerate() {
            assert_eq!(x, 10.0 * k as f64);
        }
        assert!(s.z.is_none());
    }

    #[test]
    fn sampling_past_the_end_is_a_range_error() {
        let err = sample_trace(&straight_leg(), "n", 10.0, 0.0, 12).unwrap_err();
        assert!(matches!(err, Error::Range(_)));
        assert_eq!(sample_trace(&straight_leg(), "n", 10.0, 0.0, 11).unwrap().len(), 11);
    }

    #[test]
    fn ten_second_grid_over_4000s_has_401_points() {
        let trace = generate_rwm_trace(&RwmParams::default()).unwrap();
        let s = sample_trace(&trace, "n", 10.0, 0.0, 401).unwrap();
        assert_eq!(s.len(), 401);
        assert_eq!(s.time(400), 4000.0);
    }

    #[test]
    fn stationary_samples_are_equal() {
        let t = ContinuousTrace::stationary([5.0, 6.0, 0.0], 0.0, 50.0).unwrap();
        let s = sample_trace(&t, "n", 10.0, 0.0, 6).unwrap();
        assert!(s.x.iter().all(|&v| v == 5.0) && s.y.iter().all(|&v| v == 6.0));
    }

    #[test]
    fn inconsistent_leg_speed_is_rejected() {
        let mut w = straight_leg().waypoints().to_vec();
        w[1].leg_speed = 11.0;
        assert!(ContinuousTrace::from_waypoints(w, false).is_err());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = [
            RwmParams {
                v_min: 5.0,
                v_max: 1.0,
                ..Default::default()
            },
            RwmParams {
                duration: 0.0,
                ..Default::default()
            },
            RwmParams {
                pause_max: -1.0,
                ..Default::default()
            },
        ];
        for p in bad {
            assert!(matches!(generate_rwm_trace(&p), Err(Error::Param(_))));
        }
        assert!(Territory::new(10.0, 10.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn three_dimensional_traces_carry_z() {
        let params = RwmParams {
            territory: Territory::rect(500.0, 500.0).unwrap().with_z(0.0, 100.0).unwrap(),
            seed: 5,
            ..Default::default()
        };
        let trace = generate_rwm_trace(&params).unwrap();
        let s = sample_trace(&trace, "n", 10.0, 0.0, 401).unwrap();
        let z = s.z.as_ref().unwrap();
        assert!(z.iter().all(|v| (0.0..=100.0).contains(v)));
        assert!(z.iter().any(|&v| v != z[0]));
    }

    #[test]
    fn exit_time_matches_closed_form_for_straight_leg() {
        let origin = ContinuousTrace::stationary([0.0; 3], 0.0, 100.0).unwrap();
        let t = first_exit_time(&origin, &straight_leg(), 250.0, 0.0, 100.0).unwrap();
        assert!((t - 25.0).abs() < 1e-12);
        assert_eq!(
            first_exit_time(&origin, &straight_leg(), 250.0, 30.0, 100.0),
            Some(30.0)
        );
        assert_eq!(first_exit_time(&origin, &origin, 250.0, 0.0, 100.0), None);
    }

    #[test]
    fn four_node_break_time_matches_closed_form() {
        let sc = build_four_node_scenario();
        // |A - B(t)| = 250 with B(t) = (150, 160 + 10 t): 160 + 10 t = 200.
        let closed_form = (((250.0f64).powi(2) - 150.0f64.powi(2)).sqrt() - 160.0) / 10.0;
        assert_eq!(closed_form, 4.0);
        let ab = first_exit_time(&sc.traces["A"], &sc.traces["B"], 250.0, 0.0, 100.0).unwrap();
        let bd = first_exit_time(&sc.traces["B"], &sc.traces["D"], 250.0, 0.0, 100.0).unwrap();
        assert!((ab - closed_form).abs() < 1e-9);
        assert!((bd - closed_form).abs() < 1e-9);
        assert_eq!(
            first_exit_time(&sc.traces["A"], &sc.traces["C"], 250.0, 0.0, 100.0),
            None
        );
        assert_eq!(
            first_exit_time(&sc.traces["C"], &sc.traces["D"], 250.0, 0.0, 100.0),
            None
        );
    }
}
