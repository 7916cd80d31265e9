//! File formats: trace CSV, scenario JSON, and the CSV/JSON outputs of the
//! experiments.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! that is read and written again comes out byte-identical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::mobility::{ContinuousTrace, LocationSeries, Scenario, Waypoint};
use crate::predictor::EpochError;
use crate::routing::SimulationReport;
use crate::stability::ExpirationTime;

pub const SCENARIO_VERSION: &str = "1";

/// One `(sample, node)` row of a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub node_id: String,
    pub x: f64,
    pub y: f64,
    pub z: Option<f64>,
}

/// The rows of a trace file, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceTable {
    pub rows: Vec<TraceRow>,
}

impl TraceTable {
    /// Rows ordered by sample, then by the order `series` are given in.
    pub fn from_series<'a>(series: impl IntoIterator<Item = &'a LocationSeries>) -> Result<Self> {
        let series: Vec<&LocationSeries> = series.into_iter().collect();
        let Some(first) = series.first() else {
            return Ok(TraceTable::default());
        };
        let has_z = first.z.is_some();
        for s in &series {
            if s.len() != first.len() || s.z.is_some() != has_z {
                return Err(param("all series in one trace file need equal length and dimension"));
            }
        }
        let mut rows = Vec::with_capacity(first.len() * series.len());
        for k in 0..first.len() {
            for s in &series {
                rows.push(TraceRow {
                    time: s.time(k),
                    node_id: s.node_id.clone(),
                    x: s.x[k],
                    y: s.y[k],
                    z: s.z.as_ref().map(|z| z[k]),
                });
            }
        }
        Ok(TraceTable { rows })
    }

    pub fn has_z(&self) -> bool {
        self.rows.first().is_some_and(|r| r.z.is_some())
    }

    /// Groups the rows into one series per node. Each node's samples must
    /// be evenly spaced in time.
    pub fn to_series(&self) -> Result<BTreeMap<String, LocationSeries>> {
        let mut by_node: BTreeMap<&str, Vec<&TraceRow>> = BTreeMap::new();
        for r in &self.rows {
            by_node.entry(&r.node_id).or_default().push(r);
        }
        let mut out = BTreeMap::new();
        for (id, rows) in by_node {
            let start = rows[0].time;
            let interval = if rows.len() > 1 {
                rows[1].time - rows[0].time
            } else {
                1.0
            };
            if !(interval > 0.0) {
                return Err(Error::Format(format!("node '{id}' has non-increasing times")));
            }
            for (k, r) in rows.iter().enumerate() {
                let expected = start + k as f64 * interval;
                if (r.time - expected).abs() > 1e-6 * interval {
                    return Err(Error::Format(format!(
                        "node '{id}' sample {k} at t={} breaks the {interval} s grid",
                        r.time
                    )));
                }
            }
            let z = if rows[0].z.is_some() {
                Some(rows.iter().map(|r| r.z.unwrap_or(0.0)).collect())
            } else {
                None
            };
            let series = LocationSeries::new(
                id,
                interval,
                start,
                rows.iter().map(|r| r.x).collect(),
                rows.iter().map(|r| r.y).collect(),
                z,
            )?;
            out.insert(id.to_string(), series);
        }
        Ok(out)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let has_z = self.has_z();
        if has_z {
            wr.write_record(["time", "node_id", "x", "y", "z"])?;
        } else {
            wr.write_record(["time", "node_id", "x", "y"])?;
        }
        for r in &self.rows {
            let mut rec = vec![r.time.to_string(), r.node_id.clone(), r.x.to_string(), r.y.to_string()];
            if has_z {
                rec.push(r.z.ok_or_else(|| param("row without z in a 3D trace"))?.to_string());
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        let has_z = match names.as_slice() {
            ["time", "node_id", "x", "y"] => false,
            ["time", "node_id", "x", "y", "z"] => true,
            _ => {
                return Err(Error::Format(format!(
                    "trace header must be time,node_id,x,y[,z], got {}",
                    names.join(",")
                )))
            }
        };
        let mut rows = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                let field = rec.get(i).unwrap_or("").trim();
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: bad number '{field}'", line + 2)))
            };
            rows.push(TraceRow {
                time: num(0)?,
                node_id: rec.get(1).unwrap_or("").trim().to_string(),
                x: num(2)?,
                y: num(3)?,
                z: if has_z { Some(num(4)?) } else { None },
            });
        }
        Ok(TraceTable { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(File::open(path)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NodeEntry {
    waypoints: Vec<Waypoint>,
    #[serde(default)]
    has_z: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioFile {
    version: String,
    name: String,
    #[serde(default)]
    description: String,
    nodes: BTreeMap<String, NodeEntry>,
    source: String,
    destination: String,
    transmission_range: f64,
    sample_interval: f64,
    start_time: f64,
    sample_count: usize,
    setup_time: f64,
}

pub fn scenario_to_json(s: &Scenario) -> Result<String> {
    let file = ScenarioFile {
        version: SCENARIO_VERSION.to_string(),
        name: s.name.clone(),
        description: s.description.clone(),
        nodes: s
            .traces
            .iter()
            .map(|(id, t)| {
                (
                    id.clone(),
                    NodeEntry {
                        waypoints: t.waypoints().to_vec(),
                        has_z: t.has_z(),
                    },
                )
            })
            .collect(),
        source: s.source.clone(),
        destination: s.destination.clone(),
        transmission_range: s.transmission_range,
        sample_interval: s.sample_interval(),
        start_time: s.start_time(),
        sample_count: s.sample_count(),
        setup_time: s.setup_time,
    };
    Ok(serde_json::to_string_pretty(&file)? + "\n")
}

pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    if file.version != SCENARIO_VERSION {
        return Err(Error::Format(format!(
            "unsupported scenario version '{}'",
            file.version
        )));
    }
    let traces = file
        .nodes
        .into_iter()
        .map(|(id, n)| ContinuousTrace::from_waypoints(n.waypoints, n.has_z).map(|t| (id, t)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Scenario::new(
        file.name,
        file.description,
        traces,
        file.source,
        file.destination,
        file.transmission_range,
        file.sample_interval,
        file.start_time,
        file.sample_count,
        file.setup_time,
    )
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario_to_json(s)?)?;
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    scenario_from_json(&std::fs::read_to_string(path)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `epoch,E_train,E_gener`; E_gener is empty when no held-out series was
/// monitored.
pub fn write_error_curve<W: Write>(w: W, curve: &[EpochError]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["epoch", "E_train", "E_gener"])?;
    for e in curve {
        wr.write_record([e.epoch.to_string(), e.train.to_string(), opt(e.gener)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_error_curve<R: Read>(r: R) -> Result<Vec<EpochError>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
        let bad = |f: String| Error::Format(format!("bad error-curve field '{f}'"));
        let epoch = field(0).parse().map_err(|_| bad(field(0)))?;
        let train = field(1).parse().map_err(|_| bad(field(1)))?;
        let gener = match field(2).as_str() {
            "" => None,
            g => Some(g.parse().map_err(|_| bad(g.to_string()))?),
        };
        out.push(EpochError { epoch, train, gener });
    }
    Ok(out)
}

/// `time,node_i,node_j,let_seconds`.
pub fn write_let_matrix<W: Write>(w: W, entries: &[(f64, String, String, ExpirationTime)]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["time", "node_i", "node_j", "let_seconds"])?;
    for (t, a, b, l) in entries {
        wr.write_record([t.to_string(), a.clone(), b.clone(), l.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_reports_json<W: Write>(mut w: W, reports: &[SimulationReport]) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, reports)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// `policy,lifetime_s,interruptions,rediscoveries`.
pub fn write_summary_csv<W: Write>(w: W, reports: &[SimulationReport]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["policy", "lifetime_s", "interruptions", "rediscoveries"])?;
    for r in reports {
        wr.write_record([
            r.policy.to_string(),
            r.realized_lifetime.to_string(),
            r.interruptions.to_string(),
            r.rediscoveries.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::{build_four_node_scenario, generate_rwm_trace, sample_trace, RwmParams, Territory};

    fn rwm_series(seed: u64, id: &str, z: bool) -> LocationSeries {
        let mut territory = Territory::default();
        if z {
            territory = territory.with_z(0.0, 100.0).unwrap();
        }
        let params = RwmParams {
            territory,
            duration: 500.0,
            seed,
            ..Default::default()
        };
        sample_trace(&generate_rwm_trace(&params).unwrap(), id, 10.0, 0.0, 51).unwrap()
    }

    #[test]
    fn trace_round_trip_is_byte_identical() {
        for z in [false, true] {
            let a = rwm_series(1, "n0", z);
            let b = rwm_series(2, "n1", z);
            let table = TraceTable::from_series([&a, &b]).unwrap();
            let mut first = Vec::new();
            table.write(&mut first).unwrap();
            let back = TraceTable::read(first.as_slice()).unwrap();
            let mut second = Vec::new();
            back.write(&mut second).unwrap();
            assert_eq!(first, second);
            let series = back.to_series().unwrap();
            assert_eq!(series["n0"], a);
            assert_eq!(series["n1"], b);
        }
    }

    #[test]
    fn header_is_checked() {
        assert!(TraceTable::read("t,node,x,y\n0,a,1,2\n".as_bytes()).is_err());
        assert!(TraceTable::read("time,node_id,x,y\n0,a,one,2\n".as_bytes()).is_err());
    }

    #[test]
    fn irregular_times_are_rejected() {
        let text = "time,node_id,x,y\n0,a,0,0\n10,a,1,1\n25,a,2,2\n";
        let table = TraceTable::read(text.as_bytes()).unwrap();
        assert!(table.to_series().is_err());
    }

    #[test]
    fn scenario_round_trips() {
        let s = build_four_node_scenario();
        let text = scenario_to_json(&s).unwrap();
        let back = scenario_from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(scenario_to_json(&back).unwrap(), text);
    }

    #[test]
    fn error_curve_round_trips() {
        let curve = vec![
            EpochError {
                epoch: 1,
                train: 2.5,
                gener: Some(0.125),
            },
            EpochError {
                epoch: 2,
                train: 1.0 / 3.0,
                gener: None,
            },
        ];
        let mut buf = Vec::new();
        write_error_curve(&mut buf, &curve).unwrap();
        assert_eq!(read_error_curve(buf.as_slice()).unwrap(), curve);
    }

    #[test]
    fn let_matrix_prints_sentinel() {
        let rows = vec![
            (0.0, "A".to_string(), "B".to_string(), ExpirationTime::Finite(4.0)),
            (0.0, "A".to_string(), "C".to_string(), ExpirationTime::BeyondHorizon),
        ];
        let mut buf = Vec::new();
        write_let_matrix(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "time,node_i,node_j,let_seconds\n0,A,B,4\n0,A,C,beyond-horizon\n");
    }
}
