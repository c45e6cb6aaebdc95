use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of one vehicle at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub position: f64,
    pub velocity: f64,
    pub ber_active: bool,
    pub collided: bool,
    pub responsible: bool,
}

/// Time-indexed state sequence of one vehicle with a uniform step `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub vehicle_id: String,
    pub steps: Vec<VehicleState>,
    pub dt: f64,
    /// Provenance of the front-vehicle information (cooperative runs).
    pub info_source: Option<String>,
}

impl Trace {
    pub fn new(vehicle_id: impl Into<String>, steps: Vec<VehicleState>, dt: f64) -> Result<Self> {
        let trace = Self {
            vehicle_id: vehicle_id.into(),
            steps,
            dt,
            info_source: None,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::InvalidInput(format!("trace `{}` is empty", self.vehicle_id)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "trace `{}` has non-positive dt {}",
                self.vehicle_id, self.dt
            )));
        }
        if self.steps.iter().any(|s| s.velocity < 0.0 || !s.velocity.is_finite() || !s.position.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "trace `{}` has a negative or non-finite state",
                self.vehicle_id
            )));
        }
        if self.steps.windows(2).any(|w| w[0].collided && !w[1].collided) {
            return Err(Error::InvalidInput(format!(
                "trace `{}` un-collides: collisions are permanent",
                self.vehicle_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Index of the last step, i.e. the horizon `T`.
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn ever_collided(&self) -> bool {
        self.steps.last().is_some_and(|s| s.collided)
    }

    pub fn ever_responsible(&self) -> bool {
        self.steps.iter().any(|s| s.responsible)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    t: f64,
    vehicle_id: String,
    position_m: f64,
    velocity_mps: f64,
    ber: u8,
    collided: u8,
    responsible: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    info_source: Option<String>,
}

/// Writes traces as CSV, one row per (vehicle, step), vehicles in order.
pub fn write_traces_csv<W: Write>(traces: &[Trace], writer: W) -> Result<()> {
    let with_source = traces.iter().any(|t| t.info_source.is_some());
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec![
        "t",
        "vehicle_id",
        "position_m",
        "velocity_mps",
        "ber",
        "collided",
        "responsible",
    ];
    if with_source {
        header.push("info_source");
    }
    out.write_record(&header)?;
    for trace in traces {
        for (k, s) in trace.steps.iter().enumerate() {
            let mut record = vec![
                format_time(k, trace.dt),
                trace.vehicle_id.clone(),
                s.position.to_string(),
                s.velocity.to_string(),
                u8::from(s.ber_active).to_string(),
                u8::from(s.collided).to_string(),
                u8::from(s.responsible).to_string(),
            ];
            if with_source {
                record.push(trace.info_source.clone().unwrap_or_default());
            }
            out.write_record(&record)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn format_time(step: usize, dt: f64) -> String {
    // Rounded to a nanosecond grid so `k*dt` does not print as 0.30000000000000004.
    let t = (step as f64 * dt * 1e9).round() / 1e9;
    t.to_string()
}

/// Reads traces written by [`write_traces_csv`]. Vehicles keep their order of
/// first appearance; `dt` is inferred from consecutive times.
pub fn read_traces_csv<R: Read>(reader: R) -> Result<Vec<Trace>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut traces: Vec<(Trace, Vec<f64>)> = Vec::new();
    for (line, row) in input.deserialize::<TraceRow>().enumerate() {
        let row = row.map_err(|e| Error::InvalidInput(format!("trace csv row {}: {e}", line + 2)))?;
        let flag = |name: &str, v: u8| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::InvalidInput(format!(
                "trace csv row {}: `{name}` must be 0 or 1",
                line + 2
            ))),
        };
        let state = VehicleState {
            position: row.position_m,
            velocity: row.velocity_mps,
            ber_active: flag("ber", row.ber)?,
            collided: flag("collided", row.collided)?,
            responsible: flag("responsible", row.responsible)?,
        };
        match traces.iter_mut().find(|(t, _)| t.vehicle_id == row.vehicle_id) {
            Some((trace, times)) => {
                trace.steps.push(state);
                times.push(row.t);
            }
            None => traces.push((
                Trace {
                    vehicle_id: row.vehicle_id,
                    steps: vec![state],
                    dt: 0.0,
                    info_source: row.info_source.filter(|s| !s.is_empty()),
                },
                vec![row.t],
            )),
        }
    }

    let common_dt = traces
        .iter()
        .find(|(_, times)| times.len() > 1)
        .map(|(_, times)| times[1] - times[0])
        .unwrap_or(1.0);
    traces
        .into_iter()
        .map(|(mut trace, times)| {
            trace.dt = if times.len() > 1 { times[1] - times[0] } else { common_dt };
            let uniform = times.windows(2).all(|w| {
                let step = w[1] - w[0];
                (step - trace.dt).abs() <= 1e-6 * trace.dt.abs().max(1.0)
            });
            if !uniform {
                return Err(Error::InvalidInput(format!(
                    "trace `{}` does not have a uniform time step",
                    trace.vehicle_id
                )));
            }
            trace.validate()?;
            Ok(trace)
        })
        .collect()
}
