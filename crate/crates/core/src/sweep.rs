//! Grids over the deviation ratios, the communication delay and the speed
//! floor, evaluated point by point into capacity rows.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{CapacityPoint, Packing, RoadSpec};
use crate::cooperative::LatencyModel;
use crate::error::{Error, Result};
use crate::kinematics::VehicleParams;
use crate::perception::{DeviationRegime, DeviationSet};

/// One value on the delay axis, optionally named after a latency preset.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaPoint {
    pub seconds: f64,
    pub label: Option<String>,
}

impl EtaPoint {
    pub fn seconds(seconds: f64) -> Self {
        Self {
            seconds,
            label: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let model = LatencyModel::preset(name).ok_or_else(|| {
            Error::InvalidInput(format!(
                "unknown latency preset `{name}` (expected one of {})",
                LatencyModel::preset_names().join(", ")
            ))
        })?;
        Ok(Self {
            seconds: model.upper_bound(),
            label: Some(model.label),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub e_tau: Vec<f64>,
    pub e_brake: Vec<f64>,
    pub e_v: Vec<f64>,
    pub eta: Vec<EtaPoint>,
    pub speed_kmh: Vec<f64>,
    pub e_l: f64,
    pub regime: DeviationRegime,
    /// Road length and lane count; the speed floor comes from `speed_kmh`.
    pub road: RoadSpec<f64>,
    /// Shared vehicle type; `speed` and `tau0` are overridden per fleet.
    pub vehicle: VehicleParams<f64>,
    pub tau0_pbv: f64,
    pub tau0_cbv: f64,
    pub packing: Packing,
}

impl Default for SweepGrid {
    /// The good-perception grid: e_tau, e_brake in 0.95..=1, e_V in 1..=1.05,
    /// all three latency presets, 100 km/h on the 10 km, 2-lane road.
    fn default() -> Self {
        let down = steps(0.95, 1.0, 0.01);
        Self {
            e_tau: down.clone(),
            e_brake: down,
            e_v: steps(1.0, 1.05, 0.01),
            eta: LatencyModel::preset_names()
                .iter()
                .map(|n| EtaPoint::preset(n).expect("built-in preset"))
                .collect(),
            speed_kmh: vec![100.0],
            e_l: 1.0,
            regime: DeviationRegime::GoodPerception,
            road: RoadSpec::default(),
            vehicle: VehicleParams {
                length: 5.0,
                a_max_brake: 9.0,
                a_max_acc: 3.0,
                speed: 100.0 / 3.6,
                tau0: 0.5,
            },
            tau0_pbv: 0.5,
            tau0_cbv: 0.4,
            packing: Packing::Road,
        }
    }
}

fn round_grid(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| round_grid(lo + i as f64 * step)).collect()
}

/// Parses an axis given either as `lo:hi:step` (inclusive) or as a
/// comma-separated list.
pub fn parse_axis(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::InvalidInput("empty axis".into()));
    }
    let number = |s: &str| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("`{}` is not a number", s.trim())))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidInput(format!("`{}` is not finite", s.trim())))
        }
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (number(lo)?, number(hi)?, number(step)?);
            if step <= 0.0 || hi < lo {
                return Err(Error::InvalidInput(format!(
                    "range `{text}` needs lo <= hi and step > 0"
                )));
            }
            if (hi - lo) / step > 1e6 {
                return Err(Error::InvalidInput(format!("range `{text}` has too many points")));
            }
            Ok(steps(lo, hi, step))
        }
        [_] => text.split(',').map(number).collect(),
        _ => Err(Error::InvalidInput(format!(
            "axis `{text}` is neither `lo:hi:step` nor a comma list"
        ))),
    }
}

/// Delay axis: seconds, preset names, or the word `presets` for all of them.
pub fn parse_eta_axis(text: &str) -> Result<Vec<EtaPoint>> {
    let text = text.trim();
    if text == "presets" {
        return LatencyModel::preset_names()
            .iter()
            .map(|n| EtaPoint::preset(n))
            .collect();
    }
    if text.contains(':') {
        return Ok(parse_axis(text)?.into_iter().map(EtaPoint::seconds).collect());
    }
    if text.is_empty() {
        return Err(Error::InvalidInput("empty eta axis".into()));
    }
    text.split(',')
        .map(|item| {
            let item = item.trim();
            match item.parse::<f64>() {
                Ok(v) => Ok(EtaPoint::seconds(v)),
                Err(_) => EtaPoint::preset(item),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub e_tau: f64,
    pub e_brake: f64,
    #[serde(rename = "e_V")]
    pub e_v: f64,
    pub eta_s: f64,
    #[serde(rename = "D_pbv_m")]
    pub d_pbv_m: f64,
    #[serde(rename = "D_cbv_m")]
    pub d_cbv_m: f64,
    #[serde(rename = "SDC_pbv")]
    pub sdc_pbv: u64,
    #[serde(rename = "SDC_cbv")]
    pub sdc_cbv: u64,
    #[serde(rename = "e_L")]
    pub e_l: f64,
    pub speed_mps: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
    pub eta_label: String,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.e_tau.len() * self.e_brake.len() * self.e_v.len() * self.eta.len() * self.speed_kmh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn shape(&self) -> [usize; 5] {
        [
            self.e_tau.len(),
            self.e_brake.len(),
            self.e_v.len(),
            self.eta.len(),
            self.speed_kmh.len(),
        ]
    }

    /// Row-major position of a point; `e_tau` varies slowest, speed fastest.
    pub fn index(&self, at: [usize; 5]) -> usize {
        self.shape()
            .iter()
            .zip(at)
            .fold(0, |acc, (&n, i)| acc * n + i)
    }

    fn coords(&self, mut flat: usize) -> [usize; 5] {
        let shape = self.shape();
        let mut at = [0; 5];
        for axis in (0..5).rev() {
            at[axis] = flat % shape[axis];
            flat /= shape[axis];
        }
        at
    }

    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("e_tau", self.e_tau.len()),
            ("e_brake", self.e_brake.len()),
            ("e_V", self.e_v.len()),
            ("eta", self.eta.len()),
            ("speed", self.speed_kmh.len()),
        ];
        for (name, n) in axes {
            if n == 0 {
                return Err(Error::InvalidInput(format!("sweep axis `{name}` is empty")));
            }
        }
        for eta in &self.eta {
            if !(eta.seconds.is_finite() && eta.seconds >= 0.0) {
                return Err(Error::param("eta", format!("must be >= 0, got {}", eta.seconds)));
            }
        }
        for &e_tau in &self.e_tau {
            for &e_brake in &self.e_brake {
                for &e_v in &self.e_v {
                    DeviationSet::new(self.e_l, e_v, e_brake, e_tau, self.regime)?;
                }
            }
        }
        for &speed in &self.speed_kmh {
            RoadSpec::new(self.road.length_km, self.road.lanes, speed)?;
        }
        self.vehicle.with_tau0(self.tau0_pbv).validate()?;
        self.vehicle.with_tau0(self.tau0_cbv).validate()?;
        Ok(())
    }

    pub fn point(&self, flat: usize) -> Result<(CapacityPoint<f64>, &EtaPoint)> {
        let [i, j, k, m, s] = self.coords(flat);
        let dev = DeviationSet::new(self.e_l, self.e_v[k], self.e_brake[j], self.e_tau[i], self.regime)?;
        let road = RoadSpec::new(self.road.length_km, self.road.lanes, self.speed_kmh[s])?;
        let point = CapacityPoint {
            road,
            pbv: self.vehicle.with_tau0(self.tau0_pbv),
            cbv: self.vehicle.with_tau0(self.tau0_cbv),
            dev,
            eta: self.eta[m].seconds,
        };
        Ok((point, &self.eta[m]))
    }
}

/// Evaluates every grid point; rows come back in grid order.
pub fn run_sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let (point, eta) = grid.point(flat)?;
            let report = point.report(grid.packing)?;
            Ok(SweepRow {
                e_tau: report.e_tau,
                e_brake: report.e_brake,
                e_v: report.e_v,
                eta_s: report.eta_s,
                d_pbv_m: report.expected_distance_pbv_m,
                d_cbv_m: report.expected_distance_cbv_m,
                sdc_pbv: report.sdc_pbv,
                sdc_cbv: report.sdc_cbv,
                e_l: report.e_l,
                speed_mps: point.road.speed_floor_mps(),
                l_m: report.vehicle_length_m,
                eta_label: eta.label.clone().unwrap_or_default(),
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Rows where the cooperative capacity falls below the perception-based one.
pub fn capacity_order_failures(rows: &[SweepRow]) -> Vec<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.sdc_cbv < r.sdc_pbv)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    /// Adjacent grid pairs compared.
    pub pairs: usize,
    pub failures: Vec<String>,
    pub sdc_cbv_min: u64,
    pub sdc_cbv_max: u64,
    pub d_cbv_min_m: f64,
    pub d_cbv_max_m: f64,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks that `D_cbv` never shrinks (and `SDC_cbv` never grows) when any
/// single axis moves toward perfect perception (`e_tau`, `e_brake` up,
/// `e_V` down) or toward a longer delay. Also reports the spread of the
/// cooperative capacity over the grid.
pub fn check_monotonicity(grid: &SweepGrid, rows: &[SweepRow]) -> Result<MonotonicityReport> {
    if rows.len() != grid.len() || rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} rows for a grid of {} points",
            rows.len(),
            grid.len()
        )));
    }
    const SLACK: f64 = 1e-9;
    // (axis, name, values, true when a larger value means better perception or a longer delay)
    let eta: Vec<f64> = grid.eta.iter().map(|e| e.seconds).collect();
    let axes: [(usize, &str, &[f64], bool); 4] = [
        (0, "e_tau", &grid.e_tau, true),
        (1, "e_brake", &grid.e_brake, true),
        (2, "e_V", &grid.e_v, false),
        (3, "eta", &eta, true),
    ];
    let mut pairs = 0;
    let mut failures = Vec::new();
    for &(axis, name, values, ascending) in &axes {
        // Walk the axis in value order, whatever order the grid lists it in.
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        if !ascending {
            order.reverse();
        }
        for flat in 0..rows.len() {
            let at = grid.coords(flat);
            if at[axis] != order[0] {
                continue;
            }
            for w in order.windows(2) {
                let (mut from_at, mut to_at) = (at, at);
                from_at[axis] = w[0];
                to_at[axis] = w[1];
                let (from, to) = (&rows[grid.index(from_at)], &rows[grid.index(to_at)]);
                pairs += 1;
                if to.d_cbv_m + SLACK < from.d_cbv_m || to.sdc_cbv > from.sdc_cbv {
                    failures.push(format!(
                        "along {name} at row {}: D_cbv {} -> {}, SDC_cbv {} -> {}",
                        grid.index(from_at),
                        from.d_cbv_m,
                        to.d_cbv_m,
                        from.sdc_cbv,
                        to.sdc_cbv
                    ));
                }
            }
        }
    }
    let sdc = rows.iter().map(|r| r.sdc_cbv);
    let d = rows.iter().map(|r| r.d_cbv_m);
    Ok(MonotonicityReport {
        pairs,
        failures,
        sdc_cbv_min: sdc.clone().min().expect("non-empty"),
        sdc_cbv_max: sdc.max().expect("non-empty"),
        d_cbv_min_m: d.clone().fold(f64::INFINITY, f64::min),
        d_cbv_max_m: d.fold(f64::NEG_INFINITY, f64::max),
    })
}
