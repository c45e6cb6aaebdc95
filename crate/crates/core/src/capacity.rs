//! Safe driving capacity of a straight multi-lane road for perception-based
//! and cooperative fleets, and the sweep check that the cooperative capacity
//! never falls below the perception-based one.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooperative;
use crate::error::{Error, Result};
use crate::kinematics::{self, VehicleParams};
use crate::perception::DeviationSet;
use crate::scalar::{kmh_to_mps, Scalar};

/// Road of `length_km` kilometres and `lanes` lanes with a minimum speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec<T> {
    pub length_km: T,
    pub lanes: u32,
    pub speed_floor_kmh: T,
}

impl<T: Scalar> Default for RoadSpec<T> {
    fn default() -> Self {
        Self {
            length_km: T::lit(10.0),
            lanes: 2,
            speed_floor_kmh: T::lit(100.0),
        }
    }
}

impl<T: Scalar> RoadSpec<T> {
    pub fn new(length_km: T, lanes: u32, speed_floor_kmh: T) -> Result<Self> {
        let road = Self {
            length_km,
            lanes,
            speed_floor_kmh,
        };
        road.validate()?;
        Ok(road)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km.is_finite() && self.length_km > T::zero()) {
            return Err(Error::param("length_km", format!("must be > 0, got {}", self.length_km)));
        }
        if self.lanes == 0 {
            return Err(Error::param("lanes", "must be a positive integer"));
        }
        // Without a speed floor the densest packing is a parked road.
        if !(self.speed_floor_kmh.is_finite() && self.speed_floor_kmh > T::zero()) {
            return Err(Error::param(
                "speed_floor_kmh",
                format!("must be > 0, got {}", self.speed_floor_kmh),
            ));
        }
        Ok(())
    }

    pub fn length_m(&self) -> T {
        self.length_km * T::lit(1000.0)
    }

    pub fn speed_floor_mps(&self) -> T {
        kmh_to_mps(self.speed_floor_kmh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pbv,
    Cbv,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pbv => "pbv",
            Mode::Cbv => "cbv",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbv" => Ok(Mode::Pbv),
            "cbv" => Ok(Mode::Cbv),
            other => Err(Error::InvalidInput(format!("unknown mode `{other}` (pbv|cbv)"))),
        }
    }
}

/// How vehicles are packed along the lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Packing {
    /// `⌊N(M − L)/D⌋ + 1` over the whole road.
    #[default]
    Road,
    /// `N · (⌊(M − L)/D⌋ + 1)`: each lane packed separately.
    PerLane,
}

/// Expected safe distance of a homogeneous fleet running exactly at the
/// road's speed floor.
pub fn expected_safe_distance<T: Scalar>(
    fleet: &VehicleParams<T>,
    road: &RoadSpec<T>,
    mode: Mode,
    dev: &DeviationSet<T>,
    eta: T,
) -> Result<T> {
    road.validate()?;
    let at_floor = fleet.with_speed(road.speed_floor_mps());
    match mode {
        Mode::Pbv => kinematics::safe_longitudinal_distance(&at_floor, &at_floor, at_floor.tau0),
        Mode::Cbv => cooperative::corrected_safe_distance(&at_floor, &at_floor, dev, eta),
    }
}

/// Expected safe distance of a mixed fleet: each vehicle type appears with a
/// weight and consecutive vehicles are independent draws, so the expectation
/// is the weighted mean over ordered (rear, front) pairs.
pub fn expected_safe_distance_mixture<T: Scalar>(
    fleet: &[(VehicleParams<T>, T)],
    road: &RoadSpec<T>,
    mode: Mode,
    dev: &DeviationSet<T>,
    eta: T,
) -> Result<T> {
    road.validate()?;
    if fleet.is_empty() {
        return Err(Error::InvalidInput("empty fleet mixture".into()));
    }
    let total = fleet.iter().fold(T::zero(), |acc, (_, w)| acc + *w);
    if fleet.iter().any(|(_, w)| !(w.is_finite() && *w >= T::zero())) || total <= T::zero() {
        return Err(Error::InvalidInput("mixture weights must be >= 0 with a positive sum".into()));
    }
    let speed = road.speed_floor_mps();
    let mut expected = T::zero();
    for (rear, w_rear) in fleet {
        for (front, w_front) in fleet {
            let rear = rear.with_speed(speed);
            let front = front.with_speed(speed);
            let d = match mode {
                Mode::Pbv => kinematics::safe_longitudinal_distance(&rear, &front, rear.tau0)?,
                Mode::Cbv => cooperative::corrected_safe_distance(&rear, &front, dev, eta)?,
            };
            expected = expected + d * (*w_rear / total) * (*w_front / total);
        }
    }
    Ok(expected)
}

/// Number of vehicles that fit on the road when consecutive centres are
/// `expected_distance` apart.
pub fn sdc<T: Scalar>(
    road: &RoadSpec<T>,
    expected_distance: T,
    vehicle_length: T,
    packing: Packing,
) -> Result<u64> {
    road.validate()?;
    if !(expected_distance.is_finite() && expected_distance > T::zero()) {
        return Err(Error::param(
            "expected_distance",
            format!("must be > 0, got {expected_distance}"),
        ));
    }
    let length = road.length_m();
    if !(vehicle_length.is_finite() && vehicle_length > T::zero() && vehicle_length < length) {
        return Err(Error::param(
            "vehicle_length",
            format!("must be in (0, road length), got {vehicle_length}"),
        ));
    }
    let lanes = T::from_u32(road.lanes).expect("lane count fits scalar");
    let span = length - vehicle_length;
    let count = match packing {
        Packing::Road => floor_count(lanes * span / expected_distance)? + 1,
        Packing::PerLane => {
            u64::from(road.lanes) * (floor_count(span / expected_distance)? + 1)
        }
    };
    Ok(count)
}

fn floor_count<T: Scalar>(ratio: T) -> Result<u64> {
    ratio
        .floor()
        .to_u64()
        .ok_or_else(|| Error::Internal(format!("capacity ratio {ratio} out of range")))
}

/// Capacity of one road for both fleet kinds, echoing every input used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub sdc_pbv: u64,
    pub sdc_cbv: u64,
    pub expected_distance_pbv_m: f64,
    pub expected_distance_cbv_m: f64,
    pub road_length_km: f64,
    pub lanes: u32,
    pub speed_floor_kmh: f64,
    pub vehicle_length_m: f64,
    pub corrected_length_m: f64,
    pub a_max_brake_mps2: f64,
    pub a_max_acc_mps2: f64,
    pub tau0_pbv_s: f64,
    pub tau0_cbv_s: f64,
    pub eta_s: f64,
    pub e_l: f64,
    pub e_v: f64,
    pub e_brake: f64,
    pub e_tau: f64,
    pub packing: Packing,
}

/// Inputs shared by both fleets at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityPoint<T> {
    pub road: RoadSpec<T>,
    /// PBV fleet (its `tau0` is the PBV response time).
    pub pbv: VehicleParams<T>,
    /// CBV fleet, conservative estimates (its `tau0` is the CBV machine time).
    pub cbv: VehicleParams<T>,
    pub dev: DeviationSet<T>,
    pub eta: T,
}

impl<T: Scalar> CapacityPoint<T> {
    pub fn distances(&self) -> Result<(T, T)> {
        let d_pbv = expected_safe_distance(&self.pbv, &self.road, Mode::Pbv, &self.dev, self.eta)?;
        let d_cbv = expected_safe_distance(&self.cbv, &self.road, Mode::Cbv, &self.dev, self.eta)?;
        Ok((d_pbv, d_cbv))
    }

    pub fn report(&self, packing: Packing) -> Result<CapacityReport> {
        let (d_pbv, d_cbv) = self.distances()?;
        let corrected_length = self.cbv.length * self.dev.e_length();
        let sdc_pbv = sdc(&self.road, d_pbv, self.pbv.length, packing)?;
        let sdc_cbv = sdc(&self.road, d_cbv, corrected_length, packing)?;
        let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
        Ok(CapacityReport {
            sdc_pbv,
            sdc_cbv,
            expected_distance_pbv_m: f(d_pbv),
            expected_distance_cbv_m: f(d_cbv),
            road_length_km: f(self.road.length_km),
            lanes: self.road.lanes,
            speed_floor_kmh: f(self.road.speed_floor_kmh),
            vehicle_length_m: f(self.pbv.length),
            corrected_length_m: f(corrected_length),
            a_max_brake_mps2: f(self.pbv.a_max_brake),
            a_max_acc_mps2: f(self.pbv.a_max_acc),
            tau0_pbv_s: f(self.pbv.tau0),
            tau0_cbv_s: f(self.cbv.tau0),
            eta_s: f(self.eta),
            e_l: f(self.dev.e_length()),
            e_v: f(self.dev.e_front_speed()),
            e_brake: f(self.dev.e_brake()),
            e_tau: f(self.dev.e_tau()),
            packing,
        })
    }

    /// Why this point lies outside the hypotheses of the capacity ordering,
    /// if it does.
    pub fn regime_violation(&self) -> Option<String> {
        if !self.dev.is_conservative() {
            return Some(format!(
                "deviations not conservative (e_L={}, e_V={}, e_brake={}, e_tau={})",
                self.dev.e_length(),
                self.dev.e_front_speed(),
                self.dev.e_brake(),
                self.dev.e_tau()
            ));
        }
        let cbv_tau = self.dev.e_tau() * self.cbv.tau0 + self.eta;
        if cbv_tau > self.pbv.tau0 {
            return Some(format!(
                "cooperative response time e_tau*tau0+eta = {cbv_tau} exceeds the PBV response time {}",
                self.pbv.tau0
            ));
        }
        if self.pbv.length != self.cbv.length
            || self.pbv.a_max_brake != self.cbv.a_max_brake
            || self.pbv.a_max_acc != self.cbv.a_max_acc
        {
            return Some("PBV and CBV fleets differ in length or acceleration limits".into());
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityOrderViolation {
    pub index: usize,
    pub report: CapacityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityOrderReport {
    /// Points whose capacities were compared.
    pub evaluated: usize,
    /// Out-of-regime points, with the reason; not counted as evaluated.
    pub rejected: Vec<(usize, String)>,
    pub violations: Vec<CapacityOrderViolation>,
    /// Points where the two capacities coincide.
    pub ties: usize,
}

impl CapacityOrderReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares the PBV and CBV capacities at every point. Points outside the
/// conservative regime (or violating the delay side condition) are rejected
/// with a diagnostic instead of being evaluated.
pub fn check_capacity_order<T: Scalar>(
    points: &[CapacityPoint<T>],
    packing: Packing,
) -> Result<CapacityOrderReport> {
    let outcomes: Vec<Result<std::result::Result<CapacityReport, String>>> = points
        .par_iter()
        .map(|point| match point.regime_violation() {
            Some(reason) => Ok(Err(reason)),
            None => point.report(packing).map(Ok),
        })
        .collect();

    let mut report = CapacityOrderReport {
        evaluated: 0,
        rejected: Vec::new(),
        violations: Vec::new(),
        ties: 0,
    };
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            Err(reason) => report.rejected.push((index, reason)),
            Ok(row) => {
                report.evaluated += 1;
                if row.sdc_pbv == row.sdc_cbv {
                    report.ties += 1;
                }
                if row.sdc_pbv > row.sdc_cbv {
                    report.violations.push(CapacityOrderViolation { index, report: row });
                }
            }
        }
    }
    Ok(report)
}
