//! Cooperative information resolution between a rear vehicle and the one in
//! front of it, the additive delay model and the communication-corrected
//! safe distance.
//!
//! A cooperative vehicle first asks the front vehicle for its parameters. A
//! response carries the actual values; on timeout the vehicle falls back to
//! its perception system, and without perception to predefined conservative
//! defaults.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{self, VehicleParams};
use crate::perception::{self, DeviationSet, MetricKind, ObservationSet};
use crate::scalar::Scalar;

/// Default request timeout of the information exchange, seconds.
pub const DEFAULT_REQUEST_TIMEOUT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyKind {
    Constant { value: f64 },
    UniformRange { lo: f64, hi: f64 },
}

/// V2V latency η of one communication technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    #[serde(flatten)]
    pub kind: LatencyKind,
    #[serde(default)]
    pub label: String,
}

impl LatencyModel {
    pub fn constant(value: f64, label: impl Into<String>) -> Result<Self> {
        let model = Self {
            kind: LatencyKind::Constant { value },
            label: label.into(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn uniform(lo: f64, hi: f64, label: impl Into<String>) -> Result<Self> {
        let model = Self {
            kind: LatencyKind::UniformRange { lo, hi },
            label: label.into(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            LatencyKind::Constant { value } => value.is_finite() && value >= 0.0,
            LatencyKind::UniformRange { lo, hi } => {
                lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("latency", format!("invalid latency model {:?}", self.kind)))
        }
    }

    /// Largest latency the model can produce.
    pub fn upper_bound(&self) -> f64 {
        match self.kind {
            LatencyKind::Constant { value } => value,
            LatencyKind::UniformRange { hi, .. } => hi,
        }
    }

    /// Built-in technology presets: `dsrc` (10 ms), `5g` (1 ms), `4g` (50 ms).
    pub fn preset(name: &str) -> Option<Self> {
        let (value, label) = match name.to_ascii_lowercase().as_str() {
            "dsrc" => (0.01, "dsrc"),
            "5g" => (0.001, "5g"),
            "4g" => (0.05, "4g"),
            _ => return None,
        };
        Some(Self {
            kind: LatencyKind::Constant { value },
            label: label.to_string(),
        })
    }

    pub fn preset_names() -> [&'static str; 3] {
        ["dsrc", "5g", "4g"]
    }
}

/// Draws one latency sample. Deterministic for a seeded `rng`.
pub fn sample_latency<R: Rng + ?Sized>(model: &LatencyModel, rng: &mut R) -> f64 {
    match model.kind {
        LatencyKind::Constant { value } => value,
        LatencyKind::UniformRange { lo, hi } if lo == hi => lo,
        LatencyKind::UniformRange { lo, hi } => rng.random_range(lo..=hi),
    }
}

/// τ(η) = τ₀ + η.
pub fn effective_response_time<T: Scalar>(tau0: T, eta: T) -> Result<T> {
    for (name, value) in [("tau0", tau0), ("eta", eta)] {
        if !value.is_finite() || value < T::zero() {
            return Err(Error::param(name, format!("must be finite and >= 0, got {value}")));
        }
    }
    Ok(tau0 + eta)
}

/// Outcome of the request sent to the front vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommOutcome<T> {
    /// The front vehicle answered with its actual parameters after latency `eta`.
    Response { params: VehicleParams<T>, eta: T },
    Timeout,
}

/// Where the rear vehicle's knowledge of the front vehicle came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoSource {
    Response,
    PerceptionFallback,
    ConservativeDefaults,
}

impl InfoSource {
    pub fn as_str(self) -> &'static str {
        match self {
            InfoSource::Response => "response",
            InfoSource::PerceptionFallback => "perception_fallback",
            InfoSource::ConservativeDefaults => "conservative_defaults",
        }
    }
}

impl fmt::Display for InfoSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InfoSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "response" => Ok(InfoSource::Response),
            "perception_fallback" => Ok(InfoSource::PerceptionFallback),
            "conservative_defaults" => Ok(InfoSource::ConservativeDefaults),
            other => Err(Error::InvalidInput(format!("unknown info source `{other}`"))),
        }
    }
}

/// Per-metric observations of the front vehicle from the perception system.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceivedFront<T> {
    pub front_speed: ObservationSet<T>,
    pub max_brake: ObservationSet<T>,
    pub length: ObservationSet<T>,
    pub response_time: ObservationSet<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontInfoResolution<T> {
    pub source: InfoSource,
    pub params: VehicleParams<T>,
    /// Rear response time to use with these parameters.
    pub effective_tau: T,
}

/// Resolves what the rear vehicle knows about the front vehicle.
///
/// A response uses the communicated parameters and the response time
/// `e_tau·tau0 + eta`. Otherwise the perception path (or the defaults) is used
/// with the plain `tau0`, since no message latency is involved.
pub fn resolve_front_info<T: Scalar>(
    outcome: CommOutcome<T>,
    perception: Option<&PerceivedFront<T>>,
    defaults: &VehicleParams<T>,
    rear_tau0: T,
    dev: &DeviationSet<T>,
) -> FrontInfoResolution<T> {
    match (outcome, perception) {
        (CommOutcome::Response { params, eta }, _) => FrontInfoResolution {
            source: InfoSource::Response,
            params,
            effective_tau: dev.e_tau() * rear_tau0 + eta,
        },
        (CommOutcome::Timeout, Some(obs)) => {
            let params = VehicleParams {
                length: perception::conservative_observation(&obs.length, MetricKind::Length),
                a_max_brake: perception::conservative_observation(
                    &obs.max_brake,
                    MetricKind::MaxBrake,
                ),
                a_max_acc: defaults.a_max_acc,
                speed: perception::conservative_observation(
                    &obs.front_speed,
                    MetricKind::FrontSpeed,
                ),
                tau0: perception::conservative_observation(
                    &obs.response_time,
                    MetricKind::ResponseTime,
                ),
            };
            FrontInfoResolution {
                source: InfoSource::PerceptionFallback,
                params,
                effective_tau: rear_tau0,
            }
        }
        (CommOutcome::Timeout, None) => FrontInfoResolution {
            source: InfoSource::ConservativeDefaults,
            params: *defaults,
            effective_tau: rear_tau0,
        },
    }
}

/// Safe distance once the front vehicle's parameters have been corrected by
/// communication.
///
/// `front_conservative` holds the perception estimates; the deviation ratios
/// turn them into actual values. The rear response time is `e_tau·tau0 + eta`
/// and the rear keeps its own braking capability. The trivial branch yields
/// the centre distance of two touching bodies of lengths `L` and `L·e_L`.
pub fn corrected_safe_distance<T: Scalar>(
    rear: &VehicleParams<T>,
    front_conservative: &VehicleParams<T>,
    dev: &DeviationSet<T>,
    eta: T,
) -> Result<T> {
    rear.validate()?;
    let front = perception::corrected_params(front_conservative, dev)?;
    let response = effective_response_time(dev.e_tau() * rear.tau0, eta)?;

    let peak = rear.speed + response * rear.a_max_acc;
    let t_rear = response + peak / rear.a_max_brake;
    let t_front = front.speed / front.a_max_brake;

    let half = T::half();
    let length = front_conservative.length;
    let touching = half * (length + length * dev.e_length());
    if t_front >= t_rear {
        return Ok(touching);
    }
    let raw = half
        * ((length + length * dev.e_length()) - front.speed * t_front
            + (rear.speed + peak) * response
            + peak * peak / rear.a_max_brake);
    Ok(raw.max(touching))
}

/// The PBV distance for the same pair, for side-by-side comparisons.
pub fn perception_safe_distance<T: Scalar>(
    rear: &VehicleParams<T>,
    front: &VehicleParams<T>,
) -> Result<T> {
    kinematics::safe_longitudinal_distance(rear, front, rear.tau0)
}
