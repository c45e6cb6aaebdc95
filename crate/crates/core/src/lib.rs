//! Safe longitudinal distances, safe-driving throughput and safe-driving
//! capacity for roads of perception-based (PBV) and cooperative (CBV)
//! autonomous vehicles.
//!
//! The distance and capacity math is generic over the [`Scalar`] type; the
//! aliases below fix it to `f64` (and `f32` where useful). Simulation, trace
//! monitoring and sweeps work in `f64`.

pub mod capacity;
pub mod cooperative;
pub mod error;
pub mod kinematics;
pub mod ltl;
pub mod perception;
pub mod scalar;
pub mod simulator;
pub mod sweep;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type VehicleParamsF64 = kinematics::VehicleParams<f64>;
pub type VehicleParamsF32 = kinematics::VehicleParams<f32>;
pub type BrakingScenarioF64 = kinematics::BrakingScenario<f64>;
pub type DeviationSetF64 = perception::DeviationSet<f64>;
pub type DeviationSetF32 = perception::DeviationSet<f32>;
pub type ObservationSetF64 = perception::ObservationSet<f64>;
pub type RoadSpecF64 = capacity::RoadSpec<f64>;
pub type CapacityPointF64 = capacity::CapacityPoint<f64>;
pub type FrontInfoResolutionF64 = cooperative::FrontInfoResolution<f64>;
