//! Longitudinal braking kinematics for a rear/front vehicle pair.
//!
//! The front vehicle applies full braking at `t = 0`. The rear vehicle keeps
//! accelerating at `a_max_acc` for its whole response time `tau` (the worst
//! case), then brakes at its own `a_max_brake` until it halts. Speeds never go
//! negative. All quantities are SI: metres, seconds, m/s and m/s².
//!
//! Distances are centre-to-centre, so two vehicles of length `L` touch when the
//! gap between their centres is `L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Physical and response parameters of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams<T> {
    /// Body length in metres.
    pub length: T,
    /// Magnitude of the full-brake deceleration, m/s².
    pub a_max_brake: T,
    /// Maximum acceleration, m/s².
    pub a_max_acc: T,
    /// Current speed, m/s.
    pub speed: T,
    /// Machine response time, s.
    pub tau0: T,
}

impl<T: Scalar> VehicleParams<T> {
    pub fn new(length: T, a_max_brake: T, a_max_acc: T, speed: T, tau0: T) -> Result<Self> {
        let params = Self {
            length,
            a_max_brake,
            a_max_acc,
            speed,
            tau0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("length", self.length),
            ("a_max_brake", self.a_max_brake),
            ("a_max_acc", self.a_max_acc),
            ("speed", self.speed),
            ("tau0", self.tau0),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::param(name, format!("non-finite value {value}")));
            }
        }
        if self.a_max_brake <= T::zero() {
            return Err(Error::param(
                "a_max_brake",
                format!("must be > 0, got {}", self.a_max_brake),
            ));
        }
        if self.length <= T::zero() {
            return Err(Error::param("length", format!("must be > 0, got {}", self.length)));
        }
        for (name, value) in [
            ("a_max_acc", self.a_max_acc),
            ("speed", self.speed),
            ("tau0", self.tau0),
        ] {
            if value < T::zero() {
                return Err(Error::param(name, format!("must be >= 0, got {value}")));
            }
        }
        Ok(())
    }

    pub fn with_speed(mut self, speed: T) -> Self {
        self.speed = speed;
        self
    }

    pub fn with_tau0(mut self, tau0: T) -> Self {
        self.tau0 = tau0;
        self
    }

    /// Distance covered while braking from the current speed to a halt.
    pub fn braking_distance(&self) -> T {
        self.speed * self.speed / (T::lit(2.0) * self.a_max_brake)
    }
}

fn check_response_time<T: Scalar>(tau: T) -> Result<()> {
    if !tau.is_finite() {
        return Err(Error::param("tau", format!("non-finite value {tau}")));
    }
    if tau < T::zero() {
        return Err(Error::param("tau", format!("must be >= 0, got {tau}")));
    }
    Ok(())
}

/// Highest speed the rear vehicle can reach by the end of its response time.
pub fn max_speed_after_response<T: Scalar>(rear: &VehicleParams<T>, tau: T) -> Result<T> {
    rear.validate()?;
    check_response_time(tau)?;
    Ok(rear.speed + tau * rear.a_max_acc)
}

/// Time from the front vehicle's brake onset until the rear vehicle halts.
pub fn time_to_stop_rear<T: Scalar>(rear: &VehicleParams<T>, tau: T) -> Result<T> {
    let peak = max_speed_after_response(rear, tau)?;
    Ok(tau + peak / rear.a_max_brake)
}

/// Time for the front vehicle to halt under full braking.
pub fn time_to_stop_front<T: Scalar>(front: &VehicleParams<T>) -> Result<T> {
    front.validate()?;
    Ok(front.speed / front.a_max_brake)
}

/// Minimum centre-to-centre gap that keeps the rear vehicle clear of a
/// suddenly braking front vehicle.
///
/// When the front vehicle needs at least as long as the rear one to halt the
/// answer is the body length. Otherwise it is the body length plus the rear
/// stopping distance (response phase plus braking phase) minus the front
/// stopping distance, never less than the body length.
pub fn safe_longitudinal_distance<T: Scalar>(
    rear: &VehicleParams<T>,
    front: &VehicleParams<T>,
    tau: T,
) -> Result<T> {
    let t_rear = time_to_stop_rear(rear, tau)?;
    let t_front = time_to_stop_front(front)?;
    if rear.length != front.length {
        return Err(Error::param(
            "length",
            format!(
                "fleet must share one vehicle length, got rear {} and front {}",
                rear.length, front.length
            ),
        ));
    }
    let length = rear.length;
    if t_front >= t_rear {
        return Ok(length);
    }
    let half = T::half();
    let peak = rear.speed + tau * rear.a_max_acc;
    let response_leg = half * (rear.speed + peak) * tau;
    let braking_leg = half * (t_rear - tau) * peak;
    let front_leg = half * front.speed * t_front;
    Ok((length + response_leg + braking_leg - front_leg).max(length))
}

/// A rear/front pair at a given initial centre gap, used for trajectory queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakingScenario<T> {
    pub rear: VehicleParams<T>,
    pub front: VehicleParams<T>,
    pub initial_gap: T,
    pub response_time: T,
    /// Optional ceiling on the rear vehicle's speed while it accelerates.
    pub rear_speed_cap: Option<T>,
}

impl<T: Scalar> BrakingScenario<T> {
    pub fn new(
        rear: VehicleParams<T>,
        front: VehicleParams<T>,
        initial_gap: T,
        response_time: T,
    ) -> Result<Self> {
        rear.validate()?;
        front.validate()?;
        check_response_time(response_time)?;
        if !initial_gap.is_finite() || initial_gap < rear.length {
            return Err(Error::param(
                "initial_gap",
                format!(
                    "must be >= vehicle length {}, got {}",
                    rear.length, initial_gap
                ),
            ));
        }
        Ok(Self {
            rear,
            front,
            initial_gap,
            response_time,
            rear_speed_cap: None,
        })
    }

    pub fn with_speed_cap(mut self, cap: T) -> Self {
        self.rear_speed_cap = Some(cap);
        self
    }

    /// Front displacement after `t` seconds of full braking.
    pub fn front_displacement(&self, t: T) -> T {
        braking_displacement(self.front.speed, self.front.a_max_brake, t).0
    }

    /// Rear displacement after `t` seconds: acceleration for the response
    /// time, then full braking.
    pub fn rear_displacement(&self, t: T) -> T {
        let response = t.min(self.response_time);
        let (accel_leg, peak) = accelerating_displacement(
            self.rear.speed,
            self.rear.a_max_acc,
            self.rear_speed_cap,
            response,
        );
        if t <= self.response_time {
            return accel_leg;
        }
        let braking = t - self.response_time;
        accel_leg + braking_displacement(peak, self.rear.a_max_brake, braking).0
    }

    /// Centre-to-centre gap at time `t`. Negative `t` is treated as `0`.
    pub fn gap_at_time(&self, t: T) -> T {
        let t = t.max(T::zero());
        self.initial_gap + self.front_displacement(t) - self.rear_displacement(t)
    }

    /// Time after which neither vehicle moves.
    pub fn halt_time(&self) -> T {
        let response = self.response_time;
        let (_, peak) = accelerating_displacement(
            self.rear.speed,
            self.rear.a_max_acc,
            self.rear_speed_cap,
            response,
        );
        let rear_halt = response + peak / self.rear.a_max_brake;
        let front_halt = self.front.speed / self.front.a_max_brake;
        rear_halt.max(front_halt)
    }
}

/// Free function form of [`BrakingScenario::gap_at_time`].
pub fn gap_at_time<T: Scalar>(scenario: &BrakingScenario<T>, t: T) -> T {
    scenario.gap_at_time(t)
}

/// Displacement and end speed when braking from `speed` at `decel` for `t`.
fn braking_displacement<T: Scalar>(speed: T, decel: T, t: T) -> (T, T) {
    let stop = speed / decel;
    if t >= stop {
        (speed * stop * T::half(), T::zero())
    } else {
        (speed * t - T::half() * decel * t * t, speed - decel * t)
    }
}

fn accelerating_displacement<T: Scalar>(speed: T, acc: T, cap: Option<T>, t: T) -> (T, T) {
    let Some(cap) = cap else {
        return (speed * t + T::half() * acc * t * t, speed + acc * t);
    };
    if speed >= cap || acc <= T::zero() {
        return (speed * t, speed);
    }
    let reach = (cap - speed) / acc;
    if t <= reach {
        (speed * t + T::half() * acc * t * t, speed + acc * t)
    } else {
        let ramp = speed * reach + T::half() * acc * reach * reach;
        (ramp + cap * (t - reach), cap)
    }
}

/// Bisection tolerance on the initial gap used by [`min_safe_gap_oracle`], metres.
pub const ORACLE_GAP_TOLERANCE: f64 = 1e-3;

/// Default integration step for [`min_safe_gap_oracle`], seconds.
pub const ORACLE_DEFAULT_DT: f64 = 1e-3;

/// Smallest initial centre gap for which a time-stepped simulation of the
/// worst-case braking manoeuvre never brings the centres closer than `L`.
///
/// Independent of the closed form: it integrates both vehicles with a
/// piecewise-constant acceleration per step (split at the end of the response
/// time) and bisects on the initial gap.
pub fn min_safe_gap_oracle<T: Scalar>(
    rear: &VehicleParams<T>,
    front: &VehicleParams<T>,
    tau: T,
    dt: T,
) -> Result<T> {
    rear.validate()?;
    front.validate()?;
    check_response_time(tau)?;
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(Error::param("dt", format!("must be finite and > 0, got {dt}")));
    }
    let length = rear.length;
    let stepper = PairStepper {
        rear,
        front,
        tau,
        dt,
    };
    if !stepper.collides(length)? {
        return Ok(length);
    }

    // Upper bracket: the rear vehicle's own travel bounds the gap it can eat.
    let peak = rear.speed + tau * rear.a_max_acc;
    let rear_travel = T::half() * (rear.speed + peak) * tau
        + peak * peak / (T::lit(2.0) * rear.a_max_brake);
    let mut lo = length;
    let mut hi = length + rear_travel + T::one();
    let mut widen = 0;
    while stepper.collides(hi)? {
        lo = hi;
        hi = hi + (hi - length).max(T::one());
        widen += 1;
        if widen > 60 {
            return Err(Error::Internal(format!(
                "oracle bracket failure: gap {hi} still collides"
            )));
        }
    }

    let tol = T::lit(ORACLE_GAP_TOLERANCE);
    while hi - lo > tol {
        let mid = T::half() * (lo + hi);
        if stepper.collides(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

struct PairStepper<'a, T> {
    rear: &'a VehicleParams<T>,
    front: &'a VehicleParams<T>,
    tau: T,
    dt: T,
}

impl<T: Scalar> PairStepper<'_, T> {
    const MAX_STEPS: usize = 50_000_000;

    /// Whether the centres ever come closer than `L` from initial gap `d0`.
    fn collides(&self, d0: T) -> Result<bool> {
        let length = self.rear.length;
        let (mut x_rear, mut v_rear) = (T::zero(), self.rear.speed);
        let (mut x_front, mut v_front) = (d0, self.front.speed);

        for step in 0..Self::MAX_STEPS {
            let t0 = T::from_usize(step).expect("step index fits scalar") * self.dt;
            let t1 = t0 + self.dt;

            // Rear: accelerate up to tau, brake after it.
            let mut cursor = t0;
            if cursor < self.tau {
                let until = t1.min(self.tau);
                let h = until - cursor;
                x_rear = x_rear + v_rear * h + T::half() * self.rear.a_max_acc * h * h;
                v_rear = v_rear + self.rear.a_max_acc * h;
                cursor = until;
            }
            if cursor < t1 {
                brake_step(&mut x_rear, &mut v_rear, self.rear.a_max_brake, t1 - cursor);
            }
            brake_step(&mut x_front, &mut v_front, self.front.a_max_brake, self.dt);

            if x_front - x_rear < length {
                return Ok(true);
            }
            if t1 >= self.tau && v_rear == T::zero() && v_front == T::zero() {
                return Ok(false);
            }
        }
        Err(Error::Internal(
            "oracle simulation did not reach a full stop".into(),
        ))
    }
}

fn brake_step<T: Scalar>(x: &mut T, v: &mut T, decel: T, h: T) {
    if *v <= decel * h {
        *x = *x + *v * *v / (T::lit(2.0) * decel);
        *v = T::zero();
    } else {
        *x = *x + *v * h - T::half() * decel * h * h;
        *v = *v - decel * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(speed: f64, acc: f64, brake: f64, tau0: f64) -> VehicleParams<f64> {
        VehicleParams::new(5.0, brake, acc, speed, tau0).unwrap()
    }

    #[test]
    fn peak_speed_examples() {
        let rear = car(27.78, 3.0, 9.0, 0.5);
        assert!((max_speed_after_response(&rear, 0.5).unwrap() - 29.28).abs() < 1e-12);
        assert_eq!(max_speed_after_response(&car(10.0, 0.0, 9.0, 0.0), 5.0).unwrap(), 10.0);
        assert_eq!(max_speed_after_response(&car(0.0, 2.2, 9.0, 0.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn peak_speed_rejects_non_finite() {
        let rear = car(10.0, 1.0, 9.0, 0.0);
        assert!(max_speed_after_response(&rear, f64::NAN).is_err());
        assert!(max_speed_after_response(&rear, f64::INFINITY).is_err());
        let mut bad = rear;
        bad.speed = f64::NAN;
        assert!(max_speed_after_response(&bad, 0.5).is_err());
    }

    #[test]
    fn stop_time_examples() {
        let rear = car(27.78, 3.0, 9.0, 0.5);
        assert!((time_to_stop_rear(&rear, 0.5).unwrap() - (0.5 + 29.28 / 9.0)).abs() < 1e-12);
        assert!((time_to_stop_rear(&rear, 0.5).unwrap() - 3.7533).abs() < 1e-4);
        assert_eq!(time_to_stop_rear(&car(0.0, 0.0, 9.0, 0.0), 0.0).unwrap(), 0.0);
        assert_eq!(time_to_stop_rear(&car(9.0, 0.0, 9.0, 0.0), 1.0).unwrap(), 2.0);

        assert!((time_to_stop_front(&car(27.78, 3.0, 9.0, 0.5)).unwrap() - 27.78 / 9.0).abs() < 1e-12);
        // 100 km/h exactly
        assert!((time_to_stop_front(&car(100.0 / 3.6, 3.0, 9.0, 0.5)).unwrap() - 3.0864).abs() < 1e-4);
        assert_eq!(time_to_stop_front(&car(0.0, 3.0, 9.0, 0.5)).unwrap(), 0.0);
        assert_eq!(time_to_stop_front(&car(18.0, 3.0, 9.0, 0.5)).unwrap(), 2.0);
    }

    #[test]
    fn zero_brake_is_rejected() {
        let mut bad = car(10.0, 1.0, 9.0, 0.0);
        bad.a_max_brake = 0.0;
        assert!(matches!(
            time_to_stop_front(&bad),
            Err(Error::InvalidParameter { name: "a_max_brake", .. })
        ));
        assert!(time_to_stop_rear(&bad, 0.1).is_err());
        assert!(VehicleParams::new(5.0, -1.0, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn highway_distance_matches_stopping_distance_difference() {
        let rear = car(27.78, 3.0, 9.0, 0.5);
        let front = car(27.78, 3.0, 9.0, 0.5);
        let d = safe_longitudinal_distance(&rear, &front, 0.5).unwrap();
        // rear: 0.5*(27.78+29.28)*0.5 + 29.28^2/18 = 61.89; front: 27.78^2/18 = 42.87
        let rear_stop = 0.5 * (27.78 + 29.28) * 0.5 + 29.28 * 29.28 / 18.0;
        let front_stop = 27.78 * 27.78 / 18.0;
        assert!((d - (5.0 + rear_stop - front_stop)).abs() < 1e-9);
        assert!((d - 24.02).abs() < 5e-3);
    }

    #[test]
    fn stopped_rear_needs_only_body_length() {
        let rear = car(0.0, 0.0, 9.0, 0.0);
        let front = car(27.78, 3.0, 9.0, 0.0);
        assert_eq!(safe_longitudinal_distance(&rear, &front, 0.0).unwrap(), 5.0);
    }

    #[test]
    fn formula_below_body_length_is_clamped() {
        // T_f < T_r but the rear never moves: raw branch would give L - V_f^2/(2a).
        let rear = car(0.0, 0.0, 9.0, 2.0);
        let front = car(9.0, 0.0, 9.0, 0.0);
        assert!(time_to_stop_front(&front).unwrap() < time_to_stop_rear(&rear, 2.0).unwrap());
        assert_eq!(safe_longitudinal_distance(&rear, &front, 2.0).unwrap(), 5.0);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let rear = car(10.0, 1.0, 9.0, 0.5);
        let front = VehicleParams::new(4.0, 9.0, 1.0, 10.0, 0.5).unwrap();
        assert!(safe_longitudinal_distance(&rear, &front, 0.5).is_err());
    }

    #[test]
    fn gap_trajectory_endpoints() {
        let rear = car(27.78, 3.0, 9.0, 0.5);
        let front = car(27.78, 3.0, 9.0, 0.5);
        let d0 = safe_longitudinal_distance(&rear, &front, 0.5).unwrap();
        let scenario = BrakingScenario::new(rear, front, d0, 0.5).unwrap();
        assert_eq!(scenario.gap_at_time(0.0), d0);

        let halt = scenario.halt_time();
        let settled = scenario.gap_at_time(halt);
        assert_eq!(scenario.gap_at_time(halt + 1.0), settled);
        assert_eq!(scenario.gap_at_time(halt + 100.0), settled);

        // Minimum sits at the rear halt time and equals L.
        let t_rear = time_to_stop_rear(&rear, 0.5).unwrap();
        assert!((scenario.gap_at_time(t_rear) - 5.0).abs() < 1e-6);
        let min = (0..=20_000)
            .map(|k| scenario.gap_at_time(k as f64 * 1e-3))
            .fold(f64::INFINITY, f64::min);
        assert!((min - 5.0).abs() < 1e-6, "min gap {min}");
    }

    #[test]
    fn scenario_rejects_overlap() {
        let rear = car(10.0, 1.0, 9.0, 0.5);
        assert!(BrakingScenario::new(rear, rear, 4.0, 0.5).is_err());
    }

    #[test]
    fn speed_cap_limits_response_phase() {
        let rear = car(20.0, 4.0, 9.0, 1.0);
        let front = car(20.0, 4.0, 9.0, 1.0);
        let free = BrakingScenario::new(rear, front, 50.0, 1.0).unwrap();
        let capped = free.with_speed_cap(21.0);
        // 0.25 s to reach the cap, then constant speed.
        let expected = 20.0 * 0.25 + 0.5 * 4.0 * 0.0625 + 21.0 * 0.75;
        assert!((capped.rear_displacement(1.0) - expected).abs() < 1e-12);
        assert!(capped.gap_at_time(5.0) > free.gap_at_time(5.0));
    }

    #[test]
    fn oracle_reproduces_highway_distance() {
        let rear = car(27.78, 3.0, 9.0, 0.5);
        let oracle = min_safe_gap_oracle(&rear, &rear, 0.5, 1e-3).unwrap();
        assert!((oracle - 24.02).abs() < 0.03, "oracle {oracle}");
    }

    #[test]
    fn oracle_stationary_rear_is_body_length() {
        let rear = car(0.0, 0.0, 9.0, 0.0);
        let front = car(15.0, 0.0, 9.0, 0.0);
        assert_eq!(min_safe_gap_oracle(&rear, &front, 0.7, 1e-3).unwrap(), 5.0);
    }

    #[test]
    fn oracle_rejects_bad_step() {
        let rear = car(10.0, 1.0, 9.0, 0.5);
        assert!(min_safe_gap_oracle(&rear, &rear, 0.5, 0.0).is_err());
        assert!(min_safe_gap_oracle(&rear, &rear, 0.5, f64::NAN).is_err());
    }

    #[test]
    fn single_precision_closed_form() {
        let rear = VehicleParams::<f32>::new(5.0, 9.0, 3.0, 27.78, 0.5).unwrap();
        let d = safe_longitudinal_distance(&rear, &rear, 0.5).unwrap();
        assert!((d - 24.02).abs() < 1e-3);
    }
}
