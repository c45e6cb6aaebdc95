//! Conservative observations, perception inaccuracy and the deviation ratios
//! that relate a conservative estimate to the value communicated by the
//! vehicle itself.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::VehicleParams;
use crate::scalar::Scalar;

/// Which metric an observation set measures. Front speed is biased low, the
/// rest are biased high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    FrontSpeed,
    MaxBrake,
    Length,
    ResponseTime,
}

/// Repeated measurements of one metric plus the known biases of the sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet<T> {
    samples: Vec<T>,
    biases: Vec<T>,
}

impl<T: Scalar> ObservationSet<T> {
    pub fn new(samples: Vec<T>, biases: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("observation set has no samples".into()));
        }
        if biases.is_empty() {
            return Err(Error::InvalidInput("observation set has no biases".into()));
        }
        if samples.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "observation set contains a non-finite value".into(),
            ));
        }
        Ok(Self { samples, biases })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    pub fn ensemble_mean(&self) -> T {
        let sum = self.samples.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / T::from_usize(self.samples.len()).expect("sample count fits scalar")
    }
}

/// Λ(M): ensemble average shifted by the most safety-preserving sensor bias.
pub fn conservative_observation<T: Scalar>(obs: &ObservationSet<T>, kind: MetricKind) -> T {
    let mean = obs.ensemble_mean();
    let bias = match kind {
        MetricKind::FrontSpeed => obs.biases.iter().copied().fold(T::infinity(), T::min),
        MetricKind::MaxBrake | MetricKind::Length | MetricKind::ResponseTime => {
            obs.biases.iter().copied().fold(T::neg_infinity(), T::max)
        }
    };
    mean + bias
}

/// Φ(M) = |1 − actual / conservative|.
pub fn inaccuracy<T: Scalar>(actual: T, conservative: T) -> Result<T> {
    if conservative == T::zero() {
        return Err(Error::DivisionByZero("conservative estimate is zero"));
    }
    Ok((T::one() - actual / conservative).abs())
}

/// Admissible range for a [`DeviationSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationRegime {
    /// Every conservative estimate really is conservative:
    /// `e_L, e_brake, e_tau ∈ (0, 1]`, `e_V ≥ 1`.
    #[default]
    Conservative,
    /// Conservative and within 5 % inaccuracy on every metric.
    GoodPerception,
    /// Any positive finite ratio. Used to exhibit behaviour outside the
    /// hypotheses of the capacity results.
    Unrestricted,
}

impl DeviationRegime {
    pub fn name(self) -> &'static str {
        match self {
            DeviationRegime::Conservative => "conservative",
            DeviationRegime::GoodPerception => "good-perception",
            DeviationRegime::Unrestricted => "unrestricted",
        }
    }
}

impl fmt::Display for DeviationRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The four ratios actual / conservative for length, front speed, braking
/// and response time. Validated against its regime on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationSet<T> {
    e_length: T,
    e_front_speed: T,
    e_brake: T,
    e_tau: T,
    regime: DeviationRegime,
}

impl<T: Scalar> DeviationSet<T> {
    pub fn new(
        e_length: T,
        e_front_speed: T,
        e_brake: T,
        e_tau: T,
        regime: DeviationRegime,
    ) -> Result<Self> {
        let set = Self {
            e_length,
            e_front_speed,
            e_brake,
            e_tau,
            regime,
        };
        set.check(regime)?;
        Ok(set)
    }

    /// All ratios equal to one: perception already reports the actual values.
    pub fn unit() -> Self {
        Self {
            e_length: T::one(),
            e_front_speed: T::one(),
            e_brake: T::one(),
            e_tau: T::one(),
            regime: DeviationRegime::Conservative,
        }
    }

    pub fn e_length(&self) -> T {
        self.e_length
    }

    pub fn e_front_speed(&self) -> T {
        self.e_front_speed
    }

    pub fn e_brake(&self) -> T {
        self.e_brake
    }

    pub fn e_tau(&self) -> T {
        self.e_tau
    }

    pub fn regime(&self) -> DeviationRegime {
        self.regime
    }

    /// Re-validates against another regime, returning the set tagged with it.
    pub fn in_regime(&self, regime: DeviationRegime) -> Result<Self> {
        self.check(regime)?;
        Ok(Self { regime, ..*self })
    }

    pub fn is_conservative(&self) -> bool {
        self.check(DeviationRegime::Conservative).is_ok()
    }

    fn check(&self, regime: DeviationRegime) -> Result<()> {
        let fields = [
            ("e_L", self.e_length, false),
            ("e_V", self.e_front_speed, true),
            ("e_brake", self.e_brake, false),
            ("e_tau", self.e_tau, false),
        ];
        for (field, value, speed_like) in fields {
            let ok = value.is_finite()
                && value > T::zero()
                && match regime {
                    DeviationRegime::Unrestricted => true,
                    DeviationRegime::Conservative => {
                        if speed_like {
                            value >= T::one()
                        } else {
                            value <= T::one()
                        }
                    }
                    DeviationRegime::GoodPerception => {
                        if speed_like {
                            value >= T::one() && value <= T::lit(1.05)
                        } else {
                            value >= T::lit(0.95) && value <= T::one()
                        }
                    }
                };
            if !ok {
                return Err(Error::InvalidDeviation {
                    field,
                    value: value.to_f64().unwrap_or(f64::NAN),
                    regime: regime.name(),
                });
            }
        }
        Ok(())
    }
}

/// Applies the deviation ratios to conservative parameters, giving the
/// actual values the front vehicle communicates: `L·e_L`, `V·e_V`,
/// `a_brake·e_brake`, `tau0·e_tau`.
pub fn corrected_params<T: Scalar>(
    conservative: &VehicleParams<T>,
    dev: &DeviationSet<T>,
) -> Result<VehicleParams<T>> {
    conservative.validate()?;
    dev.check(dev.regime)?;
    VehicleParams::new(
        conservative.length * dev.e_length,
        conservative.a_max_brake * dev.e_brake,
        conservative.a_max_acc,
        conservative.speed * dev.e_front_speed,
        conservative.tau0 * dev.e_tau,
    )
}

/// Inverse of [`corrected_params`]: the conservative estimate a perception
/// system with these deviations would report for the given actual values.
pub fn conservative_from_actual<T: Scalar>(
    actual: &VehicleParams<T>,
    dev: &DeviationSet<T>,
) -> Result<VehicleParams<T>> {
    actual.validate()?;
    dev.check(dev.regime)?;
    VehicleParams::new(
        actual.length / dev.e_length,
        actual.a_max_brake / dev.e_brake,
        actual.a_max_acc,
        actual.speed / dev.e_front_speed,
        actual.tau0 / dev.e_tau,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(samples: &[f64], biases: &[f64]) -> ObservationSet<f64> {
        ObservationSet::new(samples.to_vec(), biases.to_vec()).unwrap()
    }

    #[test]
    fn conservative_observation_examples() {
        let speed = obs(&[10.0, 10.0, 10.0], &[-0.5, 0.5]);
        assert_eq!(conservative_observation(&speed, MetricKind::FrontSpeed), 9.5);
        for kind in [
            MetricKind::FrontSpeed,
            MetricKind::MaxBrake,
            MetricKind::Length,
            MetricKind::ResponseTime,
        ] {
            assert_eq!(conservative_observation(&obs(&[5.0], &[0.0]), kind), 5.0);
        }
        let brake = obs(&[8.9, 9.1], &[-0.2, 0.3]);
        assert!((conservative_observation(&brake, MetricKind::MaxBrake) - 9.3).abs() < 1e-12);
        assert!((conservative_observation(&speed, MetricKind::Length) - 10.5).abs() < 1e-12);
    }

    #[test]
    fn empty_observation_sets_rejected() {
        assert!(ObservationSet::<f64>::new(vec![], vec![0.0]).is_err());
        assert!(ObservationSet::new(vec![1.0], Vec::<f64>::new()).is_err());
        assert!(ObservationSet::new(vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn inaccuracy_examples() {
        assert_eq!(inaccuracy(9.0, 9.0).unwrap(), 0.0);
        assert!((inaccuracy(1.05_f64, 1.0).unwrap() - 0.05).abs() < 1e-12);
        assert!((inaccuracy(8.55_f64, 9.0).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(inaccuracy(1.0, 0.0), Err(Error::DivisionByZero("conservative estimate is zero")));
    }

    #[test]
    fn regimes_validate_eagerly() {
        use DeviationRegime::*;
        assert!(DeviationSet::new(0.96, 1.02, 0.97, 0.95, GoodPerception).is_ok());
        assert!(DeviationSet::new(0.9, 1.0, 1.0, 1.0, GoodPerception).is_err());
        assert!(DeviationSet::new(0.9, 1.0, 1.0, 1.0, Conservative).is_ok());
        let err = DeviationSet::new(1.0, 0.99, 1.0, 1.0, Conservative).unwrap_err();
        assert!(matches!(err, Error::InvalidDeviation { field: "e_V", .. }));
        let err = DeviationSet::new(1.0, 1.0, 1.01, 1.0, Conservative).unwrap_err();
        assert!(matches!(err, Error::InvalidDeviation { field: "e_brake", .. }));
        assert!(DeviationSet::new(1.2, 0.8, 1.1, 1.3, Unrestricted).is_ok());
        assert!(DeviationSet::new(0.0, 1.0, 1.0, 1.0, Unrestricted).is_err());
        assert!(DeviationSet::new(1.0, 0.8, 1.0, 1.0, Unrestricted)
            .unwrap()
            .in_regime(Conservative)
            .is_err());
    }

    #[test]
    fn corrected_params_examples() {
        let base = VehicleParams::new(5.0_f64, 9.0, 3.0, 27.78, 0.4).unwrap();
        assert_eq!(corrected_params(&base, &DeviationSet::unit()).unwrap(), base);

        let dev = DeviationSet::new(0.96, 1.0, 1.0, 0.95, DeviationRegime::Conservative).unwrap();
        let c = corrected_params(&base, &dev).unwrap();
        assert!((c.length - 4.8).abs() < 1e-12);
        assert!((c.tau0 - 0.38).abs() < 1e-12);
        assert_eq!(c.a_max_acc, base.a_max_acc);

        let back = conservative_from_actual(&c, &dev).unwrap();
        assert!((back.length - base.length).abs() < 1e-12);
        assert!((back.tau0 - base.tau0).abs() < 1e-12);
    }
}
