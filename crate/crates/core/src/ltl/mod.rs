//! Finite-trace bounded LTL monitoring and the road-level safety predicates.
//!
//! A vehicle is in the safe state when, over the whole horizon, best-effort
//! braking never coincides with carrying responsibility for an accident:
//! `G[0,T](BER -> !Y)`. A road is safe when every vehicle on it is, and its
//! safe-driving throughput counts the safe vehicles.

mod eval;
mod formula;
mod trace;

pub use eval::{evaluate, evaluate_with, satisfaction, Boundary};
pub use formula::{Formula, ATOMS, HORIZON};
pub use trace::{read_traces_csv, write_traces_csv, Trace, VehicleState};

use crate::error::{Error, Result};

/// `G[0,T](BER -> !Y)`.
pub fn vehicle_safety_formula() -> Formula {
    Formula::globally(
        0,
        HORIZON,
        Formula::implies(Formula::atom("BER"), Formula::not(Formula::atom("Y"))),
    )
}

/// `!F[0,T](BER -> Y)`, which is equivalent to `G[0,T](BER & !Y)`: it also
/// demands that BER is active at every step, so it is stricter than
/// [`vehicle_safety_formula`]. Kept to show the difference on real traces.
pub fn negated_eventual_blame_formula() -> Formula {
    Formula::not(Formula::finally(
        0,
        HORIZON,
        Formula::implies(Formula::atom("BER"), Formula::atom("Y")),
    ))
}

pub fn vehicle_safe(trace: &Trace) -> bool {
    evaluate(trace, 0, &vehicle_safety_formula()).expect("safety formula uses known atoms")
}

fn check_common_horizon(traces: &[Trace]) -> Result<()> {
    let Some(first) = traces.first() else {
        return Ok(());
    };
    for t in traces {
        t.validate()?;
        let same_dt = (t.dt - first.dt).abs() <= 1e-9 * first.dt.max(1.0);
        if t.len() != first.len() || !same_dt {
            return Err(Error::InvalidInput(format!(
                "trace `{}` (len {}, dt {}) does not share the horizon of `{}` (len {}, dt {})",
                t.vehicle_id,
                t.len(),
                t.dt,
                first.vehicle_id,
                first.len(),
                first.dt
            )));
        }
    }
    Ok(())
}

/// Every vehicle on the road is in the safe state. An empty road is safe.
pub fn road_safe(traces: &[Trace]) -> Result<bool> {
    check_common_horizon(traces)?;
    Ok(traces.iter().all(vehicle_safe))
}

/// Safe-driving throughput: how many vehicles are in the safe state.
pub fn sdt(traces: &[Trace]) -> Result<usize> {
    check_common_horizon(traces)?;
    Ok(traces.iter().filter(|t| vehicle_safe(t)).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(id: &str, flags: &[(bool, bool)]) -> Trace {
        let steps = flags
            .iter()
            .map(|&(ber, y)| VehicleState {
                ber_active: ber,
                responsible: y,
                collided: y,
                ..VehicleState::default()
            })
            .collect();
        Trace::new(id, steps, 0.1).unwrap()
    }

    #[test]
    fn vehicle_safety() {
        assert!(vehicle_safe(&trace("a", &[(false, false), (false, true)])));
        assert!(!vehicle_safe(&trace("a", &[(false, false), (true, true)])));
        assert!(vehicle_safe(&trace("a", &[(true, false), (true, false)])));
    }

    #[test]
    fn road_and_throughput() {
        assert!(road_safe(&[]).unwrap());
        assert_eq!(sdt(&[]).unwrap(), 0);

        let safe = trace("s", &[(false, false), (true, false)]);
        let unsafe_ = trace("u", &[(true, false), (true, true)]);
        let road = vec![safe.clone(), safe.clone(), unsafe_.clone(), safe.clone(), unsafe_.clone()];
        assert_eq!(sdt(&road).unwrap(), 3);
        assert!(!road_safe(&road).unwrap());

        let all_safe = vec![safe.clone(); 4];
        assert!(road_safe(&all_safe).unwrap());
        assert_eq!(sdt(&all_safe).unwrap(), all_safe.len());
        assert_eq!(sdt(&[unsafe_.clone(), unsafe_]).unwrap(), 0);
    }

    #[test]
    fn mismatched_horizons_rejected() {
        let a = trace("a", &[(false, false), (false, false)]);
        let b = trace("b", &[(false, false)]);
        assert!(road_safe(&[a.clone(), b.clone()]).is_err());
        assert!(sdt(&[a.clone(), b]).is_err());
        let mut c = a.clone();
        c.dt = 0.2;
        assert!(road_safe(&[a, c]).is_err());
    }

    #[test]
    fn literal_road_formula_is_stricter() {
        // Safe by the vehicle formula, but BER is not active at every step.
        let t = trace("a", &[(false, false), (true, false)]);
        assert!(vehicle_safe(&t));
        assert!(!evaluate(&t, 0, &negated_eventual_blame_formula()).unwrap());
        let braking = trace("b", &[(true, false), (true, false)]);
        assert!(evaluate(&braking, 0, &negated_eventual_blame_formula()).unwrap());
    }
}
