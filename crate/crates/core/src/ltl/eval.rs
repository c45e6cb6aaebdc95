use super::formula::Formula;
use super::trace::{Trace, VehicleState};
use crate::error::{Error, Result};

/// How indices past the last step of a finite trace are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// The final state repeats forever (vehicles have halted).
    #[default]
    Clamp,
    /// Out-of-range indices do not exist: `G` is vacuous there, `F` finds no witness.
    Strict,
}

fn atom_value(name: &str, state: &VehicleState) -> Result<bool> {
    match name {
        "BER" => Ok(state.ber_active),
        "C" => Ok(state.collided),
        "Y" => Ok(state.responsible),
        other => Err(Error::Evaluation(format!("unknown atom `{other}`"))),
    }
}

/// Truth value of `f` at every index of the trace.
///
/// Subformulas are evaluated bottom-up once per index; temporal windows are
/// answered from prefix counts, so the cost is linear in trace length per
/// operator regardless of interval width.
pub fn satisfaction(trace: &Trace, f: &Formula, boundary: Boundary) -> Result<Vec<bool>> {
    let n = trace.steps.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot evaluate on an empty trace".into()));
    }
    Ok(match f {
        Formula::Atom(name) => trace
            .steps
            .iter()
            .map(|s| atom_value(name, s))
            .collect::<Result<_>>()?,
        Formula::Not(g) => satisfaction(trace, g, boundary)?.into_iter().map(|v| !v).collect(),
        Formula::And(g, h) => zip(trace, g, h, boundary, |a, b| a && b)?,
        Formula::Or(g, h) => zip(trace, g, h, boundary, |a, b| a || b)?,
        Formula::Implies(g, h) => zip(trace, g, h, boundary, |a, b| !a || b)?,
        Formula::Globally(lo, hi, g) => window(&satisfaction(trace, g, boundary)?, *lo, *hi, boundary, true),
        Formula::Finally(lo, hi, g) => window(&satisfaction(trace, g, boundary)?, *lo, *hi, boundary, false),
    })
}

fn zip(
    trace: &Trace,
    g: &Formula,
    h: &Formula,
    boundary: Boundary,
    op: impl Fn(bool, bool) -> bool,
) -> Result<Vec<bool>> {
    let a = satisfaction(trace, g, boundary)?;
    let b = satisfaction(trace, h, boundary)?;
    Ok(a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect())
}

fn window(values: &[bool], lo: usize, hi: usize, boundary: Boundary, globally: bool) -> Vec<bool> {
    let n = values.len();
    let last = n - 1;
    // prefix[k] = number of true values in values[..k]
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &v in values {
        prefix.push(prefix.last().unwrap() + usize::from(v));
    }
    (0..n)
        .map(|i| {
            let start = i.saturating_add(lo);
            let end = i.saturating_add(hi);
            let (start, end) = match boundary {
                Boundary::Clamp => (start.min(last), end.min(last)),
                Boundary::Strict => {
                    if start > last {
                        return globally;
                    }
                    (start, end.min(last))
                }
            };
            let trues = prefix[end + 1] - prefix[start];
            if globally {
                trues == end + 1 - start
            } else {
                trues > 0
            }
        })
        .collect()
}

/// `(trace, i) ⊨ f` with the final state repeating past the end of the trace.
pub fn evaluate(trace: &Trace, i: usize, f: &Formula) -> Result<bool> {
    evaluate_with(trace, i, f, Boundary::Clamp)
}

pub fn evaluate_with(trace: &Trace, i: usize, f: &Formula, boundary: Boundary) -> Result<bool> {
    if i >= trace.steps.len() {
        return Err(Error::InvalidInput(format!(
            "index {i} outside trace of length {}",
            trace.steps.len()
        )));
    }
    f.check_atoms()?;
    Ok(satisfaction(trace, f, boundary)?[i])
}
