//! Acceptance criteria, one pass/fail line each. Runs as a plain binary so
//! the report is always printed.

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdc_core::capacity::{check_capacity_order, CapacityPoint, Packing, RoadSpec};
use sdc_core::cooperative::corrected_safe_distance;
use sdc_core::kinematics::{min_safe_gap_oracle, safe_longitudinal_distance, VehicleParams};
use sdc_core::ltl::{evaluate_with, Boundary, Formula, Trace, VehicleState, HORIZON};
use sdc_core::perception::{DeviationRegime, DeviationSet};
use sdc_core::sweep::{check_monotonicity, run_sweep, SweepGrid};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn sdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdc")).args(args).output().expect("sdc binary runs")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn json(out: &Output) -> Result<serde_json::Value, String> {
    serde_json::from_slice(&out.stdout).map_err(|e| format!("bad json output: {e}"))
}

fn vehicle(speed: f64, tau0: f64) -> VehicleParams<f64> {
    VehicleParams::new(5.0, 9.0, 3.0, speed, tau0).unwrap()
}

fn highway_distance() -> Check {
    let start = Instant::now();
    let out = sdc(&["distance", "--vr", "100", "--vf", "100", "--unit", "kmh", "--format", "json"]);
    ensure(out.status.code() == Some(0), || format!("exit {:?}", out.status.code()))?;
    let d = json(&out)?["distances_m"]["pbv"].as_f64().ok_or("missing pbv distance")?;
    let v = 100.0 / 3.6;
    let oracle = min_safe_gap_oracle(&vehicle(v, 0.5), &vehicle(v, 0.5), 0.5, 1e-3).unwrap();
    within(start.elapsed(), Duration::from_secs(1))?;
    ensure((d - 24.02).abs() <= 0.005, || format!("D = {d}"))?;
    ensure((d - oracle).abs() <= 0.03, || format!("D = {d}, oracle {oracle}"))?;
    Ok(format!("D = {d:.4} m, oracle {oracle:.4} m"))
}

fn oracle_agreement() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dt = 1e-3;
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let l: f64 = rng.random_range(3.0..6.0);
        let brake = rng.random_range(4.0..10.0);
        let acc = rng.random_range(0.0..4.0);
        let tau = rng.random_range(0.1..1.5);
        let rear = VehicleParams::new(l, brake, acc, rng.random_range(0.0..40.0), tau).unwrap();
        let front = VehicleParams::new(l, brake, acc, rng.random_range(0.0..40.0), tau).unwrap();
        let d = safe_longitudinal_distance(&rear, &front, tau).unwrap();
        let o = min_safe_gap_oracle(&rear, &front, tau, dt).unwrap();
        let tol = (rear.speed * dt).max(1e-2);
        ensure((d - o).abs() <= tol, || format!("draw {k}: closed form {d}, oracle {o}, tol {tol}"))?;
        worst = worst.max((d - o).abs());
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("1000 draws, worst |D - oracle| = {worst:.2e} m"))
}

fn trivial_branch() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let l: f64 = rng.random_range(3.0..6.0);
        let front = rng.random_range(0.0..40.0);
        let tau = rng.random_range(0.1..1.5);
        // A rear that halts before the front does never needs more than L.
        let rear = VehicleParams::new(l, 9.0, 0.0, 0.0, tau).unwrap();
        let d = safe_longitudinal_distance(&rear, &VehicleParams::new(l, 9.0, 3.0, front, tau).unwrap(), tau).unwrap();
        ensure(d == l, || format!("D = {d}, L = {l}"))?;
    }
    let d = safe_longitudinal_distance(&vehicle(0.0, 0.5), &vehicle(30.0, 0.5), 0.5).unwrap();
    ensure(d == 5.0, || format!("stationary rear: D = {d}"))?;
    Ok("D = L exactly on 1001 cases".into())
}

fn cooperative_never_farther() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut draws = 0;
    while draws < 2000 {
        let (l, brake, acc): (f64, f64, f64) = (rng.random_range(3.0..6.0), rng.random_range(4.0..10.0), rng.random_range(0.0..4.0));
        let tau_pbv: f64 = rng.random_range(0.1..1.5);
        let tau_cbv = tau_pbv * rng.random_range(0.2..=1.0);
        let e_t = rng.random_range(0.3..=1.0);
        let eta = rng.random_range(0.0..=1.0) * (tau_pbv - e_t * tau_cbv);
        let dev = DeviationSet::new(
            rng.random_range(0.5..=1.0),
            rng.random_range(1.0..1.5),
            rng.random_range(0.5..=1.0),
            e_t,
            DeviationRegime::Conservative,
        )
        .unwrap();
        let rear = VehicleParams::new(l, brake, acc, rng.random_range(0.0..40.0), tau_cbv).unwrap();
        let front = VehicleParams::new(l, brake, acc, rng.random_range(0.0..40.0), tau_cbv).unwrap();
        let pbv = safe_longitudinal_distance(&rear.with_tau0(tau_pbv), &front, tau_pbv).unwrap();
        let cbv = corrected_safe_distance(&rear, &front, &dev, eta).unwrap();
        ensure(cbv <= pbv + 1e-9, || format!("D_cbv {cbv} > D_pbv {pbv}"))?;
        let unit = corrected_safe_distance(&rear, &front, &DeviationSet::unit(), eta).unwrap();
        let tau = tau_cbv + eta;
        let plain = safe_longitudinal_distance(&rear.with_tau0(tau), &front, tau).unwrap();
        ensure((unit - plain).abs() <= 1e-9, || format!("unit collapse {unit} vs {plain}"))?;
        draws += 1;
    }
    Ok(format!("{draws} draws: D_cbv <= D_pbv, unit deviations collapse within 1e-9"))
}

fn default_grid_capacity() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv_path = dir.path().join("sweep.csv");
    let start = Instant::now();
    let out = sdc(&["sweep", "--out", csv_path.to_str().unwrap()]);
    within(start.elapsed(), Duration::from_secs(10))?;
    ensure(out.status.code() == Some(0), || format!("exit {:?}", out.status.code()))?;
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| e.to_string())?;
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or(format!("no {name} column"));
    let (pbv, cbv) = (col("SDC_pbv")?, col("SDC_cbv")?);
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let p: u64 = record[pbv].parse().map_err(|_| "bad SDC_pbv")?;
        let c: u64 = record[cbv].parse().map_err(|_| "bad SDC_cbv")?;
        ensure(p == 833, || format!("row {rows}: SDC_pbv = {p}"))?;
        ensure(c >= p, || format!("row {rows}: SDC_cbv {c} < SDC_pbv {p}"))?;
        rows += 1;
    }
    ensure(rows == 648, || format!("{rows} rows"))?;

    // Random conservative points honour the same ordering.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points: Vec<CapacityPoint<f64>> = (0..500)
        .map(|_| {
            let tau_pbv: f64 = rng.random_range(0.3..1.0);
            let tau_cbv = tau_pbv * rng.random_range(0.3..=1.0);
            let base = VehicleParams::new(5.0, 9.0, 3.0, 1.0, tau_pbv).unwrap();
            CapacityPoint {
                road: RoadSpec::new(rng.random_range(1.0..20.0), rng.random_range(1..5), rng.random_range(30.0..150.0)).unwrap(),
                pbv: base,
                cbv: base.with_tau0(tau_cbv),
                dev: DeviationSet::new(
                    rng.random_range(0.8..=1.0),
                    rng.random_range(1.0..1.2),
                    rng.random_range(0.8..=1.0),
                    0.9,
                    DeviationRegime::Conservative,
                )
                .unwrap(),
                eta: rng.random_range(0.0..1.0) * (tau_pbv - 0.9 * tau_cbv),
            }
        })
        .collect();
    for packing in [Packing::Road, Packing::PerLane] {
        let report = check_capacity_order(&points, packing).unwrap();
        ensure(report.holds() && report.rejected.is_empty(), || format!("{:?}", report.violations))?;
    }
    Ok(format!("{rows} grid rows with SDC_cbv >= SDC_pbv = 833; 500 random points hold"))
}

fn grid_monotonicity() -> Check {
    let grid = SweepGrid::default();
    let rows = run_sweep(&grid).map_err(|e| e.to_string())?;
    let report = check_monotonicity(&grid, &rows).map_err(|e| e.to_string())?;
    ensure(report.holds(), || report.failures.join("; "))?;
    Ok(format!(
        "{} adjacent pairs monotone; SDC_cbv spread {}..={}, D_cbv {:.4}..={:.4} m",
        report.pairs, report.sdc_cbv_min, report.sdc_cbv_max, report.d_cbv_min_m, report.d_cbv_max_m
    ))
}

fn random_formula(rng: &mut ChaCha8Rng, depth: usize) -> Formula {
    let atom = |rng: &mut ChaCha8Rng| Formula::atom(["BER", "C", "Y"][rng.random_range(0..3)]);
    if depth == 0 || rng.random_bool(0.3) {
        return atom(rng);
    }
    let bounds = |rng: &mut ChaCha8Rng| {
        let a = rng.random_range(0..=6);
        if rng.random_bool(0.2) {
            (a, HORIZON)
        } else {
            (a, a + rng.random_range(0..=6))
        }
    };
    match rng.random_range(0..6) {
        0 => Formula::not(random_formula(rng, depth - 1)),
        1 => Formula::and(random_formula(rng, depth - 1), random_formula(rng, depth - 1)),
        2 => Formula::or(random_formula(rng, depth - 1), random_formula(rng, depth - 1)),
        3 => Formula::implies(random_formula(rng, depth - 1), random_formula(rng, depth - 1)),
        4 => {
            let (a, b) = bounds(rng);
            Formula::globally(a, b, random_formula(rng, depth - 1))
        }
        _ => {
            let (a, b) = bounds(rng);
            Formula::finally(a, b, random_formula(rng, depth - 1))
        }
    }
}

/// Quantifier expansion over an explicit state list. Windows past the end
/// are pulled back onto the final state in clamp mode and are empty otherwise.
fn expand(states: &[[bool; 3]], i: usize, f: &Formula, clamp: bool) -> bool {
    let last = states.len() - 1;
    let window = |a: usize, b: usize| {
        let lo = i.saturating_add(a);
        let hi = i.saturating_add(b).min(last);
        if lo > last {
            clamp.then_some((last, last))
        } else {
            Some((lo, hi))
        }
    };
    match f {
        Formula::Atom(name) => states[i][["BER", "C", "Y"].iter().position(|a| a == name).unwrap()],
        Formula::Not(g) => !expand(states, i, g, clamp),
        Formula::And(g, h) => expand(states, i, g, clamp) && expand(states, i, h, clamp),
        Formula::Or(g, h) => expand(states, i, g, clamp) || expand(states, i, h, clamp),
        Formula::Implies(g, h) => !expand(states, i, g, clamp) || expand(states, i, h, clamp),
        Formula::Globally(a, b, g) => {
            window(*a, *b).is_none_or(|(lo, hi)| (lo..=hi).all(|j| expand(states, j, g, clamp)))
        }
        Formula::Finally(a, b, g) => {
            window(*a, *b).is_some_and(|(lo, hi)| (lo..=hi).any(|j| expand(states, j, g, clamp)))
        }
    }
}

fn ltl_agreement() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pairs = 12_000;
    for k in 0..pairs {
        let f = random_formula(&mut rng, 4);
        let len = rng.random_range(1..=20);
        let mut collided = false;
        let states: Vec<[bool; 3]> = (0..len)
            .map(|_| {
                collided |= rng.random_bool(0.2);
                [rng.random_bool(0.5), collided, rng.random_bool(0.5)]
            })
            .collect();
        let steps = states
            .iter()
            .map(|s| VehicleState { ber_active: s[0], collided: s[1], responsible: s[2], ..VehicleState::default() })
            .collect();
        let trace = Trace::new("v", steps, 0.1).unwrap();
        let i = rng.random_range(0..len);
        for (boundary, clamp) in [(Boundary::Clamp, true), (Boundary::Strict, false)] {
            let got = evaluate_with(&trace, i, &f, boundary).map_err(|e| e.to_string())?;
            ensure(got == expand(&states, i, &f, clamp), || format!("pair {k}: {f} at {i} ({boundary:?})"))?;
        }
        let (a, b) = (rng.random_range(0..=6), rng.random_range(6..=12));
        let lhs = Formula::not(Formula::finally(a, b, f.clone()));
        let rhs = Formula::globally(a, b, Formula::not(f.clone()));
        for boundary in [Boundary::Clamp, Boundary::Strict] {
            let (l, r) = (evaluate_with(&trace, i, &lhs, boundary), evaluate_with(&trace, i, &rhs, boundary));
            ensure(l.ok() == r.ok(), || format!("duality fails for {f} at {i}"))?;
        }
    }
    Ok(format!("{pairs} formula/trace pairs match in both boundary modes; G/F duality holds"))
}

fn scenario_toml(factors: [f64; 2]) -> String {
    let mut text = String::from(
        "mode = \"pbv\"\ndt = 0.001\nrng_seed = 1\n\n[road]\nlength_km = 10.0\nlanes = 2\nspeed_floor_kmh = 100.0\n\n\
         [vehicle]\nlength_m = 5.0\na_max_brake_mps2 = 9.0\na_max_acc_mps2 = 3.0\ntau0_s = 0.5\n",
    );
    for f in factors {
        text += &format!(
            "\n[[lanes]]\nvehicles = [{{ speed_kmh = 100.0 }}, {{ speed_kmh = 100.0, gap_factor = {f} }}]\n"
        );
    }
    text
}

fn simulate(dir: &Path, name: &str, toml: &str) -> Result<(Option<i32>, serde_json::Value), String> {
    let config = dir.join(format!("{name}.toml"));
    let summary = dir.join(format!("{name}.json"));
    std::fs::write(&config, toml).map_err(|e| e.to_string())?;
    let out = sdc(&["simulate", config.to_str().unwrap(), "--summary-out", summary.to_str().unwrap()]);
    let text = std::fs::read_to_string(&summary).map_err(|e| e.to_string())?;
    let value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok((out.status.code(), value))
}

fn simulated_safety() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (code, summary) = simulate(dir.path(), "safe", &scenario_toml([1.0, 1.0]))?;
    ensure(code == Some(0), || format!("safe spacing: exit {code:?}"))?;
    ensure(summary["sdt"] == 4 && summary["vehicles"] == 4, || format!("safe spacing: sdt {}", summary["sdt"]))?;
    for lane in 0..2 {
        let mut factors = [1.0, 1.0];
        factors[lane] = 0.9;
        let (code, summary) = simulate(dir.path(), &format!("short{lane}"), &scenario_toml(factors))?;
        ensure(code == Some(1), || format!("lane {lane} at 90%: exit {code:?}"))?;
        let blamed = summary["responsible"].as_array().cloned().unwrap_or_default();
        let rear = format!("l{lane}v1");
        ensure(blamed.len() == 1 && blamed[0] == rear.as_str(), || format!("lane {lane}: blamed {blamed:?}"))?;
        ensure(summary["sdt"] == 3, || format!("lane {lane}: sdt {}", summary["sdt"]))?;
    }
    Ok("safe gaps give SDT = 4 of 4 (exit 0); each gap at 90% collides with its rear blamed (exit 1)".into())
}

fn reproducible_traces() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/cbv_chain.toml");
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let path = dir.path().join(name);
        sdc(&["simulate", config, "--trace-out", path.to_str().unwrap(), "--summary-out", "-"]);
        std::fs::read(&path).map_err(|e| e.to_string())
    };
    let (a, b) = (run("a.csv")?, run("b.csv")?);
    ensure(!a.is_empty() && a == b, || "traces differ between runs".into())?;
    Ok(format!("two seeded runs produced identical {}-byte traces", a.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("highway safe distance matches 24.02 m and the oracle", highway_distance),
        ("closed form agrees with the trajectory oracle", oracle_agreement),
        ("slower-stopping rear gives exactly L", trivial_branch),
        ("cooperative distance never exceeds perception distance", cooperative_never_farther),
        ("cooperative capacity never below perception capacity", default_grid_capacity),
        ("capacity monotone along every sweep axis", grid_monotonicity),
        ("bounded LTL evaluator matches quantifier expansion", ltl_agreement),
        ("simulated safety and responsibility", simulated_safety),
        ("seeded simulation is reproducible", reproducible_traces),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("acceptance {}: PASS {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {}: FAIL {name}: {why}", n + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
