use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sdc_core::capacity::{CapacityPoint, CapacityReport, Packing, RoadSpec};
use sdc_core::cooperative::{self, LatencyModel};
use sdc_core::kinematics::{self, VehicleParams};
use sdc_core::ltl::{self, Boundary, Formula};
use sdc_core::perception::{DeviationRegime, DeviationSet};
use sdc_core::scalar::kmh_to_mps;
use sdc_core::simulator::{self, ScenarioConfig};
use sdc_core::sweep::{self, SweepGrid};

#[derive(Parser)]
#[command(name = "sdc", version, about = "Safe distances, safe-driving throughput and road capacity for PBV/CBV fleets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum safe centre gap between a rear and a front vehicle.
    Distance(DistanceArgs),
    /// Safe-driving capacity of a road for both fleet kinds.
    Sdc(SdcArgs),
    /// Capacity over a grid of deviations and delays, as CSV.
    Sweep(SweepArgs),
    /// Run a braking scenario; exit 1 if the road is not safe.
    Simulate(SimulateArgs),
    /// Check a formula on every trace in a CSV file; exit 1 if any fails.
    Monitor(MonitorArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Unit {
    Mps,
    Kmh,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Pbv,
    Cbv,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Conservative,
    GoodPerception,
    Unrestricted,
}

impl From<RegimeArg> for DeviationRegime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Conservative => DeviationRegime::Conservative,
            RegimeArg::GoodPerception => DeviationRegime::GoodPerception,
            RegimeArg::Unrestricted => DeviationRegime::Unrestricted,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct DeviationArgs {
    #[arg(long = "e-l", default_value_t = 1.0)]
    e_l: f64,
    #[arg(long = "e-v", default_value_t = 1.0)]
    e_v: f64,
    #[arg(long = "e-brake", default_value_t = 1.0)]
    e_brake: f64,
    #[arg(long = "e-tau", default_value_t = 1.0)]
    e_tau: f64,
    #[arg(long, value_enum, default_value_t = RegimeArg::Conservative)]
    regime: RegimeArg,
}

impl DeviationArgs {
    fn build(&self) -> Result<DeviationSet<f64>> {
        Ok(DeviationSet::new(
            self.e_l,
            self.e_v,
            self.e_brake,
            self.e_tau,
            self.regime.into(),
        )?)
    }
}

#[derive(Args)]
struct DelayArgs {
    /// Communication delay in seconds.
    #[arg(long, conflicts_with = "latency")]
    eta: Option<f64>,
    /// Latency preset (dsrc, 5g, 4g); its upper bound is used as the delay.
    #[arg(long)]
    latency: Option<String>,
}

impl DelayArgs {
    fn seconds(&self, default: f64) -> Result<f64> {
        match (&self.eta, &self.latency) {
            (Some(eta), _) => Ok(*eta),
            (None, Some(name)) => Ok(LatencyModel::preset(name)
                .with_context(|| format!("unknown latency preset `{name}` (dsrc|5g|4g)"))?
                .upper_bound()),
            (None, None) => Ok(default),
        }
    }
}

#[derive(Args)]
struct DistanceArgs {
    /// Rear vehicle speed.
    #[arg(long)]
    vr: f64,
    /// Front vehicle speed (the conservative estimate in CBV mode).
    #[arg(long)]
    vf: f64,
    #[arg(long, value_enum, default_value_t = Unit::Mps)]
    unit: Unit,
    /// Maximum braking deceleration, m/s².
    #[arg(long, default_value_t = 9.0)]
    brake: f64,
    /// Maximum acceleration during the response time, m/s².
    #[arg(long, default_value_t = 3.0)]
    acc: f64,
    /// Response time, s.
    #[arg(long, default_value_t = 0.5)]
    tau0: f64,
    /// Vehicle length, m.
    #[arg(long = "L", default_value_t = 5.0)]
    length: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Pbv)]
    mode: ModeArg,
    #[command(flatten)]
    delay: DelayArgs,
    #[command(flatten)]
    dev: DeviationArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct SdcArgs {
    /// Road length, km.
    #[arg(long = "M", visible_alias = "length-km", default_value_t = 10.0)]
    length_km: f64,
    /// Number of lanes.
    #[arg(long = "N", visible_alias = "lanes", default_value_t = 2)]
    lanes: u32,
    /// Speed floor, km/h.
    #[arg(long = "V", visible_alias = "speed-kmh", default_value_t = 100.0)]
    speed_kmh: f64,
    #[arg(long = "L", default_value_t = 5.0)]
    length: f64,
    #[arg(long, default_value_t = 9.0)]
    brake: f64,
    #[arg(long, default_value_t = 3.0)]
    acc: f64,
    #[arg(long = "tau0-pbv", default_value_t = 0.5)]
    tau0_pbv: f64,
    #[arg(long = "tau0-cbv", default_value_t = 0.4)]
    tau0_cbv: f64,
    #[command(flatten)]
    delay: DelayArgs,
    #[command(flatten)]
    dev: DeviationArgs,
    /// Pack each lane separately instead of the whole road at once.
    #[arg(long)]
    per_lane_packing: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    /// `lo:hi:step` or a comma list.
    #[arg(long = "e-tau", default_value = "0.95:1.0:0.01")]
    e_tau: String,
    #[arg(long = "e-brake", default_value = "0.95:1.0:0.01")]
    e_brake: String,
    #[arg(long = "e-v", default_value = "1.0:1.05:0.01")]
    e_v: String,
    /// Seconds, preset names, a range, or `presets`.
    #[arg(long, default_value = "presets")]
    eta: String,
    /// Speed floor axis, km/h.
    #[arg(long = "speed-kmh", default_value = "100")]
    speed_kmh: String,
    #[arg(long = "e-l", default_value_t = 1.0)]
    e_l: f64,
    #[arg(long, value_enum, default_value_t = RegimeArg::GoodPerception)]
    regime: RegimeArg,
    #[arg(long = "M", visible_alias = "length-km", default_value_t = 10.0)]
    length_km: f64,
    #[arg(long = "N", visible_alias = "lanes", default_value_t = 2)]
    lanes: u32,
    #[arg(long = "L", default_value_t = 5.0)]
    length: f64,
    #[arg(long, default_value_t = 9.0)]
    brake: f64,
    #[arg(long, default_value_t = 3.0)]
    acc: f64,
    #[arg(long = "tau0-pbv", default_value_t = 0.5)]
    tau0_pbv: f64,
    #[arg(long = "tau0-cbv", default_value_t = 0.4)]
    tau0_cbv: f64,
    #[arg(long)]
    per_lane_packing: bool,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit 1 if any row has SDC_cbv < SDC_pbv or a monotonicity check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (TOML).
    config: PathBuf,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Summary JSON; stdout when omitted.
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Args)]
struct MonitorArgs {
    /// Trace CSV as written by `simulate`.
    trace: PathBuf,
    /// Defaults to the vehicle safety formula `G[0,T](BER -> !Y)`.
    #[arg(long)]
    formula: Option<String>,
    /// Out-of-range windows make G vacuously true and F false instead of
    /// clamping to the last step.
    #[arg(long)]
    strict_bounds: bool,
    /// Position at which the formula is evaluated.
    #[arg(long, default_value_t = 0)]
    at: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Distance(args) => cmd_distance(&args),
        Command::Sdc(args) => cmd_sdc(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Monitor(args) => cmd_monitor(&args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_distance(args: &DistanceArgs) -> Result<bool> {
    let speed = |v: f64| match args.unit {
        Unit::Mps => v,
        Unit::Kmh => kmh_to_mps(v),
    };
    let (vr, vf) = (speed(args.vr), speed(args.vf));
    let rear = VehicleParams::new(args.length, args.brake, args.acc, vr, args.tau0)?;
    let front = VehicleParams::new(args.length, args.brake, args.acc, vf, args.tau0)?;
    let mut results: Vec<(&str, f64)> = Vec::new();
    if matches!(args.mode, ModeArg::Pbv | ModeArg::Both) {
        results.push(("pbv", kinematics::safe_longitudinal_distance(&rear, &front, args.tau0)?));
    }
    let (dev, eta) = (args.dev.build()?, args.delay.seconds(0.0)?);
    if matches!(args.mode, ModeArg::Cbv | ModeArg::Both) {
        results.push(("cbv", cooperative::corrected_safe_distance(&rear, &front, &dev, eta)?));
    }

    let mut out = io::stdout().lock();
    match args.format {
        Format::Json => {
            let value = serde_json::json!({
                "v_rear_mps": vr,
                "v_front_mps": vf,
                "a_max_brake_mps2": args.brake,
                "a_max_acc_mps2": args.acc,
                "tau0_s": args.tau0,
                "L_m": args.length,
                "eta_s": eta,
                "e_L": dev.e_length(),
                "e_V": dev.e_front_speed(),
                "e_brake": dev.e_brake(),
                "e_tau": dev.e_tau(),
                "distances_m": results.iter().map(|(m, d)| (m.to_string(), serde_json::json!(d))).collect::<serde_json::Map<_, _>>(),
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
        }
        Format::Csv => {
            writeln!(out, "mode,v_rear_mps,v_front_mps,a_max_brake_mps2,a_max_acc_mps2,tau0_s,L_m,eta_s,distance_m")?;
            for (mode, d) in &results {
                writeln!(
                    out,
                    "{mode},{vr},{vf},{},{},{},{},{eta},{d}",
                    args.brake, args.acc, args.tau0, args.length
                )?;
            }
        }
        Format::Text => {
            writeln!(
                out,
                "v_rear={vr} m/s v_front={vf} m/s brake={} m/s2 acc={} m/s2 tau0={} s L={} m",
                args.brake, args.acc, args.tau0, args.length
            )?;
            for (mode, d) in &results {
                if *mode == "cbv" {
                    writeln!(
                        out,
                        "  eta={eta} s e_L={} e_V={} e_brake={} e_tau={}",
                        dev.e_length(),
                        dev.e_front_speed(),
                        dev.e_brake(),
                        dev.e_tau()
                    )?;
                }
                writeln!(out, "{mode}: {d:.4} m")?;
            }
        }
    }
    Ok(true)
}

fn print_reports(reports: &[CapacityReport], format: Format) -> Result<()> {
    let mut out = io::stdout().lock();
    match format {
        Format::Json => {
            let value = if reports.len() == 1 {
                serde_json::to_value(&reports[0])?
            } else {
                serde_json::to_value(reports)?
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
        }
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(out);
            for r in reports {
                writer.serialize(r)?;
            }
            writer.flush()?;
        }
        Format::Text => {
            for r in reports {
                writeln!(
                    out,
                    "road {} km x {} lanes at >= {} km/h ({:?} packing)",
                    r.road_length_km, r.lanes, r.speed_floor_kmh, r.packing
                )?;
                writeln!(
                    out,
                    "  PBV: D = {:.4} m, SDC = {}  (tau0 = {} s, L = {} m)",
                    r.expected_distance_pbv_m, r.sdc_pbv, r.tau0_pbv_s, r.vehicle_length_m
                )?;
                writeln!(
                    out,
                    "  CBV: D = {:.4} m, SDC = {}  (tau0 = {} s, eta = {} s, L_C = {} m)",
                    r.expected_distance_cbv_m, r.sdc_cbv, r.tau0_cbv_s, r.eta_s, r.corrected_length_m
                )?;
            }
        }
    }
    Ok(())
}

fn cmd_sdc(args: &SdcArgs) -> Result<bool> {
    let road = RoadSpec::new(args.length_km, args.lanes, args.speed_kmh)?;
    let base = VehicleParams::new(args.length, args.brake, args.acc, road.speed_floor_mps(), args.tau0_pbv)?;
    let point = CapacityPoint {
        road,
        pbv: base,
        cbv: VehicleParams::new(args.length, args.brake, args.acc, road.speed_floor_mps(), args.tau0_cbv)?,
        dev: args.dev.build()?,
        eta: args.delay.seconds(LatencyModel::preset("dsrc").expect("preset").upper_bound())?,
    };
    let mut reports = Vec::new();
    if args.per_lane_packing && args.format == Format::Text {
        reports.push(point.report(Packing::Road)?);
    }
    let packing = if args.per_lane_packing { Packing::PerLane } else { Packing::Road };
    reports.push(point.report(packing)?);
    print_reports(&reports, args.format)?;
    if let Some(reason) = point.regime_violation() {
        eprintln!("note: outside the conditions for SDC_cbv >= SDC_pbv: {reason}");
    }
    Ok(true)
}

fn cmd_sweep(args: &SweepArgs) -> Result<bool> {
    let grid = SweepGrid {
        e_tau: sweep::parse_axis(&args.e_tau).context("--e-tau")?,
        e_brake: sweep::parse_axis(&args.e_brake).context("--e-brake")?,
        e_v: sweep::parse_axis(&args.e_v).context("--e-v")?,
        eta: sweep::parse_eta_axis(&args.eta).context("--eta")?,
        speed_kmh: sweep::parse_axis(&args.speed_kmh).context("--speed-kmh")?,
        e_l: args.e_l,
        regime: args.regime.into(),
        road: RoadSpec::new(args.length_km, args.lanes, 100.0)?,
        vehicle: VehicleParams::new(args.length, args.brake, args.acc, 1.0, args.tau0_pbv)?,
        tau0_pbv: args.tau0_pbv,
        tau0_cbv: args.tau0_cbv,
        packing: if args.per_lane_packing { Packing::PerLane } else { Packing::Road },
    };
    let rows = sweep::run_sweep(&grid)?;
    let mut out = output(args.out.as_deref())?;
    sweep::write_sweep_csv(&rows, &mut out)?;
    out.flush()?;
    drop(out);

    let order = sweep::capacity_order_failures(&rows);
    let mono = sweep::check_monotonicity(&grid, &rows)?;
    eprintln!(
        "{} rows; SDC_cbv < SDC_pbv on {} rows; monotonic along every axis: {} ({} pairs); SDC_cbv spread {}..={} (D_cbv {:.4}..={:.4} m)",
        rows.len(),
        order.len(),
        mono.holds(),
        mono.pairs,
        mono.sdc_cbv_min,
        mono.sdc_cbv_max,
        mono.d_cbv_min_m,
        mono.d_cbv_max_m
    );
    for i in order.iter().take(5) {
        let r = &rows[*i];
        eprintln!(
            "  row {i}: e_tau={} e_brake={} e_V={} eta={} SDC_pbv={} SDC_cbv={}",
            r.e_tau, r.e_brake, r.e_v, r.eta_s, r.sdc_pbv, r.sdc_cbv
        );
    }
    for f in mono.failures.iter().take(5) {
        eprintln!("  {f}");
    }
    Ok(!args.check || (order.is_empty() && mono.holds()))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read {}", args.config.display()))?;
    let cfg = ScenarioConfig::from_toml_str(&text)
        .with_context(|| format!("in {}", args.config.display()))?;
    let run = simulator::run_scenario(&cfg)?;
    if let Some(path) = &args.trace_out {
        let mut out = output(Some(path))?;
        ltl::write_traces_csv(&run.traces, &mut out)?;
        out.flush()?;
    }
    let summary = simulator::summarize(&run, &cfg)?;
    let mut out = output(args.summary_out.as_deref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
    out.flush()?;
    eprintln!(
        "SDT = {} of {} vehicles; road safe: {}",
        summary.sdt, summary.vehicles, summary.road_safe
    );
    for c in &summary.collisions {
        eprintln!(
            "collision in lane {} at t = {:.3} s: l{}v{} hit by l{}v{}",
            c.lane, c.time_s, c.lane, c.front, c.lane, c.rear
        );
    }
    if !summary.responsible.is_empty() {
        eprintln!("responsible: {}", summary.responsible.join(", "));
    }
    Ok(summary.road_safe)
}

fn cmd_monitor(args: &MonitorArgs) -> Result<bool> {
    let formula = match &args.formula {
        Some(text) => match Formula::parse(text) {
            Ok(f) => f,
            Err(sdc_core::Error::Parse { offset, message }) => {
                bail!("{message}\n  {text}\n  {:>width$}", "^", width = offset + 1)
            }
            Err(e) => return Err(e.into()),
        },
        None => ltl::vehicle_safety_formula(),
    };
    let file = File::open(&args.trace).with_context(|| format!("cannot read {}", args.trace.display()))?;
    let traces = ltl::read_traces_csv(BufReader::new(file))
        .with_context(|| format!("in {}", args.trace.display()))?;
    if traces.is_empty() {
        bail!("{} holds no trace rows", args.trace.display());
    }
    let boundary = if args.strict_bounds { Boundary::Strict } else { Boundary::Clamp };
    let mut all = true;
    let mut out = io::stdout().lock();
    writeln!(out, "formula: {formula}")?;
    for trace in &traces {
        let ok = ltl::evaluate_with(trace, args.at, &formula, boundary)?;
        all &= ok;
        writeln!(out, "{}: {}", trace.vehicle_id, if ok { "satisfied" } else { "violated" })?;
    }
    writeln!(
        out,
        "SDT = {} of {}; road safe: {}",
        ltl::sdt(&traces)?,
        traces.len(),
        ltl::road_safe(&traces)?
    )?;
    Ok(all)
}
