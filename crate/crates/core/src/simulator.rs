//! Discrete-time sudden-brake scenarios on a straight multi-lane road.
//!
//! Each lane is an ordered list of vehicles, front first. A triggered vehicle
//! applies full braking at its trigger time. Every follower cruises until its
//! predecessor starts braking (or is stopped by a collision), accelerates at
//! `a_max_acc` for its response time, then brakes at `a_max_brake` until it
//! halts. Motion is integrated with piecewise-constant acceleration; steps are
//! split at phase changes so the only discretisation error is where contact is
//! sampled. Colliding vehicles stop where they are.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{Mode, RoadSpec};
use crate::cooperative::{self, InfoSource, LatencyModel};
use crate::error::{Error, Result};
use crate::kinematics::{self, VehicleParams};
use crate::ltl::{self, Trace, VehicleState};
use crate::perception::{self, DeviationRegime, DeviationSet};
use crate::scalar::kmh_to_mps;

/// Centre gaps closer than `L` by more than this count as contact, metres.
pub const CONTACT_TOLERANCE: f64 = 1e-6;

/// One vehicle in a lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetEntry {
    pub params: VehicleParams<f64>,
    /// Centre gap to the vehicle in front; ignored for the lane head.
    pub gap_to_predecessor: f64,
    /// Extra delay before braking on top of the response time (a faulty reaction).
    pub extra_reaction_delay: f64,
}

impl FleetEntry {
    pub fn new(params: VehicleParams<f64>, gap_to_predecessor: f64) -> Self {
        Self {
            params,
            gap_to_predecessor,
            extra_reaction_delay: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrakeTrigger {
    pub lane: usize,
    pub vehicle: usize,
    #[serde(rename = "time_s", default)]
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub road: RoadSpec<f64>,
    /// Per-lane vehicles, front first.
    pub lanes: Vec<Vec<FleetEntry>>,
    pub mode: Mode,
    pub dev: DeviationSet<f64>,
    pub latency: LatencyModel,
    pub dt: f64,
    pub rng_seed: u64,
    /// Empty means every lane head brakes at `t = 0`.
    pub triggers: Vec<BrakeTrigger>,
    pub request_timeout: f64,
    pub perception_available: bool,
    pub max_duration: f64,
}

impl ScenarioConfig {
    /// `lanes × per_lane` identical vehicles at `speed`, spaced `gap` apart.
    pub fn uniform(
        mode: Mode,
        vehicle: VehicleParams<f64>,
        lanes: usize,
        per_lane: usize,
        gap: f64,
    ) -> Self {
        let lane = vec![FleetEntry::new(vehicle, gap); per_lane];
        Self {
            road: RoadSpec {
                lanes: lanes as u32,
                ..RoadSpec::default()
            },
            lanes: vec![lane; lanes],
            mode,
            dev: DeviationSet::unit(),
            latency: LatencyModel::preset("dsrc").expect("dsrc preset exists"),
            dt: 1e-3,
            rng_seed: 0,
            triggers: Vec::new(),
            request_timeout: cooperative::DEFAULT_REQUEST_TIMEOUT,
            perception_available: true,
            max_duration: 600.0,
        }
    }

    pub fn vehicle_count(&self) -> usize {
        self.lanes.iter().map(Vec::len).sum()
    }

    pub fn effective_triggers(&self) -> Vec<BrakeTrigger> {
        if !self.triggers.is_empty() {
            return self.triggers.clone();
        }
        (0..self.lanes.len())
            .filter(|&lane| !self.lanes[lane].is_empty())
            .map(|lane| BrakeTrigger {
                lane,
                vehicle: 0,
                time: 0.0,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.max_duration.is_finite() && self.max_duration > 0.0) {
            return Err(Error::param("max_duration", "must be > 0"));
        }
        if !(self.request_timeout.is_finite() && self.request_timeout >= 0.0) {
            return Err(Error::param("request_timeout", "must be >= 0"));
        }
        if self.lanes.len() > self.road.lanes as usize {
            return Err(Error::InvalidInput(format!(
                "{} lanes configured on a {}-lane road",
                self.lanes.len(),
                self.road.lanes
            )));
        }
        self.latency.validate()?;

        let template = self.lanes.iter().flatten().next().map(|e| e.params);
        for (lane, entries) in self.lanes.iter().enumerate() {
            for (idx, entry) in entries.iter().enumerate() {
                entry.params.validate()?;
                let t = template.expect("non-empty fleet");
                let same_type = entry.params.length == t.length
                    && entry.params.a_max_brake == t.a_max_brake
                    && entry.params.a_max_acc == t.a_max_acc
                    && entry.params.tau0 == t.tau0;
                if !same_type {
                    return Err(Error::InvalidInput(format!(
                        "vehicle l{lane}v{idx} differs from the fleet type: the fleet must be homogeneous"
                    )));
                }
                if !(entry.extra_reaction_delay.is_finite() && entry.extra_reaction_delay >= 0.0) {
                    return Err(Error::param("extra_reaction_delay", "must be >= 0"));
                }
                if idx > 0 {
                    let gap = entry.gap_to_predecessor;
                    if !gap.is_finite() || gap < entry.params.length {
                        return Err(Error::InvalidInput(format!(
                            "vehicle l{lane}v{idx}: gap {gap} m is below the vehicle length {} m",
                            entry.params.length
                        )));
                    }
                }
            }
        }
        for trigger in &self.effective_triggers() {
            let valid_lane = trigger.lane < self.lanes.len();
            if !valid_lane || trigger.vehicle >= self.lanes[trigger.lane].len() {
                return Err(Error::InvalidInput(format!(
                    "brake trigger (lane {}, vehicle {}) does not name a vehicle",
                    trigger.lane, trigger.vehicle
                )));
            }
            if !(trigger.time.is_finite() && trigger.time >= 0.0) {
                return Err(Error::param("trigger time", "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Replaces every gap with `factor` times the gap its rear vehicle needs
    /// in this scenario's mode.
    pub fn with_safe_gaps(mut self, factor: f64) -> Result<Self> {
        let plans = follower_plans(&self)?;
        for (lane, entries) in self.lanes.iter_mut().enumerate() {
            for (idx, entry) in entries.iter_mut().enumerate().skip(1) {
                entry.gap_to_predecessor = factor * plans[lane][idx].required_gap.unwrap_or(0.0);
            }
        }
        Ok(self)
    }
}

/// What a follower knows and how fast it reacts, fixed before stepping.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FollowerPlan {
    eta: Option<f64>,
    source: Option<InfoSource>,
    effective_tau: f64,
    /// Gap the rear vehicle must keep to its predecessor in this mode.
    required_gap: Option<f64>,
}

fn follower_plans(cfg: &ScenarioConfig) -> Result<Vec<Vec<FollowerPlan>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut plans = Vec::with_capacity(cfg.lanes.len());
    for entries in &cfg.lanes {
        let mut lane = Vec::with_capacity(entries.len());
        for (idx, entry) in entries.iter().enumerate() {
            let rear = entry.params;
            let mut plan = FollowerPlan {
                eta: None,
                source: None,
                effective_tau: rear.tau0,
                required_gap: None,
            };
            if idx > 0 {
                if cfg.mode == Mode::Cbv {
                    let eta = cooperative::sample_latency(&cfg.latency, &mut rng);
                    plan.eta = Some(eta);
                    plan.source = Some(if eta <= cfg.request_timeout {
                        InfoSource::Response
                    } else if cfg.perception_available {
                        InfoSource::PerceptionFallback
                    } else {
                        InfoSource::ConservativeDefaults
                    });
                    if plan.source == Some(InfoSource::Response) {
                        plan.effective_tau = cooperative::effective_response_time(
                            cfg.dev.e_tau() * rear.tau0,
                            eta,
                        )?;
                    }
                }
                plan.required_gap = Some(required_gap(cfg, &plan, &rear, &entries[idx - 1].params)?);
            }
            lane.push(plan);
        }
        plans.push(lane);
    }
    Ok(plans)
}

/// Gap the rear vehicle needs behind `front` given what it knows about it.
/// Config values are the actual ones; perception would report actual / e.
fn required_gap(
    cfg: &ScenarioConfig,
    plan: &FollowerPlan,
    rear: &VehicleParams<f64>,
    front: &VehicleParams<f64>,
) -> Result<f64> {
    let same_length = |p: VehicleParams<f64>| VehicleParams {
        length: rear.length,
        ..p
    };
    match plan.source {
        None => kinematics::safe_longitudinal_distance(rear, front, rear.tau0),
        Some(InfoSource::Response) => cooperative::corrected_safe_distance(
            rear,
            &perception::conservative_from_actual(front, &cfg.dev)?,
            &cfg.dev,
            plan.eta.unwrap_or(0.0),
        ),
        Some(InfoSource::PerceptionFallback) => {
            let perceived = perception::conservative_from_actual(front, &cfg.dev)?;
            kinematics::safe_longitudinal_distance(rear, &same_length(perceived), rear.tau0)
        }
        Some(InfoSource::ConservativeDefaults) => {
            kinematics::safe_longitudinal_distance(rear, &same_length(front.with_speed(0.0)), rear.tau0)
        }
    }
}

/// Pair state when a follower's reaction window opens.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ReactionSnapshot {
    at: f64,
    gap: f64,
    required: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Collision {
    pub lane: usize,
    pub front: usize,
    pub rear: usize,
    /// Index of the first trace step showing the contact.
    pub step: usize,
    pub time_s: f64,
}

/// Per-vehicle facts gathered during a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleOutcome {
    pub id: String,
    pub lane: usize,
    pub index: usize,
    pub info_source: Option<InfoSource>,
    pub eta_s: Option<f64>,
    pub effective_tau_s: f64,
    /// When the predecessor started braking (or was stopped by a collision).
    pub reaction_window_start_s: Option<f64>,
    /// Gap to the predecessor at that moment, and the gap required then.
    pub gap_at_reaction_m: Option<f64>,
    pub required_gap_at_reaction_m: Option<f64>,
    pub brake_onset_s: Option<f64>,
    pub min_gap_m: Option<f64>,
    pub collided: bool,
    pub responsible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub traces: Vec<Trace>,
    pub vehicles: Vec<VehicleOutcome>,
    pub collisions: Vec<Collision>,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy)]
struct Body {
    x: f64,
    v: f64,
    window_start: Option<f64>,
    onset: Option<f64>,
    frozen_at: Option<f64>,
    triggered: bool,
    affected: bool,
}

impl Body {
    fn acceleration(&self, t: f64, params: &VehicleParams<f64>) -> f64 {
        match (self.window_start, self.onset) {
            (_, Some(onset)) if t >= onset => -params.a_max_brake,
            (Some(start), _) if t >= start => params.a_max_acc,
            _ => 0.0,
        }
    }

    fn advance(&mut self, t0: f64, t1: f64, params: &VehicleParams<f64>) {
        if self.frozen_at.is_some() {
            return;
        }
        let mut cuts: Vec<f64> = [self.window_start, self.onset]
            .into_iter()
            .flatten()
            .filter(|&c| c > t0 && c < t1)
            .collect();
        cuts.sort_by(f64::total_cmp);
        let mut cursor = t0;
        for end in cuts.into_iter().chain(std::iter::once(t1)) {
            let h = end - cursor;
            if h > 0.0 {
                let a = self.acceleration(cursor, params);
                if a < 0.0 && self.v <= -a * h {
                    self.x += self.v * self.v / (-2.0 * a);
                    self.v = 0.0;
                } else {
                    self.x += self.v * h + 0.5 * a * h * h;
                    self.v += a * h;
                }
            }
            cursor = end;
        }
    }

    fn change_time(&self) -> Option<f64> {
        match (self.onset, self.frozen_at) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn settled(&self, t: f64) -> bool {
        self.frozen_at.is_some() || (self.v == 0.0 && self.onset.is_some_and(|o| o <= t))
    }
}

/// Runs the scenario and assigns responsibility for any collision.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimulationRun> {
    cfg.validate()?;
    let plans = follower_plans(cfg)?;
    let triggers = cfg.effective_triggers();
    let dt = cfg.dt;

    let mut bodies: Vec<Vec<Body>> = cfg
        .lanes
        .iter()
        .map(|entries| {
            let extent: f64 = entries.iter().skip(1).map(|e| e.gap_to_predecessor).sum();
            let mut x = extent;
            entries
                .iter()
                .enumerate()
                .map(|(idx, e)| {
                    if idx > 0 {
                        x -= e.gap_to_predecessor;
                    }
                    Body {
                        x,
                        v: e.params.speed,
                        window_start: None,
                        onset: None,
                        frozen_at: None,
                        triggered: false,
                        affected: false,
                    }
                })
                .collect()
        })
        .collect();
    for trigger in &triggers {
        let body = &mut bodies[trigger.lane][trigger.vehicle];
        body.triggered = true;
        body.onset = Some(body.onset.map_or(trigger.time, |o| o.min(trigger.time)));
    }
    for lane in bodies.iter_mut() {
        let mut behind_trigger = false;
        for body in lane.iter_mut() {
            behind_trigger |= body.triggered;
            body.affected = behind_trigger;
        }
    }

    let mut states: Vec<Vec<Vec<VehicleState>>> = bodies
        .iter()
        .map(|lane| {
            lane.iter()
                .map(|b| {
                    vec![VehicleState {
                        position: b.x,
                        velocity: b.v,
                        ber_active: b.onset.is_some_and(|o| o <= 0.0),
                        collided: false,
                        responsible: false,
                    }]
                })
                .collect()
        })
        .collect();
    let mut min_gaps: Vec<Vec<Option<f64>>> = cfg
        .lanes
        .iter()
        .map(|entries| {
            entries
                .iter()
                .enumerate()
                .map(|(idx, e)| (idx > 0).then_some(e.gap_to_predecessor))
                .collect()
        })
        .collect();
    let mut collisions = Vec::new();
    let mut snapshots: Vec<Vec<Option<ReactionSnapshot>>> =
        cfg.lanes.iter().map(|entries| vec![None; entries.len()]).collect();

    let max_steps = (cfg.max_duration / dt).ceil() as usize;
    let mut step = 0usize;
    let mut settled_once = false;
    while step < max_steps {
        let t0 = step as f64 * dt;
        let t1 = (step + 1) as f64 * dt;

        for (lane, entries) in cfg.lanes.iter().enumerate() {
            for idx in 1..entries.len() {
                if bodies[lane][idx].triggered {
                    continue;
                }
                let Some(change) = bodies[lane][idx - 1].change_time() else {
                    continue;
                };
                let body = &mut bodies[lane][idx];
                let pending = body.window_start.is_none_or(|w| change < w && w > t0);
                if pending {
                    body.window_start = Some(change);
                    body.onset = Some(
                        change + plans[lane][idx].effective_tau + entries[idx].extra_reaction_delay,
                    );
                }
            }
        }

        for (lane, entries) in cfg.lanes.iter().enumerate() {
            for idx in 1..entries.len() {
                let Some(w) = bodies[lane][idx].window_start else {
                    continue;
                };
                let taken = snapshots[lane][idx].is_some_and(|s| s.at == w);
                if taken || w >= t1 {
                    continue;
                }
                let (mut front, mut rear) = (bodies[lane][idx - 1], bodies[lane][idx]);
                if w > t0 {
                    front.advance(t0, w, &entries[idx - 1].params);
                    rear.advance(t0, w, &entries[idx].params);
                }
                let required = required_gap(
                    cfg,
                    &plans[lane][idx],
                    &entries[idx].params.with_speed(rear.v),
                    &entries[idx - 1].params.with_speed(front.v),
                )?;
                snapshots[lane][idx] = Some(ReactionSnapshot {
                    at: w,
                    gap: front.x - rear.x,
                    required,
                });
            }
        }

        for (lane, entries) in cfg.lanes.iter().enumerate() {
            for (idx, entry) in entries.iter().enumerate() {
                bodies[lane][idx].advance(t0, t1, &entry.params);
            }
        }

        for (lane, entries) in cfg.lanes.iter().enumerate() {
            for idx in 1..entries.len() {
                let gap = bodies[lane][idx - 1].x - bodies[lane][idx].x;
                let slot = &mut min_gaps[lane][idx];
                *slot = Some(slot.map_or(gap, |m| m.min(gap)));
                let already = bodies[lane][idx].frozen_at.is_some()
                    && bodies[lane][idx - 1].frozen_at.is_some();
                if gap < entries[idx].params.length - CONTACT_TOLERANCE && !already {
                    for k in [idx - 1, idx] {
                        let body = &mut bodies[lane][k];
                        body.v = 0.0;
                        body.frozen_at.get_or_insert(t1);
                    }
                    collisions.push(Collision {
                        lane,
                        front: idx - 1,
                        rear: idx,
                        step: step + 1,
                        time_s: t1,
                    });
                }
            }
        }

        for (lane, lane_bodies) in bodies.iter().enumerate() {
            for (idx, body) in lane_bodies.iter().enumerate() {
                let prev = *states[lane][idx].last().expect("initial state recorded");
                states[lane][idx].push(VehicleState {
                    position: body.x,
                    velocity: body.v,
                    ber_active: body.onset.is_some_and(|o| o <= t1),
                    collided: prev.collided || body.frozen_at.is_some(),
                    responsible: false,
                });
            }
        }
        step += 1;

        let all_settled = bodies
            .iter()
            .flatten()
            .filter(|b| b.affected)
            .all(|b| b.settled(t1));
        if all_settled {
            // One more step past the halt so the tail is visibly constant.
            if settled_once {
                break;
            }
            settled_once = true;
        }
    }

    let mut traces = Vec::with_capacity(cfg.vehicle_count());
    let mut vehicles = Vec::with_capacity(cfg.vehicle_count());
    for (lane, entries) in cfg.lanes.iter().enumerate() {
        for idx in 0..entries.len() {
            let id = format!("l{lane}v{idx}");
            let plan = plans[lane][idx];
            let body = bodies[lane][idx];
            let snapshot = snapshots[lane][idx];
            let steps = std::mem::take(&mut states[lane][idx]);
            let mut trace = Trace::new(id.clone(), steps, dt)?;
            if cfg.mode == Mode::Cbv && idx > 0 {
                trace.info_source = plan.source.map(|s| s.as_str().to_string());
            }
            vehicles.push(VehicleOutcome {
                id,
                lane,
                index: idx,
                info_source: plan.source,
                eta_s: plan.eta,
                effective_tau_s: plan.effective_tau,
                reaction_window_start_s: body.window_start,
                gap_at_reaction_m: snapshot.map(|s| s.gap),
                required_gap_at_reaction_m: snapshot.map(|s| s.required),
                brake_onset_s: body.onset,
                min_gap_m: min_gaps[lane][idx],
                collided: trace.ever_collided(),
                responsible: false,
            });
            traces.push(trace);
        }
    }

    let mut run = SimulationRun {
        traces,
        vehicles,
        collisions,
        dt,
    };
    assign_responsibility(&mut run, cfg);
    Ok(run)
}

/// Blame for rear-end collisions.
///
/// The rear vehicle is responsible when, at the moment its predecessor started
/// braking (or was stopped), the gap was below what its information mode
/// requires at the speeds of that moment; when it hit a predecessor that had
/// not changed behaviour at all; or when it started braking later than its
/// response time allows. The front vehicle is never blamed for braking.
/// Responsibility holds from the collision step onward.
pub fn assign_responsibility(run: &mut SimulationRun, cfg: &ScenarioConfig) {
    const TIME_SLACK: f64 = 1e-9;
    for trace in &mut run.traces {
        for s in &mut trace.steps {
            s.responsible = false;
        }
    }
    for v in &mut run.vehicles {
        v.responsible = false;
    }
    let offset = |lane: usize, index: usize| -> usize {
        cfg.lanes[..lane].iter().map(Vec::len).sum::<usize>() + index
    };
    for collision in &run.collisions {
        let k = offset(collision.lane, collision.rear);
        let rear = &run.vehicles[k];
        let too_close = match (rear.gap_at_reaction_m, rear.required_gap_at_reaction_m) {
            (Some(gap), Some(required)) => gap < required - CONTACT_TOLERANCE,
            _ => true,
        };
        let late = match (rear.reaction_window_start_s, rear.brake_onset_s) {
            (Some(start), Some(onset)) => onset - start > rear.effective_tau_s + TIME_SLACK,
            _ => false,
        };
        if too_close || late {
            run.vehicles[k].responsible = true;
            for s in run.traces[k].steps.iter_mut().skip(collision.step) {
                s.responsible = true;
            }
        }
    }
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub mode: Mode,
    pub vehicles: usize,
    pub sdt: usize,
    pub road_safe: bool,
    pub collisions: Vec<Collision>,
    pub responsible: Vec<String>,
    pub vehicle_length_m: f64,
    pub dt_s: f64,
    pub horizon_steps: usize,
    pub rng_seed: u64,
    pub per_vehicle: Vec<VehicleOutcome>,
}

pub fn summarize(run: &SimulationRun, cfg: &ScenarioConfig) -> Result<ScenarioSummary> {
    Ok(ScenarioSummary {
        mode: cfg.mode,
        vehicles: run.traces.len(),
        sdt: ltl::sdt(&run.traces)?,
        road_safe: ltl::road_safe(&run.traces)?,
        collisions: run.collisions.clone(),
        responsible: run
            .vehicles
            .iter()
            .filter(|v| v.responsible)
            .map(|v| v.id.clone())
            .collect(),
        vehicle_length_m: cfg
            .lanes
            .iter()
            .flatten()
            .next()
            .map_or(0.0, |e| e.params.length),
        dt_s: cfg.dt,
        horizon_steps: run.traces.first().map_or(0, Trace::horizon),
        rng_seed: cfg.rng_seed,
        per_vehicle: run.vehicles.clone(),
    })
}

// ---- configuration file -------------------------------------------------

fn default_dt() -> f64 {
    1e-3
}

fn default_timeout() -> f64 {
    cooperative::DEFAULT_REQUEST_TIMEOUT
}

fn default_true() -> bool {
    true
}

fn default_max_duration() -> f64 {
    600.0
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    mode: Mode,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default)]
    rng_seed: u64,
    #[serde(default = "default_timeout")]
    request_timeout_s: f64,
    #[serde(default = "default_true")]
    perception_available: bool,
    #[serde(default = "default_max_duration")]
    max_duration_s: f64,
    #[serde(default)]
    road: Option<RoadFile>,
    vehicle: VehicleFile,
    #[serde(default)]
    deviation: Option<DeviationFile>,
    #[serde(default)]
    latency: Option<LatencyFile>,
    #[serde(default)]
    triggers: Vec<BrakeTrigger>,
    lanes: Vec<LaneFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoadFile {
    length_km: f64,
    lanes: u32,
    speed_floor_kmh: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleFile {
    length_m: f64,
    a_max_brake_mps2: f64,
    a_max_acc_mps2: f64,
    tau0_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviationFile {
    #[serde(rename = "e_L", default = "default_one")]
    e_l: f64,
    #[serde(rename = "e_V", default = "default_one")]
    e_v: f64,
    #[serde(default = "default_one")]
    e_brake: f64,
    #[serde(default = "default_one")]
    e_tau: f64,
    #[serde(default)]
    regime: DeviationRegime,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LatencyFile {
    Preset { preset: String },
    Model(LatencyModel),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaneFile {
    vehicles: Vec<VehicleEntryFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleEntryFile {
    #[serde(default)]
    speed_mps: Option<f64>,
    #[serde(default)]
    speed_kmh: Option<f64>,
    #[serde(default)]
    gap_m: Option<f64>,
    /// Multiple of the mode-appropriate safe gap, resolved after loading.
    #[serde(default)]
    gap_factor: Option<f64>,
    #[serde(default)]
    extra_reaction_delay_s: f64,
}

impl ScenarioConfig {
    /// Parses the TOML scenario format (see the repository README).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("scenario file: {e}")))?;
        let road = match file.road {
            Some(r) => RoadSpec::new(r.length_km, r.lanes, r.speed_floor_kmh)?,
            None => RoadSpec {
                lanes: (file.lanes.len() as u32).max(1),
                ..RoadSpec::default()
            },
        };
        let dev = match file.deviation {
            Some(d) => DeviationSet::new(d.e_l, d.e_v, d.e_brake, d.e_tau, d.regime)?,
            None => DeviationSet::unit(),
        };
        let latency = match file.latency {
            None => LatencyModel::preset("dsrc").expect("dsrc preset exists"),
            Some(LatencyFile::Preset { preset }) => LatencyModel::preset(&preset).ok_or_else(|| {
                Error::InvalidInput(format!("unknown latency preset `{preset}` (dsrc|5g|4g)"))
            })?,
            Some(LatencyFile::Model(model)) => model,
        };
        let v = file.vehicle;
        let mut factors = Vec::new();
        let mut lanes = Vec::with_capacity(file.lanes.len());
        for (lane, lane_file) in file.lanes.into_iter().enumerate() {
            let mut entries = Vec::with_capacity(lane_file.vehicles.len());
            for (idx, e) in lane_file.vehicles.into_iter().enumerate() {
                let speed = match (e.speed_mps, e.speed_kmh) {
                    (Some(mps), None) => mps,
                    (None, Some(kmh)) => kmh_to_mps(kmh),
                    _ => {
                        return Err(Error::InvalidInput(format!(
                            "vehicle l{lane}v{idx}: give exactly one of speed_mps / speed_kmh"
                        )))
                    }
                };
                let params =
                    VehicleParams::new(v.length_m, v.a_max_brake_mps2, v.a_max_acc_mps2, speed, v.tau0_s)?;
                let gap = match (idx, e.gap_m, e.gap_factor) {
                    (0, None, None) => 0.0,
                    (0, _, _) => {
                        return Err(Error::InvalidInput(format!(
                            "vehicle l{lane}v0 leads its lane and takes no gap"
                        )))
                    }
                    (_, Some(gap), None) => gap,
                    (_, None, Some(factor)) => {
                        factors.push((lane, idx, factor));
                        f64::NAN
                    }
                    _ => {
                        return Err(Error::InvalidInput(format!(
                            "vehicle l{lane}v{idx}: give exactly one of gap_m / gap_factor"
                        )))
                    }
                };
                entries.push(FleetEntry {
                    params,
                    gap_to_predecessor: gap,
                    extra_reaction_delay: e.extra_reaction_delay_s,
                });
            }
            lanes.push(entries);
        }
        let mut cfg = ScenarioConfig {
            road,
            lanes,
            mode: file.mode,
            dev,
            latency,
            dt: file.dt,
            rng_seed: file.rng_seed,
            triggers: file.triggers,
            request_timeout: file.request_timeout_s,
            perception_available: file.perception_available,
            max_duration: file.max_duration_s,
        };
        if !factors.is_empty() {
            let plans = follower_plans(&cfg)?;
            for (lane, idx, factor) in factors {
                cfg.lanes[lane][idx].gap_to_predecessor =
                    factor * plans[lane][idx].required_gap.unwrap_or(0.0);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
