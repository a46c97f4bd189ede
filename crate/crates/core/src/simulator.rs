//! Workload generation and the iterative scheduling loop.
//!
//! Each round, in order: retire finished jobs, refresh sustainability
//! profiles for the round's hour, admit arrivals, solve the placement,
//! apply it, and charge every running job's energy to the facility it runs
//! on.
//!
//! Randomness comes from ChaCha8 with one stream per purpose (arrival
//! counts, powers, lifetimes, owners) derived from a single seed, so traces
//! are identical across platforms and adding users does not shift arrival
//! times.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::factor::{Factor, FootprintVector};
use crate::footprint::{self, DataCenterProfile, FootprintError, Job, RegionProfile};
use crate::gridmix::{GridError, RegionCatalog, SECONDS_PER_HOUR};
use crate::ids::{DcId, JobId, UserId};
use crate::scheduler::{
    single_factor_weights, solve_round, DcSlot, PlacementState, RoundDecision, SchedulerConfig,
    SchedulerError, User,
};

/// 2025-05-12T00:00:00Z
pub const DEFAULT_START_TIMESTAMP: i64 = 1_747_008_000;

const STREAM_ARRIVALS: u64 = 0;
const STREAM_POWER: u64 = 1;
const STREAM_LIFETIME: u64 = 2;
const STREAM_OWNER: u64 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("data center {dc} references unknown region {region}")]
    UnknownRegion { dc: DcId, region: String },
    #[error("data center {0} appears more than once in the fleet")]
    DuplicateDc(DcId),
    #[error("hour {t_hour}: {source}")]
    Scheduler { t_hour: u32, source: SchedulerError },
    #[error("hour {t_hour}: {source}")]
    Grid { t_hour: u32, source: GridError },
    #[error(transparent)]
    Footprint(#[from] FootprintError),
    #[error("strategy {label}: {source}")]
    Variant {
        label: String,
        source: Box<SimError>,
    },
}

/// Where job preferences come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Strategy {
    /// Each job is weighted by its owner's preferences.
    #[default]
    Preference,
    /// Every job optimizes a single factor.
    Baseline(Factor),
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Preference,
        Strategy::Baseline(Factor::Carbon),
        Strategy::Baseline(Factor::Water),
        Strategy::Baseline(Factor::Land),
        Strategy::Baseline(Factor::Ewaste),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Preference => "preference",
            Strategy::Baseline(f) => f.name(),
        }
    }

    /// Users with preferences replaced according to the strategy.
    pub fn effective_users(&self, users: &[User]) -> BTreeMap<UserId, User> {
        users
            .iter()
            .map(|u| {
                let weights = match self {
                    Strategy::Preference => u.weights,
                    Strategy::Baseline(f) => single_factor_weights(*f),
                };
                (u.user_id.clone(), User::new(u.user_id.clone(), weights))
            })
            .collect()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "preference" | "preferencebased" => Ok(Strategy::Preference),
            "carbonopt" => Ok(Strategy::Baseline(Factor::Carbon)),
            "wateropt" => Ok(Strategy::Baseline(Factor::Water)),
            "landuseopt" => Ok(Strategy::Baseline(Factor::Land)),
            other => other
                .parse::<Factor>()
                .map(Strategy::Baseline)
                .map_err(|_| format!("unknown strategy `{s}`")),
        }
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.name().into()
    }
}

impl TryFrom<String> for Strategy {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Length of the simulated period in hours.
    pub horizon_hours: u32,
    /// Hours between two rounds.
    pub dt_hours: u32,
    /// Mean job arrivals per hour.
    pub lambda_per_hour: f64,
    pub power_range_kw: (f64, f64),
    pub lifetime_range_h: (u32, u32),
    pub seed: u64,
    /// Unix time of hour 0, used to look up hourly grid data.
    pub start_timestamp: i64,
    pub users: Vec<User>,
    pub strategy: Strategy,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            horizon_hours: 72,
            dt_hours: 1,
            lambda_per_hour: 10.0,
            power_range_kw: (0.5, 10.0),
            lifetime_range_h: (1, 5),
            seed: 0,
            start_timestamp: DEFAULT_START_TIMESTAMP,
            users: Vec::new(),
            strategy: Strategy::Preference,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if self.horizon_hours < 1 {
            return bad("horizon_hours must be >= 1");
        }
        if self.dt_hours < 1 {
            return bad("dt_hours must be >= 1");
        }
        if !(self.lambda_per_hour.is_finite() && self.lambda_per_hour >= 0.0) {
            return bad("lambda_per_hour must be finite and >= 0");
        }
        let (plo, phi) = self.power_range_kw;
        if !(plo.is_finite() && phi.is_finite() && plo >= 0.0 && plo <= phi) {
            return bad("power_range_kw must satisfy 0 <= low <= high");
        }
        let (llo, lhi) = self.lifetime_range_h;
        if llo < 1 || llo > lhi {
            return bad("lifetime_range_h must satisfy 1 <= low <= high");
        }
        if self.lambda_per_hour > 0.0 && self.users.is_empty() {
            return bad("at least one user is required when jobs arrive");
        }
        let mut seen = BTreeSet::new();
        for u in &self.users {
            if !seen.insert(&u.user_id) {
                return Err(SimError::InvalidConfig(format!(
                    "user {} appears more than once",
                    u.user_id
                )));
            }
        }
        Ok(())
    }

    /// Number of rounds covering the horizon.
    pub fn rounds(&self) -> u32 {
        self.horizon_hours.div_ceil(self.dt_hours)
    }
}

fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

/// Draws the job requests of the whole horizon.
///
/// Per hour the number of arrivals is Poisson(λ); each job gets a uniform
/// power and integer lifetime and a uniformly chosen owner. Ids follow
/// arrival order.
pub fn generate_workload(cfg: &SimulationConfig) -> Result<Vec<Job>, SimError> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    if cfg.lambda_per_hour == 0.0 {
        return Ok(jobs);
    }
    let poisson = Poisson::new(cfg.lambda_per_hour)
        .map_err(|e| SimError::InvalidConfig(format!("arrival rate: {e}")))?;
    let mut arrivals = stream(cfg.seed, STREAM_ARRIVALS);
    let mut powers = stream(cfg.seed, STREAM_POWER);
    let mut lifetimes = stream(cfg.seed, STREAM_LIFETIME);
    let mut owners = stream(cfg.seed, STREAM_OWNER);
    let (plo, phi) = cfg.power_range_kw;
    let (llo, lhi) = cfg.lifetime_range_h;
    for hour in 0..cfg.horizon_hours {
        let count = poisson.sample(&mut arrivals) as u64;
        for _ in 0..count {
            let owner = &cfg.users[owners.random_range(0..cfg.users.len())];
            jobs.push(Job {
                job_id: JobId(jobs.len() as u64),
                owner: owner.user_id.clone(),
                power_kw: powers.random_range(plo..=phi),
                lifetime_hours: lifetimes.random_range(llo..=lhi),
                arrival_hour: hour,
                current_dc: None,
            });
        }
    }
    Ok(jobs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t_hour: u32,
    pub timestamp: i64,
    pub decision: RoundDecision,
    /// Footprint of the round per facility; facilities with no jobs omitted.
    pub per_dc: BTreeMap<DcId, FootprintVector>,
    pub total: FootprintVector,
    /// Jobs running after placement.
    pub active_jobs: usize,
    /// New requests admitted this round.
    pub arrivals: usize,
    /// Jobs that finished before this round.
    pub retired: usize,
    pub migrations: usize,
    pub deferred: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub label: String,
    pub records: Vec<RoundRecord>,
    pub cumulative: FootprintVector,
}

impl SimulationTrace {
    pub fn total_migrations(&self) -> usize {
        self.records.iter().map(|r| r.migrations).sum()
    }
}

/// One strategy/scheduler combination in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub strategy: Strategy,
    pub scheduler: SchedulerConfig,
}

impl Variant {
    pub fn new(strategy: Strategy, scheduler: SchedulerConfig) -> Self {
        Self {
            label: strategy.name().into(),
            strategy,
            scheduler,
        }
    }
}

fn check_fleet(fleet: &[DataCenterProfile], catalog: &RegionCatalog) -> Result<(), SimError> {
    let mut seen = BTreeSet::new();
    for dc in fleet {
        if !seen.insert(&dc.dc_id) {
            return Err(SimError::DuplicateDc(dc.dc_id.clone()));
        }
        if !catalog.contains(&dc.region) {
            return Err(SimError::UnknownRegion {
                dc: dc.dc_id.clone(),
                region: dc.region.0.clone(),
            });
        }
    }
    Ok(())
}

struct Running {
    job: Job,
    hours_done: u32,
}

/// Runs the scheduling loop for `cfg.strategy` on a freshly generated
/// workload.
pub fn run_simulation(
    cfg: &SimulationConfig,
    fleet: &[DataCenterProfile],
    catalog: &RegionCatalog,
    scheduler: &SchedulerConfig,
) -> Result<SimulationTrace, SimError> {
    let workload = generate_workload(cfg)?;
    let variant = Variant::new(cfg.strategy, *scheduler);
    run_with_workload(cfg, &workload, fleet, catalog, &variant)
}

/// Runs every variant on one shared workload.
pub fn run_comparison(
    cfg: &SimulationConfig,
    fleet: &[DataCenterProfile],
    catalog: &RegionCatalog,
    variants: &[Variant],
) -> Result<Vec<SimulationTrace>, SimError> {
    if variants.is_empty() {
        return Err(SimError::InvalidConfig("no strategies to compare".into()));
    }
    let workload = generate_workload(cfg)?;
    variants
        .iter()
        .map(|v| {
            run_with_workload(cfg, &workload, fleet, catalog, v).map_err(|e| SimError::Variant {
                label: v.label.clone(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Runs the scheduling loop on a given workload. Jobs must be ordered by
/// arrival hour.
pub fn run_with_workload(
    cfg: &SimulationConfig,
    workload: &[Job],
    fleet: &[DataCenterProfile],
    catalog: &RegionCatalog,
    variant: &Variant,
) -> Result<SimulationTrace, SimError> {
    cfg.validate()?;
    variant
        .scheduler
        .validate()
        .map_err(|source| SimError::Scheduler { t_hour: 0, source })?;
    check_fleet(fleet, catalog)?;
    let users = variant.strategy.effective_users(&cfg.users);
    let dcs: BTreeMap<&DcId, &DataCenterProfile> = fleet.iter().map(|d| (&d.dc_id, d)).collect();

    let mut running: Vec<Running> = Vec::new();
    let mut pending: Vec<Job> = Vec::new();
    let mut next_arrival = 0;
    let mut records = Vec::with_capacity(cfg.rounds() as usize);
    let mut cumulative = FootprintVector::ZERO;

    for round in 0..cfg.rounds() {
        let t_hour = round * cfg.dt_hours;
        let timestamp = cfg.start_timestamp + i64::from(t_hour) * SECONDS_PER_HOUR;

        let before = running.len();
        running.retain(|r| r.hours_done < r.job.lifetime_hours);
        let retired = before - running.len();
        let mut state = PlacementState::new();
        for r in &running {
            if let Some(d) = &r.job.current_dc {
                state.place(r.job.job_id, d.clone());
            }
        }

        let mut regions: BTreeMap<&DcId, RegionProfile> = BTreeMap::new();
        let mut slots = Vec::with_capacity(fleet.len());
        for dc in fleet {
            let region = catalog
                .profile_at(&dc.region, timestamp)
                .map_err(|source| SimError::Grid { t_hour, source })?;
            slots.push(DcSlot {
                dc_id: dc.dc_id.clone(),
                s_max: dc.s_max,
                profile: footprint::per_kwh_profile(dc, &region)?,
            });
            regions.insert(&dc.dc_id, region);
        }

        let window_end = t_hour + cfg.dt_hours;
        let mut arrivals = 0;
        let mut queue: Vec<Job> = running.iter().map(|r| r.job.clone()).collect();
        queue.append(&mut pending);
        while next_arrival < workload.len() && workload[next_arrival].arrival_hour < window_end {
            queue.push(workload[next_arrival].clone());
            next_arrival += 1;
            arrivals += 1;
        }

        let decision = solve_round(&queue, &slots, &users, &variant.scheduler)
            .map_err(|source| SimError::Scheduler { t_hour, source })?;

        let mut placed: BTreeMap<JobId, Running> =
            running.drain(..).map(|r| (r.job.job_id, r)).collect();
        let deferred: BTreeSet<JobId> = decision.deferred.iter().copied().collect();
        for job in queue {
            if deferred.contains(&job.job_id) {
                pending.push(job);
            } else {
                placed
                    .entry(job.job_id)
                    .or_insert(Running { job, hours_done: 0 });
            }
        }
        pending.sort_by_key(|j| (j.arrival_hour, j.job_id));
        for r in placed.values_mut() {
            r.job.current_dc = Some(decision.placements[&r.job.job_id].clone());
        }
        state.apply(&decision);
        debug_assert!(state.is_consistent());

        let step = cfg.dt_hours.min(cfg.horizon_hours - t_hour);
        let mut per_dc: BTreeMap<DcId, FootprintVector> = BTreeMap::new();
        let mut total = FootprintVector::ZERO;
        for r in placed.values_mut() {
            let hours = step.min(r.job.lifetime_hours - r.hours_done);
            let dc_id = r
                .job
                .current_dc
                .as_ref()
                .expect("placed jobs have a data center");
            let dc = dcs[dc_id];
            let fp = footprint::footprint(r.job.energy_kwh(f64::from(hours)), dc, &regions[dc_id])?;
            *per_dc.entry(dc_id.clone()).or_default() += fp;
            total += fp;
            r.hours_done += hours;
        }
        cumulative += total;
        running = placed.into_values().collect();

        records.push(RoundRecord {
            t_hour,
            timestamp,
            migrations: decision.migrations.len(),
            deferred: decision.deferred.len(),
            decision,
            per_dc,
            total,
            active_jobs: running.len(),
            arrivals,
            retired,
        });
    }

    Ok(SimulationTrace {
        label: variant.label.clone(),
        records,
        cumulative,
    })
}
