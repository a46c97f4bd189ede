//! Per-round job placement and migration.
//!
//! Each round every job (running or newly arrived) is assigned to exactly
//! one data center so that the summed cost is minimal. A job's cost at a
//! facility is the facility's profile dotted with the owner's weights.
//! Per-facility job limits apply, and a running job may only move if the
//! destination is at least a fraction `alpha` cheaper than where it runs now.
//!
//! Jobs occupy one capacity unit each, so the round is a transportation
//! problem; [`solve_round`] solves it exactly with successive shortest
//! paths. [`brute_force_round`] enumerates all assignments and serves as
//! the verification oracle. Both break ties towards the lexicographically
//! smallest assignment (jobs by id, data centers by id).

mod brute;
mod flow;
mod instance;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::factor::{Factor, FactorWeights, FootprintVector, FACTOR_COUNT};
use crate::footprint::Job;
use crate::ids::{DcId, JobId, UserId};

pub use instance::{CostRow, RoundInstance};

/// A deployed job whose current cost is at or below this never migrates.
pub const COST_EPSILON: f64 = 1e-9;

/// Largest `|dcs|^|jobs|` the brute-force oracle accepts.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchedulerError {
    #[error("alpha must lie in [0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("job {job} is deployed on {dc}, which is not part of the fleet")]
    UnknownPreviousDc { job: JobId, dc: DcId },
    #[error("job {job} belongs to unknown user {owner}")]
    UnknownOwner { job: JobId, owner: UserId },
    #[error("job {0} appears more than once")]
    DuplicateJob(JobId),
    #[error("data center {0} appears more than once")]
    DuplicateDc(DcId),
    #[error("cost row of job {job} has {got} entries for {expected} data centers")]
    CostRowLength {
        job: JobId,
        expected: usize,
        got: usize,
    },
    #[error("{demand} new jobs exceed the {capacity} free slots")]
    Overloaded { demand: usize, capacity: usize },
    #[error("running jobs cannot be placed within capacity ({jobs} running, {capacity} slots)")]
    RunningJobsExceedCapacity { jobs: usize, capacity: usize },
    #[error("instance too large for exhaustive search: {dcs}^{jobs} assignments")]
    TooLarge { dcs: usize, jobs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityMode {
    /// Every job assigned to a facility counts against its limit.
    #[default]
    Concurrent,
    /// Only jobs moving into a facility (new or migrating) count.
    Incoming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Each factor rescaled to [0, 1] across the fleet of the round.
    #[default]
    MinMax,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfeasibilityPolicy {
    /// Postpone the most recent new arrivals to the next round.
    #[default]
    Defer,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// Minimum relative improvement for a migration, in [0, 1).
    pub alpha: f64,
    pub capacity_mode: CapacityMode,
    pub migration_enabled: bool,
    pub normalization: Normalization,
    pub infeasibility_policy: InfeasibilityPolicy,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            capacity_mode: CapacityMode::Concurrent,
            migration_enabled: true,
            normalization: Normalization::MinMax,
            infeasibility_policy: InfeasibilityPolicy::Defer,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), SchedulerError> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(SchedulerError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }
}

/// A job owner and its factor preferences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub user_id: UserId,
    pub weights: FactorWeights,
}

impl User {
    pub fn new(user_id: impl Into<UserId>, weights: FactorWeights) -> Self {
        Self {
            user_id: user_id.into(),
            weights,
        }
    }
}

/// One-hot preferences of the single-factor baselines.
pub fn single_factor_weights(factor: Factor) -> FactorWeights {
    FactorWeights::one_hot(factor)
}

/// A data center as seen by one round: its job limit and raw per-kWh
/// sustainability profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcSlot {
    pub dc_id: DcId,
    pub s_max: u32,
    pub profile: FootprintVector,
}

/// Where every running job is and how many jobs each facility holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlacementState {
    assignments: BTreeMap<JobId, DcId>,
    occupancy: BTreeMap<DcId, usize>,
}

impl PlacementState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assignments(&self) -> &BTreeMap<JobId, DcId> {
        &self.assignments
    }

    pub fn get(&self, job: JobId) -> Option<&DcId> {
        self.assignments.get(&job)
    }

    pub fn occupancy(&self, dc: &DcId) -> usize {
        self.occupancy.get(dc).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn place(&mut self, job: JobId, dc: DcId) {
        self.remove(job);
        *self.occupancy.entry(dc.clone()).or_insert(0) += 1;
        self.assignments.insert(job, dc);
    }

    pub fn remove(&mut self, job: JobId) -> Option<DcId> {
        let dc = self.assignments.remove(&job)?;
        if let Some(n) = self.occupancy.get_mut(&dc) {
            *n -= 1;
            if *n == 0 {
                self.occupancy.remove(&dc);
            }
        }
        Some(dc)
    }

    /// Records the placements of a round.
    pub fn apply(&mut self, decision: &RoundDecision) {
        for (job, dc) in &decision.placements {
            self.place(*job, dc.clone());
        }
        for job in &decision.deferred {
            self.remove(*job);
        }
    }

    /// Occupancy matches the assignment map exactly.
    pub fn is_consistent(&self) -> bool {
        let mut counts: BTreeMap<&DcId, usize> = BTreeMap::new();
        for dc in self.assignments.values() {
            *counts.entry(dc).or_insert(0) += 1;
        }
        counts.len() == self.occupancy.len()
            && counts
                .iter()
                .all(|(dc, n)| self.occupancy.get(*dc) == Some(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Migration {
    pub job: JobId,
    pub from: DcId,
    pub to: DcId,
    pub cost_before: f64,
    pub cost_after: f64,
}

/// Outcome of one round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundDecision {
    pub placements: BTreeMap<JobId, DcId>,
    /// Ordered by job id.
    pub migrations: Vec<Migration>,
    /// In queue order.
    pub deferred: Vec<JobId>,
    pub objective_value: f64,
}

/// `C(j, d)` for a (possibly normalized) profile.
pub fn cost(profile: &FootprintVector, user: &User) -> f64 {
    profile.dot(&user.weights)
}

/// Rescales each factor across the fleet. In min-max mode a factor with no
/// spread maps to 0 everywhere.
pub fn normalize_profiles(
    profiles: &BTreeMap<DcId, FootprintVector>,
    mode: Normalization,
) -> BTreeMap<DcId, FootprintVector> {
    match mode {
        Normalization::None => profiles.clone(),
        Normalization::MinMax => {
            let mut lo = [f64::INFINITY; FACTOR_COUNT];
            let mut hi = [f64::NEG_INFINITY; FACTOR_COUNT];
            for p in profiles.values() {
                for (i, v) in p.to_array().into_iter().enumerate() {
                    lo[i] = lo[i].min(v);
                    hi[i] = hi[i].max(v);
                }
            }
            profiles
                .iter()
                .map(|(id, p)| {
                    let mut out = p.to_array();
                    for (i, v) in out.iter_mut().enumerate() {
                        let span = hi[i] - lo[i];
                        *v = if span > 0.0 { (*v - lo[i]) / span } else { 0.0 };
                    }
                    (id.clone(), FootprintVector::from_array(out))
                })
                .collect()
        }
    }
}

/// Whether a running job at cost `current` may move to a destination
/// costing `candidate`.
pub fn migration_allowed(candidate: f64, current: f64, alpha: f64) -> bool {
    current > COST_EPSILON && candidate <= (1.0 - alpha) * current
}

/// Data centers a job may be assigned to this round.
///
/// New jobs may go anywhere. A running job may stay, or move to any
/// facility passing the migration trigger when migration is enabled.
pub fn feasible_dcs(
    job: &Job,
    costs: &BTreeMap<DcId, f64>,
    cfg: &SchedulerConfig,
) -> Result<BTreeSet<DcId>, SchedulerError> {
    let Some(prev) = &job.current_dc else {
        return Ok(costs.keys().cloned().collect());
    };
    let current = *costs
        .get(prev)
        .ok_or_else(|| SchedulerError::UnknownPreviousDc {
            job: job.job_id,
            dc: prev.clone(),
        })?;
    let mut out = BTreeSet::new();
    out.insert(prev.clone());
    if cfg.migration_enabled {
        out.extend(
            costs
                .iter()
                .filter(|(_, c)| migration_allowed(**c, current, cfg.alpha))
                .map(|(d, _)| d.clone()),
        );
    }
    Ok(out)
}

/// Solves one round exactly.
pub fn solve_round(
    jobs: &[Job],
    dcs: &[DcSlot],
    users: &BTreeMap<UserId, User>,
    cfg: &SchedulerConfig,
) -> Result<RoundDecision, SchedulerError> {
    RoundInstance::build(jobs, dcs, users, cfg)?.solve()
}

/// Solves one round by exhaustive enumeration.
pub fn brute_force_round(
    jobs: &[Job],
    dcs: &[DcSlot],
    users: &BTreeMap<UserId, User>,
    cfg: &SchedulerConfig,
) -> Result<RoundDecision, SchedulerError> {
    RoundInstance::build(jobs, dcs, users, cfg)?.brute_force()
}
