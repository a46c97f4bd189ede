use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::{
    cost, migration_allowed, normalize_profiles, CapacityMode, DcSlot, InfeasibilityPolicy,
    Migration, RoundDecision, SchedulerConfig, SchedulerError, User,
};
use crate::footprint::Job;
use crate::ids::{DcId, JobId, UserId};

/// Costs of one job over the data centers of a [`RoundInstance`].
#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub job: JobId,
    pub arrival_hour: u32,
    /// Index into the data-center list passed alongside.
    pub current_dc: Option<usize>,
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct InstanceJob {
    pub id: JobId,
    pub arrival_hour: u32,
    pub current_dc: Option<usize>,
    pub costs: Vec<f64>,
    pub feasible: Vec<bool>,
}

/// A round reduced to a cost matrix: data centers sorted by id, jobs by id,
/// feasibility of every (job, data center) pair resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundInstance {
    pub(super) dc_ids: Vec<DcId>,
    pub(super) capacity: Vec<u32>,
    pub(super) jobs: Vec<InstanceJob>,
    pub(super) mode: CapacityMode,
    pub(super) policy: InfeasibilityPolicy,
}

/// The part of an instance that is actually solved: jobs left after
/// deferral, with costs quantized to integers so that ties are exact.
pub(super) struct Prepared {
    /// Indices into `RoundInstance::jobs`, ascending.
    pub active: Vec<usize>,
    pub deferred: Vec<JobId>,
    /// `qcost[a][d]` for active job `a`.
    pub qcost: Vec<Vec<i64>>,
}

impl RoundInstance {
    /// Builds the instance from raw profiles and user preferences.
    pub fn build(
        jobs: &[Job],
        dcs: &[DcSlot],
        users: &BTreeMap<UserId, User>,
        cfg: &SchedulerConfig,
    ) -> Result<Self, SchedulerError> {
        cfg.validate()?;
        let mut profiles = BTreeMap::new();
        for slot in dcs {
            if profiles.insert(slot.dc_id.clone(), slot.profile).is_some() {
                return Err(SchedulerError::DuplicateDc(slot.dc_id.clone()));
            }
        }
        let normalized = normalize_profiles(&profiles, cfg.normalization);
        let dc_ids: Vec<DcId> = normalized.keys().cloned().collect();
        let capacity_of: BTreeMap<&DcId, u32> = dcs.iter().map(|s| (&s.dc_id, s.s_max)).collect();
        let capacity = dc_ids.iter().map(|d| capacity_of[d]).collect();
        let index_of: BTreeMap<&DcId, usize> =
            dc_ids.iter().enumerate().map(|(i, d)| (d, i)).collect();

        let mut rows = Vec::with_capacity(jobs.len());
        for job in jobs {
            let user = users
                .get(&job.owner)
                .ok_or_else(|| SchedulerError::UnknownOwner {
                    job: job.job_id,
                    owner: job.owner.clone(),
                })?;
            let current_dc = match &job.current_dc {
                None => None,
                Some(d) => {
                    Some(
                        *index_of
                            .get(d)
                            .ok_or_else(|| SchedulerError::UnknownPreviousDc {
                                job: job.job_id,
                                dc: d.clone(),
                            })?,
                    )
                }
            };
            rows.push(CostRow {
                job: job.job_id,
                arrival_hour: job.arrival_hour,
                current_dc,
                costs: normalized.values().map(|p| cost(p, user)).collect(),
            });
        }
        Self::assemble(dc_ids, capacity, rows, cfg)
    }

    /// Builds an instance from an explicit cost matrix. Data centers need not
    /// be sorted; `current_dc` and cost columns follow the order given.
    pub fn from_costs(
        dc_ids: Vec<DcId>,
        capacity: Vec<u32>,
        rows: Vec<CostRow>,
        cfg: &SchedulerConfig,
    ) -> Result<Self, SchedulerError> {
        cfg.validate()?;
        let mut order: Vec<usize> = (0..dc_ids.len()).collect();
        order.sort_by(|a, b| dc_ids[*a].cmp(&dc_ids[*b]));
        let mut rank = alloc::vec![0; dc_ids.len()];
        for (new, old) in order.iter().enumerate() {
            rank[*old] = new;
        }
        let sorted_ids = order.iter().map(|i| dc_ids[*i].clone()).collect();
        let sorted_cap = order.iter().map(|i| capacity[*i]).collect();
        let mut sorted_rows = Vec::with_capacity(rows.len());
        for row in rows {
            if row.costs.len() != dc_ids.len() {
                return Err(SchedulerError::CostRowLength {
                    job: row.job,
                    expected: dc_ids.len(),
                    got: row.costs.len(),
                });
            }
            sorted_rows.push(CostRow {
                current_dc: row.current_dc.map(|d| rank[d]),
                costs: order.iter().map(|i| row.costs[*i]).collect(),
                ..row
            });
        }
        Self::assemble(sorted_ids, sorted_cap, sorted_rows, cfg)
    }

    fn assemble(
        dc_ids: Vec<DcId>,
        capacity: Vec<u32>,
        rows: Vec<CostRow>,
        cfg: &SchedulerConfig,
    ) -> Result<Self, SchedulerError> {
        for pair in dc_ids.windows(2) {
            if pair[0] == pair[1] {
                return Err(SchedulerError::DuplicateDc(pair[0].clone()));
            }
        }
        let mut seen = BTreeSet::new();
        let mut jobs: Vec<InstanceJob> = Vec::with_capacity(rows.len());
        for row in rows {
            if !seen.insert(row.job) {
                return Err(SchedulerError::DuplicateJob(row.job));
            }
            let feasible = match row.current_dc {
                None => alloc::vec![true; dc_ids.len()],
                Some(prev) => {
                    let current = row.costs[prev];
                    row.costs
                        .iter()
                        .enumerate()
                        .map(|(d, c)| {
                            d == prev
                                || (cfg.migration_enabled
                                    && migration_allowed(*c, current, cfg.alpha))
                        })
                        .collect()
                }
            };
            jobs.push(InstanceJob {
                id: row.job,
                arrival_hour: row.arrival_hour,
                current_dc: row.current_dc,
                costs: row.costs,
                feasible,
            });
        }
        jobs.sort_by_key(|j| j.id);
        Ok(Self {
            dc_ids,
            capacity,
            jobs,
            mode: cfg.capacity_mode,
            policy: cfg.infeasibility_policy,
        })
    }

    pub fn dc_ids(&self) -> &[DcId] {
        &self.dc_ids
    }

    pub fn job_count(&self) -> usize {
        self.jobs.len()
    }

    /// Whether job `job` (index in id order) may be placed on `dc`.
    pub fn is_feasible(&self, job: usize, dc: usize) -> bool {
        self.jobs[job].feasible[dc]
    }

    /// Solves with min-cost flow.
    pub fn solve(&self) -> Result<RoundDecision, SchedulerError> {
        let prepared = self.prepare()?;
        let assignment = super::flow::solve(self, &prepared)?;
        Ok(self.decision(&prepared, &assignment))
    }

    /// Solves by enumeration.
    pub fn brute_force(&self) -> Result<RoundDecision, SchedulerError> {
        let space = libm::pow(self.dc_ids.len() as f64, self.jobs.len() as f64);
        if space > super::BRUTE_FORCE_LIMIT {
            return Err(SchedulerError::TooLarge {
                dcs: self.dc_ids.len(),
                jobs: self.jobs.len(),
            });
        }
        let prepared = self.prepare()?;
        let assignment = super::brute::solve(self, &prepared)?;
        Ok(self.decision(&prepared, &assignment))
    }

    /// Applies the infeasibility policy and quantizes costs.
    pub(super) fn prepare(&self) -> Result<Prepared, SchedulerError> {
        let total: usize = self.capacity.iter().map(|c| *c as usize).sum();
        let running = self.jobs.iter().filter(|j| j.current_dc.is_some()).count();
        let free = match self.mode {
            CapacityMode::Concurrent => {
                total
                    .checked_sub(running)
                    .ok_or(SchedulerError::RunningJobsExceedCapacity {
                        jobs: running,
                        capacity: total,
                    })?
            }
            CapacityMode::Incoming => total,
        };
        let mut new_jobs: Vec<usize> = (0..self.jobs.len())
            .filter(|i| self.jobs[*i].current_dc.is_none())
            .collect();
        let mut deferred = Vec::new();
        if new_jobs.len() > free {
            if self.policy == InfeasibilityPolicy::Error {
                return Err(SchedulerError::Overloaded {
                    demand: new_jobs.len(),
                    capacity: free,
                });
            }
            new_jobs.sort_by_key(|i| (self.jobs[*i].arrival_hour, self.jobs[*i].id));
            deferred = new_jobs
                .split_off(free)
                .into_iter()
                .map(|i| self.jobs[i].id)
                .collect();
        }
        let deferred_set: BTreeSet<JobId> = deferred.iter().copied().collect();
        let active: Vec<usize> = (0..self.jobs.len())
            .filter(|i| !deferred_set.contains(&self.jobs[*i].id))
            .collect();

        let max_cost = active
            .iter()
            .flat_map(|a| {
                let j = &self.jobs[*a];
                j.costs
                    .iter()
                    .zip(&j.feasible)
                    .filter(|(_, f)| **f)
                    .map(|(c, _)| *c)
            })
            .fold(0.0_f64, f64::max);
        let scale = quantization_scale(max_cost, active.len());
        let qcost = active
            .iter()
            .map(|a| {
                self.jobs[*a]
                    .costs
                    .iter()
                    .map(|c| libm::round(c * scale) as i64)
                    .collect()
            })
            .collect();
        Ok(Prepared {
            active,
            deferred,
            qcost,
        })
    }

    /// Turns an assignment (data-center index per active job) into a decision.
    pub(super) fn decision(&self, prepared: &Prepared, assignment: &[usize]) -> RoundDecision {
        let mut placements = BTreeMap::new();
        let mut migrations = Vec::new();
        let mut objective = 0.0;
        for (a, &d) in prepared.active.iter().zip(assignment) {
            let job = &self.jobs[*a];
            objective += job.costs[d];
            placements.insert(job.id, self.dc_ids[d].clone());
            if let Some(prev) = job.current_dc {
                if prev != d {
                    migrations.push(Migration {
                        job: job.id,
                        from: self.dc_ids[prev].clone(),
                        to: self.dc_ids[d].clone(),
                        cost_before: job.costs[prev],
                        cost_after: job.costs[d],
                    });
                }
            }
        }
        RoundDecision {
            placements,
            migrations,
            deferred: prepared.deferred.clone(),
            objective_value: objective,
        }
    }
}

/// Power of two mapping costs to integers with about 2^50 of headroom for
/// path sums, capped at 2^40.
fn quantization_scale(max_cost: f64, jobs: usize) -> f64 {
    if max_cost.is_nan() || max_cost <= 0.0 {
        return 1.0;
    }
    let budget = libm::ldexp(1.0, 50) / (max_cost * (jobs as f64 + 2.0));
    let exp = libm::floor(libm::log2(budget)).clamp(-60.0, 40.0);
    libm::ldexp(1.0, exp as i32)
}
