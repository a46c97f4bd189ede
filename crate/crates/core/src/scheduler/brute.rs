//! Exhaustive search over all assignments, in lexicographic order, keeping
//! the first one with the smallest quantized objective.

use alloc::vec;
use alloc::vec::Vec;

use super::instance::{Prepared, RoundInstance};
use super::{CapacityMode, SchedulerError};

struct Search<'a> {
    inst: &'a RoundInstance,
    prep: &'a Prepared,
    load: Vec<u32>,
    current: Vec<usize>,
    best: Option<(i64, Vec<usize>)>,
}

impl Search<'_> {
    fn counts_against_capacity(&self, a: usize, d: usize) -> bool {
        match self.inst.mode {
            CapacityMode::Concurrent => true,
            CapacityMode::Incoming => self.inst.jobs[self.prep.active[a]].current_dc != Some(d),
        }
    }

    fn visit(&mut self, a: usize, partial: i64) {
        if let Some((best, _)) = &self.best {
            // Costs are non-negative: a partial sum already at the best
            // cannot become strictly better.
            if partial >= *best {
                return;
            }
        }
        if a == self.prep.active.len() {
            self.best = Some((partial, self.current.clone()));
            return;
        }
        let job = &self.inst.jobs[self.prep.active[a]];
        for d in 0..self.inst.dc_ids.len() {
            if !job.feasible[d] {
                continue;
            }
            let counted = self.counts_against_capacity(a, d);
            if counted && self.load[d] >= self.inst.capacity[d] {
                continue;
            }
            if counted {
                self.load[d] += 1;
            }
            self.current.push(d);
            self.visit(a + 1, partial + self.prep.qcost[a][d]);
            self.current.pop();
            if counted {
                self.load[d] -= 1;
            }
        }
    }
}

pub(super) fn solve(inst: &RoundInstance, prep: &Prepared) -> Result<Vec<usize>, SchedulerError> {
    let mut search = Search {
        inst,
        prep,
        load: vec![0; inst.dc_ids.len()],
        current: Vec::with_capacity(prep.active.len()),
        best: None,
    };
    search.visit(0, 0);
    match search.best {
        Some((_, assignment)) => Ok(assignment),
        None => Err(SchedulerError::RunningJobsExceedCapacity {
            jobs: prep
                .active
                .iter()
                .filter(|j| inst.jobs[**j].current_dc.is_some())
                .count(),
            capacity: inst.capacity.iter().map(|c| *c as usize).sum(),
        }),
    }
}
