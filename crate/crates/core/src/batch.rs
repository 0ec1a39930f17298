//! Batch cross-checking of the response-time analysis against the
//! simulator, plus the random task-set generator that feeds it.
//!
//! With the `parallel` feature (default) [`cross_check_all`] fans out over
//! rayon's thread pool; without it the sequential path is used. Both paths
//! return results in input order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{hyperperiod, response_time, AnalysisError};
use crate::model::{Component, OpRegistry, SystemState, TaskSet, Tick};
use crate::simulator::{SimConfig, SimError, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossCheck {
    pub rta_schedulable: bool,
    pub sim_misses: u64,
    pub hyperperiod: Tick,
}

impl CrossCheck {
    /// Analysis and simulation agree: schedulable iff no deadline miss.
    pub fn agrees(&self) -> bool {
        self.rta_schedulable == (self.sim_misses == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BatchError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

/// Runs the analysis and a synchronous-release simulation over one
/// hyperperiod with no management activity.
pub fn cross_check(ts: &TaskSet) -> Result<CrossCheck, BatchError> {
    let hp = hyperperiod(ts, None)?;
    let report = response_time(ts);
    let state = SystemState::new(ts.clone(), OpRegistry::new(), 0);
    let mut cfg = SimConfig::new(state, hp);
    cfg.record_trace = false;
    let mut sim = Simulation::new(cfg)?;
    let seg = sim.run_until(hp)?;
    Ok(CrossCheck {
        rta_schedulable: report.schedulable,
        sim_misses: seg.summary.deadline_misses,
        hyperperiod: hp,
    })
}

pub fn cross_check_all_sequential(sets: &[TaskSet]) -> Vec<Result<CrossCheck, BatchError>> {
    sets.iter().map(cross_check).collect()
}

#[cfg(feature = "parallel")]
pub fn cross_check_all_parallel(sets: &[TaskSet]) -> Vec<Result<CrossCheck, BatchError>> {
    use rayon::prelude::*;
    sets.par_iter().map(cross_check).collect()
}

pub fn cross_check_all(sets: &[TaskSet]) -> Vec<Result<CrossCheck, BatchError>> {
    #[cfg(feature = "parallel")]
    {
        cross_check_all_parallel(sets)
    }
    #[cfg(not(feature = "parallel"))]
    {
        cross_check_all_sequential(sets)
    }
}

/// Shape of randomly generated task sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSetShape {
    pub min_tasks: usize,
    pub max_tasks: usize,
    pub min_period: Tick,
    pub max_period: Tick,
}

impl Default for TaskSetShape {
    fn default() -> Self {
        Self { min_tasks: 2, max_tasks: 5, min_period: 2, max_period: 30 }
    }
}

/// Exact check of `sum C_i / T_i <= 1`.
pub fn utilization_at_most_one(components: &[Component]) -> bool {
    let lcm = components.iter().fold(1u128, |acc, c| num_integer::lcm(acc, c.period as u128));
    let demand: u128 = components.iter().map(|c| c.wcet as u128 * (lcm / c.period as u128)).sum();
    demand <= lcm
}

/// Draws an implicit-deadline task set with total utilization at most 1.
/// Utilizations are split with UUniFast around a uniformly drawn total, so
/// the batch covers both comfortably and barely schedulable sets.
pub fn random_task_set<R: Rng>(rng: &mut R, shape: &TaskSetShape) -> TaskSet {
    loop {
        let n = rng.gen_range(shape.min_tasks..=shape.max_tasks);
        let total: f64 = rng.gen_range(0.05..=1.0);
        let mut remaining = total;
        let mut utils = Vec::with_capacity(n);
        for i in 1..n {
            let next = remaining * rng.gen::<f64>().powf(1.0 / (n - i) as f64);
            utils.push(remaining - next);
            remaining = next;
        }
        utils.push(remaining);

        let components: Vec<Component> = utils
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let period = rng.gen_range(shape.min_period..=shape.max_period);
                let wcet = ((u * period as f64).round() as Tick).clamp(1, period);
                Component::new(format!("t{i}").as_str(), wcet, period, period)
            })
            .collect();
        if utilization_at_most_one(&components) {
            return TaskSet::new(components, vec![]);
        }
    }
}

/// `count` task sets reproducible from `seed`.
pub fn random_task_sets(seed: u64, count: usize, shape: &TaskSetShape) -> Vec<TaskSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_task_set(&mut rng, shape)).collect()
}
