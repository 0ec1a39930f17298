//! Exact fixed-priority schedulability analysis.
//!
//! Response times are least fixed points of the classic rate-monotonic
//! recurrence, optionally extended with the interference of the periodic
//! management task (which always runs at the top priority). The module also
//! sizes the management task: its cost from the registered operations, its
//! period from a utilization budget or an activation window, and an optional
//! downward snap of that period onto an existing component period.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ComponentId, ManagementTaskConfig, OpRegistry, TaskSet, Tick};

/// Assigns rate-monotonic ranks: ascending period, ties broken by id.
/// The returned set lists components in rank order.
pub fn assign_rms_priorities(ts: &TaskSet) -> TaskSet {
    let mut components = ts.components.clone();
    components.sort_by(|a, b| a.period.cmp(&b.period).then_with(|| a.id.cmp(&b.id)));
    for (rank, c) in components.iter_mut().enumerate() {
        c.priority = rank as u32;
    }
    TaskSet { components, bindings: ts.bindings.clone() }
}

/// Outcome of the fixed-point search for one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseTime {
    Converged(Tick),
    /// The iteration exceeded the deadline; `exceeded` is the first
    /// iterate past it.
    Diverged { exceeded: Tick },
}

impl ResponseTime {
    pub fn ticks(self) -> Option<Tick> {
        match self {
            ResponseTime::Converged(r) => Some(r),
            ResponseTime::Diverged { .. } => None,
        }
    }
}

impl fmt::Display for ResponseTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResponseTime::Converged(r) => write!(f, "{r}"),
            ResponseTime::Diverged { exceeded } => write!(f, "diverged (>{exceeded})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentResponse {
    pub id: ComponentId,
    pub priority: u32,
    pub deadline: Tick,
    pub response_time: ResponseTime,
    pub iterations: u32,
}

impl ComponentResponse {
    pub fn meets_deadline(&self) -> bool {
        matches!(self.response_time, ResponseTime::Converged(r) if r <= self.deadline)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseTimeReport {
    /// One entry per component, in rank order.
    pub components: Vec<ComponentResponse>,
    /// Response time of an active management task (always its cost).
    /// `None` when no management task is considered or it is inert.
    pub management: Option<Tick>,
    pub schedulable: bool,
}

impl ResponseTimeReport {
    pub fn get(&self, id: &ComponentId) -> Option<&ComponentResponse> {
        self.components.iter().find(|c| &c.id == id)
    }

    /// Converged response times in rank order; `None` for diverged entries.
    pub fn response_times(&self) -> Vec<Option<Tick>> {
        self.components.iter().map(|c| c.response_time.ticks()).collect()
    }
}

/// Interference source as `(wcet, period)`.
type Interferer = (Tick, Tick);

/// Iterates `R = wcet + sum ceil(R / T_j) * C_j` from `R = wcet` until it
/// stabilizes or exceeds `deadline`.
fn fixed_point(wcet: Tick, deadline: Tick, interferers: &[Interferer]) -> (ResponseTime, u32) {
    let mut r = wcet;
    let mut iterations = 1;
    loop {
        if r > deadline {
            return (ResponseTime::Diverged { exceeded: r }, iterations);
        }
        let next = interferers.iter().fold(wcet, |acc, &(c, t)| {
            acc.saturating_add(r.div_ceil(t).saturating_mul(c))
        });
        if next == r {
            return (ResponseTime::Converged(r), iterations);
        }
        r = next;
        iterations += 1;
    }
}

fn analyze(ts: &TaskSet, extra: Option<Interferer>) -> ResponseTimeReport {
    let mut ranked: Vec<_> = ts.components.iter().collect();
    ranked.sort_by_key(|c| c.priority);

    let mut interferers: Vec<Interferer> = extra.into_iter().collect();
    let mut components = Vec::with_capacity(ranked.len());
    for c in ranked {
        let (response_time, iterations) = fixed_point(c.wcet, c.deadline, &interferers);
        components.push(ComponentResponse {
            id: c.id.clone(),
            priority: c.priority,
            deadline: c.deadline,
            response_time,
            iterations,
        });
        interferers.push((c.wcet, c.period));
    }
    let management = extra.map(|(c, _)| c);
    let schedulable = components.iter().all(ComponentResponse::meets_deadline);
    ResponseTimeReport { components, management, schedulable }
}

/// Response times under preemptive fixed priorities, using the ranks
/// already assigned to `ts`.
pub fn response_time(ts: &TaskSet) -> ResponseTimeReport {
    analyze(ts, None)
}

/// Response times including the interference of a top-priority management
/// task releasing `mgmt.cost` ticks of work every `mgmt.period`.
///
/// An inert task (zero cost) yields exactly [`response_time`]. A task whose
/// period is shorter than its cost can never be scheduled, so the report is
/// marked unschedulable.
pub fn response_time_with_mgmt(ts: &TaskSet, mgmt: &ManagementTaskConfig) -> ResponseTimeReport {
    if mgmt.is_inert() {
        return analyze(ts, None);
    }
    let mut report = analyze(ts, Some((mgmt.cost, mgmt.period)));
    // Top priority and non-preemptible: R = C, so D = C is met iff the
    // reservation fits in its own period.
    if mgmt.period < mgmt.cost {
        report.schedulable = false;
    }
    report
}

/// Cost reserved for the management task: the largest registered operation
/// cost, or zero for an empty registry.
pub fn compute_cmanag(registry: &OpRegistry) -> Tick {
    registry.specs().map(|s| s.wcet).max().unwrap_or(0)
}

/// Exact non-negative rational percentage, e.g. `7`, `6.5` or `13/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PercentRepr", into = "PercentRepr")]
pub struct Percent {
    num: u64,
    den: u64,
}

impl Percent {
    pub fn new(num: u64, den: u64) -> Result<Self, SizingError> {
        if den == 0 {
            return Err(SizingError::InvalidPercent(format!("{num}/0")));
        }
        let g = num_integer::gcd(num, den).max(1);
        Ok(Self { num: num / g, den: den / g })
    }

    pub fn whole(p: u64) -> Self {
        Self { num: p, den: 1 }
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Percent {
    type Err = SizingError;

    /// Accepts an integer, a decimal (`6.5`) or a fraction (`13/2`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SizingError::InvalidPercent(s.to_owned());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Percent::new(n, d).map_err(|_| bad());
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        let all_digits = |p: &str| p.chars().all(|c| c.is_ascii_digit());
        if !all_digits(int) || !all_digits(frac) || frac.len() > 18 {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int.checked_mul(den).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        Percent::new(num, den)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PercentRepr {
    Int(u64),
    Text(String),
    Float(f64),
}

impl TryFrom<PercentRepr> for Percent {
    type Error = SizingError;

    fn try_from(r: PercentRepr) -> Result<Self, Self::Error> {
        match r {
            PercentRepr::Int(v) => Ok(Percent::whole(v)),
            PercentRepr::Text(s) => s.parse(),
            // Shortest round-trip rendering of the float is its decimal text.
            PercentRepr::Float(v) => v.to_string().parse(),
        }
    }
}

impl From<Percent> for PercentRepr {
    fn from(p: Percent) -> Self {
        if p.den == 1 {
            PercentRepr::Int(p.num)
        } else {
            PercentRepr::Text(p.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SizingError {
    #[error("invalid percentage {0:?}")]
    InvalidPercent(String),
    #[error("utilization must be in (0, 100], got {0}")]
    UtilizationOutOfRange(Percent),
    #[error("management cost must be at least 1")]
    ZeroCost,
    #[error("activation count must be at least 1")]
    ZeroCount,
    #[error("window {window} is shorter than the activation count {count}")]
    WindowTooShort { window: Tick, count: u64 },
}

/// Period reserving at most `util_percent` of the processor for `cost`
/// ticks per activation: `ceil(100 * cost / U)`.
pub fn period_from_utilization(cost: Tick, util_percent: Percent) -> Result<Tick, SizingError> {
    if util_percent.num == 0 || util_percent.num > 100 * util_percent.den {
        return Err(SizingError::UtilizationOutOfRange(util_percent));
    }
    if cost == 0 {
        return Err(SizingError::ZeroCost);
    }
    let num = 100u128 * cost as u128 * util_percent.den as u128;
    Ok(num.div_ceil(util_percent.num as u128) as Tick)
}

/// Period guaranteeing at least `count` activations in any window of
/// `window` ticks: `floor(window / count)`.
pub fn period_from_window(window: Tick, count: u64) -> Result<Tick, SizingError> {
    if count == 0 {
        return Err(SizingError::ZeroCount);
    }
    if window < count {
        return Err(SizingError::WindowTooShort { window, count });
    }
    Ok(window / count)
}

/// Snaps `candidate` down onto the largest component period `P <= candidate`
/// with `(candidate - P) / candidate <= tolerance`. Returns `candidate`
/// unchanged when no period qualifies. Never snaps upward.
pub fn snap_period_to_existing(candidate: Tick, ts: &TaskSet, tolerance_percent: Percent) -> Tick {
    let within = |p: Tick| {
        // (c - p) / c <= num / (100 * den)
        let lhs = (candidate - p) as u128 * 100 * tolerance_percent.den as u128;
        let rhs = tolerance_percent.num as u128 * candidate as u128;
        lhs <= rhs
    };
    ts.components
        .iter()
        .map(|c| c.period)
        .filter(|&p| p <= candidate && within(p))
        .max()
        .unwrap_or(candidate)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("hyperperiod of an empty period collection")]
    EmptyPeriods,
    #[error("hyperperiod overflows the tick range")]
    Overflow,
}

/// Least common multiple of all component periods, plus the management
/// period when an active management task is given.
pub fn hyperperiod(ts: &TaskSet, mgmt: Option<&ManagementTaskConfig>) -> Result<Tick, AnalysisError> {
    let periods = ts
        .components
        .iter()
        .map(|c| c.period)
        .chain(mgmt.filter(|m| !m.is_inert()).map(|m| m.period));
    let mut acc: Option<Tick> = None;
    for p in periods {
        acc = Some(match acc {
            None => p,
            Some(a) => {
                let g = num_integer::gcd(a, p);
                (a / g).checked_mul(p).ok_or(AnalysisError::Overflow)?
            }
        });
    }
    acc.ok_or(AnalysisError::EmptyPeriods)
}
