//! Long-run simulation of a scheduler and rate-energy sweeps.

use serde::{Deserialize, Serialize};

use crate::baselines::{EligibleOrders, OrderPolicy};
use crate::calibration::Calibrator;
use crate::channel::{SlotStream, SystemConfig, UserProfile};
use crate::error::{Error, Result};
use crate::scheduling::{DualScheduler, DualState, Scheduler, SchemeTag};
use crate::seeds::rng_from_seed;

/// Long-run averages of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub slots: u64,
    /// Bits per channel use; equals the sum of `per_user_rate`.
    pub avg_sum_rate: f64,
    /// Watts.
    pub avg_sum_harvest: f64,
    pub per_user_rate: Vec<f64>,
    pub access_freq: Vec<f64>,
    pub jain_index: f64,
    pub sum_rate_std_err: f64,
    pub sum_harvest_std_err: f64,
}

/// Jain's fairness index `(sum x)^2 / (N sum x^2)`; 1 for an all-zero vector.
pub fn jain_index(values: &[f64]) -> f64 {
    let sum: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|x| x * x).sum();
    if sq > 0.0 {
        sum * sum / (values.len() as f64 * sq)
    } else {
        1.0
    }
}

/// One slot of a run as kept in the decision log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub slot_index: u64,
    pub selected_user: usize,
    /// Capacity delivered to the selected user.
    pub rate: f64,
    /// Sum harvest of the idle users.
    pub idle_harvest: f64,
}

struct Accumulator {
    slots: u64,
    counts: Vec<u64>,
    rate_sums: Vec<f64>,
    harvest_sum: f64,
    rate_sq: f64,
    harvest_sq: f64,
}

impl Accumulator {
    fn new(n_users: usize) -> Self {
        Self {
            slots: 0,
            counts: vec![0; n_users],
            rate_sums: vec![0.0; n_users],
            harvest_sum: 0.0,
            rate_sq: 0.0,
            harvest_sq: 0.0,
        }
    }

    fn push(&mut self, user: usize, rate: f64, idle_harvest: f64) {
        self.slots += 1;
        self.counts[user] += 1;
        self.rate_sums[user] += rate;
        self.harvest_sum += idle_harvest;
        self.rate_sq += rate * rate;
        self.harvest_sq += idle_harvest * idle_harvest;
    }

    fn finish(&self) -> RunStatistics {
        let t = self.slots as f64;
        let per_user_rate: Vec<f64> = self.rate_sums.iter().map(|r| r / t).collect();
        let avg_sum_rate: f64 = per_user_rate.iter().sum();
        let avg_sum_harvest = self.harvest_sum / t;
        let std_err = |sq: f64, mean: f64| ((sq / t - mean * mean).max(0.0) / t).sqrt();
        RunStatistics {
            slots: self.slots,
            avg_sum_rate,
            avg_sum_harvest,
            jain_index: jain_index(&per_user_rate),
            access_freq: self.counts.iter().map(|&c| c as f64 / t).collect(),
            per_user_rate,
            sum_rate_std_err: std_err(self.rate_sq, avg_sum_rate),
            sum_harvest_std_err: std_err(self.harvest_sq, avg_sum_harvest),
        }
    }
}

fn simulate(
    scheduler: &mut dyn Scheduler,
    profiles: &[UserProfile],
    config: &SystemConfig,
    n_slots: u64,
    seed: u64,
    mut log: Option<&mut Vec<DecisionRecord>>,
) -> Result<RunStatistics> {
    if profiles.is_empty() {
        return Err(Error::Domain("cannot simulate without users".into()));
    }
    if n_slots == 0 {
        return Err(Error::Domain("a run needs at least one slot".into()));
    }
    let mut acc = Accumulator::new(profiles.len());
    let stream = SlotStream::new(profiles, config, rng_from_seed(seed));
    for slot in stream.take(n_slots as usize) {
        let user = scheduler.select_user(&slot);
        let rate = slot.capacities[user];
        let mut idle_harvest = 0.0;
        for (m, &q) in slot.harvests.iter().enumerate() {
            if m != user {
                idle_harvest += q;
            }
        }
        acc.push(user, rate, idle_harvest);
        if let Some(log) = log.as_deref_mut() {
            log.push(DecisionRecord {
                slot_index: slot.slot_index,
                selected_user: user,
                rate,
                idle_harvest,
            });
        }
    }
    Ok(acc.finish())
}

/// Runs `scheduler` over `n_slots` fresh slots drawn from `seed`.
pub fn run(
    scheduler: &mut dyn Scheduler,
    profiles: &[UserProfile],
    config: &SystemConfig,
    n_slots: u64,
    seed: u64,
) -> Result<RunStatistics> {
    simulate(scheduler, profiles, config, n_slots, seed, None)
}

/// As [`run`], also returning the per-slot decision log.
pub fn run_logged(
    scheduler: &mut dyn Scheduler,
    profiles: &[UserProfile],
    config: &SystemConfig,
    n_slots: u64,
    seed: u64,
) -> Result<(RunStatistics, Vec<DecisionRecord>)> {
    let mut log = Vec::with_capacity(n_slots as usize);
    let stats = simulate(scheduler, profiles, config, n_slots, seed, Some(&mut log))?;
    Ok((stats, log))
}

/// Recomputes run statistics from a decision log.
pub fn stats_from_log(log: &[DecisionRecord], n_users: usize) -> Result<RunStatistics> {
    if log.is_empty() {
        return Err(Error::Domain("empty decision log".into()));
    }
    let mut acc = Accumulator::new(n_users);
    for r in log {
        if r.selected_user >= n_users {
            return Err(Error::Dimension {
                expected: n_users,
                got: r.selected_user + 1,
            });
        }
        acc.push(r.selected_user, r.rate, r.idle_harvest);
    }
    Ok(acc.finish())
}

// ============================================================================
// Sweeps
// ============================================================================

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PointStatus {
    Ok,
    Infeasible { max: f64 },
    NotConverged { message: String },
}

/// One point of a rate-energy curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q_req: f64,
    pub status: PointStatus,
    pub duals: Option<DualState>,
    pub stats: Option<RunStatistics>,
}

impl SweepPoint {
    pub fn is_feasible(&self) -> bool {
        self.status == PointStatus::Ok
    }
}

/// Calibrates and runs a dual-metric scheme at each requirement in `grid`.
///
/// Duals are warm-started from the previous feasible point. Infeasible and
/// non-converged points are recorded, not fatal. All points share the same
/// run seed, so neighbouring points are compared on identical channels.
pub fn sweep_q_req(
    scheme: SchemeTag,
    grid: &[f64],
    calibrator: &Calibrator,
    profiles: &[UserProfile],
    config: &SystemConfig,
    n_slots: u64,
    run_seed: u64,
) -> Result<Vec<SweepPoint>> {
    if scheme.is_baseline() {
        return Err(Error::Domain(format!(
            "{scheme} is swept over orders, not q_req"
        )));
    }
    let mut warm: Option<DualState> = None;
    let mut points = Vec::with_capacity(grid.len());
    for &q_req in grid {
        let point = match calibrator.calibrate(scheme, q_req, warm.as_ref()) {
            Ok(duals) => {
                let mut sched = DualScheduler::new(duals.clone(), profiles.len())?;
                let stats = run(&mut sched, profiles, config, n_slots, run_seed)?;
                warm = Some(duals.clone());
                SweepPoint {
                    q_req,
                    status: PointStatus::Ok,
                    duals: Some(duals),
                    stats: Some(stats),
                }
            }
            Err(Error::Infeasible { max, .. }) => SweepPoint {
                q_req,
                status: PointStatus::Infeasible { max },
                duals: None,
                stats: None,
            },
            Err(e @ Error::NotConverged { .. }) => SweepPoint {
                q_req,
                status: PointStatus::NotConverged {
                    message: e.to_string(),
                },
                duals: None,
                stats: None,
            },
            Err(e) => return Err(e),
        };
        points.push(point);
    }
    Ok(points)
}

/// Every order-based policy of a family: `j = 1..=N` for order-MT/PF, the
/// singleton sets `{j}` for order-ET.
pub fn order_policies(scheme: SchemeTag, profiles: &[UserProfile]) -> Result<Vec<OrderPolicy>> {
    let n = profiles.len();
    (1..=n)
        .map(|j| match scheme {
            SchemeTag::OrderMt => OrderPolicy::order_mt(j, n),
            SchemeTag::OrderPf => OrderPolicy::order_pf(j, profiles),
            SchemeTag::OrderEt => OrderPolicy::order_et(EligibleOrders::new(vec![j], n)?, profiles),
            other => Err(Error::Domain(format!(
                "{other} is not an order-based scheme"
            ))),
        })
        .collect()
}

/// Runs each policy of [`order_policies`] on the same slot stream.
pub fn sweep_orders(
    scheme: SchemeTag,
    profiles: &[UserProfile],
    config: &SystemConfig,
    n_slots: u64,
    run_seed: u64,
) -> Result<Vec<(String, RunStatistics)>> {
    order_policies(scheme, profiles)?
        .into_iter()
        .map(|mut policy| {
            let stats = run(&mut policy, profiles, config, n_slots, run_seed)?;
            Ok((policy.label(), stats))
        })
        .collect()
}
