//! Exhaustive reference optimizer over short horizons.
//!
//! Enumerates all `N^T` user assignments of a finite instance and keeps the
//! best one meeting the harvest requirement. Used to check the dual-metric
//! schedulers: over `T` slots the relaxed linear program has at most one
//! fractionally shared slot, so the best integral dual-metric schedule loses
//! at most `max_{i,n} C_n(i) / T` of average rate against the true optimum.

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationSettings, Calibrator, SlotPool};
use crate::channel::SlotRealization;
use crate::error::{Error, Result};
use crate::scheduling::DualState;

pub const ENUMERATION_BUDGET: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteInstance {
    pub realizations: Vec<SlotRealization>,
    /// Required average sum harvest over the horizon, Watts.
    pub q_req: f64,
}

impl FiniteInstance {
    pub fn new(realizations: Vec<SlotRealization>, q_req: f64) -> Result<Self> {
        let n = realizations
            .first()
            .map(SlotRealization::n_users)
            .ok_or_else(|| Error::Domain("instance needs at least one slot".into()))?;
        if let Some(bad) = realizations.iter().find(|s| s.n_users() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: bad.n_users(),
            });
        }
        let inst = Self {
            realizations,
            q_req,
        };
        inst.check_budget()?;
        Ok(inst)
    }

    pub fn n_users(&self) -> usize {
        self.realizations[0].n_users()
    }

    pub fn horizon(&self) -> usize {
        self.realizations.len()
    }

    pub fn assignments(&self) -> u128 {
        (self.n_users() as u128)
            .checked_pow(self.horizon() as u32)
            .unwrap_or(u128::MAX)
    }

    fn check_budget(&self) -> Result<()> {
        let assignments = self.assignments();
        if assignments > ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded {
                assignments,
                budget: ENUMERATION_BUDGET,
            });
        }
        Ok(())
    }

    /// `max_{i,n} C_n(i) / T`, the allowed shortfall of a dual-metric schedule.
    pub fn gap_bound(&self) -> f64 {
        let max_c = self
            .realizations
            .iter()
            .flat_map(|s| s.capacities.iter().copied())
            .fold(0.0, f64::max);
        max_c / self.horizon() as f64
    }

    /// Average sum harvest when the weakest harvester is always scheduled.
    pub fn max_harvest(&self) -> f64 {
        let schedule: Vec<usize> = self
            .realizations
            .iter()
            .map(|s| {
                let mut best = 0;
                for (n, &q) in s.harvests.iter().enumerate() {
                    if q < s.harvests[best] {
                        best = n;
                    }
                }
                best
            })
            .collect();
        self.evaluate(&schedule).avg_sum_harvest
    }

    /// Averages of a complete schedule (one user index per slot).
    pub fn evaluate(&self, schedule: &[usize]) -> ScheduleValue {
        let n = self.n_users();
        let t = self.horizon() as f64;
        let mut rate_sums = vec![0.0; n];
        let mut harvest_sum = 0.0;
        for (slot, &sel) in self.realizations.iter().zip(schedule) {
            rate_sums[sel] += slot.capacities[sel];
            let mut idle = 0.0;
            for (m, &q) in slot.harvests.iter().enumerate() {
                if m != sel {
                    idle += q;
                }
            }
            harvest_sum += idle;
        }
        let per_user_rate: Vec<f64> = rate_sums.iter().map(|r| r / t).collect();
        ScheduleValue {
            avg_sum_rate: per_user_rate.iter().sum(),
            avg_sum_harvest: harvest_sum / t,
            per_user_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleValue {
    pub avg_sum_rate: f64,
    pub avg_sum_harvest: f64,
    pub per_user_rate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OracleOutcome {
    Optimal { schedule: Vec<usize>, value: f64 },
    Infeasible { max_harvest: f64 },
}

impl OracleOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            OracleOutcome::Optimal { value, .. } => Some(*value),
            OracleOutcome::Infeasible { .. } => None,
        }
    }
}

/// Enumerates every assignment in lexicographic order and keeps the first one
/// maximizing `objective` among those meeting the harvest requirement.
fn enumerate<F>(instance: &FiniteInstance, objective: F) -> Result<OracleOutcome>
where
    F: Fn(&ScheduleValue) -> f64,
{
    instance.check_budget()?;
    let n = instance.n_users();
    let t = instance.horizon();
    let mut digits = vec![0usize; t];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let v = instance.evaluate(&digits);
        if v.avg_sum_harvest >= instance.q_req {
            let obj = objective(&v);
            if best.as_ref().is_none_or(|(_, b)| obj > *b) {
                best = Some((digits.clone(), obj));
            }
        }
        // Advance the base-N counter; stop after wrapping around.
        let mut pos = t;
        loop {
            if pos == 0 {
                return Ok(match best {
                    Some((schedule, value)) => OracleOutcome::Optimal { schedule, value },
                    None => OracleOutcome::Infeasible {
                        max_harvest: instance.max_harvest(),
                    },
                });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < n {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Best average sum rate subject to the harvest requirement.
pub fn brute_force_mt(instance: &FiniteInstance) -> Result<OracleOutcome> {
    enumerate(instance, |v| v.avg_sum_rate)
}

/// Best minimum per-user average rate subject to the harvest requirement.
pub fn brute_force_et(instance: &FiniteInstance) -> Result<OracleOutcome> {
    enumerate(instance, |v| {
        v.per_user_rate
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    })
}

/// The MT dual-metric schedule calibrated on the instance itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSchedule {
    pub duals: DualState,
    pub schedule: Vec<usize>,
    pub value: ScheduleValue,
}

impl DualSchedule {
    /// Selection variables `q_n(i)` of the schedule as a `T x N` matrix.
    pub fn selection_matrix(&self, n_users: usize) -> Vec<Vec<f64>> {
        self.schedule
            .iter()
            .map(|&sel| {
                (0..n_users)
                    .map(|n| if n == sel { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }
}

/// Bisects `nu` on the instance's own slots (zero energy tolerance) and
/// applies the per-slot argmax rule.
pub fn dual_metric_mt(instance: &FiniteInstance) -> Result<DualSchedule> {
    let pool = SlotPool::from_slots(&instance.realizations)?;
    let settings = CalibrationSettings {
        mc_slots: instance.horizon(),
        tol_energy: 0.0,
        max_outer_iters: 200,
        ..CalibrationSettings::default()
    };
    let calibrator = Calibrator::from_pool(pool, settings)?;
    let duals = calibrator.mt(instance.q_req, None)?;
    let metric = duals.metric();
    let schedule: Vec<usize> = instance
        .realizations
        .iter()
        .map(|s| metric.argmax(&s.capacities, &s.harvests))
        .collect();
    let value = instance.evaluate(&schedule);
    Ok(DualSchedule {
        duals,
        schedule,
        value,
    })
}
