//! Per-slot dual-metric schedulers.
//!
//! All three optimal schedulers pick, in every slot, the user maximizing a
//! metric that is linear in the slot's capacity and harvest values:
//!
//! | scheme | metric `Lambda_n(i)` |
//! |--------|----------------------|
//! | MT | `C_n(i) - nu Q_n(i)` |
//! | PF | `C_n(i) - nu Q_n(i) - gamma_n` |
//! | ET | `theta_n C_n(i) - nu Q_n(i)` |
//!
//! The per-slot multipliers of the relaxed problem are eliminated
//! analytically; only the long-run multipliers `nu`, `gamma` and `theta` are
//! carried in [`DualState`]. The argmax is always a single user, so the
//! relaxed time-sharing solution is integral.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::SlotRealization;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeTag {
    Mt,
    Pf,
    Et,
    OrderMt,
    OrderPf,
    OrderEt,
}

impl SchemeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Mt => "mt",
            SchemeTag::Pf => "pf",
            SchemeTag::Et => "et",
            SchemeTag::OrderMt => "order-mt",
            SchemeTag::OrderPf => "order-pf",
            SchemeTag::OrderEt => "order-et",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(
            self,
            SchemeTag::OrderMt | SchemeTag::OrderPf | SchemeTag::OrderEt
        )
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mt" => SchemeTag::Mt,
            "pf" => SchemeTag::Pf,
            "et" => SchemeTag::Et,
            "order-mt" => SchemeTag::OrderMt,
            "order-pf" => SchemeTag::OrderPf,
            "order-et" => SchemeTag::OrderEt,
            other => return Err(Error::Config(format!("unknown scheme `{other}`"))),
        })
    }
}

/// Constraint violations and bookkeeping recorded when a calibration stops.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResiduals {
    pub q_req: f64,
    /// In-sample average sum harvest under the returned duals.
    pub mean_sum_harvest: f64,
    /// `mean_sum_harvest - q_req`.
    pub energy: f64,
    /// `max_n |access_n - 1/N|` (PF).
    pub access: f64,
    /// `(max_n rate_n - min_n rate_n) / mean_n rate_n` (ET).
    pub rate_spread: f64,
    /// Outer (nu) iterations.
    pub outer_iterations: usize,
    /// Total inner (gamma / theta) iterations across all outer steps.
    pub inner_iterations: usize,
    pub converged: bool,
}

impl fmt::Display for CalibrationResiduals {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "energy residual {:.3e} W, access residual {:.3e}, rate spread {:.3e}",
            self.energy, self.access, self.rate_spread
        )
    }
}

/// Calibrated long-run multipliers.
///
/// `gamma` is only meaningful for PF and `theta` only for ET; for other
/// schemes they are empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub scheme: SchemeTag,
    pub nu: f64,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub calibration_residuals: CalibrationResiduals,
}

impl DualState {
    pub fn mt(nu: f64) -> Self {
        Self {
            scheme: SchemeTag::Mt,
            nu,
            gamma: Vec::new(),
            theta: Vec::new(),
            calibration_residuals: CalibrationResiduals::default(),
        }
    }

    pub fn pf(nu: f64, gamma: Vec<f64>) -> Self {
        Self {
            scheme: SchemeTag::Pf,
            gamma,
            ..Self::mt(nu)
        }
    }

    pub fn et(nu: f64, theta: Vec<f64>) -> Self {
        Self {
            scheme: SchemeTag::Et,
            theta,
            ..Self::mt(nu)
        }
    }

    pub fn validate(&self, n_users: usize) -> Result<()> {
        check_nu(self.nu)?;
        match self.scheme {
            SchemeTag::Mt => Ok(()),
            SchemeTag::Pf => check_len(n_users, self.gamma.len()),
            SchemeTag::Et => {
                check_len(n_users, self.theta.len())?;
                check_theta(&self.theta)
            }
            other => Err(Error::Domain(format!(
                "{other} is not a dual-metric scheme"
            ))),
        }
    }

    pub fn metric(&self) -> DualMetric<'_> {
        match self.scheme {
            SchemeTag::Pf => DualMetric::Pf {
                nu: self.nu,
                gamma: &self.gamma,
            },
            SchemeTag::Et => DualMetric::Et {
                nu: self.nu,
                theta: &self.theta,
            },
            _ => DualMetric::Mt { nu: self.nu },
        }
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if nu >= 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "nu must be finite and non-negative, got {nu}"
        )))
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

fn check_theta(theta: &[f64]) -> Result<()> {
    match theta.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        Some(t) => Err(Error::Domain(format!(
            "theta entries must be non-negative, got {t}"
        ))),
        None => Ok(()),
    }
}

/// Borrowed view of a dual-metric rule, evaluated without allocation.
#[derive(Clone, Copy, Debug)]
pub enum DualMetric<'a> {
    Mt { nu: f64 },
    Pf { nu: f64, gamma: &'a [f64] },
    Et { nu: f64, theta: &'a [f64] },
}

impl DualMetric<'_> {
    #[inline]
    pub fn value(&self, user: usize, capacity: f64, harvest: f64) -> f64 {
        match *self {
            DualMetric::Mt { nu } => capacity - nu * harvest,
            DualMetric::Pf { nu, gamma } => capacity - nu * harvest - gamma[user],
            DualMetric::Et { nu, theta } => theta[user] * capacity - nu * harvest,
        }
    }

    /// Index of the maximum metric; lowest index wins ties.
    #[inline]
    pub fn argmax(&self, capacities: &[f64], harvests: &[f64]) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (n, (&c, &q)) in capacities.iter().zip(harvests).enumerate() {
            let v = self.value(n, c, q);
            if v > best_value {
                best = n;
                best_value = v;
            }
        }
        best
    }

    pub fn tag(&self) -> SchemeTag {
        match self {
            DualMetric::Mt { .. } => SchemeTag::Mt,
            DualMetric::Pf { .. } => SchemeTag::Pf,
            DualMetric::Et { .. } => SchemeTag::Et,
        }
    }

    fn values(&self, slot: &SlotRealization) -> Vec<f64> {
        slot.capacities
            .iter()
            .zip(&slot.harvests)
            .enumerate()
            .map(|(n, (&c, &q))| self.value(n, c, q))
            .collect()
    }
}

pub fn mt_metric(slot: &SlotRealization, nu: f64) -> Result<Vec<f64>> {
    check_nu(nu)?;
    Ok(DualMetric::Mt { nu }.values(slot))
}

pub fn pf_metric(slot: &SlotRealization, nu: f64, gamma: &[f64]) -> Result<Vec<f64>> {
    check_nu(nu)?;
    check_len(slot.n_users(), gamma.len())?;
    Ok(DualMetric::Pf { nu, gamma }.values(slot))
}

pub fn et_metric(slot: &SlotRealization, nu: f64, theta: &[f64]) -> Result<Vec<f64>> {
    check_nu(nu)?;
    check_len(slot.n_users(), theta.len())?;
    check_theta(theta)?;
    Ok(DualMetric::Et { nu, theta }.values(slot))
}

/// Outcome of scheduling one slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub slot_index: u64,
    pub selected_user: usize,
    /// Metric values the selection was based on. For order-based schemes these
    /// are the ranking keys.
    pub metric_values: Vec<f64>,
    pub scheme_tag: SchemeTag,
}

/// Picks the user with the largest metric, lowest index on ties.
pub fn select(
    slot_index: u64,
    metrics: Vec<f64>,
    scheme_tag: SchemeTag,
) -> Result<ScheduleDecision> {
    let selected_user = argmax(&metrics)
        .ok_or_else(|| Error::Domain("cannot select from an empty metric vector".into()))?;
    Ok(ScheduleDecision {
        slot_index,
        selected_user,
        metric_values: metrics,
        scheme_tag,
    })
}

pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut it = values.iter().enumerate();
    let (mut best, mut best_value) = it.next().map(|(i, &v)| (i, v))?;
    for (i, &v) in it {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    Some(best)
}

/// A per-slot user selection rule.
pub trait Scheduler {
    fn tag(&self) -> SchemeTag;

    /// Selects the user for `slot` and advances any internal state.
    fn select_user(&mut self, slot: &SlotRealization) -> usize;

    /// The values the rule ranks users by in `slot`.
    fn metrics(&self, slot: &SlotRealization) -> Vec<f64>;

    fn decide(&mut self, slot: &SlotRealization) -> ScheduleDecision {
        let metric_values = self.metrics(slot);
        let selected_user = self.select_user(slot);
        ScheduleDecision {
            slot_index: slot.slot_index,
            selected_user,
            metric_values,
            scheme_tag: self.tag(),
        }
    }
}

/// Online scheduler for MT, PF or ET driven by a calibrated [`DualState`].
#[derive(Clone, Debug)]
pub struct DualScheduler {
    duals: DualState,
}

impl DualScheduler {
    pub fn new(duals: DualState, n_users: usize) -> Result<Self> {
        duals.validate(n_users)?;
        Ok(Self { duals })
    }

    pub fn duals(&self) -> &DualState {
        &self.duals
    }
}

impl Scheduler for DualScheduler {
    fn tag(&self) -> SchemeTag {
        self.duals.scheme
    }

    fn select_user(&mut self, slot: &SlotRealization) -> usize {
        self.duals.metric().argmax(&slot.capacities, &slot.harvests)
    }

    fn metrics(&self, slot: &SlotRealization) -> Vec<f64> {
        self.duals.metric().values(slot)
    }
}
