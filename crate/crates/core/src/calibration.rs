//! Offline calibration of the long-run multipliers.
//!
//! Constraint levels are estimated on a fixed pool of Monte-Carlo slots drawn
//! once per [`Calibrator`], so every dual iterate is scored on the same
//! channel realizations.
//!
//! * `nu` (harvest constraint) is found by bisection. The pool average sum
//!   harvest is non-decreasing in `nu` for all three schemes once the
//!   fairness multipliers are re-optimized at each `nu`.
//! * `gamma` (equal access, PF) is found at each `nu` by exact coordinate
//!   minimization of the dual, one user at a time.
//! * `theta` (equal throughput, ET) is found at each `nu` by exponentiated
//!   gradient steps on the unit simplex with `c / sqrt(k)` decay.
//!
//! Both inner loops are warm-started from the previous `nu`. `gamma` is kept
//! at zero mean and `theta` at unit sum; neither gauge changes the argmax.

use serde::{Deserialize, Serialize};

use crate::channel::{SlotRealization, SystemConfig, UserProfile};
use crate::error::{Error, Result};
use crate::scheduling::{CalibrationResiduals, DualMetric, DualState, SchemeTag};
use crate::seeds::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    /// Monte-Carlo slots in the calibration pool.
    pub mc_slots: usize,
    /// Subgradient iterations allowed per `nu` value.
    pub max_iters: usize,
    /// Bisection steps allowed on `nu`.
    pub max_outer_iters: usize,
    /// Base subgradient step; multiplied by an internal metric scale.
    pub step_size: f64,
    /// Watts.
    pub tol_energy: f64,
    /// Absolute tolerance on access frequencies.
    pub tol_access: f64,
    /// Relative tolerance on the per-user throughput spread.
    pub tol_rate: f64,
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            mc_slots: 100_000,
            max_iters: 3_000,
            max_outer_iters: 100,
            step_size: 1.0,
            tol_energy: 1e-6,
            tol_access: 2e-3,
            tol_rate: 4e-3,
            seed: 0,
        }
    }
}

impl CalibrationSettings {
    pub fn validate(&self) -> Result<()> {
        if self.mc_slots == 0 || self.max_iters == 0 || self.max_outer_iters == 0 {
            return Err(Error::Config(
                "mc_slots, max_iters and max_outer_iters must be positive".into(),
            ));
        }
        for (name, v) in [
            ("step_size", self.step_size),
            ("tol_access", self.tol_access),
            ("tol_rate", self.tol_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tol_energy >= 0.0 && self.tol_energy.is_finite()) {
            return Err(Error::Config("tol_energy must be non-negative".into()));
        }
        Ok(())
    }

    /// Stable FNV-1a digest of the settings, used to tag exported records.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("settings serialize");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

// ============================================================================
// Slot pool and constraint estimates
// ============================================================================

/// Capacities and harvests of a fixed set of slots, stored row-major.
#[derive(Clone, Debug)]
pub struct SlotPool {
    n_users: usize,
    capacities: Vec<f64>,
    harvests: Vec<f64>,
}

impl SlotPool {
    pub fn draw(
        profiles: &[UserProfile],
        config: &SystemConfig,
        n_slots: usize,
        seed: u64,
    ) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Domain("calibration needs at least one user".into()));
        }
        let n_users = profiles.len();
        let mut pool = Self {
            n_users,
            capacities: Vec::with_capacity(n_slots * n_users),
            harvests: Vec::with_capacity(n_slots * n_users),
        };
        let mut rng = rng_from_seed(seed);
        for i in 0..n_slots {
            let slot = crate::channel::draw_slot(i as u64, profiles, config, &mut rng)?;
            pool.capacities.extend_from_slice(&slot.capacities);
            pool.harvests.extend_from_slice(&slot.harvests);
        }
        Ok(pool)
    }

    pub fn from_slots(slots: &[SlotRealization]) -> Result<Self> {
        let n_users = slots
            .first()
            .map(SlotRealization::n_users)
            .ok_or_else(|| Error::Domain("empty slot list".into()))?;
        let mut pool = Self {
            n_users,
            capacities: Vec::with_capacity(slots.len() * n_users),
            harvests: Vec::with_capacity(slots.len() * n_users),
        };
        for s in slots {
            if s.n_users() != n_users {
                return Err(Error::Dimension {
                    expected: n_users,
                    got: s.n_users(),
                });
            }
            pool.capacities.extend_from_slice(&s.capacities);
            pool.harvests.extend_from_slice(&s.harvests);
        }
        Ok(pool)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn len(&self) -> usize {
        self.capacities.len() / self.n_users
    }

    pub fn is_empty(&self) -> bool {
        self.capacities.is_empty()
    }

    fn rows(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.capacities
            .chunks_exact(self.n_users)
            .zip(self.harvests.chunks_exact(self.n_users))
    }
}

/// Empirical long-run averages under one selection rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintEstimate {
    /// Average over slots of the idle users' harvest.
    pub mean_sum_harvest: f64,
    /// Standard error of `mean_sum_harvest`.
    pub harvest_std_err: f64,
    pub mean_sum_rate: f64,
    pub access_freq: Vec<f64>,
    pub per_user_rate: Vec<f64>,
}

impl ConstraintEstimate {
    pub fn access_residual(&self) -> f64 {
        let target = 1.0 / self.access_freq.len() as f64;
        self.access_freq
            .iter()
            .map(|f| (f - target).abs())
            .fold(0.0, f64::max)
    }

    pub fn rate_spread(&self) -> f64 {
        relative_spread(&self.per_user_rate)
    }
}

/// `(max - min) / mean`, zero for an all-zero vector.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean > 0.0 {
        (max - min) / mean
    } else {
        0.0
    }
}

fn estimate_with<F>(pool: &SlotPool, mut choose: F) -> ConstraintEstimate
where
    F: FnMut(&[f64], &[f64]) -> usize,
{
    let n = pool.n_users;
    let mut counts = vec![0u64; n];
    let mut rate_sums = vec![0.0; n];
    let mut harvest_sum = 0.0;
    let mut harvest_sq = 0.0;
    for (caps, harvs) in pool.rows() {
        let sel = choose(caps, harvs);
        counts[sel] += 1;
        rate_sums[sel] += caps[sel];
        let mut idle = 0.0;
        for (m, &q) in harvs.iter().enumerate() {
            if m != sel {
                idle += q;
            }
        }
        harvest_sum += idle;
        harvest_sq += idle * idle;
    }
    let t = pool.len() as f64;
    let mean_sum_harvest = harvest_sum / t;
    let var = (harvest_sq / t - mean_sum_harvest * mean_sum_harvest).max(0.0);
    let per_user_rate: Vec<f64> = rate_sums.iter().map(|r| r / t).collect();
    ConstraintEstimate {
        mean_sum_harvest,
        harvest_std_err: (var / t).sqrt(),
        mean_sum_rate: per_user_rate.iter().sum(),
        access_freq: counts.iter().map(|&c| c as f64 / t).collect(),
        per_user_rate,
    }
}

pub fn estimate_on_pool(pool: &SlotPool, metric: DualMetric<'_>) -> ConstraintEstimate {
    estimate_with(pool, |c, q| metric.argmax(c, q))
}

/// Estimates the long-run constraint levels of `duals` on a fresh pool of
/// `settings.mc_slots` slots drawn from `settings.seed`.
pub fn estimate_constraints(
    duals: &DualState,
    profiles: &[UserProfile],
    config: &SystemConfig,
    settings: &CalibrationSettings,
) -> Result<ConstraintEstimate> {
    duals.validate(profiles.len())?;
    let pool = SlotPool::draw(profiles, config, settings.mc_slots, settings.seed)?;
    Ok(estimate_on_pool(&pool, duals.metric()))
}

/// Range of average sum harvest reachable without fairness constraints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRange {
    /// Harvest of the unconstrained max-capacity scheduler (`nu = 0`).
    pub unconstrained_harvest: f64,
    /// Harvest when the weakest harvester is always scheduled.
    pub max_harvest: f64,
    pub max_harvest_std_err: f64,
}

pub fn feasible_range(pool: &SlotPool) -> FeasibleRange {
    let unconstrained = estimate_on_pool(pool, DualMetric::Mt { nu: 0.0 });
    let extreme = estimate_with(pool, |_, q| {
        let mut best = 0;
        for (n, &x) in q.iter().enumerate() {
            if x < q[best] {
                best = n;
            }
        }
        best
    });
    FeasibleRange {
        unconstrained_harvest: unconstrained.mean_sum_harvest,
        max_harvest: extreme.mean_sum_harvest,
        max_harvest_std_err: extreme.harvest_std_err,
    }
}

// ============================================================================
// Calibrator
// ============================================================================

struct InnerResult {
    estimate: ConstraintEstimate,
    weights: Vec<f64>,
    iterations: usize,
    converged: bool,
}

struct OuterResult {
    nu: f64,
    inner: InnerResult,
    outer_iterations: usize,
    inner_iterations: usize,
    in_window: bool,
}

/// Calibrates duals for any scheme against one shared slot pool.
pub struct Calibrator {
    pool: SlotPool,
    settings: CalibrationSettings,
    range: FeasibleRange,
    /// Bits per Watt: pool mean capacity over pool mean harvest.
    nu_scale: f64,
}

impl Calibrator {
    pub fn new(
        profiles: &[UserProfile],
        config: &SystemConfig,
        settings: CalibrationSettings,
    ) -> Result<Self> {
        settings.validate()?;
        let pool = SlotPool::draw(profiles, config, settings.mc_slots, settings.seed)?;
        Self::from_pool(pool, settings)
    }

    pub fn from_pool(pool: SlotPool, settings: CalibrationSettings) -> Result<Self> {
        settings.validate()?;
        if pool.is_empty() {
            return Err(Error::Domain("empty calibration pool".into()));
        }
        let range = feasible_range(&pool);
        let mean_c = pool.capacities.iter().sum::<f64>() / pool.capacities.len() as f64;
        let mean_q = pool.harvests.iter().sum::<f64>() / pool.harvests.len() as f64;
        let nu_scale = if mean_q > 0.0 && mean_c > 0.0 {
            mean_c / mean_q
        } else {
            1.0
        };
        Ok(Self {
            pool,
            settings,
            range,
            nu_scale,
        })
    }

    /// Sets the energy tolerance to `fraction` of the largest achievable
    /// average sum harvest on the pool.
    pub fn with_relative_energy_tolerance(mut self, fraction: f64) -> Self {
        self.settings.tol_energy = fraction * self.range.max_harvest;
        self
    }

    pub fn pool(&self) -> &SlotPool {
        &self.pool
    }

    pub fn settings(&self) -> &CalibrationSettings {
        &self.settings
    }

    pub fn feasible_range(&self) -> FeasibleRange {
        self.range
    }

    pub fn estimate(&self, duals: &DualState) -> Result<ConstraintEstimate> {
        duals.validate(self.pool.n_users)?;
        Ok(estimate_on_pool(&self.pool, duals.metric()))
    }

    /// Largest average sum harvest reachable under equal channel access,
    /// approximated by saturating `nu` and re-equalizing access.
    pub fn pf_max_harvest(&self) -> Result<f64> {
        let n = self.pool.n_users;
        if n == 1 {
            return Ok(0.0);
        }
        let mut gamma = vec![0.0; n];
        let inner = self.equalize_access(1e6 * self.nu_scale, &mut gamma);
        if !inner.converged {
            return Err(self.not_converged(inner.iterations, 0.0, 0.0, &inner));
        }
        Ok(inner.estimate.mean_sum_harvest)
    }

    pub fn calibrate(
        &self,
        scheme: SchemeTag,
        q_req: f64,
        warm: Option<&DualState>,
    ) -> Result<DualState> {
        match scheme {
            SchemeTag::Mt => self.mt(q_req, warm),
            SchemeTag::Pf => self.pf(q_req, warm),
            SchemeTag::Et => self.et(q_req, warm),
            other => Err(Error::Domain(format!("{other} has no duals to calibrate"))),
        }
    }

    /// Smallest `nu >= 0` meeting the harvest requirement.
    pub fn mt(&self, q_req: f64, warm: Option<&DualState>) -> Result<DualState> {
        self.check_q_req(q_req, self.range.max_harvest)?;
        let outer = self.solve_nu(q_req, self.nu_scale, warm_nu(warm, SchemeTag::Mt), |nu| {
            Ok(InnerResult {
                estimate: estimate_on_pool(&self.pool, DualMetric::Mt { nu }),
                weights: Vec::new(),
                iterations: 0,
                converged: true,
            })
        })?;
        Ok(self.finish(DualState::mt(outer.nu), q_req, outer))
    }

    pub fn pf(&self, q_req: f64, warm: Option<&DualState>) -> Result<DualState> {
        let n = self.pool.n_users;
        let max = if q_req > self.range.unconstrained_harvest {
            self.pf_max_harvest()?
        } else {
            self.range.max_harvest
        };
        self.check_q_req(q_req, max)?;
        let mut gamma = match warm {
            Some(d) if d.scheme == SchemeTag::Pf && d.gamma.len() == n => d.gamma.clone(),
            _ => vec![0.0; n],
        };
        let outer = self.solve_nu(q_req, self.nu_scale, warm_nu(warm, SchemeTag::Pf), |nu| {
            let inner = self.equalize_access(nu, &mut gamma);
            if inner.converged {
                Ok(inner)
            } else {
                Err(self.not_converged(inner.iterations, nu, q_req, &inner))
            }
        })?;
        let gamma = outer.inner.weights.clone();
        Ok(self.finish(DualState::pf(outer.nu, gamma), q_req, outer))
    }

    pub fn et(&self, q_req: f64, warm: Option<&DualState>) -> Result<DualState> {
        let n = self.pool.n_users;
        self.check_q_req(q_req, self.range.max_harvest)?;
        let mut theta = match warm {
            Some(d) if d.scheme == SchemeTag::Et && d.theta.len() == n => d.theta.clone(),
            _ => vec![1.0 / n as f64; n],
        };
        let scale = self.nu_scale / n as f64;
        let outer = self.solve_nu(q_req, scale, warm_nu(warm, SchemeTag::Et), |nu| {
            let inner = self.equalize_rates(nu, &mut theta);
            if inner.converged {
                Ok(inner)
            } else {
                Err(self.not_converged(inner.iterations, nu, q_req, &inner))
            }
        })?;
        let theta = outer.inner.weights.clone();
        Ok(self.finish(DualState::et(outer.nu, theta), q_req, outer))
    }

    fn check_q_req(&self, q_req: f64, max: f64) -> Result<()> {
        if !(q_req >= 0.0 && q_req.is_finite()) {
            return Err(Error::Domain(format!(
                "q_req must be non-negative, got {q_req}"
            )));
        }
        if q_req > max + self.settings.tol_energy {
            return Err(Error::Infeasible { q_req, max });
        }
        Ok(())
    }

    fn finish(&self, mut duals: DualState, q_req: f64, outer: OuterResult) -> DualState {
        let est = &outer.inner.estimate;
        duals.calibration_residuals = CalibrationResiduals {
            q_req,
            mean_sum_harvest: est.mean_sum_harvest,
            energy: est.mean_sum_harvest - q_req,
            access: est.access_residual(),
            rate_spread: est.rate_spread(),
            outer_iterations: outer.outer_iterations,
            inner_iterations: outer.inner_iterations,
            converged: outer.inner.converged && outer.in_window,
        };
        duals
    }

    fn not_converged(&self, iterations: usize, _nu: f64, q_req: f64, inner: &InnerResult) -> Error {
        let est = &inner.estimate;
        Error::NotConverged {
            iterations,
            residuals: Box::new(CalibrationResiduals {
                q_req,
                mean_sum_harvest: est.mean_sum_harvest,
                energy: est.mean_sum_harvest - q_req,
                access: est.access_residual(),
                rate_spread: est.rate_spread(),
                outer_iterations: 0,
                inner_iterations: iterations,
                converged: false,
            }),
        }
    }

    /// Bisection on `nu` for the harvest constraint.
    ///
    /// Returns `nu = 0` when the constraint is slack there; otherwise a `nu`
    /// whose pool harvest lies within `tol_energy` of `q_req`, or, if the
    /// finite pool jumps over that window, the smallest bracketed `nu` that
    /// still meets `q_req - tol_energy`.
    fn solve_nu<F>(
        &self,
        q_req: f64,
        scale: f64,
        warm: Option<f64>,
        mut inner: F,
    ) -> Result<OuterResult>
    where
        F: FnMut(f64) -> Result<InnerResult>,
    {
        let tol = self.settings.tol_energy;
        let mut outer_iterations = 1;
        let first = inner(0.0)?;
        let mut inner_iterations = first.iterations;
        if first.estimate.mean_sum_harvest >= q_req - tol {
            return Ok(OuterResult {
                nu: 0.0,
                inner: first,
                outer_iterations,
                inner_iterations,
                in_window: true,
            });
        }

        let mut lo = 0.0;
        let mut hi = warm.filter(|&w| w > 0.0).unwrap_or(scale);
        let mut best = None;
        for _ in 0..200 {
            outer_iterations += 1;
            let r = inner(hi)?;
            inner_iterations += r.iterations;
            if r.estimate.mean_sum_harvest >= q_req - tol {
                best = Some(r);
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        let mut best = best.ok_or(Error::Infeasible {
            q_req,
            max: self.range.max_harvest,
        })?;
        let mut in_window = best.estimate.mean_sum_harvest <= q_req + tol;

        for _ in 0..self.settings.max_outer_iters {
            if in_window {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            outer_iterations += 1;
            let r = inner(mid)?;
            inner_iterations += r.iterations;
            if r.estimate.mean_sum_harvest < q_req - tol {
                lo = mid;
            } else {
                hi = mid;
                in_window = r.estimate.mean_sum_harvest <= q_req + tol;
                best = r;
            }
        }
        Ok(OuterResult {
            nu: hi,
            inner: best,
            outer_iterations,
            inner_iterations,
            in_window,
        })
    }

    /// Coordinate minimization of the PF dual over `gamma` at fixed `nu`.
    ///
    /// User `n` wins a slot iff its margin `C_n - nu Q_n - max_{m != n}
    /// Lambda_m` exceeds `gamma_n`, so the `gamma_n` that gives it access
    /// `1/N` (others held fixed) is the `1 - 1/N` quantile of its margins.
    /// Users are updated in turn until every access frequency is within
    /// `tol_access` of `1/N`.
    fn equalize_access(&self, nu: f64, gamma: &mut Vec<f64>) -> InnerResult {
        let n = self.pool.n_users;
        let len = self.pool.len();
        let mut best: Option<InnerResult> = None;
        let mut margins = vec![0.0; len];
        let above = len / n;
        let pivot = len.saturating_sub(above + 1);
        let mut iterations = 0;
        for k in 1..=self.settings.max_iters {
            iterations = k;
            let est = estimate_on_pool(&self.pool, DualMetric::Pf { nu, gamma });
            let resid = est.access_residual();
            let converged = resid <= self.settings.tol_access;
            if converged
                || best
                    .as_ref()
                    .is_none_or(|b| resid < b.estimate.access_residual())
            {
                best = Some(InnerResult {
                    estimate: est,
                    weights: gamma.clone(),
                    iterations: k,
                    converged,
                });
            }
            if converged || n == 1 {
                break;
            }
            for user in 0..n {
                for ((caps, harvs), m) in self.pool.rows().zip(margins.iter_mut()) {
                    let mut rival = f64::NEG_INFINITY;
                    for (other, (&c, &q)) in caps.iter().zip(harvs).enumerate() {
                        if other != user {
                            rival = rival.max(c - nu * q - gamma[other]);
                        }
                    }
                    *m = caps[user] - nu * harvs[user] - rival;
                }
                let (_, q, _) = margins.select_nth_unstable_by(pivot, f64::total_cmp);
                gamma[user] = *q;
            }
            let mean = gamma.iter().sum::<f64>() / n as f64;
            gamma.iter_mut().for_each(|g| *g -= mean);
        }
        let mut best = best.expect("at least one iteration");
        gamma.clone_from(&best.weights);
        best.iterations = iterations;
        best
    }

    /// Exponentiated-gradient iterations on `theta` at fixed `nu` until the
    /// pool per-user throughputs agree within `tol_rate`. Each step moves
    /// weight from users above the mean throughput to users below it and
    /// renormalizes to unit sum.
    fn equalize_rates(&self, nu: f64, theta: &mut Vec<f64>) -> InnerResult {
        let mut best: Option<InnerResult> = None;
        let mut iterations = 0;
        for k in 1..=self.settings.max_iters {
            iterations = k;
            let est = estimate_on_pool(&self.pool, DualMetric::Et { nu, theta });
            let spread = est.rate_spread();
            let converged = spread <= self.settings.tol_rate;
            if converged
                || best
                    .as_ref()
                    .is_none_or(|b| spread < b.estimate.rate_spread())
            {
                best = Some(InnerResult {
                    estimate: est.clone(),
                    weights: theta.clone(),
                    iterations: k,
                    converged,
                });
            }
            if converged {
                break;
            }
            let rates = &est.per_user_rate;
            let mean = rates.iter().sum::<f64>() / rates.len() as f64;
            let eta = self.settings.step_size / (k as f64).sqrt();
            for (t, r) in theta.iter_mut().zip(rates) {
                *t *= (-eta * (r - mean) / mean).exp();
            }
            normalize_unit_sum(theta);
        }
        let mut best = best.expect("at least one iteration");
        theta.clone_from(&best.weights);
        best.iterations = iterations;
        best
    }
}

fn warm_nu(warm: Option<&DualState>, scheme: SchemeTag) -> Option<f64> {
    warm.filter(|d| d.scheme == scheme).map(|d| d.nu)
}

fn normalize_unit_sum(theta: &mut [f64]) {
    let sum: f64 = theta.iter().sum();
    if sum > 0.0 {
        theta.iter_mut().for_each(|t| *t /= sum);
    } else {
        let u = 1.0 / theta.len() as f64;
        theta.iter_mut().for_each(|t| *t = u);
    }
}

pub fn calibrate_mt(
    q_req: f64,
    profiles: &[UserProfile],
    config: &SystemConfig,
    settings: &CalibrationSettings,
) -> Result<DualState> {
    Calibrator::new(profiles, config, settings.clone())?.mt(q_req, None)
}

pub fn calibrate_pf(
    q_req: f64,
    profiles: &[UserProfile],
    config: &SystemConfig,
    settings: &CalibrationSettings,
) -> Result<DualState> {
    Calibrator::new(profiles, config, settings.clone())?.pf(q_req, None)
}

pub fn calibrate_et(
    q_req: f64,
    profiles: &[UserProfile],
    config: &SystemConfig,
    settings: &CalibrationSettings,
) -> Result<DualState> {
    Calibrator::new(profiles, config, settings.clone())?.et(q_req, None)
}

// ============================================================================
// Exported records
// ============================================================================

/// A calibration result that an online scheduler can load later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub scheme: SchemeTag,
    pub q_req: f64,
    pub duals: DualState,
    pub settings: CalibrationSettings,
    pub settings_hash: String,
}

impl CalibrationRecord {
    pub fn new(duals: DualState, settings: &CalibrationSettings) -> Self {
        Self {
            scheme: duals.scheme,
            q_req: duals.calibration_residuals.q_req,
            duals,
            settings: settings.clone(),
            settings_hash: settings.digest(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a record and checks that its hash matches its settings.
    pub fn from_json(text: &str) -> Result<Self> {
        let rec: Self = serde_json::from_str(text)?;
        let expected = rec.settings.digest();
        if rec.settings_hash != expected {
            return Err(Error::RecordMismatch {
                found: rec.settings_hash,
                expected,
            });
        }
        Ok(rec)
    }
}
