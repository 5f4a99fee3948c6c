//! Command-line front end.
//!
//! All randomness derives from `--seed` (or the config's `seed`):
//! placements use [`Stream::Placement`], the calibration pool
//! [`Stream::Calibration`], evaluation runs [`Stream::Run`] and out-of-sample
//! checks [`Stream::Validation`].
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 configuration or usage
//! error, 3 infeasible harvest requirement, 4 calibration did not converge,
//! 5 oracle check failed.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use crate::baselines::{EligibleOrders, OrderPolicy};
use crate::calibration::{CalibrationRecord, CalibrationSettings, Calibrator};
use crate::channel::{place_users, SlotStream, SystemConfig, UserProfile};
use crate::error::{Error, Result};
use crate::oracle::{brute_force_mt, dual_metric_mt, FiniteInstance, OracleOutcome};
use crate::output::{write_csv, write_jsonl, RateUnit, ResultRow};
use crate::scheduling::{DualScheduler, DualState, SchemeTag};
use crate::seeds::{derive_seed, rng_from_seed, Stream};
use crate::simulator::{run, sweep_orders, sweep_q_req};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Domain(_)
        | Error::Dimension { .. }
        | Error::RecordMismatch { .. }
        | Error::Json(_) => EXIT_CONFIG,
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_INTERNAL,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "swipt-sched",
    version,
    about = "Dual-metric SWIPT multiuser scheduling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Calibrate the duals of an optimal scheme and write a calibration record.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_parser = parse_optimal_scheme)]
        scheme: SchemeTag,
        /// Required average sum harvest in Watts (defaults to the config value).
        #[arg(long)]
        q_req: Option<f64>,
    },
    /// Run one scheduler and emit one result row.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long)]
        q_req: Option<f64>,
        /// Reuse a calibration record instead of calibrating.
        #[arg(long, conflicts_with = "q_req")]
        duals: Option<PathBuf>,
    },
    /// Trace a rate-energy curve. Optimal schemes sweep `--grid`; order-based
    /// schemes sweep every selection order.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_parser = parse_scheme)]
        scheme: SchemeTag,
        /// `start:stop:count` in Watts; `stop` may be `auto`.
        #[arg(long, default_value = "0:auto:20")]
        grid: String,
    },
    /// Compare the MT dual-metric rule against exhaustive search on random
    /// short-horizon instances.
    OracleCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 6)]
        horizon: usize,
        #[arg(long, default_value_t = 3)]
        oracle_users: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Slots per evaluation run.
    #[arg(long)]
    pub slots: Option<u64>,
    /// Slots in the calibration pool.
    #[arg(long, default_value_t = 200_000)]
    pub mc_slots: usize,
    /// Energy tolerance as a fraction of the largest achievable harvest.
    #[arg(long, default_value_t = 0.005)]
    pub tol_energy_rel: f64,
    #[arg(long, default_value_t = 2e-3)]
    pub tol_access: f64,
    #[arg(long, default_value_t = 4e-3)]
    pub tol_rate: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Report rates in bits/s (rate x bandwidth) instead of bits/channel-use.
    #[arg(long)]
    pub bits_per_second: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SchemeArgs {
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: SchemeTag,
    /// Selection order for order-mt / order-pf (1 = strongest).
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    /// Comma-separated eligible orders for order-et; all orders when omitted.
    #[arg(long)]
    pub eligible: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

fn parse_scheme(s: &str) -> std::result::Result<SchemeTag, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_optimal_scheme(s: &str) -> std::result::Result<SchemeTag, String> {
    let tag = parse_scheme(s)?;
    if tag.is_baseline() {
        Err(format!("{tag} has no duals to calibrate"))
    } else {
        Ok(tag)
    }
}

/// Resolved inputs shared by all subcommands.
struct Context {
    config: SystemConfig,
    profiles: Vec<UserProfile>,
    common: CommonArgs,
}

impl Context {
    fn new(common: &CommonArgs) -> Result<Self> {
        let mut config = match &common.config {
            Some(path) => SystemConfig::from_path(path)?,
            None => SystemConfig::default(),
        };
        if let Some(n) = common.users {
            config.n_users = n;
            config.noise_power_per_user = config.noise_power_per_user.filter(|v| v.len() == n);
            config.rf_dc_efficiency_per_user =
                config.rf_dc_efficiency_per_user.filter(|v| v.len() == n);
        }
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        if let Some(slots) = common.slots {
            config.n_slots = slots;
        }
        config.validate()?;
        if !(common.tol_energy_rel >= 0.0) {
            return Err(Error::Config(
                "--tol-energy-rel must be non-negative".into(),
            ));
        }
        let profiles = place_users(
            &config,
            &mut rng_from_seed(derive_seed(config.seed, Stream::Placement)),
        )?;
        Ok(Self {
            config,
            profiles,
            common: common.clone(),
        })
    }

    fn run_seed(&self) -> u64 {
        derive_seed(self.config.seed, Stream::Run)
    }

    fn calibrator(&self) -> Result<Calibrator> {
        let settings = CalibrationSettings {
            mc_slots: self.common.mc_slots,
            tol_access: self.common.tol_access,
            tol_rate: self.common.tol_rate,
            seed: derive_seed(self.config.seed, Stream::Calibration),
            ..CalibrationSettings::default()
        };
        Ok(Calibrator::new(&self.profiles, &self.config, settings)?
            .with_relative_energy_tolerance(self.common.tol_energy_rel))
    }

    fn unit(&self) -> RateUnit {
        if self.common.bits_per_second {
            RateUnit::BitsPerSecond {
                bandwidth_hz: self.config.bandwidth_hz,
            }
        } else {
            RateUnit::BitsPerChannelUse
        }
    }

    fn emit_rows(&self, rows: &[ResultRow]) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        match self.common.format {
            Format::Csv => write_csv(rows, self.unit(), &mut buf)?,
            Format::Jsonl => write_jsonl(rows, &mut buf)?,
        }
        Ok(buf)
    }
}

fn write_output(path: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

/// Parses `start:stop:count`; `stop = auto` resolves to `auto_stop`.
pub fn parse_grid(spec: &str, auto_stop: f64) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("grid `{spec}` is not start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = match parts[1].trim() {
        "auto" => auto_stop,
        s => s.parse().map_err(|_| bad())?,
    };
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !(start >= 0.0) || !(stop >= start) {
        return Err(Error::Config(format!(
            "grid `{spec}` needs count >= 1 and 0 <= start <= stop (stop = {stop:e})"
        )));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

fn parse_eligible(list: &str, n_users: usize) -> Result<EligibleOrders> {
    let orders = list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad eligible order `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    EligibleOrders::new(orders, n_users)
}

fn order_policy(args: &SchemeArgs, profiles: &[UserProfile]) -> Result<OrderPolicy> {
    let n = profiles.len();
    match args.scheme {
        SchemeTag::OrderMt => OrderPolicy::order_mt(args.j, n),
        SchemeTag::OrderPf => OrderPolicy::order_pf(args.j, profiles),
        SchemeTag::OrderEt => {
            let eligible = match &args.eligible {
                Some(list) => parse_eligible(list, n)?,
                None => EligibleOrders::all(n),
            };
            OrderPolicy::order_et(eligible, profiles)
        }
        other => Err(Error::Domain(format!("{other} is not order-based"))),
    }
}

fn cmd_calibrate(common: &CommonArgs, scheme: SchemeTag, q_req: Option<f64>) -> Result<()> {
    let ctx = Context::new(common)?;
    let q_req = q_req.unwrap_or(ctx.config.q_req);
    let calibrator = ctx.calibrator()?;
    let duals = calibrator.calibrate(scheme, q_req, None)?;
    let validation = crate::calibration::estimate_constraints(
        &duals,
        &ctx.profiles,
        &ctx.config,
        &CalibrationSettings {
            seed: derive_seed(ctx.config.seed, Stream::Validation),
            ..calibrator.settings().clone()
        },
    )?;
    eprintln!(
        "validation: harvest {:.6e} W (q_req {:.6e} W), max access residual {:.3e}, rate spread {:.3e}",
        validation.mean_sum_harvest,
        q_req,
        validation.access_residual(),
        validation.rate_spread()
    );
    let record = CalibrationRecord::new(duals, calibrator.settings());
    let mut text = record.to_json()?;
    text.push('\n');
    write_output(common.output.as_ref(), text.as_bytes())
}

fn cmd_run(
    common: &CommonArgs,
    scheme: &SchemeArgs,
    q_req: Option<f64>,
    duals_path: Option<&PathBuf>,
) -> Result<()> {
    let ctx = Context::new(common)?;
    let n = ctx.profiles.len();
    let row = if scheme.scheme.is_baseline() {
        let mut policy = order_policy(scheme, &ctx.profiles)?;
        let stats = run(
            &mut policy,
            &ctx.profiles,
            &ctx.config,
            ctx.config.n_slots,
            ctx.run_seed(),
        )?;
        ResultRow::from_stats(policy.label(), None, None, &stats, ctx.unit())
    } else {
        let duals: DualState = match duals_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let record = CalibrationRecord::from_json(&text)?;
                if record.scheme != scheme.scheme {
                    return Err(Error::Config(format!(
                        "record is for {}, not {}",
                        record.scheme, scheme.scheme
                    )));
                }
                record.duals
            }
            None => ctx.calibrator()?.calibrate(
                scheme.scheme,
                q_req.unwrap_or(ctx.config.q_req),
                None,
            )?,
        };
        let q = duals.calibration_residuals.q_req;
        let nu = duals.nu;
        let mut sched = DualScheduler::new(duals, n)?;
        let stats = run(
            &mut sched,
            &ctx.profiles,
            &ctx.config,
            ctx.config.n_slots,
            ctx.run_seed(),
        )?;
        ResultRow::from_stats(
            scheme.scheme.as_str(),
            Some(q),
            Some(nu),
            &stats,
            ctx.unit(),
        )
    };
    let bytes = ctx.emit_rows(&[row])?;
    write_output(common.output.as_ref(), &bytes)
}

fn cmd_sweep(common: &CommonArgs, scheme: SchemeTag, grid: &str) -> Result<()> {
    let ctx = Context::new(common)?;
    let n = ctx.profiles.len();
    let rows: Vec<ResultRow> = if scheme.is_baseline() {
        sweep_orders(
            scheme,
            &ctx.profiles,
            &ctx.config,
            ctx.config.n_slots,
            ctx.run_seed(),
        )?
        .into_iter()
        .map(|(label, stats)| ResultRow::from_stats(label, None, None, &stats, ctx.unit()))
        .collect()
    } else {
        let calibrator = ctx.calibrator()?;
        let range = calibrator.feasible_range();
        let max = if scheme == SchemeTag::Pf {
            calibrator.pf_max_harvest()?
        } else {
            range.max_harvest
        };
        let auto_stop = (max - range.max_harvest_std_err).max(0.0);
        let grid = parse_grid(grid, auto_stop)?;
        sweep_q_req(
            scheme,
            &grid,
            &calibrator,
            &ctx.profiles,
            &ctx.config,
            ctx.config.n_slots,
            ctx.run_seed(),
        )?
        .iter()
        .map(|p| ResultRow::from_sweep_point(scheme.as_str(), n, p, ctx.unit()))
        .collect()
    };
    let bytes = ctx.emit_rows(&rows)?;
    write_output(common.output.as_ref(), &bytes)
}

/// Outcome of one oracle comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCheckLine {
    pub instance: usize,
    pub brute_force: Option<f64>,
    pub dual: Option<f64>,
    pub gap_bound: f64,
    pub passed: bool,
}

/// Draws `instances` random short-horizon instances from the configured
/// deployment and checks the MT dual-metric rule against exhaustive search.
pub fn oracle_check(
    config: &SystemConfig,
    instances: usize,
    horizon: usize,
    n_users: usize,
) -> Result<Vec<OracleCheckLine>> {
    let config = SystemConfig {
        n_users,
        noise_power_per_user: None,
        rf_dc_efficiency_per_user: None,
        ..config.clone()
    };
    let profiles = place_users(
        &config,
        &mut rng_from_seed(derive_seed(config.seed, Stream::Placement)),
    )?;
    let mut slots = SlotStream::new(
        &profiles,
        &config,
        rng_from_seed(derive_seed(config.seed, Stream::Run)),
    );
    let mut pick = rng_from_seed(derive_seed(config.seed, Stream::Validation));
    let mut lines = Vec::with_capacity(instances);
    for instance in 0..instances {
        let realizations: Vec<_> = slots.by_ref().take(horizon).collect();
        let probe = FiniteInstance::new(realizations, 0.0)?;
        let q_req = pick.gen_range(0.0..1.0) * probe.max_harvest();
        let inst = FiniteInstance { q_req, ..probe };
        let bf = brute_force_mt(&inst)?;
        let gap_bound = inst.gap_bound();
        let line = match (bf, dual_metric_mt(&inst)) {
            (OracleOutcome::Optimal { value, .. }, Ok(dual)) => {
                let integral =
                    dual.schedule.len() == horizon && dual.schedule.iter().all(|&u| u < n_users);
                let rate = dual.value.avg_sum_rate;
                OracleCheckLine {
                    instance,
                    brute_force: Some(value),
                    dual: Some(rate),
                    gap_bound,
                    passed: integral
                        && dual.value.avg_sum_harvest >= q_req
                        && rate <= value
                        && value - rate <= gap_bound,
                }
            }
            (OracleOutcome::Infeasible { .. }, Err(Error::Infeasible { .. })) => OracleCheckLine {
                instance,
                brute_force: None,
                dual: None,
                gap_bound,
                passed: true,
            },
            (bf, dual) => OracleCheckLine {
                instance,
                brute_force: bf.value(),
                dual: dual.ok().map(|d| d.value.avg_sum_rate),
                gap_bound,
                passed: false,
            },
        };
        lines.push(line);
    }
    Ok(lines)
}

fn cmd_oracle_check(
    common: &CommonArgs,
    instances: usize,
    horizon: usize,
    n_users: usize,
) -> Result<bool> {
    let ctx = Context::new(common)?;
    let lines = oracle_check(&ctx.config, instances, horizon, n_users)?;
    let mut out = String::from("instance,brute_force_rate,dual_rate,gap_bound,passed\n");
    for l in &lines {
        out.push_str(&format!(
            "{},{},{},{:?},{}\n",
            l.instance,
            l.brute_force.map(|v| format!("{v:?}")).unwrap_or_default(),
            l.dual.map(|v| format!("{v:?}")).unwrap_or_default(),
            l.gap_bound,
            l.passed
        ));
    }
    write_output(common.output.as_ref(), out.as_bytes())?;
    Ok(lines.iter().all(|l| l.passed))
}

/// Runs a parsed invocation and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Calibrate {
            common,
            scheme,
            q_req,
        } => cmd_calibrate(common, *scheme, *q_req).map(|_| true),
        Command::Run {
            common,
            scheme,
            q_req,
            duals,
        } => cmd_run(common, scheme, *q_req, duals.as_ref()).map(|_| true),
        Command::Sweep {
            common,
            scheme,
            grid,
        } => cmd_sweep(common, *scheme, grid).map(|_| true),
        Command::OracleCheck {
            common,
            instances,
            horizon,
            oracle_users,
        } => cmd_oracle_check(common, *instances, *horizon, *oracle_users),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("error: oracle check failed");
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
