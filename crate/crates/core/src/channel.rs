//! Channel model: user placement, path loss, block Rayleigh fading.
//!
//! Each user sits at a fixed distance from the access point. Its mean channel
//! power gain follows free-space loss up to the reference distance and a
//! power law with exponent `path_loss_exponent` beyond it. Per slot, the
//! power gain is the mean gain times an independent unit-mean exponential
//! variate (Rayleigh amplitude fading), constant within the slot.
//!
//! From a gain `h` the slot carries two derived quantities:
//!
//! * capacity `C = log2(1 + P h / sigma^2)` in bits per channel use, and
//! * harvested power `Q = xi P h` in Watts (slots have unit length, so this is
//!   also the harvested energy per slot).

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

// ============================================================================
// Configuration
// ============================================================================

/// Physical and simulation parameters of one system.
///
/// Defaults reproduce the reference deployment: 40 dBm transmit power,
/// -62 dBm noise, 50% RF-to-DC efficiency, exponent 3.6, users between 2 m
/// and 100 m, 10 dBi / 2 dBi antennas, 915 MHz carrier, 200 kHz bandwidth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_users: usize,
    /// AP transmit power in Watts.
    pub tx_power: f64,
    /// Noise power in Watts, used for every user without an override.
    pub noise_power: f64,
    pub noise_power_per_user: Option<Vec<f64>>,
    /// RF-to-DC conversion efficiency, used for every user without an override.
    pub rf_dc_efficiency: f64,
    pub rf_dc_efficiency_per_user: Option<Vec<f64>>,
    pub path_loss_exponent: f64,
    pub ref_distance_m: f64,
    pub max_distance_m: f64,
    pub ap_antenna_gain_dbi: f64,
    pub ut_antenna_gain_dbi: f64,
    pub carrier_hz: f64,
    /// Only used to convert bits/channel-use into bits/s on output.
    pub bandwidth_hz: f64,
    /// Minimum required average sum harvested power in Watts.
    pub q_req: f64,
    pub n_slots: u64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_users: 8,
            tx_power: dbm_to_watts(40.0),
            noise_power: dbm_to_watts(-62.0),
            noise_power_per_user: None,
            rf_dc_efficiency: 0.5,
            rf_dc_efficiency_per_user: None,
            path_loss_exponent: 3.6,
            ref_distance_m: 2.0,
            max_distance_m: 100.0,
            ap_antenna_gain_dbi: 10.0,
            ut_antenna_gain_dbi: 2.0,
            carrier_hz: 915e6,
            bandwidth_hz: 200e3,
            q_req: 0.0,
            n_slots: 1_000_000,
            seed: 1,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_users == 0 {
            return bad("n_users must be at least 1".into());
        }
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            return bad(format!("tx_power must be positive, got {}", self.tx_power));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return bad(format!(
                "noise_power must be positive, got {}",
                self.noise_power
            ));
        }
        if !(0.0..=1.0).contains(&self.rf_dc_efficiency) {
            return bad(format!(
                "rf_dc_efficiency must lie in [0, 1], got {}",
                self.rf_dc_efficiency
            ));
        }
        if let Some(v) = &self.noise_power_per_user {
            if v.len() != self.n_users {
                return bad(format!(
                    "noise_power_per_user has {} entries for {} users",
                    v.len(),
                    self.n_users
                ));
            }
            if v.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return bad("noise_power_per_user entries must be positive".into());
            }
        }
        if let Some(v) = &self.rf_dc_efficiency_per_user {
            if v.len() != self.n_users {
                return bad(format!(
                    "rf_dc_efficiency_per_user has {} entries for {} users",
                    v.len(),
                    self.n_users
                ));
            }
            if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return bad("rf_dc_efficiency_per_user entries must lie in [0, 1]".into());
            }
        }
        if !(self.ref_distance_m > 0.0) {
            return bad("ref_distance_m must be positive".into());
        }
        // Equal bounds are accepted and place every user at that distance.
        if !(self.ref_distance_m <= self.max_distance_m) {
            return bad(format!(
                "ref_distance_m ({}) must not exceed max_distance_m ({})",
                self.ref_distance_m, self.max_distance_m
            ));
        }
        if !(self.path_loss_exponent >= 0.0 && self.path_loss_exponent.is_finite()) {
            return bad("path_loss_exponent must be non-negative".into());
        }
        if !(self.carrier_hz > 0.0) {
            return bad("carrier_hz must be positive".into());
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz must be positive".into());
        }
        if !(self.q_req >= 0.0 && self.q_req.is_finite()) {
            return bad("q_req must be non-negative".into());
        }
        if self.n_slots == 0 {
            return bad("n_slots must be at least 1".into());
        }
        Ok(())
    }

    pub fn noise_power_of(&self, user: usize) -> f64 {
        self.noise_power_per_user
            .as_ref()
            .map_or(self.noise_power, |v| v[user])
    }

    pub fn efficiency_of(&self, user: usize) -> f64 {
        self.rf_dc_efficiency_per_user
            .as_ref()
            .map_or(self.rf_dc_efficiency, |v| v[user])
    }

    /// Parses a flat TOML key-value file. See [`ConfigFile`] for the keys.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        raw.resolve()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// On-disk configuration. Every key is optional and falls back to
/// [`SystemConfig::default`].
///
/// | key | unit |
/// |-----|------|
/// | `n_users` | count |
/// | `tx_power` / `tx_power_dbm` | W / dBm |
/// | `noise_power` / `noise_power_dbm` | W / dBm |
/// | `noise_power_per_user` / `noise_power_per_user_dbm` | list of W / dBm |
/// | `rf_dc_efficiency`, `rf_dc_efficiency_per_user` | fraction |
/// | `path_loss_exponent` | - |
/// | `ref_distance_m`, `max_distance_m` | m |
/// | `ap_antenna_gain_dbi`, `ut_antenna_gain_dbi` | dBi |
/// | `carrier_hz`, `bandwidth_hz` | Hz |
/// | `q_req` / `q_req_dbm` | W / dBm |
/// | `n_slots` | count |
/// | `seed` | integer |
///
/// Supplying both the Watt and the dBm form of a key is an error.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_users: Option<usize>,
    pub tx_power: Option<f64>,
    pub tx_power_dbm: Option<f64>,
    pub noise_power: Option<f64>,
    pub noise_power_dbm: Option<f64>,
    pub noise_power_per_user: Option<Vec<f64>>,
    pub noise_power_per_user_dbm: Option<Vec<f64>>,
    pub rf_dc_efficiency: Option<f64>,
    pub rf_dc_efficiency_per_user: Option<Vec<f64>>,
    pub path_loss_exponent: Option<f64>,
    pub ref_distance_m: Option<f64>,
    pub max_distance_m: Option<f64>,
    pub ap_antenna_gain_dbi: Option<f64>,
    pub ut_antenna_gain_dbi: Option<f64>,
    pub carrier_hz: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub q_req: Option<f64>,
    pub q_req_dbm: Option<f64>,
    pub n_slots: Option<u64>,
    pub seed: Option<u64>,
}

fn watts_or_dbm(name: &str, watts: Option<f64>, dbm: Option<f64>) -> Result<Option<f64>> {
    match (watts, dbm) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "both `{name}` and `{name}_dbm` given"
        ))),
        (Some(w), None) => Ok(Some(w)),
        (None, Some(d)) => Ok(Some(dbm_to_watts(d))),
        (None, None) => Ok(None),
    }
}

impl ConfigFile {
    pub fn resolve(self) -> Result<SystemConfig> {
        let d = SystemConfig::default();
        let noise_per_user = match (self.noise_power_per_user, self.noise_power_per_user_dbm) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "both `noise_power_per_user` and `noise_power_per_user_dbm` given".into(),
                ))
            }
            (Some(w), None) => Some(w),
            (None, Some(dbm)) => Some(dbm.into_iter().map(dbm_to_watts).collect()),
            (None, None) => None,
        };
        let cfg = SystemConfig {
            n_users: self.n_users.unwrap_or(d.n_users),
            tx_power: watts_or_dbm("tx_power", self.tx_power, self.tx_power_dbm)?
                .unwrap_or(d.tx_power),
            noise_power: watts_or_dbm("noise_power", self.noise_power, self.noise_power_dbm)?
                .unwrap_or(d.noise_power),
            noise_power_per_user: noise_per_user,
            rf_dc_efficiency: self.rf_dc_efficiency.unwrap_or(d.rf_dc_efficiency),
            rf_dc_efficiency_per_user: self.rf_dc_efficiency_per_user,
            path_loss_exponent: self.path_loss_exponent.unwrap_or(d.path_loss_exponent),
            ref_distance_m: self.ref_distance_m.unwrap_or(d.ref_distance_m),
            max_distance_m: self.max_distance_m.unwrap_or(d.max_distance_m),
            ap_antenna_gain_dbi: self.ap_antenna_gain_dbi.unwrap_or(d.ap_antenna_gain_dbi),
            ut_antenna_gain_dbi: self.ut_antenna_gain_dbi.unwrap_or(d.ut_antenna_gain_dbi),
            carrier_hz: self.carrier_hz.unwrap_or(d.carrier_hz),
            bandwidth_hz: self.bandwidth_hz.unwrap_or(d.bandwidth_hz),
            q_req: watts_or_dbm("q_req", self.q_req, self.q_req_dbm)?.unwrap_or(d.q_req),
            n_slots: self.n_slots.unwrap_or(d.n_slots),
            seed: self.seed.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

// ============================================================================
// Users and slots
// ============================================================================

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub distance_m: f64,
    /// Mean channel power gain (dimensionless).
    pub mean_gain: f64,
    /// RF-to-DC efficiency.
    pub efficiency: f64,
    /// Noise power in Watts.
    pub noise_power: f64,
}

/// Mean channel power gain at `distance_m`:
/// `G_ap G_ut (lambda / (4 pi d0))^2 (d0 / d)^alpha`.
pub fn mean_channel_gain(distance_m: f64, config: &SystemConfig) -> Result<f64> {
    let d0 = config.ref_distance_m;
    if !(distance_m >= d0) {
        return Err(Error::Domain(format!(
            "distance {distance_m} m is below the reference distance {d0} m"
        )));
    }
    let wavelength = SPEED_OF_LIGHT / config.carrier_hz;
    let antenna = db_to_linear(config.ap_antenna_gain_dbi + config.ut_antenna_gain_dbi);
    let free_space = (wavelength / (4.0 * std::f64::consts::PI * d0)).powi(2);
    Ok(antenna * free_space * (d0 / distance_m).powf(config.path_loss_exponent))
}

/// Draws user distances uniformly in `[ref_distance_m, max_distance_m]`.
///
/// Users are drawn in index order from `rng`, so the first `k` users of an
/// `N`-user placement coincide with a `k`-user placement from the same seed.
pub fn place_users<R: Rng + ?Sized>(
    config: &SystemConfig,
    rng: &mut R,
) -> Result<Vec<UserProfile>> {
    config.validate()?;
    (0..config.n_users)
        .map(|n| {
            let distance_m = if config.ref_distance_m == config.max_distance_m {
                config.ref_distance_m
            } else {
                rng.gen_range(config.ref_distance_m..=config.max_distance_m)
            };
            user_at(distance_m, n, config)
        })
        .collect()
}

/// Builds the profile of user `index` placed at `distance_m`.
pub fn user_at(distance_m: f64, index: usize, config: &SystemConfig) -> Result<UserProfile> {
    Ok(UserProfile {
        distance_m,
        mean_gain: mean_channel_gain(distance_m, config)?,
        efficiency: config.efficiency_of(index),
        noise_power: config.noise_power_of(index),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRealization {
    pub slot_index: u64,
    /// Channel power gains h_n(i).
    pub gains: Vec<f64>,
    /// Capacities C_n(i) in bits per channel use.
    pub capacities: Vec<f64>,
    /// Harvestable power Q_n(i) in Watts.
    pub harvests: Vec<f64>,
}

pub fn capacity(tx_power: f64, gain: f64, noise_power: f64) -> f64 {
    (tx_power * gain / noise_power).ln_1p() / std::f64::consts::LN_2
}

pub fn harvest(tx_power: f64, gain: f64, efficiency: f64) -> f64 {
    efficiency * tx_power * gain
}

impl SlotRealization {
    /// Fills capacities and harvests from known gains.
    pub fn from_gains(
        slot_index: u64,
        gains: Vec<f64>,
        profiles: &[UserProfile],
        tx_power: f64,
    ) -> Result<Self> {
        if gains.len() != profiles.len() {
            return Err(Error::Dimension {
                expected: profiles.len(),
                got: gains.len(),
            });
        }
        let capacities = gains
            .iter()
            .zip(profiles)
            .map(|(&h, p)| capacity(tx_power, h, p.noise_power))
            .collect();
        let harvests = gains
            .iter()
            .zip(profiles)
            .map(|(&h, p)| harvest(tx_power, h, p.efficiency))
            .collect();
        Ok(Self {
            slot_index,
            gains,
            capacities,
            harvests,
        })
    }

    pub fn n_users(&self) -> usize {
        self.gains.len()
    }
}

/// Draws one block-fading slot: `h_n = Omega_n * E_n`, `E_n ~ Exp(1)`.
pub fn draw_slot<R: Rng + ?Sized>(
    slot_index: u64,
    profiles: &[UserProfile],
    config: &SystemConfig,
    rng: &mut R,
) -> Result<SlotRealization> {
    if profiles.is_empty() {
        return Err(Error::Domain("cannot draw a slot without users".into()));
    }
    let gains = profiles
        .iter()
        .map(|p| {
            let e: f64 = Exp1.sample(rng);
            p.mean_gain * e
        })
        .collect();
    SlotRealization::from_gains(slot_index, gains, profiles, config.tx_power)
}

/// Endless iterator of independent slots over a fixed set of users.
pub struct SlotStream<'a, R> {
    profiles: &'a [UserProfile],
    config: &'a SystemConfig,
    rng: R,
    next_index: u64,
}

impl<'a, R: Rng> SlotStream<'a, R> {
    pub fn new(profiles: &'a [UserProfile], config: &'a SystemConfig, rng: R) -> Self {
        Self {
            profiles,
            config,
            rng,
            next_index: 0,
        }
    }
}

impl<R: Rng> Iterator for SlotStream<'_, R> {
    type Item = SlotRealization;

    fn next(&mut self) -> Option<SlotRealization> {
        let slot = draw_slot(self.next_index, self.profiles, self.config, &mut self.rng).ok()?;
        self.next_index += 1;
        Some(slot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn dbm_conversions() {
        assert!(close(dbm_to_watts(40.0), 10.0, 1e-12));
        assert!(close(dbm_to_watts(30.0), 1.0, 1e-12));
        assert!(close(dbm_to_watts(-62.0), 6.309_573_444_801_942e-10, 1e-12));
    }

    #[test]
    fn mean_gain_at_reference_distance() {
        let cfg = SystemConfig::default();
        let g = mean_channel_gain(2.0, &cfg).unwrap();
        // 10^1.2 * (0.327642 / (8 pi))^2, evaluated independently.
        assert!(close(g, 2.693_515_619_621_581e-3, 1e-9), "{g}");
        let g10 = mean_channel_gain(10.0, &cfg).unwrap();
        assert!(close(g10, 8.204_034_589_256_58e-6, 1e-9), "{g10}");
    }

    #[test]
    fn mean_gain_power_law() {
        let cfg = SystemConfig::default();
        let ratio = mean_channel_gain(20.0, &cfg).unwrap() / mean_channel_gain(10.0, &cfg).unwrap();
        assert!(close(ratio, 0.082_469_244_423_305_89, 1e-12));

        let flat = SystemConfig {
            path_loss_exponent: 0.0,
            ..SystemConfig::default()
        };
        let a = mean_channel_gain(3.0, &flat).unwrap();
        let b = mean_channel_gain(90.0, &flat).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_gain_rejects_short_distance() {
        let cfg = SystemConfig::default();
        assert!(matches!(
            mean_channel_gain(1.0, &cfg),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn degenerate_placement_interval() {
        let cfg = SystemConfig {
            n_users: 1,
            ref_distance_m: 2.0,
            max_distance_m: 2.0,
            ..SystemConfig::default()
        };
        let users = place_users(&cfg, &mut rng_from_seed(3)).unwrap();
        assert_eq!(users.len(), 1);
        assert_eq!(users[0].distance_m, 2.0);
    }

    #[test]
    fn placement_is_seeded() {
        let cfg = SystemConfig::default();
        let a = place_users(&cfg, &mut rng_from_seed(11)).unwrap();
        let b = place_users(&cfg, &mut rng_from_seed(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
    }

    #[test]
    fn placement_mean_distance() {
        let cfg = SystemConfig {
            n_users: 10_000,
            ..SystemConfig::default()
        };
        let users = place_users(&cfg, &mut rng_from_seed(5)).unwrap();
        let mean = users.iter().map(|u| u.distance_m).sum::<f64>() / users.len() as f64;
        assert!(close(mean, 51.0, 0.01), "{mean}");
        assert!(users.iter().all(|u| (2.0..=100.0).contains(&u.distance_m)));
    }

    #[test]
    fn slot_quantities() {
        let profile = UserProfile {
            distance_m: 2.0,
            mean_gain: 1.0,
            efficiency: 0.5,
            noise_power: 1e-9,
        };
        let slot =
            SlotRealization::from_gains(0, vec![1e-6, 1e-10], &[profile.clone(), profile], 10.0)
                .unwrap();
        assert!(close(slot.harvests[0], 5e-6, 1e-12));
        // h = sigma^2 / P gives SNR 1.
        assert!(close(slot.capacities[1], 1.0, 1e-12));
    }

    #[test]
    fn invalid_configs_rejected() {
        let cases = [
            SystemConfig {
                n_users: 0,
                ..Default::default()
            },
            SystemConfig {
                tx_power: 0.0,
                ..Default::default()
            },
            SystemConfig {
                noise_power: -1.0,
                ..Default::default()
            },
            SystemConfig {
                rf_dc_efficiency: 1.5,
                ..Default::default()
            },
            SystemConfig {
                ref_distance_m: 200.0,
                ..Default::default()
            },
            SystemConfig {
                rf_dc_efficiency_per_user: Some(vec![0.5]),
                ..Default::default()
            },
        ];
        for cfg in cases {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn config_file_keys() {
        let cfg = SystemConfig::from_toml_str(
            "n_users = 3\ntx_power_dbm = 30.0\nnoise_power = 1e-9\nrf_dc_efficiency_per_user = [0.1, 0.2, 0.3]\n",
        )
        .unwrap();
        assert_eq!(cfg.n_users, 3);
        assert!(close(cfg.tx_power, 1.0, 1e-12));
        assert_eq!(cfg.noise_power, 1e-9);
        assert_eq!(cfg.efficiency_of(2), 0.3);
        assert_eq!(cfg.max_distance_m, 100.0);

        let both = SystemConfig::from_toml_str("tx_power = 1.0\ntx_power_dbm = 30.0\n");
        assert!(matches!(both, Err(Error::Config(_))));
        let unknown = SystemConfig::from_toml_str("tx_powr = 1.0\n");
        assert!(matches!(unknown, Err(Error::Config(_))));
    }

    #[test]
    fn empty_profiles_rejected() {
        let cfg = SystemConfig::default();
        assert!(draw_slot(0, &[], &cfg, &mut rng_from_seed(1)).is_err());
    }
}
