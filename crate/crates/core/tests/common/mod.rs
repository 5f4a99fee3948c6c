//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use swipt_sched::channel::{place_users, user_at, SystemConfig, UserProfile};
use swipt_sched::seeds::{derive_seed, rng_from_seed, Stream};

pub fn config(n_users: usize) -> SystemConfig {
    SystemConfig {
        n_users,
        ..SystemConfig::default()
    }
}

/// Random placement of `n_users` from master seed 1.
pub fn deployment(n_users: usize) -> (SystemConfig, Vec<UserProfile>) {
    let cfg = config(n_users);
    let profiles = place_users(
        &cfg,
        &mut rng_from_seed(derive_seed(cfg.seed, Stream::Placement)),
    )
    .expect("placement");
    (cfg, profiles)
}

/// Users at explicit distances.
pub fn users_at(distances: &[f64]) -> (SystemConfig, Vec<UserProfile>) {
    let cfg = config(distances.len());
    let profiles = distances
        .iter()
        .enumerate()
        .map(|(i, &d)| user_at(d, i, &cfg).expect("distance in range"))
        .collect();
    (cfg, profiles)
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
