//! Order-based comparison schedulers.
//!
//! Ranks are descending: rank 1 is the largest value, and equal values are
//! ranked by user index. `j` and the entries of the eligible-order set are
//! 1-based ranks.

use serde::{Deserialize, Serialize};

use crate::channel::{SlotRealization, UserProfile};
use crate::error::{Error, Result};
use crate::scheduling::{ScheduleDecision, Scheduler, SchemeTag};

/// 1-based descending rank of `values[user]`.
fn rank_of(values: &[f64], user: usize) -> usize {
    let v = values[user];
    1 + values
        .iter()
        .enumerate()
        .filter(|&(m, &w)| w > v || (w == v && m < user))
        .count()
}

/// User holding rank `j` (1-based, descending).
fn user_with_rank(values: &[f64], j: usize) -> usize {
    (0..values.len())
        .find(|&n| rank_of(values, n) == j)
        .expect("ranks form a permutation of 1..=N")
}

fn check_order(j: usize, n_users: usize) -> Result<()> {
    if (1..=n_users).contains(&j) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "selection order {j} outside 1..={n_users}"
        )))
    }
}

fn normalized_gains(slot: &SlotRealization, profiles: &[UserProfile]) -> Vec<f64> {
    slot.gains
        .iter()
        .zip(profiles)
        .map(|(h, p)| h / p.mean_gain)
        .collect()
}

/// Schedules the user whose channel gain has rank `j`.
pub fn order_mt_select(slot: &SlotRealization, j: usize) -> Result<ScheduleDecision> {
    check_order(j, slot.n_users())?;
    Ok(ScheduleDecision {
        slot_index: slot.slot_index,
        selected_user: user_with_rank(&slot.gains, j),
        metric_values: slot.gains.clone(),
        scheme_tag: SchemeTag::OrderMt,
    })
}

/// Schedules the user whose normalized gain `h_n / Omega_n` has rank `j`.
pub fn order_pf_select(
    slot: &SlotRealization,
    profiles: &[UserProfile],
    j: usize,
) -> Result<ScheduleDecision> {
    check_order(j, slot.n_users())?;
    if profiles.len() != slot.n_users() {
        return Err(Error::Dimension {
            expected: slot.n_users(),
            got: profiles.len(),
        });
    }
    let normalized = normalized_gains(slot, profiles);
    Ok(ScheduleDecision {
        slot_index: slot.slot_index,
        selected_user: user_with_rank(&normalized, j),
        metric_values: normalized,
        scheme_tag: SchemeTag::OrderPf,
    })
}

/// Running per-user throughput for the order-based ET scheduler.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EtBaselineState {
    /// Sum of delivered capacity per user over past slots.
    pub cumulative_rate: Vec<f64>,
    pub slots_elapsed: u64,
}

impl EtBaselineState {
    pub fn new(n_users: usize) -> Self {
        Self {
            cumulative_rate: vec![0.0; n_users],
            slots_elapsed: 0,
        }
    }

    /// Throughput of `user` averaged over all past slots, `r_n(i-1)`.
    pub fn average_rate(&self, user: usize) -> f64 {
        if self.slots_elapsed == 0 {
            0.0
        } else {
            self.cumulative_rate[user] / self.slots_elapsed as f64
        }
    }
}

/// Validated set of eligible 1-based normalized-SNR ranks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibleOrders(Vec<usize>);

impl EligibleOrders {
    pub fn new(mut orders: Vec<usize>, n_users: usize) -> Result<Self> {
        orders.sort_unstable();
        orders.dedup();
        if orders.is_empty() {
            return Err(Error::Domain("eligible order set must be non-empty".into()));
        }
        for &j in &orders {
            check_order(j, n_users)?;
        }
        Ok(Self(orders))
    }

    pub fn all(n_users: usize) -> Self {
        Self((1..=n_users).collect())
    }

    pub fn contains(&self, rank: usize) -> bool {
        self.0.binary_search(&rank).is_ok()
    }

    pub fn orders(&self) -> &[usize] {
        &self.0
    }
}

/// Among users whose normalized-SNR rank lies in `eligible`, schedules the one
/// with the lowest past average throughput, then credits it with `C_n(i)`.
pub fn order_et_select(
    slot: &SlotRealization,
    profiles: &[UserProfile],
    state: &mut EtBaselineState,
    eligible: &EligibleOrders,
) -> Result<ScheduleDecision> {
    let n_users = slot.n_users();
    if profiles.len() != n_users || state.cumulative_rate.len() != n_users {
        return Err(Error::Dimension {
            expected: n_users,
            got: profiles.len().min(state.cumulative_rate.len()),
        });
    }
    if let Some(&j) = eligible.orders().last() {
        check_order(j, n_users)?;
    }
    let normalized = normalized_gains(slot, profiles);
    let mut chosen: Option<(usize, f64)> = None;
    for n in 0..n_users {
        if !eligible.contains(rank_of(&normalized, n)) {
            continue;
        }
        let r = state.average_rate(n);
        if chosen.is_none_or(|(_, best)| r < best) {
            chosen = Some((n, r));
        }
    }
    let (selected_user, _) = chosen.expect("a non-empty order set always admits one user");
    state.cumulative_rate[selected_user] += slot.capacities[selected_user];
    state.slots_elapsed += 1;
    Ok(ScheduleDecision {
        slot_index: slot.slot_index,
        selected_user,
        metric_values: normalized,
        scheme_tag: SchemeTag::OrderEt,
    })
}

/// An order-based scheduler with its parameters.
#[derive(Clone, Debug)]
pub enum OrderPolicy {
    Mt {
        j: usize,
    },
    Pf {
        j: usize,
        profiles: Vec<UserProfile>,
    },
    Et {
        eligible: EligibleOrders,
        profiles: Vec<UserProfile>,
        state: EtBaselineState,
    },
}

impl OrderPolicy {
    pub fn order_mt(j: usize, n_users: usize) -> Result<Self> {
        check_order(j, n_users)?;
        Ok(OrderPolicy::Mt { j })
    }

    pub fn order_pf(j: usize, profiles: &[UserProfile]) -> Result<Self> {
        check_order(j, profiles.len())?;
        Ok(OrderPolicy::Pf {
            j,
            profiles: profiles.to_vec(),
        })
    }

    pub fn order_et(eligible: EligibleOrders, profiles: &[UserProfile]) -> Result<Self> {
        if let Some(&j) = eligible.orders().last() {
            check_order(j, profiles.len())?;
        }
        Ok(OrderPolicy::Et {
            eligible,
            profiles: profiles.to_vec(),
            state: EtBaselineState::new(profiles.len()),
        })
    }

    /// Short label including the policy parameter, e.g. `order-mt[j=2]`.
    pub fn label(&self) -> String {
        match self {
            OrderPolicy::Mt { j } => format!("order-mt[j={j}]"),
            OrderPolicy::Pf { j, .. } => format!("order-pf[j={j}]"),
            OrderPolicy::Et { eligible, .. } => {
                let list: Vec<String> = eligible.orders().iter().map(|j| j.to_string()).collect();
                format!("order-et[S={}]", list.join(","))
            }
        }
    }
}

impl Scheduler for OrderPolicy {
    fn tag(&self) -> SchemeTag {
        match self {
            OrderPolicy::Mt { .. } => SchemeTag::OrderMt,
            OrderPolicy::Pf { .. } => SchemeTag::OrderPf,
            OrderPolicy::Et { .. } => SchemeTag::OrderEt,
        }
    }

    fn select_user(&mut self, slot: &SlotRealization) -> usize {
        // Parameters were validated at construction.
        match self {
            OrderPolicy::Mt { j } => user_with_rank(&slot.gains, *j),
            OrderPolicy::Pf { j, profiles } => {
                user_with_rank(&normalized_gains(slot, profiles), *j)
            }
            OrderPolicy::Et {
                eligible,
                profiles,
                state,
            } => {
                order_et_select(slot, profiles, state, eligible)
                    .expect("validated order-ET policy")
                    .selected_user
            }
        }
    }

    fn metrics(&self, slot: &SlotRealization) -> Vec<f64> {
        match self {
            OrderPolicy::Mt { .. } => slot.gains.clone(),
            OrderPolicy::Pf { profiles, .. } | OrderPolicy::Et { profiles, .. } => {
                normalized_gains(slot, profiles)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profiles(means: &[f64]) -> Vec<UserProfile> {
        means
            .iter()
            .map(|&m| UserProfile {
                distance_m: 10.0,
                mean_gain: m,
                efficiency: 0.5,
                noise_power: 1e-9,
            })
            .collect()
    }

    fn slot(gains: &[f64], p: &[UserProfile]) -> SlotRealization {
        SlotRealization::from_gains(0, gains.to_vec(), p, 10.0).unwrap()
    }

    #[test]
    fn ranks_are_descending_with_index_ties() {
        let v = [0.3, 0.9, 0.3, 0.1];
        assert_eq!(rank_of(&v, 1), 1);
        assert_eq!(rank_of(&v, 0), 2);
        assert_eq!(rank_of(&v, 2), 3);
        assert_eq!(rank_of(&v, 3), 4);
    }

    #[test]
    fn order_mt_extremes() {
        let p = profiles(&[1.0, 1.0, 1.0]);
        let s = slot(&[0.5, 2.0, 0.1], &p);
        assert_eq!(order_mt_select(&s, 1).unwrap().selected_user, 1);
        assert_eq!(order_mt_select(&s, 3).unwrap().selected_user, 2);
        assert!(order_mt_select(&s, 0).is_err());
        assert!(order_mt_select(&s, 4).is_err());
    }

    #[test]
    fn single_user_orders() {
        let p = profiles(&[1.0]);
        let s = slot(&[0.5], &p);
        assert_eq!(order_mt_select(&s, 1).unwrap().selected_user, 0);
        assert_eq!(order_pf_select(&s, &p, 1).unwrap().selected_user, 0);
        assert!(order_mt_select(&s, 2).is_err());
    }

    #[test]
    fn order_pf_normalizes() {
        let p = profiles(&[10.0, 1.0]);
        let s = slot(&[5.0, 0.8], &p);
        // Normalized gains are 0.5 and 0.8.
        assert_eq!(order_pf_select(&s, &p, 1).unwrap().selected_user, 1);
        // Rescaling one user's mean together with its gain changes nothing.
        let p2 = profiles(&[1000.0, 1.0]);
        let s2 = slot(&[500.0, 0.8], &p2);
        assert_eq!(order_pf_select(&s2, &p2, 1).unwrap().selected_user, 1);
    }

    #[test]
    fn order_et_first_slot_and_ties() {
        let p = profiles(&[1.0, 1.0, 1.0]);
        let s = slot(&[0.2, 0.9, 0.5], &p);
        let mut state = EtBaselineState::new(3);
        let all = EligibleOrders::all(3);
        let d = order_et_select(&s, &p, &mut state, &all).unwrap();
        assert_eq!(d.selected_user, 0);
        assert_eq!(state.cumulative_rate[0], s.capacities[0]);
        assert_eq!(state.cumulative_rate[1], 0.0);

        // Only the strongest normalized SNR is eligible.
        let mut state = EtBaselineState::new(3);
        let top = EligibleOrders::new(vec![1], 3).unwrap();
        assert_eq!(
            order_et_select(&s, &p, &mut state, &top)
                .unwrap()
                .selected_user,
            1
        );
    }

    #[test]
    fn order_et_prefers_lowest_average() {
        let p = profiles(&[1.0, 1.0]);
        let mut state = EtBaselineState::new(2);
        let all = EligibleOrders::all(2);
        let s = slot(&[1.0, 1.0], &p);
        let picks: Vec<usize> = (0..4)
            .map(|_| {
                order_et_select(&s, &p, &mut state, &all)
                    .unwrap()
                    .selected_user
            })
            .collect();
        assert_eq!(picks, vec![0, 1, 0, 1]);
    }

    #[test]
    fn eligible_orders_validation() {
        assert!(EligibleOrders::new(vec![], 3).is_err());
        assert!(EligibleOrders::new(vec![4], 3).is_err());
        assert_eq!(
            EligibleOrders::new(vec![3, 1, 3], 3).unwrap().orders(),
            &[1, 3]
        );
    }

    #[test]
    fn rank_selection_covers_all_users() {
        let p = profiles(&[1.0, 2.0, 3.0, 4.0]);
        let s = slot(&[0.7, 0.1, 5.0, 0.7], &p);
        let mut picked: Vec<usize> = (1..=4)
            .map(|j| order_mt_select(&s, j).unwrap().selected_user)
            .collect();
        picked.sort_unstable();
        assert_eq!(picked, vec![0, 1, 2, 3]);
    }
}
