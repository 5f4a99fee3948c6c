mod common;

use swipt_sched::baselines::{EligibleOrders, OrderPolicy};
use swipt_sched::calibration::relative_spread;
use swipt_sched::scheduling::Scheduler;
use swipt_sched::scheduling::SchemeTag;
use swipt_sched::simulator::{run, sweep_orders};

#[test]
fn order_pf_gives_uniform_access_to_iid_users() {
    let (cfg, profiles) = common::users_at(&[15.0; 4]);
    for j in 1..=4 {
        let mut policy = OrderPolicy::order_pf(j, &profiles).unwrap();
        let stats = run(&mut policy, &profiles, &cfg, 1_000_000, 30 + j as u64).unwrap();
        for f in &stats.access_freq {
            assert!((f - 0.25).abs() < 0.01, "j = {j}: {:?}", stats.access_freq);
        }
    }
}

#[test]
fn order_pf_access_is_uniform_for_heterogeneous_users() {
    let (cfg, profiles) = common::deployment(5);
    let mut policy = OrderPolicy::order_pf(2, &profiles).unwrap();
    let stats = run(&mut policy, &profiles, &cfg, 1_000_000, 3).unwrap();
    for f in &stats.access_freq {
        assert!((f - 0.2).abs() < 0.01, "{:?}", stats.access_freq);
    }
}

#[test]
fn order_et_spread_shrinks_with_horizon() {
    let (cfg, profiles) = common::deployment(5);
    let spread = |t: u64| {
        let mut p = OrderPolicy::order_et(EligibleOrders::all(5), &profiles).unwrap();
        relative_spread(&run(&mut p, &profiles, &cfg, t, 4).unwrap().per_user_rate)
    };
    let short = spread(1_000);
    let long = spread(1_000_000);
    assert!(long < short, "{short} -> {long}");
    assert!(long < 1e-3, "{long}");
}

#[test]
fn order_mt_first_rank_has_best_rate_and_last_rank_most_energy() {
    let (cfg, profiles) = common::deployment(5);
    let curve = sweep_orders(SchemeTag::OrderMt, &profiles, &cfg, 200_000, 5).unwrap();
    assert_eq!(curve.len(), 5);
    let rates: Vec<f64> = curve.iter().map(|(_, s)| s.avg_sum_rate).collect();
    let harvests: Vec<f64> = curve.iter().map(|(_, s)| s.avg_sum_harvest).collect();
    assert!(rates.windows(2).all(|w| w[0] > w[1]), "{rates:?}");
    assert!(harvests.windows(2).all(|w| w[0] < w[1]), "{harvests:?}");
    assert_eq!(curve[0].0, "order-mt[j=1]");
}

#[test]
fn order_et_label_and_state_reset_per_policy() {
    let (_, profiles) = common::deployment(3);
    let p = OrderPolicy::order_et(EligibleOrders::new(vec![3, 1], 3).unwrap(), &profiles).unwrap();
    assert_eq!(p.label(), "order-et[S=1,3]");
    assert_eq!(p.tag(), SchemeTag::OrderEt);
    assert!(OrderPolicy::order_mt(4, 3).is_err());
}
