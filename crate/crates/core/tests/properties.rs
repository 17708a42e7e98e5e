use hybrid_sched::{
    eclipse_schedule, generate_demand, max_load, run_algorithm, summarize, transmission_time,
    two_hop_schedule, validate, Algorithm, Matrix, Plan, SearchStrategy, SystemParams,
    TrafficGenConfig, ViolationKind,
};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SystemParams> {
    (0.001f64..0.1, 8.0f64..40.0).prop_map(|(d, r)| SystemParams::from_ratio(d, r).unwrap())
}

fn small_demand() -> impl Strategy<Value = Matrix> {
    (3usize..9).prop_flat_map(|n| {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], n * n).prop_map(move |v| {
            Matrix::from_fn(n, |i, j| if i == j { 0.0 } else { v[i * n + j] })
        })
    })
}

/// Two disjoint cyclic shifts, scaled by `a` and `b`: every matching the
/// greedy step picks serves its edges fully, so no residue ever appears.
fn shifted_pair(n: usize, a: f64, b: f64) -> Matrix {
    Matrix::from_fn(n, |i, j| {
        if j == (i + 1) % n {
            a
        } else if j == (i + 2) % n {
            b
        } else {
            0.0
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn every_algorithm_passes_its_audit(d in small_demand(), p in params()) {
        for alg in Algorithm::ALL {
            let (outcome, _) = run_algorithm(alg, &d, &p, SearchStrategy::FullScan).unwrap();
            let audit = validate(&d, &p, outcome.plan(), Some(outcome.residual()));
            prop_assert!(audit.is_clean(), "{alg}: {:?}", audit.violations);
            let t = outcome.transmission_time();
            prop_assert!((t - audit.transmission_time).abs() <= 1e-9 * t.max(1.0));
        }
    }

    #[test]
    fn two_hop_equals_eclipse_without_residue(n in 5usize..12, a in 1.0f64..10.0, b in 1.0f64..10.0, p in params()) {
        let d = shifted_pair(n, a, b);
        let e = eclipse_schedule(&d, &p, SearchStrategy::FullScan).unwrap();
        let t = two_hop_schedule(&d, &p, SearchStrategy::FullScan).unwrap();
        prop_assert!(t.ledger.indirect.is_empty());
        prop_assert_eq!(&e.schedule, &t.schedule);
        prop_assert_eq!(e.transmission_time, t.transmission_time);
    }

    #[test]
    fn transmission_time_is_monotone(t_c in 0.0f64..5.0, extra in 0.0f64..1.0, scale in 1.0f64..3.0, r_p in 0.01f64..0.5, d in small_demand()) {
        let base = transmission_time(t_c, &d, r_p).unwrap();
        prop_assert!(transmission_time(t_c + extra, &d, r_p).unwrap() >= base);
        prop_assert!(transmission_time(t_c, &d.scaled(scale), r_p).unwrap() >= base);
        prop_assert!(transmission_time(t_c, &d, r_p * scale).unwrap() <= base);
        prop_assert!(base >= t_c && base >= max_load(&d) / r_p - 1e-12);
    }

    #[test]
    fn summary_ignores_order(mut values in proptest::collection::vec(-100.0f64..100.0, 1..40), seed in any::<u64>()) {
        let before = summarize(&values).unwrap();
        let k = (seed as usize) % values.len();
        values.rotate_left(k);
        values.reverse();
        let after = summarize(&values).unwrap();
        prop_assert_eq!(before.median, after.median);
        prop_assert_eq!(before.p25, after.p25);
        prop_assert_eq!(before.p75, after.p75);
        prop_assert!((before.mean - after.mean).abs() <= 1e-9);
        prop_assert!(before.p25 <= before.median && before.median <= before.p75);
    }
}

#[test]
fn search_strategies_are_ordered_per_step() {
    let d = generate_demand(&TrafficGenConfig::with_size(20, 3).without_noise()).unwrap();
    let p = SystemParams::from_ratio(0.01, 10.0).unwrap();
    let full = hybrid_sched::best_configuration(&d, &p, SearchStrategy::FullScan).unwrap();
    for s in [SearchStrategy::BitonicBinary, SearchStrategy::Sampled { m: 3 }] {
        let other = hybrid_sched::best_configuration(&d, &p, s).unwrap();
        assert!(other.ratio <= full.ratio + 1e-12);
    }
}

#[test]
fn bff_audit_catches_a_tampered_timeline() {
    let d = generate_demand(&TrafficGenConfig::with_size(20, 9).without_noise()).unwrap();
    let p = SystemParams::from_ratio(0.01, 10.0).unwrap();
    let (outcome, _) = run_algorithm(Algorithm::Bff, &d, &p, SearchStrategy::FullScan).unwrap();
    let hybrid_sched::Outcome::Bff(mut bff) = outcome else {
        unreachable!()
    };
    let first = bff.schedule.connections[0];
    let later = bff
        .schedule
        .connections
        .iter()
        .position(|c| c.i == first.i && c.start > first.end)
        .expect("the input reconnects at least once");
    let shift = bff.schedule.connections[later].start - first.end;
    bff.schedule.connections[later].start -= shift;
    bff.schedule.connections[later].end -= shift;
    let audit = validate(&d, &p, Plan::Timeline(&bff.schedule), None);
    assert!(audit.has(ViolationKind::InputGap));
}

#[test]
fn ledger_audit_catches_an_overdraft() {
    let d = generate_demand(&TrafficGenConfig::with_size(20, 5)).unwrap();
    let p = SystemParams::from_ratio(0.04, 20.0).unwrap();
    let mut t = two_hop_schedule(&d, &p, SearchStrategy::BitonicBinary).unwrap();
    let b = t.ledger.indirect.first_mut().expect("some traffic goes two hops");
    b.amount *= 1e3;
    let plan = Plan::Matchings {
        schedule: &t.schedule,
        ledger: Some(&t.ledger),
    };
    let audit = validate(&d, &p, plan, Some(&t.residual));
    assert!(audit.has(ViolationKind::ResidueOverdraft) || audit.has(ViolationKind::EdgeOverbooked));
    assert!(audit.has(ViolationKind::ConservationMismatch));
}
