mod common;

use proptest::prelude::*;

use privhub::runtime::HOUR_MS;

#[test]
fn one_day_ledger_agrees() {
    let (q, t, f) = common::ledger_totals(7, 24 * HOUR_MS);
    assert_eq!(q, t);
    assert_eq!(q, f);
}

#[test]
fn guarded_app_produces_blocked_records() {
    // find a seed where the guard bites, then check the three views agree
    let hit = (0..200u64)
        .map(|s| common::ledger_totals(s, 6 * HOUR_MS))
        .find(|(q, _, _)| q.2 > 0 && q.0 > 0)
        .expect("some seed blocks and sends");
    assert_eq!(hit.0, hit.1);
    assert_eq!(hit.0, hit.2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn query_trace_and_file_agree(seed in any::<u64>()) {
        let (q, t, f) = common::ledger_totals(seed, 6 * HOUR_MS);
        prop_assert_eq!(q, t);
        prop_assert_eq!(q, f);
    }
}
