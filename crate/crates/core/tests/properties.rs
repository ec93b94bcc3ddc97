use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use engage_core::calllog::{dedup_attempts, CallHistory, CallRecord, DateWindow, ENGAGEMENT_SECONDS};
use engage_core::predictors::condip::masked_mean_pool;
use engage_core::predictors::{auc, evaluate, roc_curve, Prediction};
use engage_core::rmab::{
    kmeans, overlap_metric, plan_top_k, policy_evaluation, whittle_index, PlanEntry, WhittleConfig,
};
use engage_core::{Action, BehaviorState, BeneficiaryId, MdpParams};
use ndarray::Array3;
use proptest::prelude::*;

fn day(n: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 3, 1).unwrap() + Days::new(n)
}

fn records() -> impl Strategy<Value = Vec<CallRecord>> {
    prop::collection::vec((0u8..3, 0u8..6, 0u64..60, 0u32..200, any::<bool>()), 0..60).prop_map(|rows| {
        rows.into_iter()
            .map(|(b, g, d, secs, success)| CallRecord {
                beneficiary_id: format!("b{b}").as_str().into(),
                attempt_group: format!("g{g}"),
                call_date: day(d),
                message_id: 10,
                duration: if success { f64::from(secs) } else { 0.0 },
                success,
            })
            .collect()
    })
}

fn mdp() -> impl Strategy<Value = MdpParams> {
    ([0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64], 0.0..0.99f64)
        .prop_map(|(v, beta)| MdpParams::from_vector(v, beta).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dedup_is_idempotent_and_keeps_one_per_group(calls in records()) {
        let once = dedup_attempts(&calls);
        prop_assert_eq!(dedup_attempts(&once), once.clone());
        let groups: BTreeSet<_> = calls.iter().map(|c| (c.beneficiary_id.clone(), c.attempt_group.clone())).collect();
        prop_assert_eq!(once.len(), groups.len());
    }

    #[test]
    fn e2c_lies_in_unit_interval(calls in records(), start in 0u64..30, len in 1u64..40) {
        let calls: Vec<_> = dedup_attempts(&calls).into_iter().filter(|c| c.beneficiary_id == "b0".into()).collect();
        let history = CallHistory::from_records("b0".into(), &calls, DateWindow::starting(day(0), 60), ENGAGEMENT_SECONDS)
            .unwrap();
        let counts = history.counts(DateWindow::starting(day(start), len));
        prop_assert!(counts.engagements <= counts.connections && counts.connections <= counts.attempts);
        if let Some(r) = counts.e2c() {
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn pooling_ignores_padding(
        values in prop::collection::vec(-5.0..5.0f64, 12),
        valid in 0usize..=4,
        pad in 0usize..6,
    ) {
        let h = Array3::from_shape_vec((1, 4, 3), values).unwrap();
        let mut padded = Array3::zeros((1, 4 + pad, 3));
        padded.slice_mut(ndarray::s![.., ..4, ..]).assign(&h);
        let base = masked_mean_pool(&h, &[valid]);
        prop_assert_eq!(masked_mean_pool(&padded, &[valid]), base.clone());
        for k in 0..3 {
            let expected = if valid == 0 { 0.0 } else { (0..valid).map(|t| h[[0, t, k]]).sum::<f64>() / valid as f64 };
            prop_assert_eq!(base[[0, k]], expected);
        }
    }

    #[test]
    fn policy_values_are_bounded(m in mdp(), a0 in any::<bool>(), a1 in any::<bool>()) {
        let act = |b: bool| if b { Action::Intervene } else { Action::Abstain };
        let v = policy_evaluation(&m, [act(a0), act(a1)], 0.0, 1e-9).unwrap();
        let bound = 1.0 / (1.0 - m.discount) + 1e-6;
        prop_assert!(v.iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn whittle_index_lies_in_the_bracket(m in mdp()) {
        let bound = 2.0 / (1.0 - m.discount) + 1.0;
        for s in BehaviorState::ALL {
            let w = whittle_index(&m, s, &WhittleConfig::default()).unwrap();
            prop_assert!(w.value.abs() <= bound);
        }
    }

    #[test]
    fn kmeans_inertia_never_increases(
        points in prop::collection::vec([0.0..1.0f64, 0.0..1.0f64], 5..60),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        let km = kmeans(&points, k.min(points.len()), seed).unwrap();
        prop_assert!(km.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        prop_assert!(km.assignment.iter().all(|&a| a < k));
    }

    #[test]
    fn top_k_takes_the_largest_indices(indices in prop::collection::vec(-5.0..5.0f64, 1..40), k in 1usize..50) {
        let entries: Vec<PlanEntry> = indices
            .iter()
            .enumerate()
            .map(|(i, &index)| PlanEntry {
                beneficiary_id: format!("b{i:03}").as_str().into(),
                cluster: 0,
                state: BehaviorState::NE,
                index,
            })
            .collect();
        let plan = plan_top_k(&entries, k);
        prop_assert_eq!(plan.selected.len(), k.min(entries.len()));
        let chosen: BTreeSet<&BeneficiaryId> = plan.selected.iter().collect();
        let min_in = entries.iter().filter(|e| chosen.contains(&e.beneficiary_id)).map(|e| e.index).fold(f64::INFINITY, f64::min);
        let max_out = entries.iter().filter(|e| !chosen.contains(&e.beneficiary_id)).map(|e| e.index).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min_in >= max_out);
        let all: BTreeSet<BeneficiaryId> = entries.iter().map(|e| e.beneficiary_id.clone()).collect();
        let overlap = overlap_metric(&plan.selected, &all).unwrap();
        prop_assert_eq!(overlap, 100.0);
    }

    #[test]
    fn metrics_are_consistent(rows in prop::collection::vec((0.0..1.0f64, any::<bool>()), 2..200)) {
        let preds: Vec<Prediction> = rows.iter().map(|&(p, _)| Prediction::from_probability(p)).collect();
        let labels: Vec<bool> = rows.iter().map(|&(_, y)| y).collect();
        let r = evaluate(&preds, &labels).unwrap();
        let c = r.confusion;
        prop_assert_eq!(c.tp + c.fp + c.tn + c.fn_, rows.len() as u64);
        prop_assert!((0.0..=1.0).contains(&r.accuracy));
        if labels.iter().any(|&y| y) && labels.iter().any(|&y| !y) {
            let scores: Vec<f64> = rows.iter().map(|&(p, _)| p).collect();
            let a = auc(&roc_curve(&scores, &labels));
            prop_assert!((0.0..=1.0).contains(&a));
            let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
            prop_assert!((a + auc(&roc_curve(&flipped, &labels)) - 1.0).abs() < 1e-9);
        }
    }
}
