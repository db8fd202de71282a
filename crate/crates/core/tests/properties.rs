mod common;

use common::*;
use proptest::prelude::*;
use qsm_core::boxes::{
    arrangement_cells, partition_of_point, realizable_partitions, realize_query, synthesize_query, AxisBox, BoxScenario,
};
use qsm_core::enumerate::{all_dps, optimum_over, EnumOptions};
use qsm_core::relations::{check_compliance, dpo_dispreferred_all, dpo_preferred_constructive, dpo_preferred_direct};
use qsm_core::sim::{run_session, OracleSpec, SessionMode, StopRule};
use qsm_core::space::{answer_probability, bayes_update};
use qsm_core::synthesis::SearchConfig;
use qsm_core::{Answer, Distribution, HypothesisId, HypothesisSet, MeasureKind, MeasureSpec, Partition};

const MAX_N: usize = 7;

fn dist_strategy(n: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| Distribution::from_unnormalized(&w).unwrap())
}

/// A partition of `0..n` from one ternary digit per hypothesis.
fn partition_strategy(n: usize) -> impl Strategy<Value = Partition> {
    prop::collection::vec(0u8..3, n).prop_map(|digits| {
        let mut blocks = [HypothesisSet::EMPTY; 3];
        for (i, d) in digits.into_iter().enumerate() {
            blocks[d as usize].insert(HypothesisId(i));
        }
        Partition::new(blocks[0], blocks[1], blocks[2]).unwrap()
    })
}

fn dq_strategy(n: usize) -> impl Strategy<Value = Partition> {
    partition_strategy(n).prop_filter("discriminating", Partition::is_discriminating)
}

fn sized() -> impl Strategy<Value = (Distribution, Partition, Partition)> {
    (2..=MAX_N).prop_flat_map(|n| (dist_strategy(n), partition_strategy(n), partition_strategy(n)))
}

proptest! {
    #[test]
    fn answer_probabilities_complement((dist, part, _) in sized()) {
        let yes = answer_probability(&part, &dist, Answer::Yes).unwrap();
        let no = answer_probability(&part, &dist, Answer::No).unwrap();
        prop_assert!((yes + no - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&yes));
    }

    #[test]
    fn posterior_is_normalized_and_eliminates((dist, part, _) in sized()) {
        for a in Answer::BOTH {
            match bayes_update(&dist, &part, a) {
                Ok(post) => {
                    prop_assert!((post.mass(post.support()) - 1.0).abs() < 1e-9);
                    prop_assert!(post.support().is_disjoint(part.eliminated(a)));
                    prop_assert_eq!(post.support(), dist.support() - part.eliminated(a));
                }
                Err(_) => prop_assert!(answer_probability(&part, &dist, a).unwrap() == 0.0),
            }
        }
    }

    #[test]
    fn dpo_checkers_agree((_, q, q2) in sized()) {
        prop_assume!(q.is_discriminating() && q2.is_discriminating());
        let direct = dpo_preferred_direct(&q, &q2).unwrap();
        let constructive = dpo_preferred_constructive(&q, &q2).unwrap();
        prop_assert_eq!(direct.preferred, constructive.preferred);
        if direct.preferred {
            prop_assert!(!dpo_preferred_direct(&q2, &q).unwrap().preferred);
        }
        prop_assert!(!dpo_preferred_direct(&q, &q).unwrap().preferred);
    }

    #[test]
    fn dispreferred_generator_matches_filter(q in (2..=5usize).prop_flat_map(dq_strategy)) {
        let all = dpo_dispreferred_all(&q).unwrap();
        for q2 in &all {
            prop_assert!(dpo_preferred_direct(&q, q2).unwrap().preferred);
        }
        let mut generated: Vec<Partition> = all.into_iter().filter(Partition::is_discriminating).collect();
        generated.sort();
        let mut filtered: Vec<Partition> = all_dps(q.universe(), EnumOptions::default())
            .unwrap()
            .filter(|q2| dpo_preferred_direct(&q, q2).unwrap().preferred)
            .collect();
        filtered.sort();
        prop_assert_eq!(generated, filtered);
    }

    #[test]
    fn mirror_preserves_measure_values((dist, part, _) in sized()) {
        prop_assume!(part.is_discriminating());
        for kind in [MeasureKind::Lc, MeasureKind::H, MeasureKind::Ent, MeasureKind::Spl, MeasureKind::Ve, MeasureKind::Kl,
                     MeasureKind::EmcB, MeasureKind::Bal, MeasureKind::Mps, MeasureKind::Bme] {
            let m = MeasureSpec::plain(kind);
            let a = m.evaluate(&part, &dist).unwrap();
            let b = m.evaluate(&part.mirror(), &dist).unwrap();
            prop_assert!((a - b).abs() < 1e-9, "{} changes under mirroring: {} vs {}", m, a, b);
        }
    }

    #[test]
    fn satisfying_measures_prefer_dpo_preferred((dist, q, _) in sized()) {
        prop_assume!(q.is_discriminating());
        let measures = [
            MeasureSpec::with_z(MeasureKind::SplZ, 1.5),
            MeasureSpec::with_z(MeasureKind::EmcAZ, 2.0),
            MeasureSpec::plain(MeasureKind::MpsPrime),
        ];
        for q2 in dpo_dispreferred_all(&q).unwrap().into_iter().filter(Partition::is_discriminating) {
            for m in &measures {
                prop_assert!(m.prefers(&q, &q2, &dist).unwrap(), "{} fails on {} vs {}", m, q, q2);
            }
        }
    }

    #[test]
    fn select_best_is_optimal((dist, _, _) in sized()) {
        let pool: Vec<Partition> = all_dps(dist.support(), EnumOptions::default()).unwrap().collect();
        for kind in [MeasureKind::Ent, MeasureKind::Spl, MeasureKind::Kl] {
            let m = MeasureSpec::plain(kind);
            let (i, v) = m.select_best(&pool, &dist).unwrap();
            let (best, bv) = optimum_over(&m, pool.iter().copied(), &dist).unwrap();
            prop_assert_eq!(pool[i], best);
            prop_assert_eq!(v, bv);
        }
    }

    #[test]
    fn sessions_keep_the_target(dist in (2..=6usize).prop_flat_map(dist_strategy), t in 0usize..6, seed in any::<u64>()) {
        let target = HypothesisId(t % dist.support().len());
        let pool: Vec<Partition> = all_dps(dist.support(), EnumOptions::default()).unwrap().collect();
        let oracle = OracleSpec { target, completion_seed: seed };
        let run = run_session(&dist, &MeasureSpec::plain(MeasureKind::Ent), &SessionMode::Pool(pool.clone()), oracle,
                              StopRule::SingletonSupport).unwrap();
        prop_assert!(run.final_dist.support().contains(target));
        prop_assert!(run.identified);
        prop_assert!(run.queries_asked <= pool.len());
        // Posterior of the target never drops after answers it predicts.
        let mut d = dist.clone();
        for step in &run.history {
            let before = d.p(target);
            d = bayes_update(&d, &step.partition, step.answer).unwrap();
            if !step.partition.zero().contains(target) {
                prop_assert!(d.p(target) >= before - 1e-12);
            }
        }
    }
}

fn box_strategy() -> impl Strategy<Value = AxisBox> {
    (0i32..8, 1i32..5, 0i32..8, 1i32..5)
        .prop_map(|(x, w, y, h)| AxisBox::new(x as f64, (x + w) as f64, y as f64, (y + h) as f64).unwrap())
}

fn box_scenario_strategy() -> impl Strategy<Value = BoxScenario> {
    (2..=5usize).prop_flat_map(|n| {
        (prop::collection::vec(box_strategy(), n), dist_strategy(n))
            .prop_map(|(boxes, dist)| BoxScenario::new(boxes, dist, vec![], vec![]).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn box_round_trip(s in box_scenario_strategy()) {
        for (_, part) in arrangement_cells(&s) {
            prop_assert!(part.zero().is_empty());
            if part.is_discriminating() {
                let p = realize_query(&part, &s).unwrap().unwrap();
                prop_assert_eq!(partition_of_point(p, &s), part);
            }
        }
    }

    #[test]
    fn realizable_set_matches_dense_sampling(s in box_scenario_strategy()) {
        let known = realizable_partitions(&s);
        // Quarter-unit sampling covers every cell of integer-edged boxes.
        for i in -4..=52 {
            for j in -4..=52 {
                let p = qsm_core::boxes::Point::new(i as f64 / 4.0, j as f64 / 4.0).unwrap();
                let part = partition_of_point(p, &s);
                if part.is_discriminating() {
                    prop_assert!(known.contains_key(&part), "{} missed", part);
                }
            }
        }
    }

    #[test]
    fn synthesized_queries_are_realizable_and_best(s in box_scenario_strategy()) {
        let realizable: Vec<Partition> = realizable_partitions(&s).into_keys().collect();
        let m = MeasureSpec::plain(MeasureKind::Ent);
        match synthesize_query(&SearchConfig::new(m).exhaustive(true), &s) {
            Ok(q) => {
                prop_assert_eq!(partition_of_point(q.point, &s), q.partition);
                let (_, best) = optimum_over(&m, realizable.iter().copied(), s.dist()).unwrap();
                prop_assert!((m.evaluate(&q.partition, s.dist()).unwrap() - best).abs() < 1e-9);
            }
            Err(_) => prop_assert!(realizable.is_empty()),
        }
    }
}

#[test]
fn second_best_realizable_goal() {
    let s = boxes("boxes_nested.json");
    let m = MeasureSpec::rio(2);
    let optimum = split(4, &[2, 4]);
    assert!(realize_query(&optimum, &s).unwrap().is_none());
    let q = synthesize_query(&SearchConfig::new(m), &s).unwrap();
    assert!(q.rejected.contains(&optimum));
    let realizable: Vec<Partition> = realizable_partitions(&s).into_keys().collect();
    let (best, best_value) = optimum_over(&m, realizable.iter().copied(), s.dist()).unwrap();
    assert_eq!(q.partition, best);
    assert_eq!(q.partition, split(4, &[1, 2]));
    assert!((m.evaluate(&q.partition, s.dist()).unwrap() - best_value).abs() < 1e-12);
}

#[test]
fn single_realizable_partition_wins_regardless_of_measure() {
    let boxes = vec![AxisBox::new(0., 2., 0., 2.).unwrap(), AxisBox::new(1., 3., 1., 3.).unwrap()];
    let dist = Distribution::new(vec![0.5, 0.5]).unwrap();
    // A nested pair: only <{outer}, {inner}> is realizable.
    let nested = vec![AxisBox::new(0., 4., 0., 4.).unwrap(), AxisBox::new(1., 2., 1., 2.).unwrap()];
    let s = BoxScenario::new(nested, dist.clone(), vec![], vec![]).unwrap();
    assert_eq!(realizable_partitions(&s).len(), 1);
    for kind in [MeasureKind::Ent, MeasureKind::Spl, MeasureKind::Kl, MeasureKind::Mps, MeasureKind::Bme] {
        let q = synthesize_query(&SearchConfig::new(MeasureSpec::plain(kind)), &s).unwrap();
        assert_eq!(q.partition, split(2, &[1]), "{kind:?}");
    }
    let overlapping = BoxScenario::new(boxes, dist, vec![], vec![]).unwrap();
    assert_eq!(realizable_partitions(&overlapping).len(), 2);
}

#[test]
fn synthesis_session_on_the_box_fixture() {
    let s = boxes("boxes_example.json");
    let oracle = OracleSpec { target: HypothesisId(3), completion_seed: 0 };
    let run = run_session(
        s.dist(),
        &MeasureSpec::rio(2),
        &SessionMode::synthesis(s.clone()),
        oracle,
        StopRule::SingletonSupport,
    )
    .unwrap();
    assert_eq!(run.history[0].partition, split(4, &[2, 4]));
    assert_eq!(run.history[0].answer, Answer::Yes);
    let point = run.history[0].point.unwrap();
    assert_eq!(partition_of_point(point, &s), split(4, &[2, 4]));
    let after_first = bayes_update(s.dist(), &run.history[0].partition, Answer::Yes).unwrap();
    assert_eq!(after_first.support(), set(&[2, 4]));
    assert!(run.identified);
    assert_eq!(run.final_dist.support(), set(&[4]));
}

#[test]
fn compliance_of_the_running_example() {
    let s = example(1);
    let parts = s.partitions();
    let spl = check_compliance(&MeasureSpec::plain(MeasureKind::Spl), &parts, &s.dist).unwrap();
    assert_eq!(spl.inverted, 0);
    let lc = check_compliance(&MeasureSpec::plain(MeasureKind::Lc), &parts, &s.dist).unwrap();
    assert!(lc.inverted > 0);
}

#[test]
fn ve_and_spl0_split_apart_beyond_four_hypotheses() {
    // <2,1,2> versus <3,2,0>: equal cardinality gaps, different vote entropy.
    let d = Distribution::uniform(5).unwrap();
    let a = Partition::new(set(&[1, 2]), set(&[3]), set(&[4, 5])).unwrap();
    let b = Partition::new(set(&[1, 2, 3]), set(&[4, 5]), HypothesisSet::EMPTY).unwrap();
    let spl0 = MeasureSpec::with_z(MeasureKind::SplZ, 0.0);
    let ve = MeasureSpec::plain(MeasureKind::Ve);
    assert!(!spl0.prefers(&a, &b, &d).unwrap() && !spl0.prefers(&b, &a, &d).unwrap());
    assert!(ve.prefers(&b, &a, &d).unwrap());
}
