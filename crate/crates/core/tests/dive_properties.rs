mod common;

use common::random_case;
use divalign::dive::{dive_run, fading_msd_trace, Evolution, ProtoTanner};
use divalign::fading::{FadingFunction, FadingRealization};
use divalign::mapping::{published, MappingFile};
use divalign::protograph::{builtin, select_rate};
use proptest::prelude::*;

const ITERS: usize = 10;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn tables_match_per_realization_decoding(seed in any::<u64>(), m in 2u8..=4) {
        let (bg, sel, map) = random_case(seed, m);
        let rep = dive_run(&bg, &sel, &map, ITERS).unwrap();
        for a in 0..1usize << m {
            let trace = fading_msd_trace(&bg, &sel, &map, &FadingRealization::from_index(m, a), ITERS).unwrap();
            for (l, outs) in trace.iter().enumerate() {
                for (c, &want) in outs.iter().enumerate() {
                    prop_assert_eq!(rep.per_iteration[l][c].eval(a), want, "vn {} iter {} a {}", c, l, a);
                }
            }
        }
    }

    #[test]
    fn every_message_is_monotone_and_vanishes_when_all_fade(seed in any::<u64>(), m in 2u8..=3) {
        let (bg, sel, map) = random_case(seed, m);
        let graph = ProtoTanner::new(&bg, &sel);
        let mut evo = Evolution::from_mapping(&graph, &map);
        for _ in 0..=ITERS {
            for e in 0..graph.num_edges() {
                let f = FadingFunction::from_words(m, evo.message_words(e).to_vec()).unwrap();
                prop_assert!(f.is_monotone());
                prop_assert!(!f.eval(0));
            }
            for c in 0..graph.cols() {
                prop_assert!(evo.output(c).is_monotone());
                prop_assert!(!evo.output(c).eval(0));
            }
            evo.step();
        }
    }

    #[test]
    fn relabelling_blocks_permutes_every_table(seed in any::<u64>(), perm in Just(vec![0u8, 1, 2]).prop_shuffle()) {
        let (bg, sel, map) = random_case(seed, 3);
        let base = dive_run(&bg, &sel, &map, ITERS).unwrap();
        let moved = dive_run(&bg, &sel, &map.permute_blocks(&perm), ITERS).unwrap();
        prop_assert_eq!(&base.diversity_orders, &moved.diversity_orders);
        prop_assert_eq!(&base.full_div_count_info, &moved.full_div_count_info);
        for (x, y) in base.per_iteration.iter().zip(&moved.per_iteration) {
            for (f, g) in x.iter().zip(y) {
                prop_assert_eq!(&f.permute_blocks(&perm), g);
            }
        }
    }

    #[test]
    fn rootchecks_take_effect_one_iteration_later(seed in any::<u64>(), m in 2u8..=3) {
        let (bg, sel, map) = random_case(seed, m);
        let rep = dive_run(&bg, &sel, &map, ITERS).unwrap();
        for ev in &rep.rootcheck_events {
            if ev.iteration >= ITERS {
                continue;
            }
            let out = &rep.per_iteration[ev.iteration + 1][ev.rootcheck.target];
            prop_assert!(out.dominates(&FadingFunction::atom(m, ev.rootcheck.block)));
            if let Some(own) = map.block(ev.rootcheck.target) {
                prop_assert_ne!(own, ev.rootcheck.block);
                if m == 2 {
                    prop_assert!(out.is_full_diversity());
                }
            }
        }
    }

    #[test]
    fn outputs_only_grow_and_settle(seed in any::<u64>(), m in 2u8..=3) {
        let (bg, sel, map) = random_case(seed, m);
        let rep = dive_run(&bg, &sel, &map, ITERS).unwrap();
        for w in rep.per_iteration.windows(2) {
            for (f, g) in w[0].iter().zip(&w[1]) {
                prop_assert!(g.dominates(f));
            }
        }
        prop_assert!(rep.full_div_count_info.windows(2).all(|w| w[0] <= w[1]));
        if let Some(fp) = rep.fixpoint {
            for l in fp..=ITERS {
                prop_assert_eq!(&rep.per_iteration[l], &rep.per_iteration[fp]);
            }
        }
    }
}

#[test]
fn bg2_reference_mapping_is_full_by_iteration_seven() {
    let bg = builtin::bg2();
    let sel = select_rate(&bg, 16).unwrap();
    let map = MappingFile::parse(published::BG2_R10_24).unwrap().mapping;
    let rep = dive_run(&bg, &sel, &map, 20).unwrap();
    assert_eq!(rep.first_all_info_full(), Some(7));
    assert!(rep.deficient_info().is_empty());
}

#[test]
fn bg1_reference_mapping_reaches_full_diversity() {
    let bg = builtin::bg1();
    let sel = select_rate(&bg, 26).unwrap();
    let map = MappingFile::parse(published::BG1_R22_46).unwrap().mapping;
    let rep = dive_run(&bg, &sel, &map, 20).unwrap();
    assert!(rep.all_info_full());
    assert_eq!(rep.info_count(), 22);
}

#[test]
fn moving_one_vn_breaks_the_bg2_mapping() {
    let bg = builtin::bg2();
    let sel = select_rate(&bg, 16).unwrap();
    let map = MappingFile::parse(published::BG2_R10_24).unwrap().mapping;
    let broken = (2..sel.active_cols).find_map(|c| {
        let mut a = map.assignments().to_vec();
        a[c] = a[c].map(|b| 1 - b);
        let m = divalign::mapping::BlockMapping::new(2, a).unwrap();
        let rep = dive_run(&bg, &sel, &m, 20).unwrap();
        (!rep.all_info_full()).then_some(rep)
    });
    assert!(!broken
        .expect("some single move loses diversity")
        .deficient_info()
        .is_empty());
}
