mod common;

use common::random_case;
use divalign::dive::dive_run;
use divalign::mapsearch::{
    pre_assign_1, pre_assign_2, random_mapping, search_da_mapping, PartialMapping, SearchConfig,
    Slot,
};
use divalign::protograph::{
    builtin, identical_neighborhood_pairs, select_rate_at_most, singleton_bound, Rate,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn random_mappings_cover_exactly_the_transmitted_columns(
        seed in any::<u64>(), m in 2u8..=4, balanced in any::<bool>(),
    ) {
        let (bg, sel, _) = random_case(seed, 2);
        let map = random_mapping(&bg, &sel, m, seed ^ 1, balanced).unwrap();
        map.validate(&bg, &sel).unwrap();
        prop_assert_eq!(&map, &random_mapping(&bg, &sel, m, seed ^ 1, balanced).unwrap());
        if balanced {
            let pops = map.populations();
            prop_assert!(pops.iter().max().unwrap() - pops.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn twin_constraints_cover_every_twin_pair(seed in any::<u64>()) {
        let (bg, sel, _) = random_case(seed, 2);
        let pairs = identical_neighborhood_pairs(&bg, &sel);
        match pre_assign_1(&bg, &sel, &PartialMapping::empty(&bg, &sel)) {
            Ok(cons) => {
                let tx: Vec<_> = pairs
                    .into_iter()
                    .filter(|&(a, b)| !bg.is_punctured(a) && !bg.is_punctured(b))
                    .collect();
                prop_assert_eq!(cons.not_equal, tx);
            }
            // Three mutually twin columns cannot all differ with two blocks.
            Err(_) => prop_assert!(pairs.len() >= 3),
        }
    }

    #[test]
    fn parity_candidates_only_touch_parity_columns(seed in any::<u64>()) {
        let (bg, sel, _) = random_case(seed, 2);
        for pm in pre_assign_2(&bg, &sel) {
            for c in 0..sel.info_cols {
                let s = pm.slot(c);
                prop_assert!(s == Slot::Unassigned || s == Slot::Punctured);
            }
        }
    }
}

#[test]
fn bg2_search_result_is_certified_and_reproducible() {
    let bg = builtin::bg2();
    let cfg = SearchConfig::default();
    let res = search_da_mapping(&bg, &cfg)
        .unwrap()
        .expect("BG2 search succeeds");
    res.mapping.validate(&bg, &res.selection).unwrap();
    assert!(res.mapping.is_balanced());
    assert!(res.selection.rate() <= Rate::new(1, 2));
    assert_eq!(singleton_bound(2, res.rate), 2);
    let rep = dive_run(&bg, &res.selection, &res.mapping, cfg.iters).unwrap();
    assert!(rep.all_info_full());
    assert_eq!(rep.first_all_info_full(), Some(res.iterations_to_full));
    let again = search_da_mapping(&bg, &cfg).unwrap().unwrap();
    assert_eq!(again.mapping, res.mapping);
    assert_eq!(again.trials_used, res.trials_used);
}

#[test]
fn bg2_search_pinned_to_rate_half_fails() {
    let bg = builtin::bg2();
    let sel = select_rate_at_most(&bg, Rate::new(1, 2)).unwrap();
    let cfg = SearchConfig {
        start_parity_cols: Some(sel.active_rows),
        max_parity_cols: Some(sel.active_rows),
        ..SearchConfig::default()
    };
    let fail = search_da_mapping(&bg, &cfg)
        .unwrap()
        .expect_err("rate 1/2 is out of reach");
    assert_eq!(fail.attempts.len(), 1);
    assert_eq!(fail.attempts[0].rate_label, "10/20");
    assert!(fail.attempts[0].best_info_full < 10);
}
