#![allow(dead_code)]

use std::collections::BTreeMap;

use divalign::mapping::BlockMapping;
use divalign::mapsearch::random_mapping;
use divalign::protograph::{select_rate, BaseGraph, EdgeSpec, RateSelection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small random protograph (≤ 10 columns, CN degree ≥ 2, occasional
/// parallel edges and a punctured column) with a random `num_blocks` mapping.
pub fn random_case(seed: u64, num_blocks: u8) -> (BaseGraph, RateSelection, BlockMapping) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let cols = rng.random_range(3..=10usize);
        let info = rng.random_range(1..cols);
        let rows = cols - info;
        let mut entries: BTreeMap<(usize, usize), EdgeSpec> = BTreeMap::new();
        for j in 0..rows {
            let deg = rng.random_range(2..=cols.min(4));
            while entries.range((j, 0)..(j + 1, 0)).count() < deg {
                let i = rng.random_range(0..cols);
                entries.insert((j, i), EdgeSpec::single(0));
            }
        }
        for i in 0..cols {
            if !entries.keys().any(|&(_, c)| c == i) {
                entries.insert((rng.random_range(0..rows), i), EdgeSpec::single(0));
            }
        }
        for spec in entries.values_mut() {
            if rng.random_bool(0.15) {
                spec.shifts.push(1);
            }
        }
        let punctured = rng.random_bool(0.3).then(|| rng.random_range(0..cols));
        let Ok(bg) = BaseGraph::new(rows, cols, info, entries, punctured, 4) else {
            continue;
        };
        let Ok(sel) = select_rate(&bg, rows) else {
            continue;
        };
        if let Ok(map) = random_mapping(&bg, &sel, num_blocks, rng.random(), false) {
            return (bg, sel, map);
        }
    }
}
