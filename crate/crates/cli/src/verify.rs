//! Regression checks bundled with the `verify` subcommand, plus the random
//! protograph cases and the root-LDPC toy they run on.

use std::collections::BTreeMap;
use std::fs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use divalign::dive::{
    dive_run, fading_msd_trace, DiveReport, Evolution, ProtoTanner, DEFAULT_ITERS,
};
use divalign::fading::{FadingFunction, FadingRealization};
use divalign::mapping::{published, BlockMapping, MappingFile};
use divalign::mapsearch::random_mapping;
use divalign::protograph::{
    builtin, declared_lifting_size, select_rate, singleton_bound, BaseGraph, EdgeSpec,
    RateSelection,
};

use crate::Options;

/// The BG2 reference mapping is full on every information VN by this iteration.
pub const BG2_REFERENCE_ITERATION: usize = 7;
pub const ORACLE_CASES: usize = 50;
/// DivE iterations run on each random case.
pub const ORACLE_ITERS: usize = 12;

/// Per-realization reference: VN outputs for iterations `0..=iters`.
pub type Oracle = dyn Fn(
        &BaseGraph,
        &RateSelection,
        &BlockMapping,
        &FadingRealization,
        usize,
    ) -> divalign::Result<Vec<Vec<bool>>>
    + Sync;

pub fn reference_oracle(
    bg: &BaseGraph,
    sel: &RateSelection,
    mapping: &BlockMapping,
    a: &FadingRealization,
    iters: usize,
) -> divalign::Result<Vec<Vec<bool>>> {
    fading_msd_trace(bg, sel, mapping, a, iters)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn from(name: &'static str, res: Result<String, String>) -> Check {
        let (passed, detail) = match res {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        Check {
            name,
            passed,
            detail,
        }
    }
}

/// A random protograph with a random mapping.
#[derive(Debug, Clone)]
pub struct Case {
    pub bg: BaseGraph,
    pub sel: RateSelection,
    pub mapping: BlockMapping,
}

/// Random protographs with at most `max_cols` columns, CN degree ≥ 2,
/// occasional parallel edges and punctured columns, and `M ∈ {2, 3}`.
pub fn random_case(rng: &mut ChaCha8Rng, max_cols: usize) -> Case {
    assert!(max_cols >= 3);
    let z = 4;
    loop {
        let cols = rng.random_range(3..=max_cols);
        let info = rng.random_range(1..cols);
        let rows = cols - info;
        let mut entries: BTreeMap<(usize, usize), EdgeSpec> = BTreeMap::new();
        for j in 0..rows {
            let deg = rng.random_range(2..=cols.min(5));
            while entries.range((j, 0)..(j + 1, 0)).count() < deg {
                let i = rng.random_range(0..cols);
                entries
                    .entry((j, i))
                    .or_insert_with(|| EdgeSpec::single(rng.random_range(0..z)));
            }
        }
        for i in 0..cols {
            if !entries.keys().any(|&(_, c)| c == i) {
                entries.insert((rng.random_range(0..rows), i), EdgeSpec::single(0));
            }
        }
        for spec in entries.values_mut() {
            if rng.random_bool(0.1) {
                let s = spec.shifts[0];
                spec.shifts.push((s + rng.random_range(1..z)) % z);
            }
        }
        let punctured: Vec<usize> = if rng.random_bool(0.3) {
            vec![rng.random_range(0..cols)]
        } else {
            Vec::new()
        };
        let Ok(bg) = BaseGraph::new(rows, cols, info, entries, punctured, z) else {
            continue;
        };
        let Ok(sel) = select_rate(&bg, rows) else {
            continue;
        };
        let m = rng.random_range(2..=3u8);
        let seed = rng.random();
        let Ok(mapping) = random_mapping(&bg, &sel, m, seed, false) else {
            continue;
        };
        return Case { bg, sel, mapping };
    }
}

pub fn random_cases(count: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_case(&mut rng, 12)).collect()
}

/// Rate-1/2 root-LDPC toy: info `u0, u1`, parity `p0, p1`, with
/// `c0 = {u0, u1, p1}` and `c1 = {u0, u1, p0}`; blocks `u0, p0 → 0` and
/// `u1, p1 → 1`. Each check is a rootcheck for one information VN.
pub fn root_ldpc_toy() -> (BaseGraph, RateSelection, BlockMapping) {
    let mut entries = BTreeMap::new();
    for (j, i) in [(0, 0), (0, 1), (0, 3), (1, 0), (1, 1), (1, 2)] {
        entries.insert((j, i), EdgeSpec::single(0));
    }
    let bg = BaseGraph::new(2, 4, 2, entries, [], 1).expect("toy graph is valid");
    let sel = select_rate(&bg, 2).expect("toy selection is valid");
    let map = BlockMapping::new(2, vec![Some(0), Some(1), Some(0), Some(1)]).expect("toy mapping");
    (bg, sel, map)
}

/// Compares every DivE output table of `case` against the oracle over all
/// `2^M` realizations and all iterations. Returns the first mismatch.
pub fn compare_with_oracle(
    case: &Case,
    iters: usize,
    oracle: &Oracle,
) -> Result<DiveReport, String> {
    let rep = dive_run(&case.bg, &case.sel, &case.mapping, iters).map_err(|e| e.to_string())?;
    let m = case.mapping.num_blocks();
    for a in 0..1usize << m {
        let real = FadingRealization::from_index(m, a);
        let trace =
            oracle(&case.bg, &case.sel, &case.mapping, &real, iters).map_err(|e| e.to_string())?;
        if trace.len() != iters + 1 {
            return Err(format!(
                "oracle returned {} iterations, expected {}",
                trace.len(),
                iters + 1
            ));
        }
        for (l, outs) in trace.iter().enumerate() {
            for (col, &want) in outs.iter().enumerate() {
                let got = rep.per_iteration[l][col].eval(a);
                if got != want {
                    return Err(format!(
                        "VN {col} at iteration {l}, realization {a:0w$b}: DivE {got}, oracle {want}",
                        w = m as usize
                    ));
                }
            }
        }
    }
    Ok(rep)
}

/// Every message and output emitted while evolving `case` is monotone and
/// vanishes on the all-bad realization.
pub fn check_monotone(case: &Case, iters: usize) -> Result<usize, String> {
    let graph = ProtoTanner::new(&case.bg, &case.sel);
    let mut evo = Evolution::from_mapping(&graph, &case.mapping);
    let m = case.mapping.num_blocks();
    let mut checked = 0;
    let ok = |f: &FadingFunction| f.is_monotone() && !f.eval(0);
    for l in 0..=iters {
        if l > 0 {
            evo.step();
        }
        for e in 0..graph.num_edges() {
            let f = FadingFunction::from_words(m, evo.message_words(e).to_vec())
                .map_err(|e| e.to_string())?;
            if !ok(&f) {
                return Err(format!("message on edge {e} at iteration {l}: {f:?}"));
            }
            checked += 1;
        }
        for c in 0..graph.cols() {
            let f = evo.output(c);
            if !ok(&f) {
                return Err(format!("output of VN {c} at iteration {l}: {f:?}"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

fn check_data(opts: &Options) -> Result<String, String> {
    let mut seen = Vec::new();
    for (name, text, z) in [
        ("bg1", builtin::BG1_Z240, 240),
        ("bg2", builtin::BG2_Z20, 20),
    ] {
        if !text.starts_with("# sha256 ") {
            return Err(format!("shipped {name} data carries no checksum"));
        }
        BaseGraph::parse(text, z).map_err(|e| format!("shipped {name} data: {e}"))?;
        seen.push(name.to_string());
    }
    for (name, text) in [
        ("BG1 reference mapping", published::BG1_R22_46),
        ("BG2 reference mapping", published::BG2_R10_24),
    ] {
        MappingFile::parse(text).map_err(|e| format!("{name} fixture: {e}"))?;
    }
    if let Some(path) = opts.bg.as_deref().filter(|b| !matches!(*b, "bg1" | "bg2")) {
        let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
        if !text.starts_with("# sha256 ") {
            return Err(format!("{path}: no checksum line"));
        }
        let z = opts
            .z
            .or_else(|| declared_lifting_size(&text))
            .ok_or_else(|| format!("{path}: no lifting size"))?;
        BaseGraph::parse(&text, z).map_err(|e| format!("{path}: {e}"))?;
        seen.push(path.to_string());
    }
    Ok(format!("checksums match for {}", seen.join(", ")))
}

fn published_report(
    bg: &BaseGraph,
    parity_cols: usize,
    text: &str,
) -> Result<(RateSelection, DiveReport), String> {
    let sel = select_rate(bg, parity_cols).map_err(|e| e.to_string())?;
    let map = MappingFile::parse(text).map_err(|e| e.to_string())?.mapping;
    let rep = dive_run(bg, &sel, &map, DEFAULT_ITERS).map_err(|e| e.to_string())?;
    Ok((sel, rep))
}

fn check_bg1_reference() -> Result<String, String> {
    let (sel, rep) = published_report(&builtin::bg1(), 26, published::BG1_R22_46)?;
    match rep.first_all_info_full() {
        Some(l) => Ok(format!(
            "{}: all {} information VNs full from iteration {l}",
            sel.rate_label(),
            rep.info_count()
        )),
        None => Err(format!(
            "{}: deficient information VNs {:?}",
            sel.rate_label(),
            rep.deficient_info()
        )),
    }
}

fn check_bg2_reference() -> Result<String, String> {
    let (sel, rep) = published_report(&builtin::bg2(), 16, published::BG2_R10_24)?;
    match rep.first_all_info_full() {
        Some(l) if l <= BG2_REFERENCE_ITERATION => Ok(format!(
            "{}: all {} information VNs full from iteration {l}",
            sel.rate_label(),
            rep.info_count()
        )),
        Some(l) => Err(format!(
            "{}: full only from iteration {l}",
            sel.rate_label()
        )),
        None => Err(format!(
            "{}: deficient information VNs {:?}",
            sel.rate_label(),
            rep.deficient_info()
        )),
    }
}

fn check_singleton() -> Result<String, String> {
    let sels = [
        select_rate(&builtin::bg1(), 26).map_err(|e| e.to_string())?,
        select_rate(&builtin::bg2(), 16).map_err(|e| e.to_string())?,
        root_ldpc_toy().1,
    ];
    for sel in sels {
        let bound = singleton_bound(2, sel.rate());
        if bound != 2 {
            return Err(format!(
                "{}: Singleton bound {bound}, full diversity impossible",
                sel.rate_label()
            ));
        }
    }
    Ok("bound 2 at 22/46, 10/24 and 2/4".into())
}

fn check_oracle(seed: u64, oracle: &Oracle) -> Result<String, String> {
    for (n, case) in random_cases(ORACLE_CASES, seed).iter().enumerate() {
        compare_with_oracle(case, ORACLE_ITERS, oracle).map_err(|e| format!("case {n}: {e}"))?;
    }
    Ok(format!(
        "{ORACLE_CASES} random protographs agree bit for bit"
    ))
}

fn check_monotone_suite(seed: u64) -> Result<String, String> {
    let mut total = 0;
    for (n, case) in random_cases(ORACLE_CASES, seed).iter().enumerate() {
        total += check_monotone(case, ORACLE_ITERS).map_err(|e| format!("case {n}: {e}"))?;
    }
    Ok(format!("{total} functions monotone with f(0) = 0"))
}

fn check_root_toy() -> Result<String, String> {
    let (bg, sel, map) = root_ldpc_toy();
    let rep = dive_run(&bg, &sel, &map, 3).map_err(|e| e.to_string())?;
    match rep.first_all_info_full() {
        Some(1) => Ok("both information VNs full at iteration 1".into()),
        other => Err(format!(
            "expected full diversity at iteration 1, got {other:?}"
        )),
    }
}

/// Runs every check; `oracle` is the per-realization reference.
pub fn run_checks(opts: &Options, oracle: &Oracle) -> Vec<Check> {
    let seed = opts.seed.unwrap_or(0);
    vec![
        Check::from("data-checksum", check_data(opts)),
        Check::from("bg1-reference", check_bg1_reference()),
        Check::from("bg2-reference", check_bg2_reference()),
        Check::from("singleton-rate", check_singleton()),
        Check::from("oracle-equivalence", check_oracle(seed, oracle)),
        Check::from("monotone-functions", check_monotone_suite(seed)),
        Check::from("root-ldpc-toy", check_root_toy()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_cases_respect_the_shape_limits() {
        let cases = random_cases(ORACLE_CASES, 0);
        assert!(cases.iter().any(|c| !c.bg.punctured().is_empty()));
        assert!(cases.iter().any(|c| !c.bg.is_simple()));
        assert!(cases.iter().any(|c| c.mapping.num_blocks() == 3));
        for case in cases {
            assert!(case.bg.cols() <= 12);
            assert!((2..=3).contains(&case.mapping.num_blocks()));
            let graph = ProtoTanner::new(&case.bg, &case.sel);
            for j in 0..graph.rows() {
                assert!(graph.cn_edges(j).len() >= 2);
            }
        }
    }

    #[test]
    fn random_cases_are_reproducible() {
        let a = random_cases(5, 11);
        let b = random_cases(5, 11);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.bg, y.bg);
            assert_eq!(x.mapping, y.mapping);
        }
    }
}
