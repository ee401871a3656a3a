//! Diversity evolution over a protograph.
//!
//! Messages are Boolean fading functions stored as truth tables over all
//! `2^M` realizations. A check node emits the AND of its extrinsic inputs and
//! a variable node emits its channel atom ORed with its extrinsic inputs,
//! following the flooding schedule of min-sum decoding. Because every update
//! is a whole-table bitwise operation, running the evolution once on tables
//! gives the same result as running [`fading_msd`] separately for each
//! realization and stacking the outputs.
//!
//! Iteration `0` is the channel-only state: every transmitted VN holds the
//! atom of its block and every punctured VN holds the constant 0. Iteration
//! `ℓ ≥ 1` applies one CN update followed by one VN update.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fading::{atom_word, last_word_mask, table_words, FadingFunction, FadingRealization};
use crate::mapping::BlockMapping;
use crate::protograph::{BaseGraph, RateSelection};

/// Hard cap on the number of fading blocks (tables of `2^16` bits).
pub const MAX_BLOCKS: usize = 16;

/// Default analysis depth; the 5G graphs reach their fixpoint well before it.
pub const DEFAULT_ITERS: usize = 20;

/// Tanner graph of the active part of a protograph, one entry per edge
/// instance (parallel edges are distinct).
#[derive(Debug, Clone)]
pub struct ProtoTanner {
    cols: usize,
    rows: usize,
    info_cols: usize,
    punctured: Vec<bool>,
    edge_row: Vec<usize>,
    edge_col: Vec<usize>,
    cn_edges: Vec<Vec<usize>>,
    vn_edges: Vec<Vec<usize>>,
}

impl ProtoTanner {
    pub fn new(bg: &BaseGraph, sel: &RateSelection) -> Self {
        let edges = bg.active_edges(sel);
        let mut cn_edges = vec![Vec::new(); sel.active_rows];
        let mut vn_edges = vec![Vec::new(); sel.active_cols];
        for (e, edge) in edges.iter().enumerate() {
            cn_edges[edge.row].push(e);
            vn_edges[edge.col].push(e);
        }
        ProtoTanner {
            cols: sel.active_cols,
            rows: sel.active_rows,
            info_cols: sel.info_cols,
            punctured: (0..sel.active_cols).map(|c| bg.is_punctured(c)).collect(),
            edge_row: edges.iter().map(|e| e.row).collect(),
            edge_col: edges.iter().map(|e| e.col).collect(),
            cn_edges,
            vn_edges,
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn info_cols(&self) -> usize {
        self.info_cols
    }

    pub fn num_edges(&self) -> usize {
        self.edge_col.len()
    }

    pub fn is_punctured(&self, col: usize) -> bool {
        self.punctured[col]
    }

    pub fn edge_row(&self, e: usize) -> usize {
        self.edge_row[e]
    }

    pub fn edge_col(&self, e: usize) -> usize {
        self.edge_col[e]
    }

    /// Edge instances incident to check node `row`.
    pub fn cn_edges(&self, row: usize) -> &[usize] {
        &self.cn_edges[row]
    }

    /// Edge instances incident to variable node `col`.
    pub fn vn_edges(&self, col: usize) -> &[usize] {
        &self.vn_edges[col]
    }

    /// Distinct columns adjacent to check node `row`.
    pub fn cn_cols(&self, row: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.cn_edges[row]
            .iter()
            .map(|&e| self.edge_col[e])
            .collect();
        set.into_iter().collect()
    }

    /// Distinct rows adjacent to variable node `col`.
    pub fn vn_rows(&self, col: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.vn_edges[col]
            .iter()
            .map(|&e| self.edge_row[e])
            .collect();
        set.into_iter().collect()
    }
}

/// Whole-table message passing state.
///
/// Channel tables are supplied per column, so partial mappings (columns with
/// no block yet) are expressed by a zero table.
#[derive(Debug, Clone)]
pub struct Evolution<'g> {
    graph: &'g ProtoTanner,
    num_blocks: u8,
    words: usize,
    ones_last: u64,
    channel: Vec<u64>,
    alpha: Vec<u64>,
    next: Vec<u64>,
    beta: Vec<u64>,
    output: Vec<u64>,
    iteration: usize,
}

impl<'g> Evolution<'g> {
    /// Starts from per-column channel tables (`words` entries per column).
    pub fn new(graph: &'g ProtoTanner, num_blocks: u8, channel: Vec<u64>) -> Self {
        let words = table_words(num_blocks);
        assert_eq!(channel.len(), graph.cols * words);
        let mut alpha = vec![0u64; graph.num_edges() * words];
        for e in 0..graph.num_edges() {
            let c = graph.edge_col[e];
            alpha[e * words..(e + 1) * words].copy_from_slice(&channel[c * words..(c + 1) * words]);
        }
        Evolution {
            graph,
            num_blocks,
            words,
            ones_last: last_word_mask(num_blocks),
            output: channel.clone(),
            channel,
            next: vec![0; alpha.len()],
            beta: vec![0; alpha.len()],
            alpha,
            iteration: 0,
        }
    }

    /// Channel tables for a (possibly partial) assignment; `None` is the zero
    /// table, used both for punctured and for not-yet-assigned columns.
    pub fn channel_tables(num_blocks: u8, blocks: impl Iterator<Item = Option<u8>>) -> Vec<u64> {
        let words = table_words(num_blocks);
        let mut out = Vec::new();
        for b in blocks {
            match b {
                Some(b) => out.extend((0..words).map(|w| atom_word(num_blocks, b, w))),
                None => out.extend(std::iter::repeat_n(0, words)),
            }
        }
        out
    }

    pub fn from_mapping(graph: &'g ProtoTanner, mapping: &BlockMapping) -> Self {
        let ch = Self::channel_tables(mapping.num_blocks(), mapping.assignments().iter().copied());
        Self::new(graph, mapping.num_blocks(), ch)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn num_blocks(&self) -> u8 {
        self.num_blocks
    }

    #[inline]
    fn ones(&self, w: usize) -> u64 {
        if w + 1 == self.words {
            self.ones_last
        } else {
            u64::MAX
        }
    }

    /// One flooding iteration. Returns `false` when no VN-to-CN message
    /// changed, i.e. the evolution has reached its fixpoint.
    pub fn step(&mut self) -> bool {
        let words = self.words;
        let g = self.graph;
        // CN update: extrinsic AND via a forward prefix and a backward suffix.
        for edges in &g.cn_edges {
            for w in 0..words {
                let mut acc = self.ones(w);
                for &e in edges {
                    self.beta[e * words + w] = acc;
                    acc &= self.alpha[e * words + w];
                }
                let mut acc = self.ones(w);
                for &e in edges.iter().rev() {
                    self.beta[e * words + w] &= acc;
                    acc &= self.alpha[e * words + w];
                }
            }
        }
        // VN update: channel OR extrinsic CN messages.
        for (col, edges) in g.vn_edges.iter().enumerate() {
            for w in 0..words {
                let mut acc = self.channel[col * words + w];
                for &e in edges {
                    self.next[e * words + w] = acc;
                    acc |= self.beta[e * words + w];
                }
                self.output[col * words + w] = acc;
                let mut acc = 0;
                for &e in edges.iter().rev() {
                    self.next[e * words + w] |= acc;
                    acc |= self.beta[e * words + w];
                }
            }
        }
        std::mem::swap(&mut self.alpha, &mut self.next);
        self.iteration += 1;
        self.alpha != self.next
    }

    /// Output table words of column `col` at the current iteration.
    pub fn output_words(&self, col: usize) -> &[u64] {
        &self.output[col * self.words..(col + 1) * self.words]
    }

    pub fn output(&self, col: usize) -> FadingFunction {
        FadingFunction::from_words(self.num_blocks, self.output_words(col).to_vec())
            .expect("engine tables are well formed")
    }

    /// Current VN-to-CN message on edge `e`.
    pub fn message_words(&self, e: usize) -> &[u64] {
        &self.alpha[e * self.words..(e + 1) * self.words]
    }

    /// True when column `col` currently has full diversity.
    pub fn is_full(&self, col: usize) -> bool {
        let out = self.output_words(col);
        (0..self.words).all(|w| {
            let want = if w == 0 {
                self.ones(0) & !1
            } else {
                self.ones(w)
            };
            out[w] & want == want
        })
    }

    /// Snapshot of all VN-to-CN messages.
    pub fn message_state(&self) -> MessageState {
        MessageState {
            iteration: self.iteration,
            messages: (0..self.graph.num_edges())
                .map(|e| {
                    FadingFunction::from_words(self.num_blocks, self.message_words(e).to_vec())
                        .expect("engine tables are well formed")
                })
                .collect(),
        }
    }

    /// Generalized rootchecks formed by the current messages.
    pub fn rootchecks(&self, mapping_blocks: &[Option<u8>]) -> Vec<Rootcheck> {
        let kinds: Vec<MsgKind> = (0..self.graph.num_edges())
            .map(|e| classify(self.num_blocks, self.message_words(e)))
            .collect();
        rootchecks_from_kinds(self.graph, self.num_blocks, &kinds, mapping_blocks)
    }

    /// Rootchecks at check node `row` only.
    pub fn rootchecks_at(&self, row: usize, mapping_blocks: &[Option<u8>]) -> Vec<Rootcheck> {
        let mut out = Vec::new();
        let kinds: Vec<(usize, MsgKind)> = self.graph.cn_edges[row]
            .iter()
            .map(|&e| (e, classify(self.num_blocks, self.message_words(e))))
            .collect();
        cn_rootchecks(
            self.graph,
            self.num_blocks,
            row,
            &kinds,
            mapping_blocks,
            &mut out,
        );
        out
    }
}

/// VN-to-CN messages of one iteration, indexed like [`ProtoTanner`] edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageState {
    pub iteration: usize,
    pub messages: Vec<FadingFunction>,
}

/// CN `row` is a generalized rootcheck for the VN in column `target`: every
/// other incoming message is `A_block` or the full-diversity function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rootcheck {
    pub row: usize,
    pub target: usize,
    pub block: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MsgKind {
    Full,
    Atom(u8),
    Other,
}

fn classify(num_blocks: u8, words: &[u64]) -> MsgKind {
    let n = words.len();
    let full = |w: usize| {
        let ones = if w + 1 == n {
            last_word_mask(num_blocks)
        } else {
            u64::MAX
        };
        if w == 0 {
            ones & !1
        } else {
            ones
        }
    };
    if (0..n).all(|w| words[w] == full(w)) {
        return MsgKind::Full;
    }
    for m in 0..num_blocks {
        if (0..n).all(|w| words[w] == atom_word(num_blocks, m, w)) {
            return MsgKind::Atom(m);
        }
    }
    MsgKind::Other
}

fn cn_rootchecks(
    graph: &ProtoTanner,
    num_blocks: u8,
    row: usize,
    kinds: &[(usize, MsgKind)],
    blocks: &[Option<u8>],
    out: &mut Vec<Rootcheck>,
) {
    let others = kinds.iter().filter(|(_, k)| *k == MsgKind::Other).count();
    let mut atom_counts = vec![0usize; num_blocks as usize];
    for (_, k) in kinds {
        if let MsgKind::Atom(m) = k {
            atom_counts[*m as usize] += 1;
        }
    }
    let start = out.len();
    for &(e, kind) in kinds {
        // Exclude only this edge instance.
        let others_ex = others - (kind == MsgKind::Other) as usize;
        if others_ex > 0 {
            continue;
        }
        let mut counts = atom_counts.clone();
        if let MsgKind::Atom(m) = kind {
            counts[m as usize] -= 1;
        }
        let present: Vec<u8> = (0..num_blocks)
            .filter(|&m| counts[m as usize] > 0)
            .collect();
        let target = graph.edge_col[e];
        let own = blocks[target];
        let candidates: Vec<u8> = match present.as_slice() {
            [] => (0..num_blocks).collect(),
            [m] => vec![*m],
            _ => continue,
        };
        for m in candidates {
            if Some(m) != own {
                out.push(Rootcheck {
                    row,
                    target,
                    block: m,
                });
            }
        }
    }
    // Parallel edges to the same target yield identical triples.
    let tail = &mut out[start..];
    tail.sort_unstable();
    let mut seen = BTreeSet::new();
    let kept: Vec<Rootcheck> = tail.iter().copied().filter(|r| seen.insert(*r)).collect();
    out.truncate(start);
    out.extend(kept);
}

fn rootchecks_from_kinds(
    graph: &ProtoTanner,
    num_blocks: u8,
    kinds: &[MsgKind],
    blocks: &[Option<u8>],
) -> Vec<Rootcheck> {
    let mut out = Vec::new();
    for row in 0..graph.rows {
        let k: Vec<(usize, MsgKind)> = graph.cn_edges[row].iter().map(|&e| (e, kinds[e])).collect();
        cn_rootchecks(graph, num_blocks, row, &k, blocks, &mut out);
    }
    out
}

/// All generalized rootchecks formed by the VN-to-CN messages in `state`.
///
/// A punctured target has no block of its own, so every qualifying block is
/// reported for it.
pub fn detect_generalized_rootchecks(
    graph: &ProtoTanner,
    state: &MessageState,
    mapping: &BlockMapping,
) -> Vec<Rootcheck> {
    assert_eq!(state.messages.len(), graph.num_edges());
    let m = mapping.num_blocks();
    let kinds: Vec<MsgKind> = state
        .messages
        .iter()
        .map(|f| {
            assert_eq!(f.num_blocks(), m, "message and mapping block counts differ");
            classify(m, f.words())
        })
        .collect();
    rootchecks_from_kinds(graph, m, &kinds, mapping.assignments())
}

/// Per-realization Boolean min-sum: the VN outputs `α_i^(ℓ)` for
/// `ℓ = 0..=iters`, evaluated edge by edge with plain booleans.
pub fn fading_msd_trace(
    bg: &BaseGraph,
    sel: &RateSelection,
    mapping: &BlockMapping,
    a: &FadingRealization,
    iters: usize,
) -> Result<Vec<Vec<bool>>> {
    mapping.validate(bg, sel)?;
    if a.num_blocks() != mapping.num_blocks() as usize {
        return Err(Error::BlockCountMismatch(
            a.num_blocks() as u8,
            mapping.num_blocks(),
        ));
    }
    let edges = bg.active_edges(sel);
    let chan: Vec<bool> = (0..sel.active_cols)
        .map(|c| mapping.block(c).is_some_and(|b| a.block(b as usize)))
        .collect();
    let mut alpha: Vec<bool> = edges.iter().map(|e| chan[e.col]).collect();
    let mut trace = vec![chan.clone()];
    for _ in 0..iters {
        let beta: Vec<bool> = (0..edges.len())
            .map(|e| {
                (0..edges.len())
                    .filter(|&f| f != e && edges[f].row == edges[e].row)
                    .all(|f| alpha[f])
            })
            .collect();
        alpha = (0..edges.len())
            .map(|e| {
                chan[edges[e].col]
                    || (0..edges.len())
                        .filter(|&f| f != e && edges[f].col == edges[e].col)
                        .any(|f| beta[f])
            })
            .collect();
        let out: Vec<bool> = (0..sel.active_cols)
            .map(|c| chan[c] || (0..edges.len()).any(|f| edges[f].col == c && beta[f]))
            .collect();
        trace.push(out);
    }
    Ok(trace)
}

/// VN outputs after `iters` iterations of per-realization Boolean min-sum.
pub fn fading_msd(
    bg: &BaseGraph,
    sel: &RateSelection,
    mapping: &BlockMapping,
    a: &FadingRealization,
    iters: usize,
) -> Result<Vec<bool>> {
    let mut trace = fading_msd_trace(bg, sel, mapping, a, iters)?;
    Ok(trace.pop().expect("trace has iteration 0"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VnRole {
    Info,
    PuncturedInfo,
    Parity,
    PuncturedParity,
}

impl VnRole {
    pub fn label(self) -> &'static str {
        match self {
            VnRole::Info => "info",
            VnRole::PuncturedInfo => "info-punctured",
            VnRole::Parity => "parity",
            VnRole::PuncturedParity => "parity-punctured",
        }
    }

    pub fn is_info(self) -> bool {
        matches!(self, VnRole::Info | VnRole::PuncturedInfo)
    }
}

/// A rootcheck together with the first iteration whose messages form it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RootcheckEvent {
    pub iteration: usize,
    pub rootcheck: Rootcheck,
}

/// Result of a diversity-evolution run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiveReport {
    pub num_blocks: u8,
    pub roles: Vec<VnRole>,
    /// `per_iteration[ℓ][col]` is the output function `α_col^(ℓ)`, for
    /// `ℓ = 0..=iters`. Iterations past the fixpoint repeat the fixpoint.
    pub per_iteration: Vec<Vec<FadingFunction>>,
    /// Diversity order of every VN at the final iteration.
    pub diversity_orders: Vec<u32>,
    /// Information VNs at full diversity, per iteration.
    pub full_div_count_info: Vec<usize>,
    /// Newly formed generalized rootchecks, tagged with the iteration of the
    /// VN-to-CN messages that form them (their effect shows one iteration
    /// later).
    pub rootcheck_events: Vec<RootcheckEvent>,
    /// First iteration after which no message changes, if reached.
    pub fixpoint: Option<usize>,
}

impl DiveReport {
    pub fn iters(&self) -> usize {
        self.per_iteration.len() - 1
    }

    pub fn info_count(&self) -> usize {
        self.roles.iter().filter(|r| r.is_info()).count()
    }

    pub fn all_info_full(&self) -> bool {
        self.full_div_count_info.last() == Some(&self.info_count())
    }

    /// First iteration at which every information VN has full diversity.
    pub fn first_all_info_full(&self) -> Option<usize> {
        let k = self.info_count();
        self.full_div_count_info.iter().position(|&c| c == k)
    }

    /// Information VNs short of full diversity at the final iteration.
    pub fn deficient_info(&self) -> Vec<usize> {
        let m = self.num_blocks as u32;
        (0..self.roles.len())
            .filter(|&c| self.roles[c].is_info() && self.diversity_orders[c] < m)
            .collect()
    }

    /// One VN per line: `index role table_hex diversity_order`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# blocks {} iterations {} fixpoint {}\n# vn role table diversity\n",
            self.num_blocks,
            self.iters(),
            self.fixpoint.map_or("-".into(), |f| f.to_string())
        );
        let last = self.per_iteration.last().expect("iteration 0 exists");
        for (c, f) in last.iter().enumerate() {
            let _ = writeln!(
                out,
                "{c} {} {} {}",
                self.roles[c].label(),
                f.to_hex(),
                self.diversity_orders[c]
            );
        }
        out
    }

    /// `iter,count_full_div_info` rows, one per iteration.
    pub fn iteration_csv(&self) -> String {
        let mut out = String::from("iter,count_full_div_info\n");
        for (l, c) in self.full_div_count_info.iter().enumerate() {
            let _ = writeln!(out, "{l},{c}");
        }
        out
    }
}

fn roles(bg: &BaseGraph, sel: &RateSelection) -> Vec<VnRole> {
    (0..sel.active_cols)
        .map(|c| match (c < sel.info_cols, bg.is_punctured(c)) {
            (true, false) => VnRole::Info,
            (true, true) => VnRole::PuncturedInfo,
            (false, false) => VnRole::Parity,
            (false, true) => VnRole::PuncturedParity,
        })
        .collect()
}

/// Runs diversity evolution for `iters` iterations on whole truth tables.
pub fn dive_run(
    bg: &BaseGraph,
    sel: &RateSelection,
    mapping: &BlockMapping,
    iters: usize,
) -> Result<DiveReport> {
    let graph = ProtoTanner::new(bg, sel);
    dive_run_on(&graph, bg, sel, mapping, iters)
}

/// [`dive_run`] on a prebuilt Tanner graph.
pub fn dive_run_on(
    graph: &ProtoTanner,
    bg: &BaseGraph,
    sel: &RateSelection,
    mapping: &BlockMapping,
    iters: usize,
) -> Result<DiveReport> {
    let m = mapping.num_blocks();
    if m as usize > MAX_BLOCKS {
        return Err(Error::TooManyBlocks(m as usize));
    }
    mapping.validate(bg, sel)?;
    let roles = roles(bg, sel);
    let mut evo = Evolution::from_mapping(graph, mapping);

    let snapshot = |evo: &Evolution| -> Vec<FadingFunction> {
        (0..graph.cols()).map(|c| evo.output(c)).collect()
    };
    let mut per_iteration = vec![snapshot(&evo)];
    let mut seen = BTreeSet::new();
    let mut events = Vec::new();
    let mut record = |evo: &Evolution, events: &mut Vec<RootcheckEvent>| {
        for rc in evo.rootchecks(mapping.assignments()) {
            if seen.insert(rc) {
                events.push(RootcheckEvent {
                    iteration: evo.iteration(),
                    rootcheck: rc,
                });
            }
        }
    };
    record(&evo, &mut events);
    let mut fixpoint = None;
    for _ in 0..iters {
        if fixpoint.is_some() {
            let last = per_iteration.last().cloned().expect("nonempty");
            per_iteration.push(last);
            continue;
        }
        let changed = evo.step();
        per_iteration.push(snapshot(&evo));
        if changed {
            record(&evo, &mut events);
        } else {
            fixpoint = Some(evo.iteration());
        }
    }

    let final_outputs = per_iteration.last().expect("nonempty");
    let diversity_orders = final_outputs.iter().map(|f| f.diversity_order()).collect();
    let full_div_count_info = per_iteration
        .iter()
        .map(|outs| {
            outs.iter()
                .zip(&roles)
                .filter(|(f, r)| r.is_info() && f.is_full_diversity())
                .count()
        })
        .collect();
    Ok(DiveReport {
        num_blocks: m,
        roles,
        per_iteration,
        diversity_orders,
        full_div_count_info,
        rootcheck_events: events,
        fixpoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{published, MappingFile};
    use crate::protograph::{builtin, select_rate, EdgeSpec};
    use std::collections::BTreeMap;

    /// Conventional rootcheck: CN 0 joins info VN 0 (block 0) with VNs 1 and 2
    /// (both block 1); CN 1 checks VNs 1 and 2.
    fn rootcheck_toy() -> (BaseGraph, RateSelection, BlockMapping) {
        let mut entries = BTreeMap::new();
        for (j, i) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)] {
            entries.insert((j, i), EdgeSpec::single(0));
        }
        let bg = BaseGraph::new(2, 3, 1, entries, [], 1).unwrap();
        let sel = select_rate(&bg, 2).unwrap();
        let map = BlockMapping::new(2, vec![Some(0), Some(1), Some(1)]).unwrap();
        (bg, sel, map)
    }

    #[test]
    fn iteration_zero_is_channel_atoms() {
        let bg2 = builtin::bg2();
        let sel = select_rate(&bg2, 16).unwrap();
        let map = MappingFile::parse(published::BG2_R10_24).unwrap().mapping;
        let rep = dive_run(&bg2, &sel, &map, 0).unwrap();
        for (c, f) in rep.per_iteration[0].iter().enumerate() {
            match map.block(c) {
                Some(b) => assert_eq!(*f, FadingFunction::atom(2, b)),
                None => assert!(f.is_zero()),
            }
        }
    }

    #[test]
    fn conventional_rootcheck_gives_target_full_diversity() {
        let (bg, sel, map) = rootcheck_toy();
        let rep = dive_run(&bg, &sel, &map, 3).unwrap();
        assert!(rep.per_iteration[1][0].is_full_diversity());
        assert_eq!(rep.first_all_info_full(), Some(1));
        let a = FadingRealization::new(vec![false, true]);
        assert!(fading_msd(&bg, &sel, &map, &a, 1).unwrap()[0]);
        // Reported from the channel messages of iteration 0.
        assert!(rep.rootcheck_events.contains(&RootcheckEvent {
            iteration: 0,
            rootcheck: Rootcheck {
                row: 0,
                target: 0,
                block: 1
            }
        }));
    }

    #[test]
    fn extreme_realizations() {
        let bg2 = builtin::bg2();
        let sel = select_rate(&bg2, 16).unwrap();
        let map = MappingFile::parse(published::BG2_R10_24).unwrap().mapping;
        let ones = FadingRealization::new(vec![true, true]);
        let trace = fading_msd_trace(&bg2, &sel, &map, &ones, 3).unwrap();
        assert!(trace[1].iter().all(|&b| b));
        let zeros = FadingRealization::new(vec![false, false]);
        let trace = fading_msd_trace(&bg2, &sel, &map, &zeros, 5).unwrap();
        assert!(trace.iter().flatten().all(|&b| !b));
    }

    fn kinds_state(funcs: &[FadingFunction]) -> MessageState {
        MessageState {
            iteration: 0,
            messages: funcs.to_vec(),
        }
    }

    /// One CN over three VNs; VN 0 is the target on block 0.
    fn star() -> (ProtoTanner, BlockMapping) {
        let mut entries = BTreeMap::new();
        for i in 0..3 {
            entries.insert((0, i), EdgeSpec::single(0));
        }
        let bg = BaseGraph::new(1, 3, 2, entries, [], 1).unwrap();
        let sel = select_rate(&bg, 1).unwrap();
        let map = BlockMapping::new(2, vec![Some(0), Some(1), Some(0)]).unwrap();
        (ProtoTanner::new(&bg, &sel), map)
    }

    #[test]
    fn message_based_rootcheck() {
        let (g, map) = star();
        let a0 = FadingFunction::atom(2, 0);
        let a1 = FadingFunction::atom(2, 1);
        let full = FadingFunction::full_diversity(2);
        let found =
            detect_generalized_rootchecks(&g, &kinds_state(&[a0.clone(), a1.clone(), full]), &map);
        assert!(found.contains(&Rootcheck {
            row: 0,
            target: 0,
            block: 1
        }));

        // Mixed single-block atoms do not qualify for the target.
        let found = detect_generalized_rootchecks(&g, &kinds_state(&[a0.clone(), a1, a0]), &map);
        assert!(!found.iter().any(|r| r.target == 0));
    }

    #[test]
    fn parallel_edges_carry_their_own_messages() {
        // VN 0 has a double edge into CN 0, which also reaches VN 1.
        let mut entries = BTreeMap::new();
        entries.insert((0, 0), EdgeSpec { shifts: vec![0, 1] });
        entries.insert((0, 1), EdgeSpec::single(0));
        let bg = BaseGraph::new(1, 2, 1, entries, [], 2).unwrap();
        let sel = select_rate(&bg, 1).unwrap();
        let map = BlockMapping::new(2, vec![Some(0), Some(1)]).unwrap();
        let rep = dive_run(&bg, &sel, &map, 2).unwrap();
        // The extrinsic view of VN 0 still contains its other copy (A_0), so
        // CN 0 sends A_0 A_1 and VN 0 gains nothing.
        assert_eq!(rep.per_iteration[1][0], FadingFunction::atom(2, 0));
        // VN 1 hears A_0 from both copies and reaches A_0 + A_1.
        assert!(rep.per_iteration[1][1].is_full_diversity());
    }

    #[test]
    fn degree_one_check_pins_its_variable() {
        let mut entries = BTreeMap::new();
        for (j, i) in [(0, 0), (0, 1), (1, 2)] {
            entries.insert((j, i), EdgeSpec::single(0));
        }
        let bg = BaseGraph::new(2, 3, 1, entries, [], 1).unwrap();
        let sel = select_rate(&bg, 2).unwrap();
        let map = BlockMapping::new(2, vec![Some(0), Some(0), Some(1)]).unwrap();
        let rep = dive_run(&bg, &sel, &map, 1).unwrap();
        // Column 2 sits alone on CN 1, which emits the empty product 1.
        assert_eq!(rep.per_iteration[1][2], FadingFunction::one(2));
        assert_eq!(rep.per_iteration[1][1], FadingFunction::atom(2, 0));
    }

    #[test]
    fn table_ii_reaches_full_diversity_at_iteration_seven() {
        let bg2 = builtin::bg2();
        let sel = select_rate(&bg2, 16).unwrap();
        let map = MappingFile::parse(published::BG2_R10_24).unwrap().mapping;
        let rep = dive_run(&bg2, &sel, &map, 8).unwrap();
        assert_eq!(rep.full_div_count_info, vec![0, 1, 4, 5, 7, 9, 9, 10, 10]);
        assert_eq!(rep.first_all_info_full(), Some(7));
        assert!(rep.iteration_csv().lines().nth(8).unwrap() == "7,10");
    }

    #[test]
    fn report_text_has_one_line_per_vn() {
        let bg2 = builtin::bg2();
        let sel = select_rate(&bg2, 16).unwrap();
        let map = MappingFile::parse(published::BG2_R10_24).unwrap().mapping;
        let rep = dive_run(&bg2, &sel, &map, 10).unwrap();
        let text = rep.to_text();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body.len(), 26);
        assert_eq!(body[2], "2 info e 2");
        assert_eq!(rep.fixpoint.map(|f| f <= 10), Some(true));
    }

    #[test]
    fn too_many_blocks() {
        let (bg, sel, _) = rootcheck_toy();
        let map = BlockMapping::new(17, vec![Some(0), Some(1), Some(16)]).unwrap();
        assert!(matches!(
            dive_run(&bg, &sel, &map, 1),
            Err(Error::TooManyBlocks(17))
        ));
    }
}
