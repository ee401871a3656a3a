//! Protograph base matrices, the 5G-NR base graphs, and rate selection.
//!
//! A [`BaseGraph`] stores the sparse base matrix of a protograph together with
//! the circulant shifts used for lifting. Columns `0..info_cols` carry
//! information, the remaining columns are parity. Rate selection always keeps a
//! contiguous prefix of columns and rows, which is the incremental-redundancy
//! extension order of the 5G-NR graphs: every additional parity column brings
//! one additional row.
//!
//! Base-graph text format:
//!
//! ```text
//! # sha256 <hex digest of everything after this line>   (optional)
//! # free-form comments
//! bg <rows> <cols> <info_cols> <punctured comma-list or ->
//! <row> <col> <shift>[,<shift>...]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use num_rational::Ratio;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Exact code rate.
pub type Rate = Ratio<u64>;

const CHECKSUM_PREFIX: &str = "# sha256 ";

/// One base-matrix entry: `shifts.len()` parallel edges, each with its own
/// circulant shift.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeSpec {
    pub shifts: Vec<u32>,
}

impl EdgeSpec {
    pub fn single(shift: u32) -> Self {
        EdgeSpec {
            shifts: vec![shift],
        }
    }

    pub fn multiplicity(&self) -> usize {
        self.shifts.len()
    }
}

/// A protograph edge instance. Parallel edges of one base entry are separate
/// instances distinguished by `copy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub row: usize,
    pub col: usize,
    pub shift: u32,
    pub copy: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseGraph {
    rows: usize,
    cols: usize,
    info_cols: usize,
    entries: BTreeMap<(usize, usize), EdgeSpec>,
    punctured: BTreeSet<usize>,
    lifting_size: u32,
}

impl BaseGraph {
    /// Builds a validated base graph.
    pub fn new(
        rows: usize,
        cols: usize,
        info_cols: usize,
        entries: BTreeMap<(usize, usize), EdgeSpec>,
        punctured: impl IntoIterator<Item = usize>,
        lifting_size: u32,
    ) -> Result<Self> {
        let bg = BaseGraph {
            rows,
            cols,
            info_cols,
            entries,
            punctured: punctured.into_iter().collect(),
            lifting_size,
        };
        bg.validate()?;
        Ok(bg)
    }

    fn validate(&self) -> Result<()> {
        let inv = |msg: String| Err(Error::Invariant(msg));
        if self.info_cols == 0 || self.info_cols >= self.cols {
            return inv(format!(
                "info_cols must satisfy 0 < info_cols < cols (got {} of {})",
                self.info_cols, self.cols
            ));
        }
        if self.rows != self.cols - self.info_cols {
            return inv(format!(
                "rows must equal cols - info_cols (got {} rows, {} cols, {} info)",
                self.rows, self.cols, self.info_cols
            ));
        }
        if self.lifting_size == 0 {
            return inv("lifting size must be positive".into());
        }
        if let Some(&p) = self.punctured.iter().find(|&&p| p >= self.cols) {
            return inv(format!("punctured column {p} does not exist"));
        }
        let mut col_seen = vec![false; self.cols];
        let mut row_seen = vec![false; self.rows];
        for (&(j, i), spec) in &self.entries {
            if j >= self.rows || i >= self.cols {
                return inv(format!("entry ({j}, {i}) lies outside the base matrix"));
            }
            if spec.shifts.is_empty() {
                return inv(format!("entry ({j}, {i}) has multiplicity 0"));
            }
            if let Some(&s) = spec.shifts.iter().find(|&&s| s >= self.lifting_size) {
                return inv(format!(
                    "shift {s} at ({j}, {i}) is not below lifting size {}",
                    self.lifting_size
                ));
            }
            col_seen[i] = true;
            row_seen[j] = true;
        }
        if let Some(i) = col_seen.iter().position(|s| !s) {
            return inv(format!("disconnected VN {i}"));
        }
        if let Some(j) = row_seen.iter().position(|s| !s) {
            return inv(format!("disconnected CN {j}"));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn info_cols(&self) -> usize {
        self.info_cols
    }

    pub fn parity_cols(&self) -> usize {
        self.cols - self.info_cols
    }

    pub fn lifting_size(&self) -> u32 {
        self.lifting_size
    }

    pub fn entries(&self) -> &BTreeMap<(usize, usize), EdgeSpec> {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Option<&EdgeSpec> {
        self.entries.get(&(row, col))
    }

    pub fn punctured(&self) -> &BTreeSet<usize> {
        &self.punctured
    }

    pub fn is_punctured(&self, col: usize) -> bool {
        self.punctured.contains(&col)
    }

    /// Edge instances of the sub-protograph kept by `sel`, in row-major order.
    pub fn active_edges(&self, sel: &RateSelection) -> Vec<Edge> {
        let mut out = Vec::new();
        for (&(row, col), spec) in &self.entries {
            if row < sel.active_rows && col < sel.active_cols {
                for (copy, &shift) in spec.shifts.iter().enumerate() {
                    out.push(Edge {
                        row,
                        col,
                        shift,
                        copy,
                    });
                }
            }
        }
        out
    }

    /// Set of active rows adjacent to each active column.
    pub fn column_neighborhoods(&self, sel: &RateSelection) -> Vec<BTreeSet<usize>> {
        let mut nb = vec![BTreeSet::new(); sel.active_cols];
        for &(row, col) in self.entries.keys() {
            if row < sel.active_rows && col < sel.active_cols {
                nb[col].insert(row);
            }
        }
        nb
    }

    /// Serializes to the base-graph text format, with a leading checksum line.
    pub fn to_text(&self) -> String {
        let mut body = String::new();
        body.push_str(&format!("# lifting_size {}\n", self.lifting_size));
        let punct = if self.punctured.is_empty() {
            "-".to_string()
        } else {
            self.punctured
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        body.push_str(&format!(
            "bg {} {} {} {}\n",
            self.rows, self.cols, self.info_cols, punct
        ));
        for (&(j, i), spec) in &self.entries {
            let shifts = spec
                .shifts
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",");
            body.push_str(&format!("{j} {i} {shifts}\n"));
        }
        format!("{CHECKSUM_PREFIX}{}\n{body}", sha256_hex(&body))
    }

    /// Parses the base-graph text format. A leading `# sha256` line, when
    /// present, must match the digest of the remaining text.
    pub fn parse(text: &str, lifting_size: u32) -> Result<Self> {
        verify_checksum(text)?;
        let mut header: Option<(usize, usize, usize, Vec<usize>)> = None;
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "bg" {
                if header.is_some() {
                    return Err(perr("duplicate header".into()));
                }
                if fields.len() < 4 || fields.len() > 5 {
                    return Err(perr(
                        "header must read `bg <rows> <cols> <info_cols> <punctured>`".into(),
                    ));
                }
                let num = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| perr(format!("expected an integer, found `{s}`")))
                };
                let punctured = match fields.get(4) {
                    None | Some(&"-") => Vec::new(),
                    Some(list) => list
                        .split(',')
                        .map(|s| num(s.trim()))
                        .collect::<Result<Vec<_>>>()?,
                };
                header = Some((num(fields[1])?, num(fields[2])?, num(fields[3])?, punctured));
                continue;
            }
            if header.is_none() {
                return Err(perr("edge line before the `bg` header".into()));
            }
            if fields.len() != 3 {
                return Err(perr(
                    "edge line must read `<row> <col> <shift>[,<shift>...]`".into(),
                ));
            }
            let row: usize = fields[0]
                .parse()
                .map_err(|_| perr(format!("bad row index `{}`", fields[0])))?;
            let col: usize = fields[1]
                .parse()
                .map_err(|_| perr(format!("bad column index `{}`", fields[1])))?;
            let shifts = fields[2]
                .split(',')
                .map(|s| {
                    s.parse::<u32>()
                        .map_err(|_| perr(format!("bad shift value `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if entries.insert((row, col), EdgeSpec { shifts }).is_some() {
                return Err(perr(format!("duplicate entry ({row}, {col})")));
            }
        }
        let (rows, cols, info_cols, punctured) = header.ok_or(Error::Parse {
            line: text.lines().count(),
            msg: "missing `bg` header".into(),
        })?;
        BaseGraph::new(rows, cols, info_cols, entries, punctured, lifting_size)
    }

    /// True when every entry is a single edge.
    pub fn is_simple(&self) -> bool {
        self.entries.values().all(|e| e.multiplicity() == 1)
    }
}

fn sha256_hex(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

fn verify_checksum(text: &str) -> Result<()> {
    let Some(first) = text.lines().next() else {
        return Ok(());
    };
    let Some(declared) = first.strip_prefix(CHECKSUM_PREFIX) else {
        return Ok(());
    };
    let body = &text[first.len()..];
    let body = body
        .strip_prefix("\r\n")
        .or_else(|| body.strip_prefix('\n'))
        .unwrap_or(body);
    let actual = sha256_hex(body);
    if actual != declared.trim() {
        return Err(Error::Checksum {
            declared: declared.trim().to_string(),
            actual,
        });
    }
    Ok(())
}

/// The `# lifting_size <Z>` comment written by [`BaseGraph::to_text`], if any.
pub fn declared_lifting_size(text: &str) -> Option<u32> {
    text.lines()
        .filter_map(|l| l.strip_prefix('#'))
        .find_map(|l| l.trim().strip_prefix("lifting_size"))
        .and_then(|v| v.trim().parse().ok())
}

/// Reads and validates a base-graph file.
pub fn load_base_graph(path: impl AsRef<Path>, lifting_size: u32) -> Result<BaseGraph> {
    let text = std::fs::read_to_string(path)?;
    BaseGraph::parse(&text, lifting_size)
}

/// The two 5G-NR data-channel base graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiveG {
    Bg1,
    Bg2,
}

impl FiveG {
    /// `(rows, cols, info_cols)` of the full base graph.
    pub fn dims(self) -> (usize, usize, usize) {
        match self {
            FiveG::Bg1 => (46, 68, 22),
            FiveG::Bg2 => (42, 52, 10),
        }
    }

    /// Identifies a 5G graph from its dimensions.
    pub fn detect(bg: &BaseGraph) -> Option<FiveG> {
        [FiveG::Bg1, FiveG::Bg2]
            .into_iter()
            .find(|g| g.dims() == (bg.rows, bg.cols, bg.info_cols))
    }

    /// Checks the structural promises of a 5G base graph.
    pub fn check(self, bg: &BaseGraph) -> Result<()> {
        let dims = (bg.rows, bg.cols, bg.info_cols);
        if dims != self.dims() {
            return Err(Error::Invariant(format!(
                "{self:?} must have (rows, cols, info_cols) = {:?}, found {dims:?}",
                self.dims()
            )));
        }
        if !bg.is_simple() {
            return Err(Error::Invariant(format!(
                "{self:?} entries must have multiplicity 1"
            )));
        }
        let expected: BTreeSet<usize> = [0, 1].into();
        if bg.punctured != expected {
            return Err(Error::Invariant(format!(
                "{self:?} must puncture columns {{0, 1}}, found {:?}",
                bg.punctured
            )));
        }
        Ok(())
    }
}

/// Loads a 5G base graph and checks its dimensions.
pub fn load_5g_base_graph(
    path: impl AsRef<Path>,
    which: FiveG,
    lifting_size: u32,
) -> Result<BaseGraph> {
    let bg = load_base_graph(path, lifting_size)?;
    which.check(&bg)?;
    Ok(bg)
}

/// Base graphs shipped with the crate.
pub mod builtin {
    use super::*;

    pub const BG1_Z240: &str = include_str!("../data/bg1_z240.txt");
    pub const BG2_Z20: &str = include_str!("../data/bg2_z20.txt");

    /// 5G-NR BG1 with shifts for Z = 240.
    pub fn bg1() -> BaseGraph {
        let bg = BaseGraph::parse(BG1_Z240, 240).expect("shipped BG1 data is valid");
        FiveG::Bg1.check(&bg).expect("shipped BG1 has BG1 shape");
        bg
    }

    /// 5G-NR BG2 with shifts for Z = 20.
    pub fn bg2() -> BaseGraph {
        let bg = BaseGraph::parse(BG2_Z20, 20).expect("shipped BG2 data is valid");
        FiveG::Bg2.check(&bg).expect("shipped BG2 has BG2 shape");
        bg
    }
}

/// A contiguous prefix of columns and rows of a base graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RateSelection {
    pub active_cols: usize,
    pub active_rows: usize,
    pub info_cols: usize,
    /// Active columns that are actually transmitted.
    pub transmitted_cols: usize,
}

impl RateSelection {
    pub fn parity_cols(&self) -> usize {
        self.active_rows
    }

    pub fn rate(&self) -> Rate {
        Rate::new(self.info_cols as u64, self.transmitted_cols as u64)
    }

    /// Unreduced `k/transmitted` form, e.g. `10/24`.
    pub fn rate_label(&self) -> String {
        format!("{}/{}", self.info_cols, self.transmitted_cols)
    }
}

impl fmt::Display for RateSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "R={} ({} active columns, {} rows)",
            self.rate_label(),
            self.active_cols,
            self.active_rows
        )
    }
}

/// Keeps the information columns plus the first `parity_cols` parity columns.
pub fn select_rate(bg: &BaseGraph, parity_cols: usize) -> Result<RateSelection> {
    if parity_cols == 0 || parity_cols > bg.parity_cols() {
        return Err(Error::OutOfRange {
            what: "parity_cols",
            detail: format!("{parity_cols} not in 1..={}", bg.parity_cols()),
        });
    }
    let active_cols = bg.info_cols + parity_cols;
    let punctured_active = bg.punctured.iter().filter(|&&p| p < active_cols).count();
    let transmitted_cols = active_cols - punctured_active;
    if transmitted_cols == 0 {
        return Err(Error::OutOfRange {
            what: "parity_cols",
            detail: "selection transmits nothing".into(),
        });
    }
    Ok(RateSelection {
        active_cols,
        active_rows: parity_cols,
        info_cols: bg.info_cols,
        transmitted_cols,
    })
}

/// Smallest selection whose rate does not exceed `target`.
pub fn select_rate_at_most(bg: &BaseGraph, target: Rate) -> Result<RateSelection> {
    (1..=bg.parity_cols())
        .filter_map(|p| select_rate(bg, p).ok())
        .find(|sel| sel.rate() <= target)
        .ok_or(Error::OutOfRange {
            what: "rate",
            detail: format!("no parity extension reaches rate {target} or below"),
        })
}

/// Parses `p/q` (or a bare integer) into an exact rate.
pub fn parse_rate(s: &str) -> Result<Rate> {
    let bad = || Error::Config(format!("rate `{s}` is not of the form p/q"));
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (
            p.trim().parse::<u64>().map_err(|_| bad())?,
            q.trim().parse::<u64>().map_err(|_| bad())?,
        ),
        None => (s.trim().parse::<u64>().map_err(|_| bad())?, 1),
    };
    if q == 0 || p == 0 || p > q {
        return Err(Error::Config(format!("rate `{s}` must lie in (0, 1]")));
    }
    Ok(Rate::new(p, q))
}

/// All unordered pairs of active columns adjacent to exactly the same set of
/// active rows.
pub fn identical_neighborhood_pairs(bg: &BaseGraph, sel: &RateSelection) -> Vec<(usize, usize)> {
    let nb = bg.column_neighborhoods(sel);
    let mut groups: BTreeMap<&BTreeSet<usize>, Vec<usize>> = BTreeMap::new();
    for (col, set) in nb.iter().enumerate() {
        groups.entry(set).or_default().push(col);
    }
    let mut pairs = Vec::new();
    for cols in groups.values() {
        for (x, &a) in cols.iter().enumerate() {
            for &b in &cols[x + 1..] {
                pairs.push((a, b));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Singleton-like bound `1 + floor(M (1 - R))` on the diversity order.
pub fn singleton_bound(num_blocks: u32, rate: Rate) -> u32 {
    assert!(num_blocks >= 1, "at least one block");
    assert!(
        *rate.numer() > 0 && rate <= Rate::from_integer(1),
        "rate must lie in (0, 1]"
    );
    let redundancy = (Rate::from_integer(1) - rate) * Rate::from_integer(num_blocks as u64);
    1 + redundancy.floor().to_integer() as u32
}
