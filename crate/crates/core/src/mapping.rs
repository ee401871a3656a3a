//! Block mappings: which fading block carries each transmitted protograph VN.
//!
//! File format, one line per active column, plus optional `# key value`
//! header lines:
//!
//! ```text
//! # blocks 2
//! # rate 10/24
//! v0 P
//! v2 0
//! v3 1
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::protograph::{BaseGraph, RateSelection};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockMapping {
    num_blocks: u8,
    /// `None` marks a punctured (never transmitted) column.
    assign: Vec<Option<u8>>,
}

impl BlockMapping {
    pub fn new(num_blocks: u8, assign: Vec<Option<u8>>) -> Result<Self> {
        if num_blocks == 0 {
            return Err(Error::MappingShape("at least one block is required".into()));
        }
        if let Some(b) = assign.iter().flatten().find(|&&b| b >= num_blocks) {
            return Err(Error::MappingShape(format!(
                "block {b} does not exist with {num_blocks} blocks"
            )));
        }
        Ok(BlockMapping { num_blocks, assign })
    }

    /// Builds a mapping from per-block lists of transmitted column indices.
    pub fn from_block_lists(
        bg: &BaseGraph,
        sel: &RateSelection,
        lists: &[&[usize]],
    ) -> Result<Self> {
        let mut assign = vec![None; sel.active_cols];
        for (block, cols) in lists.iter().enumerate() {
            for &c in cols.iter() {
                if c >= sel.active_cols {
                    return Err(Error::MappingShape(format!("column {c} is not active")));
                }
                if assign[c].replace(block as u8).is_some() {
                    return Err(Error::MappingShape(format!("column {c} listed twice")));
                }
            }
        }
        let m = BlockMapping::new(lists.len() as u8, assign)?;
        m.validate(bg, sel)?;
        Ok(m)
    }

    pub fn num_blocks(&self) -> u8 {
        self.num_blocks
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    pub fn block(&self, col: usize) -> Option<u8> {
        self.assign[col]
    }

    pub fn assignments(&self) -> &[Option<u8>] {
        &self.assign
    }

    /// Number of columns carried by each block.
    pub fn populations(&self) -> Vec<usize> {
        let mut pop = vec![0; self.num_blocks as usize];
        for b in self.assign.iter().flatten() {
            pop[*b as usize] += 1;
        }
        pop
    }

    /// Block populations differ by at most one.
    pub fn is_balanced(&self) -> bool {
        let pop = self.populations();
        let (lo, hi) = (pop.iter().min(), pop.iter().max());
        matches!((lo, hi), (Some(lo), Some(hi)) if hi - lo <= 1)
    }

    /// Relabels block `m` as `perm[m]`.
    pub fn permute_blocks(&self, perm: &[u8]) -> Self {
        BlockMapping {
            num_blocks: self.num_blocks,
            assign: self
                .assign
                .iter()
                .map(|b| b.map(|b| perm[b as usize]))
                .collect(),
        }
    }

    /// Checks that the mapping covers exactly the transmitted active columns.
    pub fn validate(&self, bg: &BaseGraph, sel: &RateSelection) -> Result<()> {
        if self.assign.len() != sel.active_cols {
            return Err(Error::MappingShape(format!(
                "mapping has {} columns, selection has {} active columns",
                self.assign.len(),
                sel.active_cols
            )));
        }
        for (col, b) in self.assign.iter().enumerate() {
            match (bg.is_punctured(col), b) {
                (true, Some(_)) => {
                    return Err(Error::MappingShape(format!(
                        "punctured column {col} has a block assignment"
                    )))
                }
                (false, None) => return Err(Error::UnmappedColumn(col)),
                _ => {}
            }
        }
        Ok(())
    }

    /// Serializes to the mapping file format. `header` entries are written as
    /// `# key value` lines after the block count.
    pub fn to_text(&self, header: &[(&str, String)]) -> String {
        let mut out = format!("# blocks {}\n", self.num_blocks);
        for (k, v) in header {
            let _ = writeln!(out, "# {k} {v}");
        }
        for (col, b) in self.assign.iter().enumerate() {
            match b {
                Some(b) => {
                    let _ = writeln!(out, "v{col} {b}");
                }
                None => {
                    let _ = writeln!(out, "v{col} P");
                }
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, header: &[(&str, String)]) -> Result<()> {
        std::fs::write(path, self.to_text(header))?;
        Ok(())
    }
}

/// A parsed mapping file: the mapping plus its `# key value` header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingFile {
    pub mapping: BlockMapping,
    pub header: BTreeMap<String, String>,
}

impl MappingFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut slots: BTreeMap<usize, Option<u8>> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.trim().splitn(2, char::is_whitespace);
                if let (Some(k), Some(v)) = (it.next(), it.next()) {
                    header.insert(k.to_string(), v.trim().to_string());
                }
                continue;
            }
            let (v, b) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| perr("expected `v<index> <block|P>`".into()))?;
            let col: usize = v
                .strip_prefix('v')
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| perr(format!("bad VN label `{v}`")))?;
            let block = match b.trim() {
                "P" => None,
                s => Some(
                    s.parse::<u8>()
                        .map_err(|_| perr(format!("bad block `{s}`")))?,
                ),
            };
            if slots.insert(col, block).is_some() {
                return Err(perr(format!("v{col} appears twice")));
            }
        }
        let len = slots.len();
        if let Some((&last, _)) = slots.iter().next_back() {
            if last + 1 != len {
                return Err(Error::MappingShape(format!(
                    "VN indices must be contiguous from 0 (found {len} lines, max v{last})"
                )));
            }
        }
        let assign: Vec<Option<u8>> = slots.into_values().collect();
        let num_blocks = match header.get("blocks") {
            Some(s) => s
                .parse::<u8>()
                .map_err(|_| Error::MappingShape(format!("bad block count `{s}`")))?,
            None => assign.iter().flatten().max().map_or(1, |&b| b + 1),
        };
        Ok(MappingFile {
            mapping: BlockMapping::new(num_blocks, assign)?,
            header,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Reference diversity-aligned mappings for the 5G base graphs at `M = 2`, in mapping-file form.
pub mod published {
    /// BG1 at R = 22/46 (48 active columns).
    pub const BG1_R22_46: &str = include_str!("../data/bg1_r22_46.map");
    /// BG2 at R = 10/24 (26 active columns).
    pub const BG2_R10_24: &str = include_str!("../data/bg2_r10_24.map");
}
