//! Boolean fading functions over `M` block indicators.
//!
//! Realization `a ∈ {0,1}^M` is encoded as the integer whose bit `m` is the
//! state of block `m` (1 = not faded). A function is stored as its truth
//! table: bit `a` of the table holds `f(a)`.

use std::fmt;

use crate::dive::MAX_BLOCKS;
use crate::error::{Error, Result};

/// Number of 64-bit words in a truth table over `num_blocks` indicators.
pub(crate) fn table_words(num_blocks: u8) -> usize {
    (1usize << num_blocks).div_ceil(64)
}

/// Mask of the valid bits in the last word of a table.
pub(crate) fn last_word_mask(num_blocks: u8) -> u64 {
    let bits = 1usize << num_blocks;
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Table word `w` of the atom `A_block`.
pub(crate) fn atom_word(num_blocks: u8, block: u8, w: usize) -> u64 {
    // Within one word, realizations a = 64w + t; bit `block` of a.
    let mask = last_word_mask(num_blocks);
    if block < 6 {
        const PATTERNS: [u64; 6] = [
            0xAAAA_AAAA_AAAA_AAAA,
            0xCCCC_CCCC_CCCC_CCCC,
            0xF0F0_F0F0_F0F0_F0F0,
            0xFF00_FF00_FF00_FF00,
            0xFFFF_0000_FFFF_0000,
            0xFFFF_FFFF_0000_0000,
        ];
        PATTERNS[block as usize] & mask
    } else if (w >> (block - 6)) & 1 == 1 {
        mask
    } else {
        0
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FadingFunction {
    num_blocks: u8,
    table: Vec<u64>,
}

impl FadingFunction {
    fn check_blocks(num_blocks: u8) {
        assert!(
            (1..=MAX_BLOCKS as u8).contains(&num_blocks),
            "block count {num_blocks} outside 1..={MAX_BLOCKS}"
        );
    }

    /// The constant-0 function.
    pub fn zero(num_blocks: u8) -> Self {
        Self::check_blocks(num_blocks);
        FadingFunction {
            num_blocks,
            table: vec![0; table_words(num_blocks)],
        }
    }

    /// The constant-1 function (neutral element of AND).
    pub fn one(num_blocks: u8) -> Self {
        Self::check_blocks(num_blocks);
        let words = table_words(num_blocks);
        let mut table = vec![u64::MAX; words];
        table[words - 1] = last_word_mask(num_blocks);
        FadingFunction { num_blocks, table }
    }

    /// `A_block`: true iff block `block` is not faded.
    pub fn atom(num_blocks: u8, block: u8) -> Self {
        Self::check_blocks(num_blocks);
        assert!(block < num_blocks, "block {block} out of range");
        let table = (0..table_words(num_blocks))
            .map(|w| atom_word(num_blocks, block, w))
            .collect();
        FadingFunction { num_blocks, table }
    }

    /// `A_0 + ... + A_{M-1}`: fails only when every block fades.
    pub fn full_diversity(num_blocks: u8) -> Self {
        let mut f = Self::one(num_blocks);
        f.table[0] &= !1;
        f
    }

    /// Builds a function from its raw table words.
    pub fn from_words(num_blocks: u8, table: Vec<u64>) -> Result<Self> {
        Self::check_blocks(num_blocks);
        if table.len() != table_words(num_blocks) {
            return Err(Error::Invariant(format!(
                "table of {} words for {num_blocks} blocks",
                table.len()
            )));
        }
        if table[table.len() - 1] & !last_word_mask(num_blocks) != 0 {
            return Err(Error::Invariant("table has bits beyond 2^M".into()));
        }
        Ok(FadingFunction { num_blocks, table })
    }

    /// Builds a function by evaluating `f` on every realization.
    pub fn from_fn(num_blocks: u8, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut out = Self::zero(num_blocks);
        for a in 0..1usize << num_blocks {
            if f(a) {
                out.table[a / 64] |= 1 << (a % 64);
            }
        }
        out
    }

    pub fn num_blocks(&self) -> u8 {
        self.num_blocks
    }

    pub fn words(&self) -> &[u64] {
        &self.table
    }

    /// `f(a)` for the realization encoded as `a`.
    pub fn eval(&self, a: usize) -> bool {
        assert!(a < 1 << self.num_blocks);
        (self.table[a / 64] >> (a % 64)) & 1 == 1
    }

    fn zip(&self, other: &Self, op: impl Fn(u64, u64) -> u64) -> Result<Self> {
        if self.num_blocks != other.num_blocks {
            return Err(Error::BlockCountMismatch(self.num_blocks, other.num_blocks));
        }
        Ok(FadingFunction {
            num_blocks: self.num_blocks,
            table: self
                .table
                .iter()
                .zip(&other.table)
                .map(|(&x, &y)| op(x, y))
                .collect(),
        })
    }

    /// Pointwise AND.
    pub fn and(&self, other: &Self) -> Result<Self> {
        self.zip(other, |x, y| x & y)
    }

    /// Pointwise OR.
    pub fn or(&self, other: &Self) -> Result<Self> {
        self.zip(other, |x, y| x | y)
    }

    /// `self(a) >= other(a)` for every realization.
    pub fn dominates(&self, other: &Self) -> bool {
        self.num_blocks == other.num_blocks
            && self
                .table
                .iter()
                .zip(&other.table)
                .all(|(&x, &y)| y & !x == 0)
    }

    pub fn is_zero(&self) -> bool {
        self.table.iter().all(|&w| w == 0)
    }

    /// Minimum number of faded blocks that makes the function fail.
    ///
    /// Equals `M` exactly for full-diversity functions and `0` for the
    /// constant-zero function.
    pub fn diversity_order(&self) -> u32 {
        let m = self.num_blocks as u32;
        (0..1usize << self.num_blocks)
            .filter(|&a| !self.eval(a))
            .map(|a| m - a.count_ones())
            .min()
            .unwrap_or(m)
    }

    pub fn is_full_diversity(&self) -> bool {
        self.dominates(&Self::full_diversity(self.num_blocks))
    }

    /// Monotone in the componentwise order of realizations.
    pub fn is_monotone(&self) -> bool {
        let n = 1usize << self.num_blocks;
        (0..n).all(|a| !self.eval(a) || (0..self.num_blocks).all(|m| self.eval(a | (1 << m))))
    }

    /// Relabels blocks: block `m` of `self` becomes block `perm[m]`.
    pub fn permute_blocks(&self, perm: &[u8]) -> Self {
        assert_eq!(perm.len(), self.num_blocks as usize);
        let mut out = Self::zero(self.num_blocks);
        for a in 0..1usize << self.num_blocks {
            if self.eval(a) {
                let b = (0..self.num_blocks as usize)
                    .filter(|&m| (a >> m) & 1 == 1)
                    .fold(0usize, |acc, m| acc | 1 << perm[m]);
                out.table[b / 64] |= 1 << (b % 64);
            }
        }
        out
    }

    /// Truth table as hexadecimal, most significant realization first.
    pub fn to_hex(&self) -> String {
        let bits = 1usize << self.num_blocks;
        let digits = bits.div_ceil(4);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (self.table[d / 16] >> ((d % 16) * 4)) & 0xF;
                char::from_digit(nibble as u32, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(num_blocks: u8, hex: &str) -> Result<Self> {
        Self::check_blocks(num_blocks);
        let mut out = Self::zero(num_blocks);
        let digits: Vec<char> = hex.chars().collect();
        let expected = (1usize << num_blocks).div_ceil(4);
        if digits.len() != expected {
            return Err(Error::Invariant(format!(
                "table `{hex}` has {} hex digits, expected {expected}",
                digits.len()
            )));
        }
        for (d, c) in digits.iter().rev().enumerate() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| Error::Invariant(format!("bad hex digit `{c}`")))?;
            out.table[d / 16] |= (v as u64) << ((d % 16) * 4);
        }
        if out.table[out.table.len() - 1] & !last_word_mask(num_blocks) != 0 {
            return Err(Error::Invariant("table has bits beyond 2^M".into()));
        }
        Ok(out)
    }
}

impl fmt::Debug for FadingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "FadingFunction(M={}, 0x{})",
            self.num_blocks,
            self.to_hex()
        )
    }
}

/// A fading realization `a ∈ {0,1}^M`.
///
/// `bits[m]` is the indicator that `|h_m|^2 γ` clears the outage threshold
/// `ρ_0`; the threshold itself never enters the Boolean analysis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FadingRealization {
    bits: Vec<bool>,
}

impl FadingRealization {
    pub fn new(bits: Vec<bool>) -> Self {
        FadingRealization { bits }
    }

    /// Decodes the integer index used by truth tables.
    pub fn from_index(num_blocks: u8, a: usize) -> Self {
        FadingRealization {
            bits: (0..num_blocks).map(|m| (a >> m) & 1 == 1).collect(),
        }
    }

    pub fn index(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0, |acc, (m, &b)| acc | (b as usize) << m)
    }

    pub fn num_blocks(&self) -> usize {
        self.bits.len()
    }

    pub fn block(&self, m: usize) -> bool {
        self.bits[m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(f: &FadingFunction) -> String {
        (0..1usize << f.num_blocks())
            .map(|a| if f.eval(a) { '1' } else { '0' })
            .collect()
    }

    #[test]
    fn and_of_atoms() {
        let a0 = FadingFunction::atom(2, 0);
        let a1 = FadingFunction::atom(2, 1);
        assert_eq!(bits(&a0.and(&a1).unwrap()), "0001");
        assert_eq!(a0.and(&a0).unwrap(), a0);
        let near_one = FadingFunction::full_diversity(2);
        assert_eq!(a0.and(&near_one).unwrap(), a0);
    }

    #[test]
    fn or_of_atoms_is_full_diversity() {
        let a0 = FadingFunction::atom(2, 0);
        let a1 = FadingFunction::atom(2, 1);
        let or = a0.or(&a1).unwrap();
        assert_eq!(bits(&or), "0111");
        assert_eq!(or, FadingFunction::full_diversity(2));
        assert_eq!(a0.or(&FadingFunction::zero(2)).unwrap(), a0);
        assert_eq!(a0.and(&a1).unwrap().or(&a0).unwrap(), a0);
    }

    #[test]
    fn mismatched_block_counts() {
        let err = FadingFunction::atom(2, 0).and(&FadingFunction::atom(3, 0));
        assert!(matches!(err, Err(Error::BlockCountMismatch(2, 3))));
    }

    #[test]
    fn diversity_order_examples() {
        assert_eq!(FadingFunction::full_diversity(2).diversity_order(), 2);
        assert_eq!(FadingFunction::atom(2, 0).diversity_order(), 1);
        let prod = (0..3)
            .map(|m| FadingFunction::atom(3, m))
            .reduce(|x, y| x.and(&y).unwrap())
            .unwrap();
        assert_eq!(prod.diversity_order(), 1);
        assert_eq!(FadingFunction::zero(4).diversity_order(), 0);
        // Majority of three blocks fails once two blocks fade.
        let maj = FadingFunction::from_fn(3, |a| a.count_ones() >= 2);
        assert_eq!(maj.diversity_order(), 2);
    }

    #[test]
    fn large_tables() {
        for m in [6u8, 7, 10] {
            let full = (0..m)
                .map(|b| FadingFunction::atom(m, b))
                .reduce(|x, y| x.or(&y).unwrap())
                .unwrap();
            assert_eq!(full, FadingFunction::full_diversity(m));
            assert_eq!(full.diversity_order(), m as u32);
            for b in 0..m {
                let atom = FadingFunction::atom(m, b);
                assert!((0..1usize << m).all(|a| atom.eval(a) == ((a >> b) & 1 == 1)));
            }
        }
    }

    #[test]
    fn hex_round_trip() {
        let f = FadingFunction::full_diversity(2);
        assert_eq!(f.to_hex(), "e");
        let g = FadingFunction::atom(7, 6)
            .and(&FadingFunction::atom(7, 1))
            .unwrap();
        assert_eq!(FadingFunction::from_hex(7, &g.to_hex()).unwrap(), g);
        assert!(FadingFunction::from_hex(2, "1e").is_err());
    }

    #[test]
    fn permutation_moves_atoms() {
        let f = FadingFunction::atom(3, 0);
        assert_eq!(f.permute_blocks(&[2, 0, 1]), FadingFunction::atom(3, 2));
    }

    #[test]
    fn realization_index() {
        let r = FadingRealization::new(vec![true, false, true]);
        assert_eq!(r.index(), 0b101);
        assert_eq!(FadingRealization::from_index(3, 5), r);
    }
}
