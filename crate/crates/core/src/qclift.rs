//! Quasi-cyclic lifting of a rate-selected protograph.
//!
//! Each base entry `(j, i)` with shift `s` becomes a `Z × Z` circulant: lifted
//! row `jZ + r` connects lifted column `iZ + ((r + s) mod Z)`, i.e. the
//! identity shifted right by `s`. Parallel edges contribute one circulant
//! each.

use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::mapping::BlockMapping;
use crate::protograph::{BaseGraph, RateSelection};

/// Binary parity-check matrix of a lifted code.
#[derive(Debug)]
pub struct LiftedCode {
    z: usize,
    proto_cols: usize,
    info_cols: usize,
    /// Sorted column indices per row.
    rows: Vec<Vec<u32>>,
    punctured_cols: Vec<usize>,
    encoder: OnceLock<std::result::Result<Encoder, (usize, usize)>>,
}

impl Clone for LiftedCode {
    fn clone(&self) -> Self {
        LiftedCode {
            z: self.z,
            proto_cols: self.proto_cols,
            info_cols: self.info_cols,
            rows: self.rows.clone(),
            punctured_cols: self.punctured_cols.clone(),
            encoder: OnceLock::new(),
        }
    }
}

impl PartialEq for LiftedCode {
    fn eq(&self, other: &Self) -> bool {
        self.z == other.z
            && self.proto_cols == other.proto_cols
            && self.info_cols == other.info_cols
            && self.rows == other.rows
            && self.punctured_cols == other.punctured_cols
    }
}

/// Expands the active part of `bg` by its lifting size.
pub fn lift(bg: &BaseGraph, sel: &RateSelection) -> Result<LiftedCode> {
    let z = bg.lifting_size() as usize;
    let mut rows = vec![Vec::new(); sel.active_rows * z];
    for e in bg.active_edges(sel) {
        if e.shift as usize >= z {
            return Err(Error::OutOfRange {
                what: "shift",
                detail: format!(
                    "entry ({}, {}) has shift {} with Z = {z}",
                    e.row, e.col, e.shift
                ),
            });
        }
        for r in 0..z {
            let col = e.col * z + (r + e.shift as usize) % z;
            rows[e.row * z + r].push(col as u32);
        }
    }
    for (r, cols) in rows.iter_mut().enumerate() {
        cols.sort_unstable();
        if cols.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invariant(format!(
                "lifted row {r} repeats a column: parallel edges with equal shifts cancel over GF(2)"
            )));
        }
    }
    let punctured_cols = (0..sel.active_cols)
        .filter(|&c| bg.is_punctured(c))
        .collect();
    Ok(LiftedCode {
        z,
        proto_cols: sel.active_cols,
        info_cols: sel.info_cols,
        rows,
        punctured_cols,
        encoder: OnceLock::new(),
    })
}

impl LiftedCode {
    pub fn z(&self) -> usize {
        self.z
    }

    /// Number of lifted columns, punctured ones included.
    pub fn n(&self) -> usize {
        self.proto_cols * self.z
    }

    /// Number of parity checks.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Number of information bits `K`.
    pub fn k(&self) -> usize {
        self.info_cols * self.z
    }

    /// Number of transmitted bits `N`.
    pub fn transmitted_len(&self) -> usize {
        (self.proto_cols - self.punctured_cols.len()) * self.z
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.rows[r]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    /// Protograph column and circulant offset of lifted column `col`.
    pub fn col_to_proto(&self, col: usize) -> (usize, usize) {
        (col / self.z, col % self.z)
    }

    pub fn is_punctured_bit(&self, col: usize) -> bool {
        self.punctured_cols.contains(&(col / self.z))
    }

    /// All lifted columns of punctured protograph columns.
    pub fn punctured_bits(&self) -> Vec<usize> {
        self.punctured_cols
            .iter()
            .flat_map(|&c| c * self.z..(c + 1) * self.z)
            .collect()
    }

    /// Rows of each column, ascending.
    pub fn columns(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.n()];
        for (r, row) in self.rows.iter().enumerate() {
            for &c in row {
                cols[c as usize].push(r as u32);
            }
        }
        cols
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    pub fn col_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n()];
        for row in &self.rows {
            for &c in row {
                deg[c as usize] += 1;
            }
        }
        deg
    }

    /// `H · word` over GF(2); `word` holds one bit (0/1) per lifted column.
    pub fn syndrome(&self, word: &[u8]) -> Vec<u8> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &c| acc ^ (word[c as usize] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        word.len() == self.n()
            && self
                .rows
                .iter()
                .all(|row| row.iter().fold(0u8, |acc, &c| acc ^ (word[c as usize] & 1)) == 0)
    }

    /// Systematic encoding: the first `K` bits are `info`, the rest are
    /// parity solved from `H_p · p = H_i · u`. The elimination of the parity
    /// part runs once, on first use.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k() {
            return Err(Error::OutOfRange {
                what: "info length",
                detail: format!("got {}, code has K = {}", info.len(), self.k()),
            });
        }
        let enc = self
            .encoder
            .get_or_init(|| Encoder::new(self))
            .as_ref()
            .map_err(|&(rank, size)| Error::SingularParity { rank, size })?;
        Ok(enc.encode(self, info))
    }

    /// Writes the matrix in alist form: dimensions, maximum degrees, column
    /// and row degree lists, then 1-based neighbor lists per column and per
    /// row (no zero padding).
    pub fn to_alist(&self) -> String {
        let cols = self.columns();
        let (cd, rd) = (self.col_degrees(), self.row_degrees());
        let mut out = String::new();
        let join = |v: &mut dyn Iterator<Item = usize>| {
            v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(out, "{} {}", self.n(), self.m());
        let _ = writeln!(
            out,
            "{} {}",
            cd.iter().max().unwrap_or(&0),
            rd.iter().max().unwrap_or(&0)
        );
        let _ = writeln!(out, "{}", join(&mut cd.iter().copied()));
        let _ = writeln!(out, "{}", join(&mut rd.iter().copied()));
        for col in &cols {
            let _ = writeln!(out, "{}", join(&mut col.iter().map(|&r| r as usize + 1)));
        }
        for row in &self.rows {
            let _ = writeln!(out, "{}", join(&mut row.iter().map(|&c| c as usize + 1)));
        }
        out
    }
}

/// Parses an alist file into per-row sorted column lists (0-based). Zero
/// entries (padding used by some tools) are skipped. The column and row
/// sections must describe the same matrix.
pub fn parse_alist(text: &str) -> Result<(usize, Vec<Vec<u32>>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let mut next = |what: &str| -> Result<(usize, Vec<usize>)> {
        let (idx, line) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing {what}"),
        })?;
        let nums = line
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("bad number `{t}` in {what}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((idx + 1, nums))
    };
    let (line, dims) = next("dimensions")?;
    let [n, m] = dims[..] else {
        return Err(Error::Parse {
            line,
            msg: "expected `n m`".into(),
        });
    };
    next("maximum degrees")?;
    let (_, col_deg) = next("column degrees")?;
    let (_, row_deg) = next("row degrees")?;
    if col_deg.len() != n || row_deg.len() != m {
        return Err(Error::Parse {
            line,
            msg: "degree lists do not match the dimensions".into(),
        });
    }
    let mut from_cols = vec![Vec::new(); m];
    for (c, &deg) in col_deg.iter().enumerate() {
        let (line, list) = next("column list")?;
        let list: Vec<usize> = list.into_iter().filter(|&r| r != 0).collect();
        if list.len() != deg || list.iter().any(|&r| r > m) {
            return Err(Error::Parse {
                line,
                msg: format!("column {c} list disagrees with its degree"),
            });
        }
        for r in list {
            from_cols[r - 1].push(c as u32);
        }
    }
    let mut rows = Vec::with_capacity(m);
    for (r, &deg) in row_deg.iter().enumerate() {
        let (line, list) = next("row list")?;
        let mut list: Vec<u32> = list
            .into_iter()
            .filter(|&c| c != 0)
            .map(|c| c as u32 - 1)
            .collect();
        list.sort_unstable();
        if list.len() != deg || list.iter().any(|&c| c as usize >= n) {
            return Err(Error::Parse {
                line,
                msg: format!("row {r} list disagrees with its degree"),
            });
        }
        from_cols[r].sort_unstable();
        if from_cols[r] != list {
            return Err(Error::Parse {
                line,
                msg: format!("row {r} disagrees with the column lists"),
            });
        }
        rows.push(list);
    }
    Ok((n, rows))
}

/// Lifted block index per bit: every bit of protograph column `i` inherits
/// `π(i)`; punctured bits are `None`.
pub fn expand_mapping(mapping: &BlockMapping, z: usize) -> Vec<Option<u8>> {
    mapping
        .assignments()
        .iter()
        .flat_map(|&b| std::iter::repeat_n(b, z))
        .collect()
}

/// Dense inverse of the square parity part, kept as bit rows.
#[derive(Debug)]
struct Encoder {
    words: usize,
    inverse: Vec<Vec<u64>>,
}

fn get_bit(row: &[u64], i: usize) -> bool {
    (row[i / 64] >> (i % 64)) & 1 == 1
}

impl Encoder {
    /// Gauss-Jordan on `[H_p | I]`. Errors with `(rank, size)` when the
    /// parity part is singular.
    fn new(code: &LiftedCode) -> std::result::Result<Self, (usize, usize)> {
        let m = code.m();
        let k = code.k();
        let words = m.div_ceil(64);
        // Left half: H_p, right half: identity.
        let mut a: Vec<Vec<u64>> = (0..m)
            .map(|r| {
                let mut row = vec![0u64; 2 * words];
                for &c in code.row(r) {
                    let c = c as usize;
                    if c >= k {
                        let p = c - k;
                        row[p / 64] |= 1 << (p % 64);
                    }
                }
                row[words + r / 64] |= 1 << (r % 64);
                row
            })
            .collect();
        if code.n() - k != m {
            return Err((0, m));
        }
        for col in 0..m {
            let Some(piv) = (col..m).find(|&r| get_bit(&a[r], col)) else {
                return Err((col, m));
            };
            a.swap(col, piv);
            let (head, tail) = a.split_at_mut(col);
            let (pivot, rest) = tail.split_first_mut().expect("pivot row exists");
            for row in head.iter_mut().chain(rest.iter_mut()) {
                if get_bit(row, col) {
                    for (x, y) in row[col / 64..].iter_mut().zip(&pivot[col / 64..]) {
                        *x ^= y;
                    }
                }
            }
        }
        Ok(Encoder {
            words,
            inverse: a.into_iter().map(|row| row[words..].to_vec()).collect(),
        })
    }

    fn encode(&self, code: &LiftedCode, info: &[u8]) -> Vec<u8> {
        let k = code.k();
        let mut s = vec![0u64; self.words];
        for (r, row) in code.rows().iter().enumerate() {
            let bit = row
                .iter()
                .take_while(|&&c| (c as usize) < k)
                .fold(0u8, |acc, &c| acc ^ (info[c as usize] & 1));
            if bit == 1 {
                s[r / 64] |= 1 << (r % 64);
            }
        }
        let mut word = Vec::with_capacity(code.n());
        word.extend(info.iter().map(|b| b & 1));
        for inv in &self.inverse {
            let parity = inv
                .iter()
                .zip(&s)
                .fold(0u32, |acc, (x, y)| acc ^ (x & y).count_ones())
                & 1;
            word.push(parity as u8);
        }
        word
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protograph::{builtin, select_rate, EdgeSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (BaseGraph, RateSelection) {
        let entries = [((0, 0), EdgeSpec::single(0)), ((0, 1), EdgeSpec::single(1))]
            .into_iter()
            .collect();
        let bg = BaseGraph::new(1, 2, 1, entries, [], 3).unwrap();
        let sel = select_rate(&bg, 1).unwrap();
        (bg, sel)
    }

    #[test]
    fn toy_circulants() {
        let (bg, sel) = toy();
        let code = lift(&bg, &sel).unwrap();
        assert_eq!((code.m(), code.n()), (3, 6));
        // Identity on columns 0..3, right shift by one on columns 3..6.
        assert_eq!(code.rows(), &[vec![0, 4], vec![1, 5], vec![2, 3]]);
        assert_eq!(code.col_to_proto(4), (1, 1));
    }

    #[test]
    fn fiveg_dimensions() {
        let bg1 = builtin::bg1();
        let code = lift(&bg1, &select_rate(&bg1, 26).unwrap()).unwrap();
        assert_eq!((code.m(), code.n()), (6240, 11520));
        assert_eq!(code.transmitted_len(), 11040);
        assert_eq!(code.punctured_bits().len(), 480);

        let bg2 = builtin::bg2();
        let code = lift(&bg2, &select_rate(&bg2, 16).unwrap()).unwrap();
        assert_eq!(code.transmitted_len(), 480);
        assert_eq!(code.k(), 200);
    }

    #[test]
    fn degrees_are_z_fold() {
        let bg2 = builtin::bg2();
        let sel = select_rate(&bg2, 16).unwrap();
        let code = lift(&bg2, &sel).unwrap();
        let z = code.z();
        let mut proto_col = vec![0; sel.active_cols];
        let mut proto_row = vec![0; sel.active_rows];
        for e in bg2.active_edges(&sel) {
            proto_col[e.col] += 1;
            proto_row[e.row] += 1;
        }
        let cd = code.col_degrees();
        let rd = code.row_degrees();
        for c in 0..code.n() {
            assert_eq!(cd[c], proto_col[c / z]);
        }
        for r in 0..code.m() {
            assert_eq!(rd[r], proto_row[r / z]);
        }
    }

    #[test]
    fn equal_parallel_shifts_are_rejected() {
        let entries = [
            ((0, 0), EdgeSpec { shifts: vec![1, 1] }),
            ((0, 1), EdgeSpec::single(0)),
        ]
        .into_iter()
        .collect();
        let bg = BaseGraph::new(1, 2, 1, entries, [], 4).unwrap();
        let sel = select_rate(&bg, 1).unwrap();
        assert!(matches!(lift(&bg, &sel), Err(Error::Invariant(_))));
    }

    #[test]
    fn bg2_encoding_gives_codewords() {
        let bg2 = builtin::bg2();
        let code = lift(&bg2, &select_rate(&bg2, 16).unwrap()).unwrap();
        assert_eq!(code.encode(&vec![0; code.k()]).unwrap(), vec![0; code.n()]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
            let word = code.encode(&info).unwrap();
            assert_eq!(&word[..code.k()], &info[..]);
            assert!(code.syndrome(&word).iter().all(|&s| s == 0));
        }
        assert!(code.encode(&[0; 3]).is_err());
    }

    #[test]
    fn singular_parity_is_reported() {
        // Two identical checks on the single parity column.
        let entries = [
            ((0, 0), EdgeSpec::single(0)),
            ((0, 1), EdgeSpec::single(0)),
            ((1, 0), EdgeSpec::single(0)),
            ((1, 2), EdgeSpec::single(0)),
            ((0, 2), EdgeSpec::single(0)),
            ((1, 1), EdgeSpec::single(0)),
        ]
        .into_iter()
        .collect();
        let bg = BaseGraph::new(2, 3, 1, entries, [], 1).unwrap();
        let code = lift(&bg, &select_rate(&bg, 2).unwrap()).unwrap();
        assert!(matches!(
            code.encode(&[1]),
            Err(Error::SingularParity { rank: 1, size: 2 })
        ));
    }

    #[test]
    fn alist_round_trip() {
        let bg2 = builtin::bg2();
        let code = lift(&bg2, &select_rate(&bg2, 16).unwrap()).unwrap();
        let text = code.to_alist();
        let (n, rows) = parse_alist(&text).unwrap();
        assert_eq!(n, code.n());
        assert_eq!(rows, code.rows());
        assert!(parse_alist("2 1\n1 2\n1 1\n2\n1\n1\n1 2\n").is_ok());
        assert!(parse_alist("2 1\n1 2\n1 1\n2\n1\n1\n1\n").is_err());
    }

    #[test]
    fn mapping_expansion() {
        let m = BlockMapping::new(2, vec![Some(0), Some(0), Some(1)]).unwrap();
        let bits = expand_mapping(&m, 4);
        assert_eq!(bits.iter().filter(|&&b| b == Some(0)).count(), 8);
        assert_eq!(bits.iter().filter(|&&b| b == Some(1)).count(), 4);
        assert_eq!(expand_mapping(&m, 1), m.assignments());
    }
}
