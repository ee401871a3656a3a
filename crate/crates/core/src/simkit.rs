//! Monte Carlo BLER estimation on a Rayleigh block-fading channel.
//!
//! Each codeword sees `M` independent coefficients `h_m ~ CN(0, 1)`, one per
//! fading block, that stay fixed over the block. BPSK maps bit `c` to
//! `s = 1 − 2c`; the receiver observes `y = h_m s + n` with complex AWGN of
//! variance `N0/2` per dimension, where `Es/N0 = γ` and `Es = 1`. Detection is
//! coherent: `L = 4 Re(h_m* y) / N0`. Punctured bits get `L = 0`.
//!
//! The decoder is flooding min-sum. Every trial draws its randomness from its
//! own ChaCha stream, keyed by the run seed, the SNR point and the trial
//! index, so results do not depend on the number of worker threads.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mapping::BlockMapping;
use crate::qclift::{expand_mapping, LiftedCode};

/// Magnitude cap for channel LLRs and min-sum messages. Pure min-sum is
/// scale invariant, so the cap only guards against overflow at extreme SNR.
pub const LLR_MAX: f32 = 1.0e6;

/// Block errors needed at every point before a slope is fitted.
pub const MIN_SLOPE_ERRORS: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub num_blocks: u8,
    /// `Es/N0` points in dB, strictly increasing.
    pub snr_db: Vec<f64>,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 {
            return Err(Error::Config(
                "at least one fading block is required".into(),
            ));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("the SNR grid is empty".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR points must be finite".into()));
        }
        if self.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "SNR points must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    pub max_iters: usize,
    /// Stop as soon as the hard decisions satisfy every check.
    pub early_stop: bool,
    /// Normalization factor applied to check-node outputs; 1.0 is plain
    /// min-sum.
    pub scaling: f32,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            max_iters: 50,
            early_stop: true,
            scaling: 1.0,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.scaling > 0.0 && self.scaling <= 1.0) {
            return Err(Error::Config(format!(
                "scaling {} is outside (0, 1]",
                self.scaling
            )));
        }
        Ok(())
    }
}

/// Draws one coefficient per block from `CN(0, 1)`.
pub fn draw_fading(num_blocks: u8, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..num_blocks)
        .map(|_| complex_gaussian(0.5, rng))
        .collect()
}

fn complex_gaussian(var_per_dim: f64, rng: &mut impl Rng) -> Complex64 {
    let sd = var_per_dim.sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// Sends `codeword` through the channel with the given coefficients and
/// returns per-bit LLRs (positive favors bit 0).
pub fn transmit_with_fading(
    codeword: &[u8],
    block_of_bit: &[Option<u8>],
    gamma: f64,
    fading: &[Complex64],
    rng: &mut impl Rng,
) -> Vec<f32> {
    let n0 = 1.0 / gamma;
    codeword
        .iter()
        .zip(block_of_bit)
        .map(|(&c, &block)| match block {
            None => 0.0,
            Some(m) => {
                let h = fading[m as usize];
                let s = if c & 1 == 0 { 1.0 } else { -1.0 };
                let y = h * s + complex_gaussian(n0 / 2.0, rng);
                let llr = 4.0 * (h.conj() * y).re / n0;
                (llr as f32).clamp(-LLR_MAX, LLR_MAX)
            }
        })
        .collect()
}

/// Draws fresh fading coefficients and transmits `codeword`. `gamma` is the
/// linear `Es/N0`.
pub fn transmit(
    codeword: &[u8],
    block_of_bit: &[Option<u8>],
    num_blocks: u8,
    gamma: f64,
    rng: &mut impl Rng,
) -> Vec<f32> {
    let fading = draw_fading(num_blocks, rng);
    transmit_with_fading(codeword, block_of_bit, gamma, &fading, rng)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    pub iterations: usize,
    /// The hard decisions satisfy every parity check.
    pub converged: bool,
}

/// Flooding min-sum decoder over a fixed parity-check matrix. Messages live
/// on edges stored row by row.
#[derive(Debug, Clone)]
pub struct MinSumDecoder {
    n: usize,
    row_start: Vec<usize>,
    edge_col: Vec<u32>,
    /// Edge indices of each column.
    col_edges: Vec<Vec<u32>>,
}

/// Per-thread message buffers.
#[derive(Debug, Clone, Default)]
pub struct DecoderScratch {
    v2c: Vec<f32>,
    c2v: Vec<f32>,
    total: Vec<f32>,
    bits: Vec<u8>,
}

impl MinSumDecoder {
    pub fn new(code: &LiftedCode) -> Self {
        let mut row_start = vec![0];
        let mut edge_col = Vec::new();
        let mut col_edges = vec![Vec::new(); code.n()];
        for row in code.rows() {
            for &c in row {
                col_edges[c as usize].push(edge_col.len() as u32);
                edge_col.push(c);
            }
            row_start.push(edge_col.len());
        }
        MinSumDecoder {
            n: code.n(),
            row_start,
            edge_col,
            col_edges,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn decode(&self, llr: &[f32], cfg: &DecoderConfig) -> DecodeOutcome {
        let mut scratch = DecoderScratch::default();
        let (iterations, converged) = self.decode_with(llr, cfg, &mut scratch);
        DecodeOutcome {
            bits: scratch.bits,
            iterations,
            converged,
        }
    }

    /// Decodes into `scratch.bits`; returns `(iterations, converged)`.
    pub fn decode_with(
        &self,
        llr: &[f32],
        cfg: &DecoderConfig,
        scratch: &mut DecoderScratch,
    ) -> (usize, bool) {
        assert_eq!(llr.len(), self.n, "one LLR per code bit");
        let edges = self.edge_col.len();
        scratch.v2c.clear();
        scratch
            .v2c
            .extend(self.edge_col.iter().map(|&c| llr[c as usize]));
        scratch.c2v.clear();
        scratch.c2v.resize(edges, 0.0);
        scratch.total.clear();
        scratch.total.extend_from_slice(llr);
        scratch.bits.clear();
        scratch.bits.resize(self.n, 0);

        let mut iterations = 0;
        let mut converged = false;
        while iterations < cfg.max_iters {
            iterations += 1;
            self.check_update(cfg.scaling, scratch);
            self.variable_update(llr, scratch);
            if cfg.early_stop || iterations == cfg.max_iters {
                converged = self.syndrome_ok(&scratch.bits);
                if converged && cfg.early_stop {
                    break;
                }
            }
        }
        (iterations, converged)
    }

    fn check_update(&self, scaling: f32, s: &mut DecoderScratch) {
        for r in 0..self.row_start.len() - 1 {
            let (lo, hi) = (self.row_start[r], self.row_start[r + 1]);
            let (mut min1, mut min2, mut arg) = (f32::INFINITY, f32::INFINITY, lo);
            let mut negative = false;
            for e in lo..hi {
                let v = s.v2c[e];
                negative ^= v.is_sign_negative() && v != 0.0;
                let a = v.abs();
                if a < min1 {
                    min2 = min1;
                    min1 = a;
                    arg = e;
                } else if a < min2 {
                    min2 = a;
                }
            }
            for e in lo..hi {
                let v = s.v2c[e];
                let mag = if e == arg { min2 } else { min1 };
                // Extrinsic sign: the row parity with this edge's sign removed.
                let neg = negative ^ (v.is_sign_negative() && v != 0.0);
                let out = (scaling * mag).min(LLR_MAX);
                s.c2v[e] = if neg { -out } else { out };
            }
        }
    }

    fn variable_update(&self, llr: &[f32], s: &mut DecoderScratch) {
        for (c, edges) in self.col_edges.iter().enumerate() {
            let total = edges.iter().fold(llr[c], |acc, &e| acc + s.c2v[e as usize]);
            s.total[c] = total;
            // A tie at exactly zero decides bit 0.
            s.bits[c] = (total < 0.0) as u8;
            for &e in edges {
                let e = e as usize;
                s.v2c[e] = (total - s.c2v[e]).clamp(-LLR_MAX, LLR_MAX);
            }
        }
    }

    fn syndrome_ok(&self, bits: &[u8]) -> bool {
        (0..self.row_start.len() - 1).all(|r| {
            self.edge_col[self.row_start[r]..self.row_start[r + 1]]
                .iter()
                .fold(0u8, |acc, &c| acc ^ bits[c as usize])
                == 0
        })
    }
}

/// Decodes `llr` with flooding min-sum. Returns hard decisions, iterations
/// run and whether the decisions form a codeword.
pub fn min_sum_decode(code: &LiftedCode, llr: &[f32], cfg: &DecoderConfig) -> DecodeOutcome {
    MinSumDecoder::new(code).decode(llr, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub trials_per_point: u64,
    pub seed: u64,
    /// Stop a point once this many block errors are seen (0 disables).
    pub stop_at_errors: u64,
    /// Encode uniformly random information words instead of sending the
    /// all-zero codeword.
    pub random_data: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_point == 0 {
            return Err(Error::Config("trials_per_point must be at least 1".into()));
        }
        Ok(())
    }
}

/// Estimates at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub block_errors: u64,
    pub info_bit_errors: u64,
    pub bler: f64,
    pub ber: f64,
    /// 95% interval for the BLER from the normal approximation, clipped to
    /// [0, 1].
    pub ci_low: f64,
    pub ci_high: f64,
    /// Seed of this point's trial streams.
    pub seed: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub points: Vec<SimPoint>,
}

impl SimResult {
    /// `snr_db,trials,block_errors,bler,ci_low,ci_high,seed`; wall time is
    /// left out so equal seeds give byte-identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db,trials,block_errors,bler,ci_low,ci_high,seed\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{:.6e},{:.6e},{:.6e},{}",
                p.snr_db, p.trials, p.block_errors, p.bler, p.ci_low, p.ci_high, p.seed
            );
        }
        out
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z =
        seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the trial stream for (`point`, `trial`) under run seed `seed`.
pub fn trial_seed(seed: u64, point: usize, trial: u64) -> u64 {
    seed ^ mix(0x5EED, point as u64, trial)
}

const BATCH: u64 = 1024;

/// Simulates BLER over the SNR grid. Trials run in fixed-size batches; after
/// each batch the error count is accumulated in trial order, and the point
/// stops at the exact trial that reaches `stop_at_errors`, so the result is
/// the same for any thread count.
pub fn run_bler(
    code: &LiftedCode,
    mapping: &BlockMapping,
    ccfg: &ChannelConfig,
    dcfg: &DecoderConfig,
    rcfg: &RunConfig,
) -> Result<SimResult> {
    ccfg.validate()?;
    dcfg.validate()?;
    rcfg.validate()?;
    if mapping.len() * code.z() != code.n() {
        return Err(Error::MappingShape(format!(
            "mapping covers {} columns, code has {}",
            mapping.len(),
            code.n() / code.z()
        )));
    }
    if mapping.num_blocks() != ccfg.num_blocks {
        return Err(Error::BlockCountMismatch(
            mapping.num_blocks(),
            ccfg.num_blocks,
        ));
    }
    for c in 0..mapping.len() {
        let punctured = code.is_punctured_bit(c * code.z());
        if punctured != mapping.block(c).is_none() {
            return Err(Error::MappingShape(format!(
                "column {c} puncturing disagrees with the code"
            )));
        }
    }
    let blocks = expand_mapping(mapping, code.z());
    let decoder = MinSumDecoder::new(code);
    let k = code.k();

    let mut points = Vec::with_capacity(ccfg.snr_db.len());
    for (pi, &snr_db) in ccfg.snr_db.iter().enumerate() {
        let start = Instant::now();
        let gamma = 10f64.powf(snr_db / 10.0);
        let (mut trials, mut block_errors, mut bit_errors) = (0u64, 0u64, 0u64);
        let mut next = 0u64;
        'point: while next < rcfg.trials_per_point {
            let end = (next + BATCH).min(rcfg.trials_per_point);
            let outcomes: Vec<u64> = (next..end)
                .into_par_iter()
                .map_init(DecoderScratch::default, |scratch, t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(rcfg.seed, pi, t));
                    let codeword = if rcfg.random_data {
                        let info: Vec<u8> = (0..k).map(|_| rng.random_range(0..2u8)).collect();
                        code.encode(&info).expect("valid code encodes")
                    } else {
                        vec![0u8; code.n()]
                    };
                    let llr = transmit(&codeword, &blocks, ccfg.num_blocks, gamma, &mut rng);
                    decoder.decode_with(&llr, dcfg, scratch);
                    scratch.bits[..k]
                        .iter()
                        .zip(&codeword[..k])
                        .filter(|(a, b)| a != b)
                        .count() as u64
                })
                .collect();
            for errs in outcomes {
                trials += 1;
                if errs > 0 {
                    block_errors += 1;
                    bit_errors += errs;
                    if rcfg.stop_at_errors > 0 && block_errors >= rcfg.stop_at_errors {
                        break 'point;
                    }
                }
            }
            next = end;
        }
        let n = trials as f64;
        let bler = block_errors as f64 / n;
        let half = 1.96 * (bler * (1.0 - bler) / n).sqrt();
        points.push(SimPoint {
            snr_db,
            trials,
            block_errors,
            info_bit_errors: bit_errors,
            bler,
            ber: bit_errors as f64 / (n * k as f64),
            ci_low: (bler - half).max(0.0),
            ci_high: (bler + half).min(1.0),
            seed: trial_seed(rcfg.seed, pi, 0),
            wall_time: start.elapsed(),
        });
    }
    Ok(SimResult { points })
}

/// Least-squares slope of `−log10 BLER` against `log10 γ` (γ linear), i.e.
/// the empirical diversity order. Every point needs at least
/// [`MIN_SLOPE_ERRORS`] block errors.
pub fn estimate_diversity_slope(points: &[SimPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Config(
            "a slope needs at least two SNR points".into(),
        ));
    }
    if let Some(p) = points.iter().find(|p| p.block_errors < MIN_SLOPE_ERRORS) {
        return Err(Error::InsufficientErrors {
            snr_db: p.snr_db,
            errors: p.block_errors,
            required: MIN_SLOPE_ERRORS,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.snr_db / 10.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| -p.bler.log10()).collect();
    Ok(least_squares_slope(&xs, &ys))
}

/// Slope of the least-squares line through `(xs, ys)`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
