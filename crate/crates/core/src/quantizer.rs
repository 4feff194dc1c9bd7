//! IB-quantization codes.
//!
//! A length-`n` code with `M` codewords maps every source block `xⁿ` to an
//! index (the encoder table) and every index to a block `tⁿ` (the codebook).
//! Its distortion is the per-position KL between `p_{Y|X}` and the
//! conditional `p_{Y_i|T_i}` that the code itself induces.
//!
//! Indices are zero-based throughout: codeword `0` is the fallback the
//! typicality encoder emits when no codeword is jointly typical.
//! Source blocks are enumerated lexicographically with the first symbol most
//! significant.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ib::{encoder_rate, expected_ib_distortion, induced_y_given_t, joint_xt, IbError, KL_FLOOR};
use crate::prob::{
    conditional_y_given_x, kl_divergence_floored, ConditionalDistribution, JointDistribution,
};
use crate::seed::SeedStream;
use crate::typicality::{product_index, CountBounds};

/// Largest `|X|^n` (or codebook size) that is enumerated exactly.
pub const MAX_ENUMERATION: u64 = 1_000_000;
/// Largest brute-force search space `M^{|X|^n} · |T|^{nM}`.
pub const MAX_SEARCH: f64 = 1e8;

#[derive(Debug, Error)]
pub enum QuantizerError {
    #[error("enumeration of {size} items exceeds the limit of {limit}")]
    EnumerationTooLarge { size: f64, limit: u64 },

    #[error("brute-force search space {size:.3e} exceeds the limit of {limit:.0e}")]
    SearchTooLarge { size: f64, limit: f64 },

    #[error("invalid code: {0}")]
    InvalidCode(String),

    #[error(transparent)]
    Ib(#[from] IbError),
}

pub type Result<T> = std::result::Result<T, QuantizerError>;

/// An `(n, M)` IB-quantization code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IbCode {
    n: usize,
    x_size: usize,
    t_size: usize,
    /// Codeword index for every source block, in lexicographic block order.
    encoder_table: Vec<usize>,
    /// `M` blocks of length `n` over the bottleneck alphabet.
    codebook: Vec<Vec<usize>>,
}

fn pow_checked(base: usize, exp: usize) -> Option<u64> {
    (base as u64).checked_pow(u32::try_from(exp).ok()?)
}

/// Number of source blocks, guarded by [`MAX_ENUMERATION`].
pub fn block_count(x_size: usize, n: usize) -> Result<usize> {
    match pow_checked(x_size, n) {
        Some(c) if c <= MAX_ENUMERATION => Ok(c as usize),
        _ => Err(QuantizerError::EnumerationTooLarge {
            size: (x_size as f64).powi(n as i32),
            limit: MAX_ENUMERATION,
        }),
    }
}

/// Symbols of block number `index` (first symbol most significant).
pub fn block_symbols(mut index: usize, n: usize, alphabet: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = index % alphabet;
        index /= alphabet;
    }
    out
}

/// Inverse of [`block_symbols`].
pub fn block_index(symbols: &[usize], alphabet: usize) -> usize {
    symbols.iter().fold(0, |acc, &s| acc * alphabet + s)
}

impl IbCode {
    pub fn new(
        n: usize,
        x_size: usize,
        t_size: usize,
        encoder_table: Vec<usize>,
        codebook: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if n == 0 || x_size == 0 || t_size == 0 || codebook.is_empty() {
            return Err(QuantizerError::InvalidCode(
                "n, alphabets and codebook must be non-empty".into(),
            ));
        }
        let blocks = block_count(x_size, n)?;
        if encoder_table.len() != blocks {
            return Err(QuantizerError::InvalidCode(format!(
                "encoder table has {} entries, expected {blocks}",
                encoder_table.len()
            )));
        }
        if let Some(&bad) = encoder_table.iter().find(|&&m| m >= codebook.len()) {
            return Err(QuantizerError::InvalidCode(format!(
                "encoder emits index {bad} but the codebook has {} rows",
                codebook.len()
            )));
        }
        for row in &codebook {
            if row.len() != n || row.iter().any(|&t| t >= t_size) {
                return Err(QuantizerError::InvalidCode(format!(
                    "codeword {row:?} is not a length-{n} block over {t_size} symbols"
                )));
            }
        }
        Ok(Self {
            n,
            x_size,
            t_size,
            encoder_table,
            codebook,
        })
    }

    /// `n = 1`, `f(x) = x`, `g(m) = m`.
    pub fn identity(x_size: usize) -> Self {
        Self {
            n: 1,
            x_size,
            t_size: x_size,
            encoder_table: (0..x_size).collect(),
            codebook: (0..x_size).map(|t| vec![t]).collect(),
        }
    }

    /// A single codeword of all zeros.
    pub fn constant(x_size: usize, n: usize, t_size: usize) -> Result<Self> {
        let blocks = block_count(x_size, n)?;
        Self::new(n, x_size, t_size, vec![0; blocks], vec![vec![0; n]])
    }

    /// The length-2 code applying `self` (a scalar code) independently twice:
    /// index `a·M + b`, codeword `(g(a), g(b))`.
    pub fn product_square(&self) -> Result<Self> {
        if self.n != 1 {
            return Err(QuantizerError::InvalidCode("product of a non-scalar code".into()));
        }
        let m = self.codebook.len();
        let mut table = Vec::with_capacity(self.x_size * self.x_size);
        for x1 in 0..self.x_size {
            for x2 in 0..self.x_size {
                table.push(self.encoder_table[x1] * m + self.encoder_table[x2]);
            }
        }
        let mut codebook = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                codebook.push(vec![self.codebook[a][0], self.codebook[b][0]]);
            }
        }
        Self::new(2, self.x_size, self.t_size, table, codebook)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn t_size(&self) -> usize {
        self.t_size
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook.len()
    }

    pub fn encoder_table(&self) -> &[usize] {
        &self.encoder_table
    }

    pub fn codebook(&self) -> &[Vec<usize>] {
        &self.codebook
    }

    pub fn encode(&self, x: &[usize]) -> usize {
        self.encoder_table[block_index(x, self.x_size)]
    }

    pub fn decode(&self, m: usize) -> &[usize] {
        &self.codebook[m]
    }

    /// `log2(M) / n`.
    pub fn rate_bits(&self) -> f64 {
        (self.codebook.len() as f64).log2() / self.n as f64
    }

    /// `ln(M) / n`.
    pub fn rate_nats(&self) -> f64 {
        (self.codebook.len() as f64).ln() / self.n as f64
    }
}

/// Per-position channel a code induces.
#[derive(Debug, Clone)]
pub struct PositionChannel {
    /// `p(X_i = x, T_i = t)`.
    pub joint_xt: JointDistribution,
    /// `p_{Y_i|T_i}`.
    pub y_given_t: ConditionalDistribution,
}

#[derive(Debug, Clone)]
pub struct InducedChannel {
    pub positions: Vec<PositionChannel>,
}

fn check_code(code: &IbCode, j: &JointDistribution) -> Result<()> {
    if code.x_size != j.x_size() {
        return Err(QuantizerError::InvalidCode(format!(
            "code source alphabet {} differs from joint's {}",
            code.x_size,
            j.x_size()
        )));
    }
    Ok(())
}

/// `p(X_i = x, M = m)` for every position, flattened `[i][x][m]`.
fn position_index_joint(table: &[usize], m_size: usize, n: usize, p_x: &[f64]) -> Vec<f64> {
    let x_size = p_x.len();
    let mut acc = vec![0.0; n * x_size * m_size];
    let mut digits = vec![0usize; n];
    for (block, &m) in table.iter().enumerate() {
        let mut prob = 1.0;
        for &d in &digits {
            prob *= p_x[d];
        }
        if prob > 0.0 {
            for (i, &x) in digits.iter().enumerate() {
                acc[(i * x_size + x) * m_size + m] += prob;
            }
        }
        if block + 1 < table.len() {
            for slot in digits.iter_mut().rev() {
                *slot += 1;
                if *slot < x_size {
                    break;
                }
                *slot = 0;
            }
        }
    }
    acc
}

fn y_given_t_from_xt(
    p_xt: &[f64],
    x_size: usize,
    t_size: usize,
    p_y_x: &ConditionalDistribution,
) -> ConditionalDistribution {
    let y_size = p_y_x.to_size();
    let mut rows = vec![0.0; t_size * y_size];
    for t in 0..t_size {
        let pt: f64 = (0..x_size).map(|x| p_xt[x * t_size + t]).sum();
        let row = &mut rows[t * y_size..(t + 1) * y_size];
        if pt > 0.0 {
            for x in 0..x_size {
                let w = p_xt[x * t_size + t] / pt;
                if w > 0.0 {
                    for (r, &py) in row.iter_mut().zip(p_y_x.row(x)) {
                        *r += w * py;
                    }
                }
            }
        } else {
            row.iter_mut().for_each(|r| *r = 1.0 / y_size as f64);
        }
    }
    ConditionalDistribution::from_weights(t_size, y_size, rows).expect("induced rows are positive")
}

fn distortion_of_position(
    p_xt: &[f64],
    x_size: usize,
    t_size: usize,
    p_y_x: &ConditionalDistribution,
) -> f64 {
    let y_t = y_given_t_from_xt(p_xt, x_size, t_size, p_y_x);
    let mut d = 0.0;
    for x in 0..x_size {
        for t in 0..t_size {
            let w = p_xt[x * t_size + t];
            if w > 0.0 {
                d += w * kl_divergence_floored(p_y_x.row(x), y_t.row(t), KL_FLOOR);
            }
        }
    }
    d
}

/// Per-position `(X_i, T_i)` joints and `p_{Y_i|T_i}` by exact enumeration of
/// all `|X|^n` source blocks.
pub fn induce_position_conditionals(code: &IbCode, j: &JointDistribution) -> Result<InducedChannel> {
    check_code(code, j)?;
    let m_size = code.codebook_size();
    let x_size = code.x_size;
    let t_size = code.t_size;
    let p_y_x = conditional_y_given_x(j);
    let xm = position_index_joint(&code.encoder_table, m_size, code.n, &j.marginal_x());
    let mut positions = Vec::with_capacity(code.n);
    for i in 0..code.n {
        let mut p_xt = vec![0.0; x_size * t_size];
        for x in 0..x_size {
            for (m, cw) in code.codebook.iter().enumerate() {
                p_xt[x * t_size + cw[i]] += xm[(i * x_size + x) * m_size + m];
            }
        }
        let y_given_t = y_given_t_from_xt(&p_xt, x_size, t_size, &p_y_x);
        let joint_xt = JointDistribution::new(x_size, t_size, p_xt)
            .map_err(|e| QuantizerError::InvalidCode(e.to_string()))?;
        positions.push(PositionChannel { joint_xt, y_given_t });
    }
    Ok(InducedChannel { positions })
}

/// `E d̄_IB` of a code under its own induced conditionals, in nats.
pub fn code_expected_distortion(code: &IbCode, j: &JointDistribution) -> Result<f64> {
    let channel = induce_position_conditionals(code, j)?;
    let p_y_x = conditional_y_given_x(j);
    let mut total = 0.0;
    for pos in &channel.positions {
        total += distortion_of_position(pos.joint_xt.as_slice(), code.x_size, code.t_size, &p_y_x);
    }
    Ok(total / code.n as f64)
}

/// Brute-force search space size `M^{|X|^n} · |T|^{nM}`.
pub fn search_space(x_size: usize, n: usize, m: usize, t_size: usize) -> f64 {
    let blocks = (x_size as f64).powi(n as i32);
    (m as f64).powf(blocks) * (t_size as f64).powf((n * m) as f64)
}

/// Advances `digits` as a base-`base` counter (last digit fastest).
/// Returns `false` after wrapping past the last value.
fn advance(digits: &mut [usize], base: usize) -> bool {
    for slot in digits.iter_mut().rev() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Exhaustive search over every encoder table and codebook for the code of
/// minimum [`code_expected_distortion`]. Ties (within 1e-14) keep the
/// lexicographically smallest `(encoder_table, codebook)`.
pub fn brute_force_optimal_code(
    j: &JointDistribution,
    n: usize,
    m: usize,
    t_size: usize,
) -> Result<(IbCode, f64)> {
    let space = search_space(j.x_size(), n, m, t_size);
    if !(space <= MAX_SEARCH) {
        return Err(QuantizerError::SearchTooLarge {
            size: space,
            limit: MAX_SEARCH,
        });
    }
    if n == 0 || m == 0 || t_size == 0 {
        return Err(QuantizerError::InvalidCode("n, M and |T| must be positive".into()));
    }
    let x_size = j.x_size();
    let blocks = block_count(x_size, n)?;
    let p_x = j.marginal_x();
    let p_y_x = conditional_y_given_x(j);

    let mut best: Option<(Vec<usize>, Vec<usize>, f64)> = None;
    let mut table = vec![0usize; blocks];
    let mut p_xt = vec![0.0; x_size * t_size];
    loop {
        let xm = position_index_joint(&table, m, n, &p_x);
        let mut book = vec![0usize; n * m];
        loop {
            let mut d = 0.0;
            for i in 0..n {
                p_xt.iter_mut().for_each(|v| *v = 0.0);
                for x in 0..x_size {
                    for cw in 0..m {
                        p_xt[x * t_size + book[cw * n + i]] += xm[(i * x_size + x) * m + cw];
                    }
                }
                d += distortion_of_position(&p_xt, x_size, t_size, &p_y_x);
            }
            d /= n as f64;
            if best.as_ref().is_none_or(|b| d < b.2 - 1e-14) {
                best = Some((table.clone(), book.clone(), d));
            }
            if !advance(&mut book, t_size) {
                break;
            }
        }
        if !advance(&mut table, m) {
            break;
        }
    }
    let (table, book, d) = best.expect("search space is non-empty");
    let codebook = book.chunks(n).map(<[usize]>::to_vec).collect();
    Ok((IbCode::new(n, x_size, t_size, table, codebook)?, d))
}

/// `M` i.i.d. blocks of length `n` drawn from `p_t`, row-major from `rng`.
pub fn random_codebook_with<R: Rng>(p_t: &[f64], n: usize, m: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let dist = WeightedIndex::new(p_t).expect("p_t is a distribution");
    (0..m)
        .map(|_| (0..n).map(|_| dist.sample(rng)).collect())
        .collect()
}

/// [`random_codebook_with`] on a generator seeded with `seed`.
pub fn random_codebook(p_t: &[f64], n: usize, m: usize, seed: u64) -> Vec<Vec<usize>> {
    random_codebook_with(p_t, n, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Joint typicality encoder: the smallest index whose codeword is jointly
/// ε-typical with `x` under `p_xt`, or `0` if there is none.
pub fn typicality_encode(x: &[usize], codebook: &[Vec<usize>], p_xt: &JointDistribution, eps: f64) -> usize {
    let bounds = CountBounds::new(x.len(), p_xt.as_slice(), eps);
    typicality_encode_with(x, codebook, p_xt.y_size(), &bounds).unwrap_or(0)
}

/// Like [`typicality_encode`] with precomputed bounds; `None` when no codeword
/// is typical.
pub fn typicality_encode_with(
    x: &[usize],
    codebook: &[Vec<usize>],
    t_size: usize,
    bounds: &CountBounds,
) -> Option<usize> {
    let mut counts = vec![0u64; bounds.cells()];
    codebook.iter().position(|cw| {
        counts.iter_mut().for_each(|c| *c = 0);
        for (&xi, &ti) in x.iter().zip(cw) {
            counts[product_index(xi, ti, t_size)] += 1;
        }
        bounds.admits(&counts)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AchievabilityRow {
    pub n: usize,
    pub codebook_size: usize,
    pub rate_bits: f64,
    pub mean_distortion: f64,
    pub stderr: f64,
    /// Fraction of trials in which some codeword was jointly typical.
    pub success_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AchievabilityReport {
    /// `I(X;T)` of the test channel, in bits.
    pub test_channel_rate_bits: f64,
    /// `E d_IB` of the test channel, in nats.
    pub test_channel_distortion: f64,
    pub rate_margin_bits: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub rows: Vec<AchievabilityRow>,
}

/// Random-codebook / joint-typicality experiment.
///
/// For every `n`, each trial draws a fresh codebook of
/// `M = ⌈2^{n(I(X;T) + margin)}⌉` blocks from `p_T`, a source block from
/// `p_X`, encodes it with [`typicality_encode`], decodes `tⁿ = tⁿ(m)`, and
/// scores `(1/n) Σ_i KL(p_{Y|X}(·|x_i) ‖ p_{Y|T}(·|t_i))` with the
/// single-letter `p_{Y|T}` of the test channel.
#[allow(clippy::too_many_arguments)]
pub fn achievability_experiment(
    j: &JointDistribution,
    enc: &ConditionalDistribution,
    rate_margin_bits: f64,
    n_list: &[usize],
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<AchievabilityReport> {
    let p_xt = joint_xt(j, enc)?;
    let info_bits = encoder_rate(j, enc)? / std::f64::consts::LN_2;
    let (p_t, p_y_t) = induced_y_given_t(j, enc)?;
    let p_y_x = conditional_y_given_x(j);
    let (x_size, t_size) = (j.x_size(), enc.to_size());
    let mut score = vec![0.0; x_size * t_size];
    for x in 0..x_size {
        for t in 0..t_size {
            score[x * t_size + t] = kl_divergence_floored(p_y_x.row(x), p_y_t.row(t), KL_FLOOR);
        }
    }
    let source = WeightedIndex::new(j.marginal_x()).expect("p_X is a distribution");
    let seeds = SeedStream::new(seed);

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let size = (n as f64 * (info_bits + rate_margin_bits)).exp2().ceil();
        if !(size <= MAX_ENUMERATION as f64) {
            return Err(QuantizerError::EnumerationTooLarge {
                size,
                limit: MAX_ENUMERATION,
            });
        }
        let m = (size as usize).max(1);
        let bounds = CountBounds::new(n, p_xt.as_slice(), eps);
        let per_n = seeds.child("achievability-n", n as u64);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut successes = 0usize;
        for trial in 0..trials {
            let mut rng = per_n.rng("trial", trial as u64);
            let codebook = random_codebook_with(&p_t, n, m, &mut rng);
            let x: Vec<usize> = (0..n).map(|_| source.sample(&mut rng)).collect();
            let index = match typicality_encode_with(&x, &codebook, t_size, &bounds) {
                Some(idx) => {
                    successes += 1;
                    idx
                }
                None => 0,
            };
            let t = &codebook[index];
            let d = x
                .iter()
                .zip(t)
                .map(|(&xi, &ti)| score[xi * t_size + ti])
                .sum::<f64>()
                / n as f64;
            sum += d;
            sum_sq += d * d;
        }
        let count = trials.max(1) as f64;
        let mean = sum / count;
        let var = if trials > 1 {
            ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0)
        } else {
            0.0
        };
        rows.push(AchievabilityRow {
            n,
            codebook_size: m,
            rate_bits: (m as f64).log2() / n as f64,
            mean_distortion: mean,
            stderr: (var / count).sqrt(),
            success_rate: successes as f64 / count,
        });
    }
    Ok(AchievabilityReport {
        test_channel_rate_bits: info_bits,
        test_channel_distortion: expected_ib_distortion(j, enc)?,
        rate_margin_bits,
        epsilon: eps,
        trials,
        rows,
    })
}
