//! Empirical distributions and robust (letter) typicality.
//!
//! A sequence `xⁿ` is ε-typical for `p` when `|π(x|xⁿ) − p(x)| ≤ ε·p(x)` for
//! every symbol. The comparison is carried out on exact rationals built from
//! the stored `f64` values, so the predicate never flips on rounding.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed};
use thiserror::Error;

use crate::prob::JointDistribution;

#[derive(Debug, Error, PartialEq)]
pub enum TypicalityError {
    #[error("sequences have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("symbol {symbol} at position {position} outside alphabet of size {alphabet}")]
    SymbolOutOfRange {
        position: usize,
        symbol: usize,
        alphabet: usize,
    },

    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),

    #[error("sequence length must be positive")]
    EmptySequence,
}

/// A length-`n` sequence over `{0, …, alphabet − 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    symbols: Vec<usize>,
    alphabet: usize,
}

impl SymbolSequence {
    pub fn new(symbols: Vec<usize>, alphabet: usize) -> Result<Self, TypicalityError> {
        if symbols.is_empty() {
            return Err(TypicalityError::EmptySequence);
        }
        if let Some((position, &symbol)) = symbols.iter().enumerate().find(|(_, &s)| s >= alphabet) {
            return Err(TypicalityError::SymbolOutOfRange {
                position,
                symbol,
                alphabet,
            });
        }
        Ok(Self { symbols, alphabet })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypicalityParams {
    pub epsilon: f64,
    pub n: usize,
}

impl TypicalityParams {
    pub fn new(epsilon: f64, n: usize) -> Result<Self, TypicalityError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(TypicalityError::InvalidEpsilon(epsilon));
        }
        if n == 0 {
            return Err(TypicalityError::EmptySequence);
        }
        Ok(Self { epsilon, n })
    }
}

/// Symbol counts of `symbols` over an alphabet of size `alphabet`.
pub fn counts(symbols: &[usize], alphabet: usize) -> Vec<u64> {
    let mut c = vec![0u64; alphabet];
    for &s in symbols {
        c[s] += 1;
    }
    c
}

/// `π(x | xⁿ)`.
pub fn empirical_distribution(s: &SymbolSequence) -> Vec<f64> {
    let n = s.len() as f64;
    counts(&s.symbols, s.alphabet)
        .into_iter()
        .map(|c| c as f64 / n)
        .collect()
}

fn exact(v: f64) -> BigRational {
    BigRational::from_f64(v).expect("finite value")
}

/// Admissible count range of every cell for sequences of length `n`:
/// `count ∈ [⌈n·p·(1−ε)⌉, ⌊n·p·(1+ε)⌋]`, and exactly zero where `p = 0`.
/// Bounds are derived on exact rationals once, so each membership test is a
/// pair of integer comparisons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountBounds {
    lo: Vec<u64>,
    hi: Vec<u64>,
    n: usize,
}

impl CountBounds {
    pub fn new(n: usize, p: &[f64], eps: f64) -> Self {
        let n_big = BigRational::from_integer(BigInt::from(n));
        let one = BigRational::from_integer(BigInt::from(1));
        let eps_big = exact(eps);
        let to_u64 = |r: BigRational| -> u64 {
            if r.is_negative() {
                0
            } else {
                r.to_integer().try_into().unwrap_or(u64::MAX)
            }
        };
        let mut lo = Vec::with_capacity(p.len());
        let mut hi = Vec::with_capacity(p.len());
        for &px in p {
            if px <= 0.0 {
                lo.push(0);
                hi.push(0);
                continue;
            }
            let expected = &n_big * exact(px);
            lo.push(to_u64((&expected * (&one - &eps_big)).ceil()));
            hi.push(to_u64((&expected * (&one + &eps_big)).floor()));
        }
        Self { lo, hi, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of alphabet cells.
    pub fn cells(&self) -> usize {
        self.lo.len()
    }

    /// `(lo, hi)` for cell `i`; empty when `lo > hi`.
    pub fn range(&self, i: usize) -> (u64, u64) {
        (self.lo[i], self.hi[i])
    }

    /// Whether any count vector summing to `n` can satisfy every bound.
    pub fn is_satisfiable(&self) -> bool {
        let n = self.n as u64;
        self.lo.iter().zip(&self.hi).all(|(l, h)| l <= h)
            && self.lo.iter().sum::<u64>() <= n
            && self.hi.iter().sum::<u64>() >= n
    }

    pub fn admits(&self, counts: &[u64]) -> bool {
        debug_assert_eq!(counts.len(), self.lo.len());
        counts
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (l, h))| l <= c && c <= h)
    }
}

/// Exact test of `|count − n·p| ≤ ε·n·p` for every cell.
pub fn counts_are_typical(counts: &[u64], n: usize, p: &[f64], eps: f64) -> bool {
    CountBounds::new(n, p, eps).admits(counts)
}

/// Whether `s` lies in the ε-typical set of `p`.
pub fn is_typical(s: &SymbolSequence, p: &[f64], eps: f64) -> bool {
    assert_eq!(s.alphabet, p.len(), "alphabet size must match the distribution");
    counts_are_typical(&counts(&s.symbols, s.alphabet), s.len(), p, eps)
}

/// Index of the pair `(x, t)` in the product alphabet.
pub fn product_index(x: usize, t: usize, t_size: usize) -> usize {
    x * t_size + t
}

/// Joint typicality of `(xⁿ, tⁿ)` under `p_xt`, treating the pair as one
/// source over the product alphabet indexed `x·|T| + t`.
pub fn is_jointly_typical(
    sx: &[usize],
    st: &[usize],
    p_xt: &JointDistribution,
    eps: f64,
) -> Result<bool, TypicalityError> {
    if sx.len() != st.len() {
        return Err(TypicalityError::LengthMismatch(sx.len(), st.len()));
    }
    let t_size = p_xt.y_size();
    let mut c = vec![0u64; p_xt.x_size() * t_size];
    for (position, (&x, &t)) in sx.iter().zip(st).enumerate() {
        if x >= p_xt.x_size() || t >= t_size {
            return Err(TypicalityError::SymbolOutOfRange {
                position,
                symbol: if x >= p_xt.x_size() { x } else { t },
                alphabet: if x >= p_xt.x_size() { p_xt.x_size() } else { t_size },
            });
        }
        c[product_index(x, t, t_size)] += 1;
    }
    Ok(counts_are_typical(&c, sx.len(), p_xt.as_slice(), eps))
}
