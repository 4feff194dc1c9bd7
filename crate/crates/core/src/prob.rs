//! Exact discrete distributions and information measures.
//!
//! All quantities are in nats. Distributions are plain `&[f64]` slices; the
//! two structured types are [`JointDistribution`] (a row-major `x_size × y_size`
//! grid) and [`ConditionalDistribution`] (a row-stochastic matrix).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validity tolerance on total mass after construction-time renormalization.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Largest deviation from unit mass the file loader will silently renormalize.
pub const LOAD_RENORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ProbError {
    #[error("alphabet sizes must be positive (got {x_size}×{y_size})")]
    EmptyAlphabet { x_size: usize, y_size: usize },

    #[error("expected {expected} probabilities, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid probability {value} at index {index}")]
    InvalidProbability { index: usize, value: f64 },

    #[error("distribution mass {sum} is not within tolerance of 1")]
    NotNormalized { sum: f64 },

    #[error("distributions have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("KL divergence undefined: q[{index}] = 0 but p[{index}] = {p} > 0")]
    AbsoluteContinuityViolation { index: usize, p: f64 },

    #[error("cannot read joint distribution: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed joint distribution file: {0}")]
    Format(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ProbError>;

fn check_entries(p: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (index, &value) in p.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(ProbError::InvalidProbability { index, value });
        }
        sum += value;
    }
    Ok(sum)
}

/// Validate `p` and renormalize it in place when its mass is within
/// `tolerance` of one. Entries already within [`MASS_TOLERANCE`] are kept
/// as given.
fn normalize_within(p: &mut [f64], tolerance: f64) -> Result<()> {
    let sum = check_entries(p)?;
    if (sum - 1.0).abs() > tolerance || sum == 0.0 {
        return Err(ProbError::NotNormalized { sum });
    }
    if (sum - 1.0).abs() > MASS_TOLERANCE {
        for v in p.iter_mut() {
            *v /= sum;
        }
    }
    Ok(())
}

/// Checks that `p` is a distribution (non-negative, finite, mass within
/// [`MASS_TOLERANCE`] of one).
pub fn validate_distribution(p: &[f64]) -> Result<()> {
    let sum = check_entries(p)?;
    if (sum - 1.0).abs() > MASS_TOLERANCE {
        return Err(ProbError::NotNormalized { sum });
    }
    Ok(())
}

/// Exact finite joint distribution `p(x, y)` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    x_size: usize,
    y_size: usize,
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JointFile {
    x_size: usize,
    y_size: usize,
    p: Vec<Vec<f64>>,
}

impl JointDistribution {
    /// Builds a joint from row-major probabilities. Mass must be within
    /// [`MASS_TOLERANCE`] of one; the stored table is renormalized exactly.
    pub fn new(x_size: usize, y_size: usize, p: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(x_size, y_size, p, MASS_TOLERANCE)
    }

    fn with_tolerance(x_size: usize, y_size: usize, mut p: Vec<f64>, tol: f64) -> Result<Self> {
        if x_size == 0 || y_size == 0 {
            return Err(ProbError::EmptyAlphabet { x_size, y_size });
        }
        if p.len() != x_size * y_size {
            return Err(ProbError::ShapeMismatch {
                expected: x_size * y_size,
                got: p.len(),
            });
        }
        normalize_within(&mut p, tol)?;
        Ok(Self { x_size, y_size, p })
    }

    /// Builds a joint from nested rows, e.g. `[[0.4, 0.1], [0.1, 0.4]]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let x_size = rows.len();
        let y_size = rows.first().map_or(0, Vec::len);
        for row in rows {
            if row.len() != y_size {
                return Err(ProbError::ShapeMismatch {
                    expected: y_size,
                    got: row.len(),
                });
            }
        }
        Self::new(x_size, y_size, rows.concat())
    }

    /// `p(x, y) = p_X(x) · channel(y | x)`.
    pub fn from_marginal_and_channel(p_x: &[f64], channel: &ConditionalDistribution) -> Result<Self> {
        if p_x.len() != channel.from_size() {
            return Err(ProbError::LengthMismatch(p_x.len(), channel.from_size()));
        }
        validate_distribution(p_x)?;
        let mut p = Vec::with_capacity(p_x.len() * channel.to_size());
        for (x, &px) in p_x.iter().enumerate() {
            p.extend(channel.row(x).iter().map(|&c| px * c));
        }
        Self::new(p_x.len(), channel.to_size(), p)
    }

    /// Product of two independent marginals.
    pub fn product(p_x: &[f64], p_y: &[f64]) -> Result<Self> {
        validate_distribution(p_x)?;
        validate_distribution(p_y)?;
        let p = p_x
            .iter()
            .flat_map(|&a| p_y.iter().map(move |&b| a * b))
            .collect();
        Self::new(p_x.len(), p_y.len(), p)
    }

    /// Parses the JSON file format `{"x_size", "y_size", "p": [[..], ..]}`.
    /// Mass deviating from one by at most 1e-6 is renormalized.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: JointFile = serde_json::from_str(s)?;
        if file.p.len() != file.x_size {
            return Err(ProbError::ShapeMismatch {
                expected: file.x_size,
                got: file.p.len(),
            });
        }
        for row in &file.p {
            if row.len() != file.y_size {
                return Err(ProbError::ShapeMismatch {
                    expected: file.y_size,
                    got: row.len(),
                });
            }
        }
        Self::with_tolerance(
            file.x_size,
            file.y_size,
            file.p.concat(),
            LOAD_RENORMALIZE_TOLERANCE,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let file = JointFile {
            x_size: self.x_size,
            y_size: self.y_size,
            p: self.rows().map(<[f64]>::to_vec).collect(),
        };
        serde_json::to_string_pretty(&file).expect("joint serializes")
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.p[x * self.y_size + y]
    }

    /// Row-major probabilities.
    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.p.chunks(self.y_size)
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let mut p_y = vec![0.0; self.y_size];
        for row in self.rows() {
            for (acc, &v) in p_y.iter_mut().zip(row) {
                *acc += v;
            }
        }
        p_y
    }

    /// Swaps the roles of X and Y.
    pub fn transpose(&self) -> Self {
        let mut p = vec![0.0; self.p.len()];
        for x in 0..self.x_size {
            for y in 0..self.y_size {
                p[y * self.x_size + x] = self.get(x, y);
            }
        }
        Self {
            x_size: self.y_size,
            y_size: self.x_size,
            p,
        }
    }
}

/// Row-stochastic map `from_size → to_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistribution {
    from_size: usize,
    to_size: usize,
    rows: Vec<f64>,
}

impl ConditionalDistribution {
    /// Builds from row-major entries; every row is validated and renormalized.
    pub fn new(from_size: usize, to_size: usize, mut rows: Vec<f64>) -> Result<Self> {
        if from_size == 0 || to_size == 0 {
            return Err(ProbError::EmptyAlphabet {
                x_size: from_size,
                y_size: to_size,
            });
        }
        if rows.len() != from_size * to_size {
            return Err(ProbError::ShapeMismatch {
                expected: from_size * to_size,
                got: rows.len(),
            });
        }
        for row in rows.chunks_mut(to_size) {
            normalize_within(row, MASS_TOLERANCE)?;
        }
        Ok(Self {
            from_size,
            to_size,
            rows,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let to_size = rows.first().map_or(0, Vec::len);
        for row in rows {
            if row.len() != to_size {
                return Err(ProbError::ShapeMismatch {
                    expected: to_size,
                    got: row.len(),
                });
            }
        }
        Self::new(rows.len(), to_size, rows.concat())
    }

    /// Normalizes each row of non-negative weights. Rows with zero total
    /// weight are rejected.
    pub fn from_weights(from_size: usize, to_size: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != from_size * to_size {
            return Err(ProbError::ShapeMismatch {
                expected: from_size * to_size,
                got: weights.len(),
            });
        }
        for row in weights.chunks_mut(to_size) {
            let sum = check_entries(row)?;
            if sum <= 0.0 || !sum.is_finite() {
                return Err(ProbError::NotNormalized { sum });
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        Self::new(from_size, to_size, weights)
    }

    pub fn identity(size: usize) -> Self {
        let mut rows = vec![0.0; size * size];
        for i in 0..size {
            rows[i * size + i] = 1.0;
        }
        Self {
            from_size: size,
            to_size: size,
            rows,
        }
    }

    /// Every input maps to output `target` with probability one.
    pub fn constant(from_size: usize, to_size: usize, target: usize) -> Self {
        assert!(target < to_size, "target {target} outside output alphabet {to_size}");
        let mut rows = vec![0.0; from_size * to_size];
        for x in 0..from_size {
            rows[x * to_size + target] = 1.0;
        }
        Self {
            from_size,
            to_size,
            rows,
        }
    }

    /// Every row equals `p`.
    pub fn repeated(from_size: usize, p: &[f64]) -> Result<Self> {
        validate_distribution(p)?;
        Self::new(from_size, p.len(), p.repeat(from_size))
    }

    pub fn from_size(&self) -> usize {
        self.from_size
    }

    pub fn to_size(&self) -> usize {
        self.to_size
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.rows[from * self.to_size..(from + 1) * self.to_size]
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rows[from * self.to_size + to]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks(self.to_size)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.rows.len(), other.rows.len());
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Composes `self: A → B` with `next: B → C`.
    pub fn then(&self, next: &Self) -> Self {
        assert_eq!(self.to_size, next.from_size);
        let mut rows = vec![0.0; self.from_size * next.to_size];
        for a in 0..self.from_size {
            for b in 0..self.to_size {
                let w = self.get(a, b);
                if w == 0.0 {
                    continue;
                }
                for c in 0..next.to_size {
                    rows[a * next.to_size + c] += w * next.get(b, c);
                }
            }
        }
        Self {
            from_size: self.from_size,
            to_size: next.to_size,
            rows,
        }
    }
}

/// `(p_X, p_Y)`.
pub fn marginals(j: &JointDistribution) -> (Vec<f64>, Vec<f64>) {
    (j.marginal_x(), j.marginal_y())
}

/// `p_{Y|X}`; rows with zero X-mass are uniform.
pub fn conditional_y_given_x(j: &JointDistribution) -> ConditionalDistribution {
    let y = j.y_size();
    let mut rows = Vec::with_capacity(j.as_slice().len());
    for row in j.rows() {
        let px: f64 = row.iter().sum();
        if px > 0.0 {
            rows.extend(row.iter().map(|&v| v / px));
        } else {
            rows.extend(std::iter::repeat_n(1.0 / y as f64, y));
        }
    }
    ConditionalDistribution {
        from_size: j.x_size(),
        to_size: y,
        rows,
    }
}

/// `KL(p ‖ q)` in nats with `0 · ln(0/q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(ProbError::LengthMismatch(p.len(), q.len()));
    }
    let mut kl = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(ProbError::AbsoluteContinuityViolation { index, p: pi });
            }
            kl += pi * (pi / qi).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// `KL(p ‖ q)` with each `q` cell floored at `floor`; never fails on
/// support mismatch.
pub fn kl_divergence_floored(p: &[f64], q: &[f64], floor: f64) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi.max(floor)).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// `I(X;Y)` in nats.
pub fn mutual_information(j: &JointDistribution) -> f64 {
    let (p_x, p_y) = marginals(j);
    let mut mi = 0.0;
    for (x, row) in j.rows().enumerate() {
        for (y, &pxy) in row.iter().enumerate() {
            if pxy > 0.0 {
                mi += pxy * (pxy / (p_x[x] * p_y[y])).ln();
            }
        }
    }
    mi.max(0.0)
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * std::f64::consts::LN_2
}
