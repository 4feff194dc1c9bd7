//! Mutual information neural estimation.
//!
//! `J(γ) = mean γ(uᵢ, vᵢ) − ln[(1/m) Σ exp γ(uᵢ, v_{τ(i)})]` lower-bounds
//! `I(U;V)` for every critic γ (Donsker–Varadhan). The product-of-marginals
//! sample is the batch itself with `v` shuffled by a uniform permutation τ.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::nn::{sgd_step, Direction, Graph, Mlp, NnError, NodeId, ParamId, ParamStore, SgdConfig, Tensor2};
use crate::prob::{mutual_information, JointDistribution, ProbError};
use crate::seed::SeedStream;

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];
/// Headroom above `ln m` before a run is declared divergent.
pub const DIVERGENCE_MARGIN: f64 = 5.0;

#[derive(Debug, Error)]
pub enum MineError {
    #[error("batch of {0} pairs is too small; need at least 2")]
    BatchTooSmall(usize),

    #[error("permutation is not a bijection on 0..{0}")]
    InvalidPermutation(usize),

    #[error("u has {0} rows but v has {1}")]
    RowMismatch(usize, usize),

    #[error("J = {j} exceeded ln(m) + {DIVERGENCE_MARGIN} = {ceiling} at step {step}")]
    DivergenceDetected { step: usize, j: f64, ceiling: f64 },

    #[error("unknown distribution {0:?}; expected independent, identity or bsc:<p>")]
    UnknownDistribution(String),

    #[error("training needs at least one step")]
    NoSteps,

    #[error(transparent)]
    Nn(#[from] NnError),

    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, MineError>;

/// Scalar critic `γ(u, v)` over the concatenated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MineCritic {
    mlp: Mlp,
}

impl MineCritic {
    /// `concat(u, v) → hidden… → 1`, relu between layers.
    pub fn new(store: &mut ParamStore, name: &str, input_dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(1);
        Self {
            mlp: Mlp::new(store, name, &widths, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_width()
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.mlp.params()
    }

    /// `m × 1` scores of the rows of `uv`.
    pub fn score(&self, g: &mut Graph, uv: NodeId) -> Result<NodeId> {
        Ok(self.mlp.forward(g, uv)?)
    }
}

/// `m` joint pairs and the permutation used for the marginal term.
#[derive(Debug, Clone, PartialEq)]
pub struct MineBatch {
    pub u: Tensor2,
    pub v: Tensor2,
    permutation: Vec<usize>,
}

impl MineBatch {
    pub fn new(u: Tensor2, v: Tensor2, permutation: Vec<usize>) -> Result<Self> {
        if u.rows() != v.rows() {
            return Err(MineError::RowMismatch(u.rows(), v.rows()));
        }
        check_permutation(&permutation, u.rows())?;
        Ok(Self { u, v, permutation })
    }

    pub fn with_random_permutation(u: Tensor2, v: Tensor2, rng: &mut impl Rng) -> Result<Self> {
        let perm = random_permutation(u.rows(), rng);
        Self::new(u, v, perm)
    }

    pub fn m(&self) -> usize {
        self.u.rows()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }
}

fn check_permutation(perm: &[usize], m: usize) -> Result<()> {
    if m < 2 {
        return Err(MineError::BatchTooSmall(m));
    }
    let mut seen = vec![false; m];
    if perm.len() != m {
        return Err(MineError::InvalidPermutation(m));
    }
    for &p in perm {
        if p >= m || std::mem::replace(&mut seen[p], true) {
            return Err(MineError::InvalidPermutation(m));
        }
    }
    Ok(())
}

/// Uniform permutation of `0..m` (Fisher–Yates); fixed points allowed.
pub fn random_permutation(m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..m).collect();
    p.shuffle(rng);
    p
}

/// Records `J` on `g` for rows `u`, `v` and returns the `1 × 1` node.
pub fn j_statistic_node(g: &mut Graph, critic: &MineCritic, u: NodeId, v: NodeId, perm: &[usize]) -> Result<NodeId> {
    let m = g.value(u).rows();
    check_permutation(perm, m)?;
    let joint_in = g.concat_cols(u, v)?;
    let joint = critic.score(g, joint_in)?;
    let v_perm = g.gather_rows(v, perm)?;
    let marg_in = g.concat_cols(u, v_perm)?;
    let marg = critic.score(g, marg_in)?;
    let first = g.mean(joint);
    let lse = g.log_sum_exp(marg);
    let second = g.add_scalar(lse, -(m as f64).ln());
    Ok(g.sub(first, second)?)
}

pub fn j_statistic(store: &ParamStore, critic: &MineCritic, batch: &MineBatch) -> Result<f64> {
    let mut g = Graph::new(store);
    let u = g.input(batch.u.clone())?;
    let v = g.input(batch.v.clone())?;
    let j = j_statistic_node(&mut g, critic, u, v, &batch.permutation)?;
    Ok(g.value(j).item())
}

/// Sampler of one-hot encoded pairs from a discrete joint.
#[derive(Debug, Clone)]
pub struct DiscretePairSampler {
    joint: JointDistribution,
    cells: WeightedIndex<f64>,
}

impl DiscretePairSampler {
    pub fn new(joint: JointDistribution) -> Self {
        let cells = WeightedIndex::new(joint.as_slice()).expect("a valid joint has positive mass");
        Self { joint, cells }
    }

    /// `independent`, `identity` (V = U, uniform binary) or `bsc:<p>`.
    pub fn named(spec: &str) -> Result<Self> {
        let rows = match spec {
            "independent" => vec![vec![0.25, 0.25], vec![0.25, 0.25]],
            "identity" => vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            _ => {
                let p: f64 = spec
                    .strip_prefix("bsc:")
                    .and_then(|p| p.parse().ok())
                    .filter(|p| (0.0..=1.0).contains(p))
                    .ok_or_else(|| MineError::UnknownDistribution(spec.to_string()))?;
                vec![vec![(1.0 - p) / 2.0, p / 2.0], vec![p / 2.0, (1.0 - p) / 2.0]]
            }
        };
        Ok(Self::new(JointDistribution::from_rows(&rows)?))
    }

    pub fn joint(&self) -> &JointDistribution {
        &self.joint
    }

    pub fn mutual_information(&self) -> f64 {
        mutual_information(&self.joint)
    }

    /// Width of the concatenated one-hot pair.
    pub fn pair_width(&self) -> usize {
        self.joint.x_size() + self.joint.y_size()
    }

    /// `(u, v)` one-hot rows for `m` joint draws.
    pub fn sample(&self, m: usize, rng: &mut impl Rng) -> (Tensor2, Tensor2) {
        let (xs, ys) = (self.joint.x_size(), self.joint.y_size());
        let mut u = Tensor2::zeros(m, xs);
        let mut v = Tensor2::zeros(m, ys);
        for i in 0..m {
            let c = self.cells.sample(rng);
            u.set(i, c / ys, 1.0);
            v.set(i, c % ys, 1.0);
        }
        (u, v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MineConfig {
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
}

impl Default for MineConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            batch: 256,
            learning_rate: 1e-2,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MineEstimate {
    /// Mean `J` over the final 10% of steps, nats.
    pub estimate: f64,
    /// `J` of every step's batch before its update.
    pub trace: Vec<f64>,
}

/// Gradient ascent on `J` with a fresh batch and permutation every step.
pub fn train_mine(
    store: &mut ParamStore,
    critic: &MineCritic,
    sampler: &DiscretePairSampler,
    cfg: &MineConfig,
    seeds: SeedStream,
) -> Result<MineEstimate> {
    if cfg.steps == 0 {
        return Err(MineError::NoSteps);
    }
    if cfg.batch < 2 {
        return Err(MineError::BatchTooSmall(cfg.batch));
    }
    let sgd = SgdConfig::new(cfg.learning_rate, 0.0)?;
    let mut sample_rng = seeds.rng("sample", 0);
    let mut perm_rng = seeds.rng("perm", 0);
    let ceiling = (cfg.batch as f64).ln() + DIVERGENCE_MARGIN;
    let params = critic.params();
    let mut trace = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let (u, v) = sampler.sample(cfg.batch, &mut sample_rng);
        let perm = random_permutation(cfg.batch, &mut perm_rng);
        let grads = {
            let mut g = Graph::new(store);
            let un = g.input(u)?;
            let vn = g.input(v)?;
            let j = j_statistic_node(&mut g, critic, un, vn, &perm)?;
            let jv = g.value(j).item();
            if !(jv <= ceiling) {
                return Err(MineError::DivergenceDetected { step, j: jv, ceiling });
            }
            trace.push(jv);
            g.backward(j)?
        };
        sgd_step(store, &grads, &params, &sgd, Direction::Ascent)?;
    }
    let tail = (cfg.steps / 10).max(1);
    let estimate = trace[trace.len() - tail..].iter().sum::<f64>() / tail as f64;
    Ok(MineEstimate { estimate, trace })
}

/// `J` of a fixed critic on `m` fresh pairs, for checking the lower bound.
pub fn population_j(
    store: &ParamStore,
    critic: &MineCritic,
    sampler: &DiscretePairSampler,
    m: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let (u, v) = sampler.sample(m, rng);
    let batch = MineBatch::with_random_permutation(u, v, rng)?;
    j_statistic(store, critic, &batch)
}
