//! Aggregated learning: n-fold concatenated inputs, a shared bottleneck, n
//! label heads, and a MINE critic regularizing `I(Xⁿ; Tⁿ)`.
//!
//! Training alternates `K` critic ascent steps on `J` with one descent step
//! of the main network on `Ω = ℓ + α·J`, where `ℓ` is the negative
//! log-likelihood summed over the n positions and averaged over the batch.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::mine::{j_statistic_node, random_permutation, MineCritic, MineError, DEFAULT_HIDDEN};
use crate::nn::{
    sgd_step, Activation, Checkpoint, Direction, Graph, Mlp, NnError, NodeId, ParamId, ParamStore, SgdConfig,
    Tensor2,
};
use crate::seed::SeedStream;

pub const DEFAULT_BOTTLENECK: usize = 16;
pub const DEFAULT_HIDDEN_WIDTH: usize = 64;

#[derive(Debug, Error)]
pub enum AgrError {
    #[error("dataset has no examples")]
    EmptyDataset,

    #[error("batch has fold {batch}, model has fold {model}")]
    FoldMismatch { batch: usize, model: usize },

    #[error("input has {got} features, model expects {expected}")]
    FeatureMismatch { expected: usize, got: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite loss at epoch {epoch} (learning rate {learning_rate})")]
    NonFiniteLoss { epoch: usize, learning_rate: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Nn(#[from] NnError),

    #[error(transparent)]
    Mine(#[from] MineError),
}

pub type Result<T> = std::result::Result<T, AgrError>;

/// Widths of every network in the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub fold: usize,
    pub feature_dim: usize,
    pub classes: usize,
    /// Bottleneck width per fold position.
    pub bottleneck: usize,
    /// Pre-bottleneck hidden width per fold position.
    pub pre_hidden: usize,
    pub head_hidden: usize,
    pub critic_hidden: Vec<usize>,
}

impl ModelSpec {
    pub fn new(fold: usize, feature_dim: usize, classes: usize) -> Self {
        Self {
            fold,
            feature_dim,
            classes,
            bottleneck: DEFAULT_BOTTLENECK,
            pre_hidden: DEFAULT_HIDDEN_WIDTH,
            head_hidden: DEFAULT_HIDDEN_WIDTH,
            critic_hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.fold * self.feature_dim
    }

    pub fn bottleneck_width(&self) -> usize {
        self.fold * self.bottleneck
    }

    fn validate(&self) -> Result<()> {
        if self.fold == 0 || self.feature_dim == 0 || self.classes < 2 || self.bottleneck == 0 {
            return Err(AgrError::InvalidConfig(format!("degenerate model spec {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgrLearnModel {
    pub spec: ModelSpec,
    pub alpha: f64,
    pub store: ParamStore,
    pre: Mlp,
    heads: Vec<Mlp>,
    critic: MineCritic,
}

impl AgrLearnModel {
    /// Initializes, in order, the pre-bottleneck map, the heads and the
    /// critic from `rng`.
    pub fn new(spec: ModelSpec, alpha: f64, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(AgrError::InvalidConfig(format!("alpha must be non-negative, got {alpha}")));
        }
        let mut store = ParamStore::new();
        let pre = Mlp::with_activations(
            &mut store,
            "pre",
            &[spec.input_width(), spec.fold * spec.pre_hidden, spec.bottleneck_width()],
            &[Activation::Relu, Activation::Identity],
            rng,
        );
        let heads = (0..spec.fold)
            .map(|i| {
                Mlp::new(
                    &mut store,
                    &format!("head{i}"),
                    &[spec.bottleneck_width(), spec.head_hidden, spec.classes],
                    rng,
                )
            })
            .collect();
        let critic = MineCritic::new(
            &mut store,
            "critic",
            spec.input_width() + spec.bottleneck_width(),
            &spec.critic_hidden,
            rng,
        );
        Ok(Self {
            spec,
            alpha,
            store,
            pre,
            heads,
            critic,
        })
    }

    pub fn fold(&self) -> usize {
        self.spec.fold
    }

    pub fn critic(&self) -> &MineCritic {
        &self.critic
    }

    /// Pre-bottleneck and head parameters.
    pub fn main_params(&self) -> Vec<ParamId> {
        let mut p = self.pre.params();
        p.extend(self.heads.iter().flat_map(Mlp::params));
        p
    }

    pub fn critic_params(&self) -> Vec<ParamId> {
        self.critic.params()
    }

    /// Records `tⁿ = h(xⁿ)`.
    pub fn record_bottleneck(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        Ok(self.pre.forward(g, x)?)
    }

    /// Records the logits of every head on the full bottleneck.
    pub fn record_heads(&self, g: &mut Graph, t: NodeId) -> Result<Vec<NodeId>> {
        self.heads
            .iter()
            .map(|h| h.forward(g, t).map_err(AgrError::from))
            .collect()
    }

    fn check_input(&self, x: &Tensor2) -> Result<()> {
        if x.cols() != self.spec.input_width() {
            return Err(AgrError::FeatureMismatch {
                expected: self.spec.input_width(),
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Head distributions for raw aggregated rows.
    pub fn head_distributions(&self, x: Tensor2) -> Result<Vec<Tensor2>> {
        self.check_input(&x)?;
        let mut g = Graph::new(&self.store);
        let xn = g.input(x)?;
        let t = self.record_bottleneck(&mut g, xn)?;
        let logits = self.record_heads(&mut g, t)?;
        Ok(logits.into_iter().map(|l| g.value(l).softmax_rows()).collect())
    }

    pub fn to_checkpoint_json(&self) -> Result<String> {
        let ck = ModelCheckpoint {
            model: self.spec.clone(),
            alpha: self.alpha,
            parameters: Checkpoint::from_store(&self.store).parameters,
        };
        Ok(serde_json::to_string_pretty(&ck).map_err(NnError::from)?)
    }

    pub fn from_checkpoint_json(json: &str) -> Result<Self> {
        let ck: ModelCheckpoint = serde_json::from_str(json).map_err(NnError::from)?;
        // shapes come from the spec; values are then overwritten
        let mut model = Self::new(ck.model, ck.alpha, &mut SeedStream::new(0).rng("init", 0))?;
        Checkpoint {
            parameters: ck.parameters,
        }
        .apply(&mut model.store)?;
        Ok(model)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelCheckpoint {
    model: ModelSpec,
    alpha: f64,
    parameters: Vec<crate::nn::checkpoint::CheckpointEntry>,
}

/// `m` aggregated examples of fold `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedBatch {
    pub fold: usize,
    /// `m × (n·d)`; object `k` of row `i` occupies columns `k·d..(k+1)·d`.
    pub inputs: Tensor2,
    /// `labels[k][i]` is the label of object `k` in row `i`.
    pub labels: Vec<Vec<usize>>,
}

impl AggregatedBatch {
    pub fn m(&self) -> usize {
        self.inputs.rows()
    }

    /// Labels of aggregated example `i`.
    pub fn example_labels(&self, i: usize) -> Vec<usize> {
        self.labels.iter().map(|l| l[i]).collect()
    }
}

/// Concatenates the objects `groups[i][0], …, groups[i][n−1]` into row `i`.
pub fn assemble(ds: &Dataset, groups: &[Vec<usize>], fold: usize) -> AggregatedBatch {
    let d = ds.feature_dim();
    let mut inputs = Vec::with_capacity(groups.len() * fold * d);
    let mut labels = vec![Vec::with_capacity(groups.len()); fold];
    for group in groups {
        for (k, &idx) in group.iter().enumerate() {
            inputs.extend_from_slice(ds.feature(idx));
            labels[k].push(ds.label(idx));
        }
    }
    AggregatedBatch {
        fold,
        inputs: Tensor2::new(groups.len(), fold * d, inputs),
        labels,
    }
}

/// Draws `m·n` objects uniformly with replacement, grouped in draw order.
pub fn aggregate_batch(ds: &Dataset, n: usize, m: usize, rng: &mut impl Rng) -> Result<AggregatedBatch> {
    if ds.is_empty() {
        return Err(AgrError::EmptyDataset);
    }
    let groups: Vec<Vec<usize>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(0..ds.len())).collect())
        .collect();
    Ok(assemble(ds, &groups, n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `m × (n·b)`.
    pub bottleneck: Tensor2,
    /// One `m × C` distribution per head.
    pub predictions: Vec<Tensor2>,
}

pub fn main_forward(model: &AgrLearnModel, batch: &AggregatedBatch) -> Result<ForwardOutput> {
    if batch.fold != model.fold() {
        return Err(AgrError::FoldMismatch {
            batch: batch.fold,
            model: model.fold(),
        });
    }
    model.check_input(&batch.inputs)?;
    let mut g = Graph::new(&model.store);
    let x = g.input(batch.inputs.clone())?;
    let t = model.record_bottleneck(&mut g, x)?;
    let logits = model.record_heads(&mut g, t)?;
    Ok(ForwardOutput {
        bottleneck: g.value(t).clone(),
        predictions: logits.into_iter().map(|l| g.value(l).softmax_rows()).collect(),
    })
}

/// `−(1/m) Σᵢ Σₖ ln q_k(y_k⁽ⁱ⁾)` from per-head distributions.
pub fn aggregated_cross_entropy(predictions: &[Tensor2], labels: &[Vec<usize>]) -> Result<f64> {
    assert_eq!(predictions.len(), labels.len(), "one label list per head");
    let m = predictions.first().map_or(0, Tensor2::rows);
    let mut total = 0.0;
    for (q, ys) in predictions.iter().zip(labels) {
        assert_eq!(q.rows(), ys.len());
        for (i, &y) in ys.iter().enumerate() {
            if y >= q.cols() {
                return Err(AgrError::LabelOutOfRange { label: y, classes: q.cols() });
            }
            total -= q.get(i, y).ln();
        }
    }
    Ok(total / m as f64)
}

/// Records `ℓ` (fused softmax cross-entropy per head, summed over heads).
fn record_loss(g: &mut Graph, logits: &[NodeId], labels: &[Vec<usize>]) -> Result<NodeId> {
    let mut loss = g.softmax_cross_entropy(logits[0], &labels[0])?;
    for (l, ys) in logits.iter().zip(labels).skip(1) {
        let ce = g.softmax_cross_entropy(*l, ys)?;
        loss = g.add(loss, ce)?;
    }
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaParts {
    pub loss: f64,
    pub j: f64,
    pub omega: f64,
}

struct OmegaGraph {
    loss: NodeId,
    j: NodeId,
    omega: NodeId,
}

fn record_omega(g: &mut Graph, model: &AgrLearnModel, batch: &AggregatedBatch, perm: &[usize]) -> Result<OmegaGraph> {
    let x = g.input(batch.inputs.clone())?;
    let t = model.record_bottleneck(g, x)?;
    let logits = model.record_heads(g, t)?;
    let loss = record_loss(g, &logits, &batch.labels)?;
    let j = j_statistic_node(g, &model.critic, x, t, perm)?;
    let omega = if model.alpha == 0.0 {
        loss
    } else {
        let aj = g.scale(j, model.alpha);
        g.add(loss, aj)?
    };
    Ok(OmegaGraph { loss, j, omega })
}

/// `Ω = ℓ + α·J(xⁿ, tⁿ)` with the given permutation of the batch.
pub fn omega(model: &AgrLearnModel, batch: &AggregatedBatch, perm: &[usize]) -> Result<OmegaParts> {
    if batch.fold != model.fold() {
        return Err(AgrError::FoldMismatch {
            batch: batch.fold,
            model: model.fold(),
        });
    }
    model.check_input(&batch.inputs)?;
    let mut g = Graph::new(&model.store);
    let o = record_omega(&mut g, model, batch, perm)?;
    Ok(OmegaParts {
        loss: g.value(o.loss).item(),
        j: g.value(o.j).item(),
        omega: g.value(o.omega).item(),
    })
}

/// One critic ascent step on `J(xⁿ, tⁿ)` with `tⁿ` held fixed. Returns the
/// pre-step `J`.
pub fn critic_step(
    model: &mut AgrLearnModel,
    inputs: &Tensor2,
    bottleneck: &Tensor2,
    perm: &[usize],
    cfg: &SgdConfig,
) -> Result<f64> {
    let (jv, grads) = {
        let mut g = Graph::new(&model.store);
        let x = g.input(inputs.clone())?;
        let t = g.input(bottleneck.clone())?;
        let j = j_statistic_node(&mut g, &model.critic, x, t, perm)?;
        (g.value(j).item(), g.backward(j)?)
    };
    let params = model.critic_params();
    sgd_step(&mut model.store, &grads, &params, cfg, Direction::Ascent)?;
    Ok(jv)
}

/// One descent step of the main network on `Ω`. Returns the pre-step parts.
pub fn outer_step(
    model: &mut AgrLearnModel,
    batch: &AggregatedBatch,
    perm: &[usize],
    cfg: &SgdConfig,
) -> Result<OmegaParts> {
    let (parts, grads) = {
        let mut g = Graph::new(&model.store);
        let o = record_omega(&mut g, model, batch, perm)?;
        let parts = OmegaParts {
            loss: g.value(o.loss).item(),
            j: g.value(o.j).item(),
            omega: g.value(o.omega).item(),
        };
        if !parts.omega.is_finite() {
            return Ok(parts);
        }
        (parts, g.backward(o.omega)?)
    };
    let params = model.main_params();
    sgd_step(&mut model.store, &grads, &params, cfg, Direction::Descent)?;
    Ok(parts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub fold: usize,
    /// Aggregated examples per batch.
    pub batch: usize,
    pub alpha: f64,
    /// Critic ascent steps per batch.
    pub inner_steps: usize,
    pub lambda_in: f64,
    pub lambda_out: f64,
    pub epochs: usize,
    /// `(epoch, multiplier)`: from `epoch` on, `λ_out` is scaled by
    /// `multiplier`. Empty means the default drops at 1/4, 3/8 and 5/8 of
    /// training.
    pub lr_schedule: Vec<(usize, f64)>,
    pub weight_decay: f64,
    pub seed: u64,
    pub bottleneck: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            fold: 2,
            batch: 64,
            alpha: 0.0,
            inner_steps: 5,
            lambda_in: 0.01,
            lambda_out: 0.1,
            epochs: 50,
            lr_schedule: Vec::new(),
            weight_decay: 1e-4,
            seed: 7,
            bottleneck: DEFAULT_BOTTLENECK,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AgrError::InvalidConfig(m));
        if self.fold == 0 {
            return bad("fold must be at least 1".into());
        }
        if self.batch < 2 {
            return bad("batch must hold at least 2 aggregated examples".into());
        }
        if self.inner_steps == 0 {
            return bad("K must be at least 1".into());
        }
        if !(self.lambda_in > 0.0 && self.lambda_out > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if !(self.alpha >= 0.0) || !(self.weight_decay >= 0.0) {
            return bad("alpha and weight decay must be non-negative".into());
        }
        if self.lr_schedule.iter().any(|&(_, m)| !(m > 0.0)) {
            return bad("schedule multipliers must be positive".into());
        }
        Ok(())
    }

    /// The schedule actually used, sorted by epoch.
    pub fn effective_schedule(&self) -> Vec<(usize, f64)> {
        let mut s = if self.lr_schedule.is_empty() {
            let at = |f: f64| (self.epochs as f64 * f) as usize;
            vec![(at(0.25), 0.1), (at(0.375), 0.01), (at(0.625), 0.001)]
        } else {
            self.lr_schedule.clone()
        };
        s.sort_by_key(|&(e, _)| e);
        s
    }

    pub fn multiplier_at(&self, epoch: usize) -> f64 {
        self.effective_schedule()
            .iter()
            .rfind(|&&(e, _)| e <= epoch)
            .map_or(1.0, |&(_, m)| m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean of the batch `ℓ` (summed over positions).
    pub loss_nats: f64,
    /// Mean pre-update `J` of the outer steps.
    pub j_nats: f64,
    pub j_max: f64,
    pub omega: f64,
    /// Replicated-protocol error on the evaluation set, if one was given.
    pub test_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: AgrLearnModel,
    pub log: Vec<EpochLog>,
}

/// Batches per epoch: enough to cover `N` aggregated examples.
pub fn batches_per_epoch(dataset_len: usize, batch: usize) -> usize {
    dataset_len.div_ceil(batch)
}

/// Seed streams: `init` builds the model, `batch` draws aggregated batches,
/// `perm` draws every permutation.
pub fn train_agrlearn(cfg: &TrainConfig, train: &Dataset, eval: Option<&Dataset>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(AgrError::EmptyDataset);
    }
    let seeds = SeedStream::new(cfg.seed);
    let mut spec = ModelSpec::new(cfg.fold, train.feature_dim(), train.class_count());
    spec.bottleneck = cfg.bottleneck;
    let mut model = AgrLearnModel::new(spec, cfg.alpha, &mut seeds.rng("init", 0))?;
    let mut batch_rng = seeds.rng("batch", 0);
    let mut perm_rng = seeds.rng("perm", 0);
    let inner = SgdConfig::new(cfg.lambda_in, 0.0)?;
    let per_epoch = batches_per_epoch(train.len(), cfg.batch);
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lambda_out * cfg.multiplier_at(epoch);
        let outer = SgdConfig::new(lr, cfg.weight_decay)?;
        let (mut loss_sum, mut j_sum, mut omega_sum) = (0.0, 0.0, 0.0);
        let mut j_max = f64::NEG_INFINITY;
        for _ in 0..per_epoch {
            let batch = aggregate_batch(train, cfg.fold, cfg.batch, &mut batch_rng)?;
            if cfg.alpha > 0.0 {
                let t = main_forward(&model, &batch)?.bottleneck;
                for _ in 0..cfg.inner_steps {
                    let perm = random_permutation(batch.m(), &mut perm_rng);
                    critic_step(&mut model, &batch.inputs, &t, &perm, &inner)?;
                }
            }
            let perm = random_permutation(batch.m(), &mut perm_rng);
            let parts = outer_step(&mut model, &batch, &perm, &outer)?;
            if !parts.omega.is_finite() || !parts.loss.is_finite() {
                return Err(AgrError::NonFiniteLoss {
                    epoch,
                    learning_rate: lr,
                });
            }
            loss_sum += parts.loss;
            j_sum += parts.j;
            omega_sum += parts.omega;
            j_max = j_max.max(parts.j);
        }
        let k = per_epoch as f64;
        let test_error = eval.map(|ds| error_rate(&predict_replicated_all(&model, ds), ds.labels()));
        log.push(EpochLog {
            epoch,
            learning_rate: lr,
            loss_nats: loss_sum / k,
            j_nats: j_sum / k,
            j_max,
            omega: omega_sum / k,
            test_error,
        });
    }
    Ok(TrainOutcome { model, log })
}

fn average_heads(heads: &[Tensor2], row: usize) -> Vec<f64> {
    let c = heads[0].cols();
    let mut out = vec![0.0; c];
    for h in heads {
        for (o, v) in out.iter_mut().zip(h.row(row)) {
            *o += v;
        }
    }
    let n = heads.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

/// `x` copied into all n slots; the n head distributions averaged.
pub fn predict_replicated(model: &AgrLearnModel, x: &[f64]) -> Result<Vec<f64>> {
    let row = x.repeat(model.fold());
    let heads = model.head_distributions(Tensor2::new(1, row.len(), row))?;
    Ok(average_heads(&heads, 0))
}

/// [`predict_replicated`] for every object of `ds` in one pass.
pub fn predict_replicated_all(model: &AgrLearnModel, ds: &Dataset) -> Vec<Vec<f64>> {
    let n = model.fold();
    let rows: Vec<Vec<usize>> = (0..ds.len()).map(|i| vec![i; n]).collect();
    let batch = assemble(ds, &rows, n);
    let heads = model
        .head_distributions(batch.inputs)
        .expect("dataset width checked by the caller");
    (0..ds.len()).map(|i| average_heads(&heads, i)).collect()
}

/// `x` in slot 1, slots 2..n filled with random training objects; head 1's
/// distribution averaged over `k` draws.
pub fn predict_contextual(
    model: &AgrLearnModel,
    x: &[f64],
    train: &Dataset,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(AgrError::EmptyDataset);
    }
    let n = model.fold();
    let d = x.len();
    let k = k.max(1);
    let mut rows = Vec::with_capacity(k * n * d);
    for _ in 0..k {
        rows.extend_from_slice(x);
        for _ in 1..n {
            rows.extend_from_slice(train.feature(rng.random_range(0..train.len())));
        }
    }
    let heads = model.head_distributions(Tensor2::new(k, n * d, rows))?;
    let c = heads[0].cols();
    let mut out = vec![0.0; c];
    for r in 0..k {
        for (o, v) in out.iter_mut().zip(heads[0].row(r)) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= k as f64);
    Ok(out)
}

/// `k` rounds of random n-groupings of `test`; each object's distribution is
/// the mean of the head outputs at its slot over every group containing it.
/// Objects never grouped fall back to the replicated prediction.
pub fn predict_batched(model: &AgrLearnModel, test: &Dataset, k: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let n = model.fold();
    let c = model.spec.classes;
    let mut sums = vec![vec![0.0; c]; test.len()];
    let mut hits = vec![0usize; test.len()];
    for _ in 0..k {
        let perm = random_permutation(test.len(), rng);
        let groups: Vec<Vec<usize>> = perm.chunks_exact(n).map(<[usize]>::to_vec).collect();
        if groups.is_empty() {
            break;
        }
        let batch = assemble(test, &groups, n);
        let heads = model.head_distributions(batch.inputs)?;
        for (r, group) in groups.iter().enumerate() {
            for (slot, &obj) in group.iter().enumerate() {
                for (s, v) in sums[obj].iter_mut().zip(heads[slot].row(r)) {
                    *s += v;
                }
                hits[obj] += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(test.len());
    for (i, (s, h)) in sums.into_iter().zip(hits).enumerate() {
        if h == 0 {
            out.push(predict_replicated(model, test.feature(i))?);
        } else {
            out.push(s.into_iter().map(|v| v / h as f64).collect());
        }
    }
    Ok(out)
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Fraction of rows whose argmax differs from the label.
pub fn error_rate(predictions: &[Vec<f64>], labels: &[usize]) -> f64 {
    let wrong = predictions
        .iter()
        .zip(labels)
        .filter(|(p, &y)| argmax(p) != y)
        .count();
    wrong as f64 / labels.len().max(1) as f64
}

/// Fraction of rows on which two prediction sets pick the same class.
pub fn decision_agreement(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let same = a.iter().zip(b).filter(|(p, q)| argmax(p) == argmax(q)).count();
    same as f64 / a.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_blobs, BlobSpec};

    fn blobs(per_class: usize, seed: u64) -> Dataset {
        synth_blobs(
            &BlobSpec {
                classes: 2,
                per_class,
                dim: 3,
                separation: 4.0,
                noise: 1.0,
            },
            seed,
        )
        .unwrap()
    }

    fn model(fold: usize, alpha: f64) -> AgrLearnModel {
        AgrLearnModel::new(ModelSpec::new(fold, 3, 2), alpha, &mut SeedStream::new(1).rng("init", 0)).unwrap()
    }

    #[test]
    fn aggregation_shapes_and_determinism() {
        let ds = blobs(5, 1);
        let rng = SeedStream::new(3).rng("batch", 0);
        let one = aggregate_batch(&ds, 1, 4, &mut rng.clone()).unwrap();
        assert_eq!(one.inputs.shape(), (4, 3));
        let b = aggregate_batch(&ds, 2, 4, &mut rng.clone()).unwrap();
        assert_eq!(b.inputs.shape(), (4, 6));
        assert_eq!(b.labels.len(), 2);
        assert_eq!(b.example_labels(0).len(), 2);
        assert_eq!(b, aggregate_batch(&ds, 2, 4, &mut rng.clone()).unwrap());
    }

    #[test]
    fn heads_are_distributions() {
        let ds = blobs(5, 1);
        let m = model(2, 0.0);
        let b = aggregate_batch(&ds, 2, 7, &mut SeedStream::new(3).rng("batch", 0)).unwrap();
        let out = main_forward(&m, &b).unwrap();
        assert_eq!(out.bottleneck.shape(), (7, 32));
        for q in &out.predictions {
            for r in 0..q.rows() {
                assert!((q.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert!(matches!(
            main_forward(&model(1, 0.0), &b),
            Err(AgrError::FoldMismatch { .. })
        ));
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let q = |rows: &[[f64; 2]]| Tensor2::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
        let perfect = vec![q(&[[1.0, 0.0], [0.0, 1.0]])];
        assert_eq!(aggregated_cross_entropy(&perfect, &[vec![0, 1]]).unwrap(), 0.0);
        let uniform = vec![q(&[[0.5, 0.5]; 3]); 4];
        let labels = vec![vec![0, 1, 0]; 4];
        let l = aggregated_cross_entropy(&uniform, &labels).unwrap();
        assert!((l - 4.0 * 2f64.ln()).abs() < 1e-12);
        let preds = vec![q(&[[0.9, 0.1], [0.8, 0.2]]), q(&[[0.6, 0.4], [0.5, 0.5]])];
        let l = aggregated_cross_entropy(&preds, &[vec![0, 0], vec![1, 1]]).unwrap();
        let expected = -0.5 * (0.9f64.ln() + 0.4f64.ln() + 0.8f64.ln() + 0.5f64.ln());
        assert!((l - expected).abs() < 1e-12);
        assert!((l - 0.968_97).abs() < 5e-6);
    }

    #[test]
    fn omega_recomposition() {
        let ds = blobs(5, 2);
        let b = aggregate_batch(&ds, 2, 6, &mut SeedStream::new(4).rng("batch", 0)).unwrap();
        let perm = random_permutation(6, &mut SeedStream::new(4).rng("perm", 0));
        let m0 = model(2, 0.0);
        let p0 = omega(&m0, &b, &perm).unwrap();
        let ce = aggregated_cross_entropy(&main_forward(&m0, &b).unwrap().predictions, &b.labels).unwrap();
        assert_eq!(p0.omega, p0.loss);
        assert!((p0.loss - ce).abs() < 1e-12);

        let m3 = AgrLearnModel { alpha: 0.3, ..m0.clone() };
        let p3 = omega(&m3, &b, &perm).unwrap();
        assert!((p3.omega - (p3.loss + 0.3 * p3.j)).abs() < 1e-12);
        assert_eq!(p3.loss, p0.loss);
    }

    #[test]
    fn replicated_averages_heads() {
        let ds = blobs(5, 3);
        let m1 = model(1, 0.0);
        let x = ds.feature(0);
        let single = m1.head_distributions(Tensor2::row_vector(x)).unwrap();
        assert_eq!(predict_replicated(&m1, x).unwrap(), single[0].row(0).to_vec());

        let m2 = model(2, 0.0);
        let heads = m2.head_distributions(Tensor2::row_vector(&x.repeat(2))).unwrap();
        let avg: Vec<f64> = (0..2).map(|c| 0.5 * (heads[0].get(0, c) + heads[1].get(0, c))).collect();
        assert_eq!(predict_replicated(&m2, x).unwrap(), avg);
        assert_eq!(predict_replicated_all(&m2, &ds)[0], avg);
    }

    #[test]
    fn protocols_reduce_at_fold_one() {
        let ds = blobs(6, 4);
        let m1 = model(1, 0.0);
        let rng = SeedStream::new(5).rng("eval", 0);
        let x = ds.feature(2);
        let rep = predict_replicated(&m1, x).unwrap();
        for k in [1, 7] {
            let ctx = predict_contextual(&m1, x, &ds, k, &mut rng.clone()).unwrap();
            for (a, b) in ctx.iter().zip(&rep) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        let batched = predict_batched(&m1, &ds, 3, &mut rng.clone()).unwrap();
        let all = predict_replicated_all(&m1, &ds);
        for (a, b) in batched.iter().zip(&all) {
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn protocols_are_deterministic_and_valid() {
        let ds = blobs(5, 5);
        let m = model(3, 0.0);
        let rng = SeedStream::new(6).rng("eval", 0);
        let a = predict_batched(&m, &ds, 4, &mut rng.clone()).unwrap();
        assert_eq!(a, predict_batched(&m, &ds, 4, &mut rng.clone()).unwrap());
        let c1 = predict_contextual(&m, ds.feature(0), &ds, 1, &mut rng.clone()).unwrap();
        assert_eq!(c1, predict_contextual(&m, ds.feature(0), &ds, 1, &mut rng.clone()).unwrap());
        for p in a.iter().chain([&c1]) {
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = model(2, 0.3);
        let json = m.to_checkpoint_json().unwrap();
        let back = AgrLearnModel::from_checkpoint_json(&json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn schedule() {
        let cfg = TrainConfig {
            epochs: 400,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.effective_schedule(), vec![(100, 0.1), (150, 0.01), (250, 0.001)]);
        assert_eq!(cfg.multiplier_at(99), 1.0);
        assert_eq!(cfg.multiplier_at(100), 0.1);
        assert_eq!(cfg.multiplier_at(399), 0.001);
        assert_eq!(batches_per_epoch(1000, 64), 16);
    }
}
