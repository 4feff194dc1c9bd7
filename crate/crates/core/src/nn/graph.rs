//! Define-by-run reverse-mode differentiation.
//!
//! Every node's value is computed when the node is recorded, so creation order
//! is a topological order and `backward` is a single reverse sweep.

use super::tensor::Tensor2;
use super::{NnError, Result};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor2>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor2) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor2 {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor2 {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor2)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Total number of scalar entries.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor2::len).sum()
    }
}

/// Gradients of a scalar loss, indexed like the store they were taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
}

impl Gradients {
    /// `None` when the parameter does not influence the loss.
    pub fn get(&self, id: ParamId) -> Option<&Tensor2> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    /// `a + 1·b` with `b` a `1 × cols` row.
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Relu(NodeId),
    Softmax(NodeId),
    Log(NodeId),
    Exp(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    LogSumExp(NodeId),
    SoftmaxCrossEntropy { logits: NodeId, labels: Vec<usize> },
    ConcatCols(NodeId, NodeId),
    GatherRows(NodeId, Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor2,
}

/// A recorded computation over parameters of one [`ParamStore`].
#[derive(Debug)]
pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, left: (usize, usize), right: (usize, usize)) -> NnError {
    NnError::ShapeMismatch { op, left, right }
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor2 {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor2) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    pub fn input(&mut self, value: Tensor2) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(NnError::NonFiniteInput);
        }
        Ok(self.push(Op::Input, value))
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        let value = self.store.get(id).clone();
        self.push(Op::Param(id), value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(mismatch("matmul", sa, sb));
        }
        let v = self.value(a).matmul(self.value(b));
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        if sb != (1, sa.1) {
            return Err(mismatch("add_bias", sa, sb));
        }
        let b = self.value(bias).data().to_vec();
        let mut v = self.value(a).clone();
        for row in v.data_mut().chunks_mut(sa.1) {
            for (x, bb) in row.iter_mut().zip(&b) {
                *x += bb;
            }
        }
        Ok(self.push(Op::AddBias(a, bias), v))
    }

    /// `x · W + b`.
    pub fn affine(&mut self, x: NodeId, w: ParamId, b: ParamId) -> Result<NodeId> {
        let w = self.param(w);
        let b = self.param(b);
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), v))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let v = self.value(a).map(|x| x * factor);
        self.push(Op::Scale(a, factor), v)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(Op::AddScalar(a), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).softmax_rows();
        self.push(Op::Softmax(a), v)
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::ln);
        self.push(Op::Log(a), v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), v)
    }

    /// Sum of all entries, as `1 × 1`.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Tensor2::scalar(self.value(a).data().iter().sum());
        self.push(Op::Sum(a), v)
    }

    /// Mean of all entries, as `1 × 1`.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let v = Tensor2::scalar(t.data().iter().sum::<f64>() / t.len() as f64);
        self.push(Op::Mean(a), v)
    }

    /// `ln Σ exp(a)` over all entries, shifted by the maximum.
    pub fn log_sum_exp(&mut self, a: NodeId) -> NodeId {
        let v = Tensor2::scalar(log_sum_exp(self.value(a).data()));
        self.push(Op::LogSumExp(a), v)
    }

    /// Mean over rows of `−ln softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let t = self.value(logits);
        let (rows, cols) = t.shape();
        if labels.len() != rows {
            return Err(mismatch("softmax_cross_entropy", (rows, cols), (labels.len(), 1)));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= cols) {
            return Err(NnError::LabelOutOfRange { label: bad, classes: cols });
        }
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = t.row(r);
            total += log_sum_exp(row) - row[y];
        }
        let v = Tensor2::scalar(total / rows as f64);
        Ok(self.push(
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
            },
            v,
        ))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.0 != sb.0 {
            return Err(mismatch("concat_cols", sa, sb));
        }
        let v = self.value(a).concat_cols(self.value(b));
        Ok(self.push(Op::ConcatCols(a, b), v))
    }

    pub fn gather_rows(&mut self, a: NodeId, rows: &[usize]) -> Result<NodeId> {
        let s = self.shape(a);
        if let Some(&bad) = rows.iter().find(|&&r| r >= s.0) {
            return Err(mismatch("gather_rows", s, (bad, s.1)));
        }
        let v = self.value(a).gather_rows(rows);
        Ok(self.push(Op::GatherRows(a, rows.to_vec()), v))
    }

    /// Gradients of the scalar `loss` with respect to every parameter.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(NnError::NotScalarLoss(shape));
        }
        let mut adj: Vec<Option<Tensor2>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor2::scalar(1.0));
        let mut grads: Vec<Option<Tensor2>> = vec![None; self.store.len()];

        fn accumulate(slot: &mut Option<Tensor2>, g: Tensor2) {
            match slot {
                Some(existing) => existing.add_assign(&g),
                None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => accumulate(&mut grads[p.0], g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    accumulate(&mut adj[a.0], ga);
                    accumulate(&mut adj[b.0], gb);
                }
                Op::AddBias(a, b) => {
                    let cols = g.cols();
                    let mut gb = vec![0.0; cols];
                    for row in g.data().chunks(cols) {
                        for (s, v) in gb.iter_mut().zip(row) {
                            *s += v;
                        }
                    }
                    accumulate(&mut adj[b.0], Tensor2::new(1, cols, gb));
                    accumulate(&mut adj[a.0], g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj[a.0], g.clone());
                    accumulate(&mut adj[b.0], g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj[b.0], g.map(|v| -v));
                    accumulate(&mut adj[a.0], g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |u, v| u * v);
                    let gb = g.zip_map(self.value(*a), |u, v| u * v);
                    accumulate(&mut adj[a.0], ga);
                    accumulate(&mut adj[b.0], gb);
                }
                Op::Scale(a, f) => accumulate(&mut adj[a.0], g.map(|v| v * f)),
                Op::AddScalar(a) => accumulate(&mut adj[a.0], g),
                Op::Relu(a) => {
                    let ga = g.zip_map(self.value(*a), |u, x| if x > 0.0 { u } else { 0.0 });
                    accumulate(&mut adj[a.0], ga);
                }
                Op::Softmax(a) => {
                    let s = &node.value;
                    let cols = s.cols();
                    let mut ga = g.clone();
                    for (r, out) in ga.data_mut().chunks_mut(cols).enumerate() {
                        let srow = s.row(r);
                        let dot: f64 = g.row(r).iter().zip(srow).map(|(u, v)| u * v).sum();
                        for (o, sv) in out.iter_mut().zip(srow) {
                            *o = sv * (*o - dot);
                        }
                    }
                    accumulate(&mut adj[a.0], ga);
                }
                Op::Log(a) => {
                    let ga = g.zip_map(self.value(*a), |u, x| u / x);
                    accumulate(&mut adj[a.0], ga);
                }
                Op::Exp(a) => {
                    let ga = g.zip_map(&node.value, |u, e| u * e);
                    accumulate(&mut adj[a.0], ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    accumulate(&mut adj[a.0], Tensor2::filled(r, c, g.item()));
                }
                Op::Mean(a) => {
                    let (r, c) = self.shape(*a);
                    let v = g.item() / (r * c) as f64;
                    accumulate(&mut adj[a.0], Tensor2::filled(r, c, v));
                }
                Op::LogSumExp(a) => {
                    let lse = node.value.item();
                    let u = g.item();
                    let ga = self.value(*a).map(|x| u * (x - lse).exp());
                    accumulate(&mut adj[a.0], ga);
                }
                Op::SoftmaxCrossEntropy { logits, labels } => {
                    let mut ga = self.value(*logits).softmax_rows();
                    let cols = ga.cols();
                    let scale = g.item() / labels.len() as f64;
                    for (row, &y) in ga.data_mut().chunks_mut(cols).zip(labels) {
                        row[y] -= 1.0;
                        row.iter_mut().for_each(|v| *v *= scale);
                    }
                    accumulate(&mut adj[logits.0], ga);
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.shape(*a).1;
                    let cb = self.shape(*b).1;
                    let rows = g.rows();
                    let mut ga = Vec::with_capacity(rows * ca);
                    let mut gb = Vec::with_capacity(rows * cb);
                    for r in 0..rows {
                        let row = g.row(r);
                        ga.extend_from_slice(&row[..ca]);
                        gb.extend_from_slice(&row[ca..]);
                    }
                    accumulate(&mut adj[a.0], Tensor2::new(rows, ca, ga));
                    accumulate(&mut adj[b.0], Tensor2::new(rows, cb, gb));
                }
                Op::GatherRows(a, rows) => {
                    let (r, c) = self.shape(*a);
                    let mut ga = Tensor2::zeros(r, c);
                    for (k, &src) in rows.iter().enumerate() {
                        let from = g.row(k);
                        let to = &mut ga.data_mut()[src * c..(src + 1) * c];
                        for (t, f) in to.iter_mut().zip(from) {
                            *t += f;
                        }
                    }
                    accumulate(&mut adj[a.0], ga);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Overflow-safe `ln Σ exp(v)`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    top + v.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_values() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor2::identity(2));
        let b = store.add("b", Tensor2::zeros(1, 2));
        let mut g = Graph::new(&store);
        let x = g.input(Tensor2::from_rows(&[vec![-1.0, 2.0]])).unwrap();
        let y = g.affine(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[-1.0, 2.0]);
        let r = g.relu(y);
        assert_eq!(g.value(r).data(), &[0.0, 2.0]);
        let z = g.input(Tensor2::zeros(1, 2)).unwrap();
        let s = g.softmax(z);
        assert_eq!(g.value(s).data(), &[0.5, 0.5]);
    }

    #[test]
    fn linear_and_quadratic_gradients() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor2::row_vector(&[0.3, -1.2, 2.0]));
        let x = Tensor2::row_vector(&[1.5, -0.5, 4.0]);

        let mut g = Graph::new(&store);
        let wn = g.param(w);
        let xn = g.input(x.clone()).unwrap();
        let p = g.mul(wn, xn).unwrap();
        let loss = g.sum(p);
        assert_eq!(g.backward(loss).unwrap().get(w).unwrap(), &x);

        let c = Tensor2::row_vector(&[1.0, 1.0, 1.0]);
        let mut g = Graph::new(&store);
        let wn = g.param(w);
        let cn = g.input(c.clone()).unwrap();
        let d = g.sub(wn, cn).unwrap();
        let sq = g.mul(d, d).unwrap();
        let loss = g.mean(sq);
        let grad = g.backward(loss).unwrap();
        let expected = store.get(w).zip_map(&c, |a, b| 2.0 * (a - b) / 3.0);
        for (a, b) in grad.get(w).unwrap().data().iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = g.input(Tensor2::zeros(2, 3)).unwrap();
        let b = g.input(Tensor2::zeros(2, 3)).unwrap();
        assert!(matches!(g.matmul(a, b), Err(NnError::ShapeMismatch { .. })));
        assert!(matches!(g.backward(a), Err(NnError::NotScalarLoss((2, 3)))));
        assert!(g.input(Tensor2::scalar(f64::NAN)).is_err());
    }

    #[test]
    fn log_sum_exp_is_overflow_safe() {
        assert!((log_sum_exp(&[700.0, 700.0]) - (700.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_sum_exp(&[-700.0, -700.0]) - (-700.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[0.0]), 0.0);
    }

    #[test]
    fn repeated_parameter_use_accumulates() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor2::scalar(3.0));
        let mut g = Graph::new(&store);
        let a = g.param(w);
        let b = g.param(w);
        let p = g.mul(a, b).unwrap();
        let grad = g.backward(p).unwrap();
        assert_eq!(grad.get(w).unwrap().item(), 6.0);
    }
}
