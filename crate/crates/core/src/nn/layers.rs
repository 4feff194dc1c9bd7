use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NodeId, ParamId, ParamStore};
use super::tensor::Tensor2;
use super::Result;

/// Affine map `x · W + b` with `W: fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Dense {
    /// Glorot-uniform weights, zero bias. Registers `{name}.weight` and
    /// `{name}.bias`.
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        let weight = store.add(format!("{name}.weight"), Tensor2::new(fan_in, fan_out, w));
        let bias = store.add(format!("{name}.bias"), Tensor2::zeros(1, fan_out));
        Self {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        g.affine(x, self.weight, self.bias)
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

/// Stack of dense layers, each followed by its own activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<(Dense, Activation)>,
}

impl Mlp {
    /// `widths = [in, h1, …, out]`; relu after every hidden layer, none after
    /// the last.
    pub fn new(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut impl Rng) -> Self {
        let k = widths.len().saturating_sub(1);
        let acts: Vec<Activation> = (0..k)
            .map(|i| if i + 1 < k { Activation::Relu } else { Activation::Identity })
            .collect();
        Self::with_activations(store, name, widths, &acts, rng)
    }

    pub fn with_activations(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        activations: &[Activation],
        rng: &mut impl Rng,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        assert_eq!(activations.len(), widths.len() - 1);
        let layers = widths
            .windows(2)
            .zip(activations)
            .enumerate()
            .map(|(i, (w, &a))| (Dense::new(store, &format!("{name}.{i}"), w[0], w[1], rng), a))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let mut h = x;
        for (layer, act) in &self.layers {
            h = layer.forward(g, h)?;
            if *act == Activation::Relu {
                h = g.relu(h);
            }
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|(l, _)| l.params()).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].0.fan_in
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(|(l, _)| l.fan_out).unwrap_or(0)
    }

    pub fn layers(&self) -> &[(Dense, Activation)] {
        &self.layers
    }
}
