//! Dense feedforward networks with reverse-mode gradients and plain SGD.
//!
//! A [`DenseNetwork`] is an ordered stack of affine layers, each followed by
//! an element-wise activation. Weights are stored `out × in`, so a layer
//! computes `a = act(W x + b)`.
//!
//! Two evaluation paths exist. [`DenseNetwork::forward`] and
//! [`DenseNetwork::backward`] work on a single sample and are what the rest
//! of the crate treats as the reference. The batched variants
//! ([`DenseNetwork::forward_batch`], [`DenseNetwork::backward_batch`]) run
//! the same arithmetic on a `batch × features` matrix and sum parameter
//! gradients over the batch; the training loop uses them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::rng::RngStream;
use crate::textfmt::{fmt_f64s, Document};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "identity" | "linear" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Array2<f64>,
    bias: Array1<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        check_dim("layer bias", weights.nrows(), bias.len())?;
        if weights.ncols() == 0 || weights.nrows() == 0 {
            return Err(Error::config("layer dimensions must be positive"));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }
}

/// Layer sizes and activations used to build a fresh network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<(usize, Activation)>,
}

impl NetworkSpec {
    /// `hidden` tanh layers of `width` nodes, then an identity output layer.
    pub fn tanh_mlp(input_dim: usize, width: usize, hidden: usize, output_dim: usize) -> Self {
        let mut layers = vec![(width, Activation::Tanh); hidden];
        layers.push((output_dim, Activation::Identity));
        Self { input_dim, layers }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<Layer>,
}

/// Per-layer parameter gradients, shaped like the network they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Layer outputs recorded by a batched forward pass; `activations[0]` is the
/// input and the last entry is the network output.
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("trace always holds the input")
    }
}

/// Builds a network with weights drawn uniformly from `±sqrt(3 / fan_in)`
/// (standard deviation `1/sqrt(fan_in)`) and zero biases.
pub fn init_network(spec: &NetworkSpec, rng: &mut RngStream) -> Result<DenseNetwork> {
    if spec.layers.is_empty() {
        return Err(Error::config("network spec has no layers"));
    }
    if spec.input_dim == 0 || spec.layers.iter().any(|&(n, _)| n == 0) {
        return Err(Error::config("all layer sizes must be at least 1"));
    }
    let mut fan_in = spec.input_dim;
    let mut layers = Vec::with_capacity(spec.layers.len());
    for &(out, activation) in &spec.layers {
        let limit = (3.0 / fan_in as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((out, fan_in), || rng.random_range(-limit..limit));
        layers.push(Layer::new(weights, Array1::zeros(out), activation)?);
        fan_in = out;
    }
    DenseNetwork::new(layers)
}

impl DenseNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network has no layers"));
        }
        for pair in layers.windows(2) {
            check_dim("adjacent layers", pair[0].out_dim(), pair[1].in_dim())?;
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_dim("network input", self.input_dim(), input.len())?;
        let mut a = Array1::from(input.to_vec());
        for layer in &self.layers {
            a = layer_forward(layer, a.view());
        }
        Ok(a.to_vec())
    }

    /// Gradients of `upstream · forward(input)` with respect to every
    /// parameter and to the input.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(GradientSet, Vec<f64>)> {
        check_dim("network input", self.input_dim(), input.len())?;
        check_dim("upstream gradient", self.output_dim(), upstream.len())?;
        let mut activations = vec![Array1::from(input.to_vec())];
        for layer in &self.layers {
            let next = layer_forward(layer, activations.last().unwrap().view());
            activations.push(next);
        }

        let mut grads = GradientSet::zeros_like(self);
        let mut delta = Array1::from(upstream.to_vec());
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let out = &activations[idx + 1];
            for (d, &a) in delta.iter_mut().zip(out.iter()) {
                *d *= layer.activation.derivative_from_output(a);
            }
            let x = &activations[idx];
            let x_row = x.view().insert_axis(Axis(0));
            let d_col = delta.view().insert_axis(Axis(1));
            grads.weights[idx] = d_col.dot(&x_row);
            grads.biases[idx] = delta.clone();
            delta = layer.weights.t().dot(&delta);
        }
        Ok((grads, delta.to_vec()))
    }

    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Trace> {
        check_dim("network batch input", self.input_dim(), inputs.ncols())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.to_owned());
        for layer in &self.layers {
            let mut z = activations.last().unwrap().dot(&layer.weights.t());
            z += &layer.bias;
            if layer.activation != Activation::Identity {
                z.mapv_inplace(|v| layer.activation.apply(v));
            }
            activations.push(z);
        }
        Ok(Trace { activations })
    }

    /// Batched backward pass. Parameter gradients are summed over rows; the
    /// returned input gradient keeps one row per sample.
    pub fn backward_batch(
        &self,
        trace: &Trace,
        upstream: ArrayView2<f64>,
    ) -> Result<(GradientSet, Array2<f64>)> {
        check_dim("trace depth", self.layers.len() + 1, trace.activations.len())?;
        check_dim("upstream gradient", self.output_dim(), upstream.ncols())?;
        check_dim("upstream batch", trace.output().nrows(), upstream.nrows())?;
        let mut grads = GradientSet::zeros_like(self);
        let mut delta = upstream.to_owned();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation != Activation::Identity {
                let out = &trace.activations[idx + 1];
                ndarray::Zip::from(&mut delta)
                    .and(out)
                    .for_each(|d, &a| *d *= layer.activation.derivative_from_output(a));
            }
            grads.weights[idx] = delta.t().dot(&trace.activations[idx]);
            grads.biases[idx] = delta.sum_axis(Axis(0));
            delta = delta.dot(&layer.weights);
        }
        Ok((grads, delta))
    }

    /// In-place `θ ← θ − η ∇θ`. Refuses non-finite gradients and leaves the
    /// network untouched in that case.
    pub fn sgd_step(&mut self, grads: &GradientSet, learning_rate: f64) -> Result<()> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be a non-negative finite number, got {learning_rate}"
            )));
        }
        grads.check_congruent(self)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient entries; SGD step refused".into()));
        }
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            layer.weights.scaled_add(-learning_rate, gw);
            layer.bias.scaled_add(-learning_rate, gb);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Mutable view of every parameter in a fixed order (per layer: weights
    /// row-major, then biases). Used by finite-difference checks.
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# dense network\n[network]\n");
        out.push_str(&format!("input_dim = {}\n", self.input_dim()));
        out.push_str(&format!("layers = {}\n", self.layers.len()));
        for (i, layer) in self.layers.iter().enumerate() {
            out.push_str(&format!("\n[layer {i}]\n"));
            out.push_str(&format!("in = {}\n", layer.in_dim()));
            out.push_str(&format!("out = {}\n", layer.out_dim()));
            out.push_str(&format!("activation = {}\n", layer.activation.name()));
            let w: Vec<f64> = layer.weights.iter().copied().collect();
            out.push_str(&format!("weights = {}\n", fmt_f64s(&w)));
            out.push_str(&format!("bias = {}\n", fmt_f64s(layer.bias.as_slice().unwrap())));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        let head = doc.section("network")?;
        let count = head.get("layers")?.usize()?;
        let mut expected_in = head.get("input_dim")?.usize()?;
        let mut layers = Vec::with_capacity(count);
        for i in 0..count {
            let section = doc.section(&format!("layer {i}"))?;
            let in_entry = section.get("in")?;
            let n_in = in_entry.usize()?;
            if n_in != expected_in {
                return Err(Error::parse(
                    in_entry.line,
                    "in",
                    format!("layer {i} input {n_in} does not chain with {expected_in}"),
                ));
            }
            let n_out = section.get("out")?.usize()?;
            let act_entry = section.get("activation")?;
            let activation = Activation::from_name(&act_entry.value).ok_or_else(|| {
                Error::parse(act_entry.line, "activation", format!("unknown `{}`", act_entry.value))
            })?;
            let w = section.get("weights")?.f64s(n_in * n_out)?;
            let b = section.get("bias")?.f64s(n_out)?;
            let weights = Array2::from_shape_vec((n_out, n_in), w)
                .map_err(|e| Error::parse(section.line, "weights", e.to_string()))?;
            layers.push(Layer::new(weights, Array1::from(b), activation)?);
            expected_in = n_out;
        }
        DenseNetwork::new(layers)
    }
}

fn layer_forward(layer: &Layer, x: ArrayView1<f64>) -> Array1<f64> {
    let mut z = layer.weights.dot(&x);
    z += &layer.bias;
    z.mapv_inplace(|v| layer.activation.apply(v));
    z
}

impl GradientSet {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }

    pub fn check_congruent(&self, net: &DenseNetwork) -> Result<()> {
        check_dim("gradient layer count", net.layers.len(), self.weights.len())?;
        check_dim("gradient layer count", net.layers.len(), self.biases.len())?;
        for (layer, (gw, gb)) in net.layers.iter().zip(self.weights.iter().zip(&self.biases)) {
            check_dim("gradient rows", layer.out_dim(), gw.nrows())?;
            check_dim("gradient cols", layer.in_dim(), gw.ncols())?;
            check_dim("gradient bias", layer.out_dim(), gb.len())?;
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    /// All entries in the same order as [`DenseNetwork::parameters_mut`].
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }
}
