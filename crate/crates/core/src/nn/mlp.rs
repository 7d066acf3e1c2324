use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, Real, Tensor};

/// Feed-forward stack of dense layers: ReLU on hidden layers, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T = f32> {
    pub layers: Vec<DenseLayer<T>>,
}

/// Per-layer outputs of one forward pass, consumed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct Trace<T> {
    outputs: Vec<Tensor<T>>,
}

impl<T: Real> Trace<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.outputs.last().expect("non-empty stack")
    }

    pub fn into_output(mut self) -> Tensor<T> {
        self.outputs.pop().expect("non-empty stack")
    }
}

impl<T: Real> Mlp<T> {
    /// `dims = [in, h1, ..., out]`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output sizes");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Linear
                } else {
                    Activation::ReLU
                };
                DenseLayer::new(w[0], w[1], act, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn from_layers(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("empty layer stack".into()));
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::dim("Mlp::from_layers", w[0].out_dim(), w[1].in_dim()));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    /// `[in, h1, ..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.in_dim())
            .chain(self.layers.iter().map(DenseLayer::out_dim))
            .collect()
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut x = self.layers[0].forward(input)?;
        for l in &self.layers[1..] {
            x = l.forward(&x)?;
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &Tensor<T>) -> Result<Trace<T>> {
        let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let y = if i == 0 {
                l.forward(input)?
            } else {
                l.forward(&outputs[i - 1])?
            };
            outputs.push(y);
        }
        Ok(Trace { outputs })
    }

    /// Accumulates parameter gradients for `d loss / d output = upstream`
    /// and returns the gradient with respect to `input` when requested.
    pub fn backward(
        &mut self,
        input: &Tensor<T>,
        trace: &Trace<T>,
        upstream: &Tensor<T>,
        want_input_grad: bool,
    ) -> Result<Option<Tensor<T>>> {
        let n = self.layers.len();
        let mut grad = upstream.clone();
        for i in (0..n).rev() {
            let layer_in = if i == 0 { input } else { &trace.outputs[i - 1] };
            let need = i > 0 || want_input_grad;
            match self.layers[i].backward(layer_in, &trace.outputs[i], &grad, need)? {
                Some(g) => grad = g,
                None => return Ok(None),
            }
        }
        Ok(Some(grad))
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(DenseLayer::zero_grad);
    }

    /// Visits parameters in a fixed order as `(L{i}.W | L{i}.b, tensor)`.
    pub fn params(&self) -> impl Iterator<Item = (String, &Tensor<T>)> {
        self.layers.iter().enumerate().flat_map(|(i, l)| {
            [(format!("L{i}.W"), &l.weights), (format!("L{i}.b"), &l.bias)]
        })
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = (String, &mut Tensor<T>)> {
        self.layers.iter_mut().enumerate().flat_map(|(i, l)| {
            [(format!("L{i}.W"), &mut l.weights), (format!("L{i}.b"), &mut l.bias)]
        })
    }

    pub fn param_count(&self) -> usize {
        self.params().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weights: l.weights.cast(),
                    bias: l.bias.cast(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    /// Rebuilds a stack from `(L{i}.W, L{i}.b)` tensors using the standard
    /// hidden-ReLU / linear-output activation pattern.
    pub fn from_named<'a>(mut lookup: impl FnMut(&str) -> Option<&'a Tensor<T>>) -> Result<Self> {
        let mut layers = Vec::new();
        while let (Some(w), Some(b)) = (
            lookup(&format!("L{}.W", layers.len())),
            lookup(&format!("L{}.b", layers.len())),
        ) {
            layers.push(DenseLayer::from_parts(w.clone(), b.clone(), Activation::ReLU)?);
        }
        if let Some(l) = layers.last_mut() {
            l.activation = Activation::Linear;
        }
        Mlp::from_layers(layers)
    }
}
