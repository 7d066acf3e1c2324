use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{matmul_nn, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Linear,
    ReLU,
}

/// Fully connected layer computing `activation(x · Wᵀ + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub activation: Activation,
}

impl<T: Real> DenseLayer<T> {
    /// Weights uniform in `±1/√fan_in`, zero bias.
    pub fn new<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = 1.0 / (fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| T::of(rng.gen_range(-limit..=limit)))
            .collect();
        DenseLayer {
            weights: Tensor::new(vec![fan_out, fan_in], data).expect("shape matches"),
            bias: Tensor::zeros(vec![fan_out]),
            activation,
        }
    }

    pub fn from_parts(weights: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        if weights.shape().len() != 2 || bias.shape() != [weights.shape()[0]] {
            return Err(Error::dim(
                "DenseLayer::from_parts",
                format!("[out, in] weights with [out] bias"),
                format!("{:?} / {:?}", weights.shape(), bias.shape()),
            ));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        dense_forward(self, input)
    }

    /// Reverse pass given the forward input and output.
    ///
    /// Parameter gradients are accumulated into the weight and bias grad
    /// slots; the gradient with respect to `input` is returned when asked for.
    pub fn backward(
        &mut self,
        input: &Tensor<T>,
        output: &Tensor<T>,
        upstream: &Tensor<T>,
        want_input_grad: bool,
    ) -> Result<Option<Tensor<T>>> {
        if upstream.shape() != output.shape() {
            return Err(Error::dim(
                "dense_backward",
                format!("{:?}", output.shape()),
                format!("{:?}", upstream.shape()),
            ));
        }
        let m = batch_rows("dense_backward", input, self.in_dim())?;
        if upstream.len() != m * self.out_dim() {
            return Err(Error::dim("dense_backward", m * self.out_dim(), upstream.len()));
        }
        let local = self.local_grad(output, upstream);
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        T::gemm(
            out_dim,
            m,
            in_dim,
            T::one(),
            local.data(),
            true,
            input.data(),
            false,
            T::one(),
            self.weights.grad_mut(),
        );
        let bg = self.bias.grad_mut();
        for r in 0..local.rows() {
            for (b, &g) in bg.iter_mut().zip(local.row(r)) {
                *b += g;
            }
        }
        if want_input_grad {
            Ok(Some(matmul_nn(&local, &self.weights)?))
        } else {
            Ok(None)
        }
    }

    fn local_grad(&self, output: &Tensor<T>, upstream: &Tensor<T>) -> Tensor<T> {
        match self.activation {
            Activation::Linear => upstream.clone(),
            Activation::ReLU => {
                let mut g = upstream.clone();
                // Output is positive exactly where the pre-activation is, so the
                // subgradient at 0 is 0.
                for (gi, &o) in g.data_mut().iter_mut().zip(output.data()) {
                    if o <= T::zero() {
                        *gi = T::zero();
                    }
                }
                g
            }
        }
    }

    pub fn zero_grad(&mut self) {
        self.weights.zero_grad();
        self.bias.zero_grad();
    }
}

/// Number of rows when `t` is read as a `[rows, width]` batch; a 1-D
/// tensor of length `width` is a single row.
pub(crate) fn batch_rows<T: Real>(op: &'static str, t: &Tensor<T>, width: usize) -> Result<usize> {
    match t.shape() {
        [n] if *n == width => Ok(1),
        [r, c] if *c == width => Ok(*r),
        s => Err(Error::dim(op, format!("[batch, {width}]"), format!("{s:?}"))),
    }
}

pub fn dense_forward<T: Real>(layer: &DenseLayer<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    let (in_dim, out_dim) = (layer.in_dim(), layer.out_dim());
    let m = batch_rows("dense_forward", input, in_dim)?;
    let mut out = Tensor::zeros(vec![m, out_dim]);
    T::gemm(
        m,
        in_dim,
        out_dim,
        T::one(),
        input.data(),
        false,
        layer.weights.data(),
        true,
        T::zero(),
        out.data_mut(),
    );
    let b = layer.bias.data();
    let relu = layer.activation == Activation::ReLU;
    for row in out.data_mut().chunks_mut(out_dim) {
        for (o, &bi) in row.iter_mut().zip(b) {
            *o += bi;
            if relu && *o < T::zero() {
                *o = T::zero();
            }
        }
    }
    Ok(out)
}

/// Pure reverse pass: `(input_grad, weight_grad, bias_grad)`.
pub fn dense_backward<T: Real>(
    layer: &DenseLayer<T>,
    input: &Tensor<T>,
    upstream_grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let output = dense_forward(layer, input)?;
    let mut scratch = layer.clone();
    scratch.weights.drop_grad();
    scratch.bias.drop_grad();
    let ig = scratch
        .backward(input, &output, upstream_grad, true)?
        .expect("input grad requested");
    let wg = Tensor::new(
        layer.weights.shape().to_vec(),
        scratch.weights.grad().expect("written by backward").to_vec(),
    )?;
    let bg = Tensor::new(
        layer.bias.shape().to_vec(),
        scratch.bias.grad().expect("written by backward").to_vec(),
    )?;
    Ok((ig, wg, bg))
}
