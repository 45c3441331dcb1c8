//! Layer implementations.
//!
//! Convolution-stage tensors are `(channels, n * len)`: each channel row
//! holds the samples of the batch back to back. Dense-stage tensors are
//! `(n, features)`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Ix1, Ix2};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::Parameter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Swish,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Swish => x * sigmoid(x),
        }
    }

    /// Derivative; ReLU uses 0 at the kink.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            ActivationKind::Swish => {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }
        }
    }
}

/// Elementwise activation over a whole tensor.
pub fn activation_forward(kind: ActivationKind, x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| kind.apply(v))
}

fn init_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, values: &mut [f64]) {
    let bound = (1.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    for v in values {
        *v = dist.sample(rng);
    }
}

/// Stride-1 zero-padded 1-D cross-correlation.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub padding: usize,
    pub len: usize,
    /// `out x (in * kernel)`, i.e. `w[c_out, c_in, j]` in row-major order
    pub weight: Parameter<Ix2>,
    pub bias: Parameter<Ix1>,
    cols: Option<Array2<f64>>,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, padding: usize, len: usize) -> Self {
        Conv1d {
            in_channels,
            out_channels,
            kernel_size,
            padding,
            len,
            weight: Parameter::zeros(Ix2(out_channels, in_channels * kernel_size)),
            bias: Parameter::zeros(Ix1(out_channels)),
            cols: None,
        }
    }

    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let fan_in = self.in_channels * self.kernel_size;
        init_uniform(rng, fan_in, self.weight.value.as_slice_mut().expect("contiguous"));
        init_uniform(rng, fan_in, self.bias.value.as_slice_mut().expect("contiguous"));
    }

    fn im2col(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let (k, len, pad) = (self.kernel_size, self.len, self.padding as isize);
        let n = x.ncols() / len;
        let mut cols = Array2::<f64>::zeros((self.in_channels * k, n * len));
        for c in 0..self.in_channels {
            let src = x.row(c);
            let src = src.as_slice().expect("contiguous rows");
            for j in 0..k {
                let mut dst = cols.row_mut(c * k + j);
                let dst = dst.as_slice_mut().expect("contiguous rows");
                let shift = j as isize - pad;
                // valid output positions i with 0 <= i + shift < len
                let lo = (-shift).max(0) as usize;
                let hi = ((len as isize) - shift).min(len as isize).max(0) as usize;
                if lo >= hi {
                    continue;
                }
                for s in 0..n {
                    let base = s * len;
                    let from = (base as isize + lo as isize + shift) as usize;
                    dst[base + lo..base + hi].copy_from_slice(&src[from..from + (hi - lo)]);
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &Array2<f64>, n: usize) -> Array2<f64> {
        let (k, len, pad) = (self.kernel_size, self.len, self.padding as isize);
        let mut dx = Array2::<f64>::zeros((self.in_channels, n * len));
        for c in 0..self.in_channels {
            let mut dst = dx.row_mut(c);
            let dst = dst.as_slice_mut().expect("contiguous rows");
            for j in 0..k {
                let src = dcols.row(c * k + j);
                let src = src.as_slice().expect("contiguous rows");
                let shift = j as isize - pad;
                let lo = (-shift).max(0) as usize;
                let hi = ((len as isize) - shift).min(len as isize).max(0) as usize;
                if lo >= hi {
                    continue;
                }
                for s in 0..n {
                    let base = s * len;
                    let to = (base as isize + lo as isize + shift) as usize;
                    for (d, v) in dst[to..to + (hi - lo)].iter_mut().zip(&src[base + lo..base + hi]) {
                        *d += v;
                    }
                }
            }
        }
        dx
    }

    fn apply(&self, x: &ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let cols = self.im2col(x);
        let mut y = self.weight.value.dot(&cols);
        for (mut row, b) in y.rows_mut().into_iter().zip(self.bias.value.iter()) {
            row += *b;
        }
        (y, cols)
    }

    pub fn infer(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        self.apply(x).0
    }

    pub fn forward(&mut self, x: &ArrayView2<f64>) -> Array2<f64> {
        let (y, cols) = self.apply(x);
        self.cols = Some(cols);
        y
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Option<Array2<f64>> {
        let cols = self.cols.take()?;
        self.weight.grad += &dy.dot(&cols.t());
        self.bias.grad += &dy.sum_axis(Axis(1));
        let dcols = self.weight.value.t().dot(dy);
        Some(self.col2im(&dcols, dy.ncols() / self.len))
    }

    pub fn has_cache(&self) -> bool {
        self.cols.is_some()
    }
}

/// Fully connected layer `y = x Wᵀ + b` on `(n, in)` tensors.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Parameter<Ix2>,
    pub bias: Parameter<Ix1>,
    input: Option<Array2<f64>>,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize) -> Self {
        Dense {
            weight: Parameter::zeros(Ix2(out_features, in_features)),
            bias: Parameter::zeros(Ix1(out_features)),
            input: None,
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn out_features(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let fan_in = self.in_features();
        init_uniform(rng, fan_in, self.weight.value.as_slice_mut().expect("contiguous"));
        init_uniform(rng, fan_in, self.bias.value.as_slice_mut().expect("contiguous"));
    }

    pub fn infer(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight.value.t()) + &self.bias.value
    }

    pub fn forward(&mut self, x: Array2<f64>) -> Array2<f64> {
        let y = self.infer(&x.view());
        self.input = Some(x);
        y
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Option<Array2<f64>> {
        let x = self.input.take()?;
        self.weight.grad += &dy.t().dot(&x);
        self.bias.grad += &dy.sum_axis(Axis(0));
        Some(dy.dot(&self.weight.value))
    }

    pub fn has_cache(&self) -> bool {
        self.input.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct Activation {
    pub kind: ActivationKind,
    input: Option<Array2<f64>>,
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        Activation { kind, input: None }
    }

    pub fn infer(&self, x: &Array2<f64>) -> Array2<f64> {
        activation_forward(self.kind, x)
    }

    pub fn forward(&mut self, x: Array2<f64>) -> Array2<f64> {
        let y = self.infer(&x);
        self.input = Some(x);
        y
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Option<Array2<f64>> {
        let x = self.input.take()?;
        let kind = self.kind;
        let mut dx = dy.clone();
        dx.zip_mut_with(&x, |d, &v| *d *= kind.derivative(v));
        Some(dx)
    }

    pub fn has_cache(&self) -> bool {
        self.input.is_some()
    }
}

/// `(channels, n * len)` to `(n, channels * len)` with feature index `c * len + i`.
#[derive(Debug, Clone, Copy)]
pub struct Flatten {
    pub channels: usize,
    pub len: usize,
}

impl Flatten {
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let n = x.ncols() / self.len;
        let mut out = Array2::<f64>::zeros((n, self.channels * self.len));
        for c in 0..self.channels {
            let row = x.row(c);
            let row = row.as_slice().expect("contiguous rows");
            for s in 0..n {
                out.row_mut(s).as_slice_mut().expect("contiguous rows")[c * self.len..(c + 1) * self.len]
                    .copy_from_slice(&row[s * self.len..(s + 1) * self.len]);
            }
        }
        out
    }

    pub fn backward(&self, dy: &Array2<f64>) -> Array2<f64> {
        let n = dy.nrows();
        let mut out = Array2::<f64>::zeros((self.channels, n * self.len));
        for c in 0..self.channels {
            let mut dst = out.row_mut(c);
            let dst = dst.as_slice_mut().expect("contiguous rows");
            for s in 0..n {
                let src = dy.row(s);
                let src = src.as_slice().expect("contiguous rows");
                dst[s * self.len..(s + 1) * self.len].copy_from_slice(&src[c * self.len..(c + 1) * self.len]);
            }
        }
        out
    }
}

/// Standalone cross-correlation for a single sample: `input` is `C_in x P`,
/// `weights` is `C_out x C_in x k` flattened row-major.
pub fn conv1d_forward(
    input: &Array2<f64>,
    weights: &[f64],
    bias: &Array1<f64>,
    kernel_size: usize,
    padding: usize,
) -> Result<Array2<f64>, super::NetError> {
    let (c_in, len) = input.dim();
    let c_out = bias.len();
    if weights.len() != c_out * c_in * kernel_size {
        return Err(super::NetError::ShapeMismatch {
            what: "conv1d weights",
            expected: c_out * c_in * kernel_size,
            actual: weights.len(),
        });
    }
    if 2 * padding + 1 != kernel_size {
        return Err(super::NetError::InvalidConfig(format!(
            "padding {padding} does not preserve length for kernel {kernel_size}"
        )));
    }
    let mut conv = Conv1d::new(c_in, c_out, kernel_size, padding, len);
    conv.weight
        .value
        .as_slice_mut()
        .expect("contiguous")
        .copy_from_slice(weights);
    conv.bias.value.assign(bias);
    Ok(conv.infer(&input.view()))
}
