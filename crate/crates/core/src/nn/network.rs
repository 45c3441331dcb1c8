use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Activation, ActivationKind, Conv1d, Dense, Flatten};
use super::{NetError, NetworkConfig};

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(Conv1d),
    Activation(Activation),
    Flatten(Flatten),
    Dense(Dense),
}

impl Layer {
    fn short_name(&self) -> String {
        match self {
            Layer::Conv(c) => format!("Conv1d({}->{}, k={})", c.in_channels, c.out_channels, c.kernel_size),
            Layer::Activation(a) => format!("{:?}", a.kind),
            Layer::Flatten(_) => "Flatten".to_string(),
            Layer::Dense(d) => format!("Dense({}->{})", d.in_features(), d.out_features()),
        }
    }
}

/// Layer stack: `blocks` x (Conv, Activation), a final Conv, Flatten, Dense.
#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self, NetError> {
        config.validate()?;
        let (f, k, pad, len) = (config.filters, config.kernel_size, config.padding, config.input_len);
        let act = config.arch.activation();
        let mut layers = Vec::new();
        let mut channels = 1;
        for _ in 0..config.blocks {
            layers.push(Layer::Conv(Conv1d::new(channels, f, k, pad, len)));
            if let Some(kind) = act {
                layers.push(Layer::Activation(Activation::new(kind)));
            }
            channels = f;
        }
        layers.push(Layer::Conv(Conv1d::new(channels, f, k, pad, len)));
        layers.push(Layer::Flatten(Flatten { channels: f, len }));
        layers.push(Layer::Dense(Dense::new(f * len, config.output_len)));

        let mut net = Network { config, layers };
        net.check_shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(net.config.init_seed);
        for layer in &mut net.layers {
            match layer {
                Layer::Conv(c) => c.init(&mut rng),
                Layer::Dense(d) => d.init(&mut rng),
                _ => {}
            }
        }
        Ok(net)
    }

    /// Walk the layer chain from `(1, P)` and confirm it reaches `(output_len,)`.
    fn check_shapes(&self) -> Result<(), NetError> {
        let mut channels = 1usize;
        let mut features: Option<usize> = None;
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    if features.is_some() || c.in_channels != channels || c.len != self.config.input_len {
                        return Err(NetError::InvalidConfig(format!("conv layer does not fit {channels} channels")));
                    }
                    channels = c.out_channels;
                }
                Layer::Activation(_) => {}
                Layer::Flatten(fl) => {
                    if fl.channels != channels {
                        return Err(NetError::InvalidConfig("flatten channel mismatch".into()));
                    }
                    features = Some(fl.channels * fl.len);
                }
                Layer::Dense(d) => {
                    if features != Some(d.in_features()) {
                        return Err(NetError::InvalidConfig("dense input mismatch".into()));
                    }
                    features = Some(d.out_features());
                }
            }
        }
        if features != Some(self.config.output_len) {
            return Err(NetError::InvalidConfig("layer chain does not reach output_len".into()));
        }
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Human-readable layer list, e.g. `Conv1d(1->32, k=5) -> Swish -> ...`.
    pub fn describe(&self) -> String {
        self.layers.iter().map(Layer::short_name).collect::<Vec<_>>().join(" -> ")
    }

    pub fn activation_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Activation(_))).count()
    }

    pub fn activation_kinds(&self) -> Vec<ActivationKind> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Activation(a) => Some(a.kind),
                _ => None,
            })
            .collect()
    }

    fn check_batch(&self, batch: &ArrayView2<f64>) -> Result<(), NetError> {
        if batch.ncols() != self.config.input_len {
            return Err(NetError::ShapeMismatch {
                what: "batch width",
                expected: self.config.input_len,
                actual: batch.ncols(),
            });
        }
        Ok(())
    }

    /// Forward pass that caches what `backward` needs. `batch` is `n x P`,
    /// the result `n x output_len`.
    pub fn forward(&mut self, batch: ArrayView2<f64>) -> Result<Array2<f64>, NetError> {
        self.check_batch(&batch)?;
        let n = batch.nrows();
        let mut x = batch.to_owned().into_shape_with_order((1, n * self.config.input_len)).expect("contiguous");
        for layer in &mut self.layers {
            x = match layer {
                Layer::Conv(c) => c.forward(&x.view()),
                Layer::Activation(a) => a.forward(x),
                Layer::Flatten(f) => f.forward(&x),
                Layer::Dense(d) => d.forward(x),
            };
        }
        Ok(x)
    }

    /// Forward pass without caching.
    pub fn predict(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>, NetError> {
        self.check_batch(&batch)?;
        let n = batch.nrows();
        let mut x = batch.to_owned().into_shape_with_order((1, n * self.config.input_len)).expect("contiguous");
        for layer in &self.layers {
            x = match layer {
                Layer::Conv(c) => c.infer(&x.view()),
                Layer::Activation(a) => a.infer(&x),
                Layer::Flatten(f) => f.forward(&x),
                Layer::Dense(d) => d.infer(&x.view()),
            };
        }
        Ok(x)
    }

    /// Accumulate parameter gradients for `output_grad` (`n x output_len`)
    /// and return the input gradient (`n x P`). Consumes the forward cache.
    pub fn backward(&mut self, output_grad: ArrayView2<f64>) -> Result<Array2<f64>, NetError> {
        let cached = self.layers.iter().all(|l| match l {
            Layer::Conv(c) => c.has_cache(),
            Layer::Activation(a) => a.has_cache(),
            Layer::Flatten(_) => true,
            Layer::Dense(d) => d.has_cache(),
        });
        if !cached {
            return Err(NetError::NoForwardCache);
        }
        if output_grad.ncols() != self.config.output_len {
            return Err(NetError::ShapeMismatch {
                what: "output gradient width",
                expected: self.config.output_len,
                actual: output_grad.ncols(),
            });
        }
        let n = output_grad.nrows();
        let mut g = output_grad.to_owned();
        for layer in self.layers.iter_mut().rev() {
            let next = match layer {
                Layer::Conv(c) => c.backward(&g),
                Layer::Activation(a) => a.backward(&g),
                Layer::Flatten(f) => Some(f.backward(&g)),
                Layer::Dense(d) => d.backward(&g),
            };
            g = next.ok_or(NetError::NoForwardCache)?;
        }
        if g.len() != n * self.config.input_len {
            return Err(NetError::ShapeMismatch {
                what: "backward batch size",
                expected: n * self.config.input_len,
                actual: g.len(),
            });
        }
        Ok(g.into_shape_with_order((n, self.config.input_len)).expect("contiguous"))
    }

    fn visit_params(&mut self, mut visit: impl FnMut(&mut [f64], &mut [f64])) {
        for layer in &mut self.layers {
            let (w, b) = match layer {
                Layer::Conv(c) => (&mut c.weight, &mut c.bias),
                Layer::Dense(d) => (&mut d.weight, &mut d.bias),
                _ => continue,
            };
            visit(
                w.value.as_slice_mut().expect("contiguous"),
                w.grad.as_slice_mut().expect("contiguous"),
            );
            visit(
                b.value.as_slice_mut().expect("contiguous"),
                b.grad.as_slice_mut().expect("contiguous"),
            );
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => c.weight.len() + c.bias.len(),
                Layer::Dense(d) => d.weight.len() + d.bias.len(),
                _ => 0,
            })
            .sum()
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(|_, g| g.fill(0.0));
    }

    /// All parameter values in layer order (weight then bias per layer).
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            let (w, b) = match layer {
                Layer::Conv(c) => (c.weight.value.as_slice(), c.bias.value.as_slice()),
                Layer::Dense(d) => (d.weight.value.as_slice(), d.bias.value.as_slice()),
                _ => continue,
            };
            out.extend_from_slice(w.expect("contiguous"));
            out.extend_from_slice(b.expect("contiguous"));
        }
        out
    }

    pub fn grads(&mut self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit_params(|_, g| out.extend_from_slice(g));
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<(), NetError> {
        if values.len() != self.num_params() {
            return Err(NetError::ShapeMismatch {
                what: "parameter vector",
                expected: self.num_params(),
                actual: values.len(),
            });
        }
        let mut offset = 0;
        self.visit_params(|v, _| {
            v.copy_from_slice(&values[offset..offset + v.len()]);
            offset += v.len();
        });
        Ok(())
    }
}
