//! Feedforward-network baseline with exact backpropagation.
//!
//! Two models live here. [`Mlp`] is a plain dense network
//! (`y = W·z + b`, `z = phi(y)` per layer) used both as the victim
//! classifier and as the attack meta-model. [`ToyModel`] is the
//! three-parameter single-neuron model
//! `f(x) = phi(W_rel · x_rel + W_irr · x_irr + b)` whose gradients couple as
//! `d/dW_irr = x_irr · d/db` for every loss — the mechanism that leaks the
//! constant value of an irrelevant feature into the trained parameters.

use thiserror::Error;

use crate::seed;
use crate::tensor::{self, Tensor, TensorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("need at least one layer")]
    NoLayers,
    #[error("input has length {got}, expected {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("loss gradient has length {got}, expected {expected}")]
    LossGradDim { expected: usize, got: usize },
    #[error("stale cache: layer {layer} activation has length {got}, expected {expected}")]
    StaleCache {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("malformed model record: {0}")]
    Parse(String),
}

/// Pointwise activation. `Relu` has derivative 0 at exactly 0 (ties are
/// measure zero but the choice must be deterministic).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative as a function of the pre-activation.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Weight matrix of shape `(out_dim, in_dim)`.
    pub weights: Tensor,
    /// Bias vector of shape `(out_dim,)`.
    pub biases: Tensor,
    pub activation: Activation,
}

/// Dense feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Forward-pass byproducts needed for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Vec<f64>,
    /// Pre-activations per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activations per layer.
    post: Vec<Vec<f64>>,
}

/// Gradients with the same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub dw: Vec<Vec<f64>>,
    pub db: Vec<Vec<f64>>,
}

impl Mlp {
    /// Zero-initialized network; `dims = [input, hidden..., output]`.
    pub fn new(dims: &[usize], activations: &[Activation]) -> Result<Self, NeuralError> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(NeuralError::NoLayers);
        }
        let layers = (0..dims.len() - 1)
            .map(|l| Layer {
                weights: Tensor::zeros(vec![dims[l + 1], dims[l]]),
                biases: Tensor::zeros(vec![dims[l + 1]]),
                activation: activations[l],
            })
            .collect();
        Ok(Self { layers })
    }

    /// Gaussian init scaled by `1/sqrt(fan_in)`; biases start at zero.
    pub fn random(
        dims: &[usize],
        activations: &[Activation],
        seed_value: u64,
    ) -> Result<Self, NeuralError> {
        let mut net = Self::new(dims, activations)?;
        let mut rng = seed::rng(seed_value);
        for layer in &mut net.layers {
            let fan_in = layer.weights.shape()[1] as f64;
            let std = 1.0 / fan_in.sqrt();
            layer.weights = tensor::random_tensor_with(
                layer.weights.shape(),
                tensor::Dist::Gaussian {
                    mean: 0.0,
                    stddev: std,
                },
                &mut rng,
            )?;
        }
        Ok(net)
    }

    /// The standard victim architecture: one-hot pairs for four binary
    /// features plus one scalar give 9 inputs, hidden structure
    /// 16-16-8-4 with relu, and 2 output logits (614 parameters in total).
    pub fn victim_classifier(seed_value: u64) -> Self {
        Self::random(
            &[9, 16, 16, 8, 4, 2],
            &[
                Activation::Relu,
                Activation::Relu,
                Activation::Relu,
                Activation::Relu,
                Activation::Identity,
            ],
            seed_value,
        )
        .expect("fixed architecture")
    }

    /// The attack meta-model: six layers with structure 20-20-10-10-2-2,
    /// relu activations on the intermediate layers, logits at the end.
    pub fn attack_meta_model(input_dim: usize, seed_value: u64) -> Self {
        Self::random(
            &[input_dim, 20, 20, 10, 10, 2, 2],
            &[
                Activation::Relu,
                Activation::Relu,
                Activation::Relu,
                Activation::Relu,
                Activation::Relu,
                Activation::Identity,
            ],
            seed_value,
        )
        .expect("fixed architecture")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.shape()[0]
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Evaluate the network, returning logits and the cache for backward.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache), NeuralError> {
        if x.len() != self.input_dim() {
            return Err(NeuralError::InputDim {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut z = x.to_vec();
        for layer in &self.layers {
            let (out_dim, in_dim) = (layer.weights.shape()[0], layer.weights.shape()[1]);
            let w = layer.weights.data();
            let b = layer.biases.data();
            let mut y = vec![0.0; out_dim];
            for i in 0..out_dim {
                let mut acc = b[i];
                let row = &w[i * in_dim..(i + 1) * in_dim];
                for (wij, zj) in row.iter().zip(&z) {
                    acc += wij * zj;
                }
                y[i] = acc;
            }
            let a: Vec<f64> = y.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(y);
            post.push(a.clone());
            z = a;
        }
        let logits = post.last().cloned().unwrap();
        Ok((
            logits,
            MlpCache {
                input: x.to_vec(),
                pre,
                post,
            },
        ))
    }

    /// Exact reverse-mode gradients of a scalar loss, given the gradient of
    /// that loss with respect to the network output.
    pub fn backward(&self, cache: &MlpCache, loss_grad: &[f64]) -> Result<MlpGrads, NeuralError> {
        let n_layers = self.layers.len();
        if loss_grad.len() != self.output_dim() {
            return Err(NeuralError::LossGradDim {
                expected: self.output_dim(),
                got: loss_grad.len(),
            });
        }
        if cache.pre.len() != n_layers || cache.input.len() != self.input_dim() {
            return Err(NeuralError::StaleCache {
                layer: 0,
                expected: self.input_dim(),
                got: cache.input.len(),
            });
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if cache.pre[l].len() != layer.weights.shape()[0] {
                return Err(NeuralError::StaleCache {
                    layer: l,
                    expected: layer.weights.shape()[0],
                    got: cache.pre[l].len(),
                });
            }
        }

        let mut dw = Vec::with_capacity(n_layers);
        let mut db = Vec::with_capacity(n_layers);
        for layer in &self.layers {
            dw.push(vec![0.0; layer.weights.len()]);
            db.push(vec![0.0; layer.biases.len()]);
        }

        // delta = dL/d(post-activation of current layer)
        let mut delta = loss_grad.to_vec();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let (out_dim, in_dim) = (layer.weights.shape()[0], layer.weights.shape()[1]);
            let prev: &[f64] = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            // through the activation
            let dpre: Vec<f64> = (0..out_dim)
                .map(|i| delta[i] * layer.activation.derivative(cache.pre[l][i]))
                .collect();
            for i in 0..out_dim {
                db[l][i] = dpre[i];
                let row = &mut dw[l][i * in_dim..(i + 1) * in_dim];
                for (slot, zj) in row.iter_mut().zip(prev) {
                    *slot = dpre[i] * zj;
                }
            }
            if l > 0 {
                let w = layer.weights.data();
                let mut next = vec![0.0; in_dim];
                for i in 0..out_dim {
                    let row = &w[i * in_dim..(i + 1) * in_dim];
                    for (j, wij) in row.iter().enumerate() {
                        next[j] += dpre[i] * wij;
                    }
                }
                delta = next;
            }
        }
        Ok(MlpGrads { dw, db })
    }

    /// Flatten parameters layer-major (weights row-major, then biases).
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(layer.biases.data());
        }
        out
    }

    /// Rebuild a network of this architecture from a flat parameter vector.
    pub fn from_flat(&self, params: &[f64]) -> Result<Self, NeuralError> {
        if params.len() != self.param_count() {
            return Err(NeuralError::ParamLength {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for layer in &self.layers {
            let wn = layer.weights.len();
            let bn = layer.biases.len();
            let weights = Tensor::from_vec(
                layer.weights.shape().to_vec(),
                params[offset..offset + wn].to_vec(),
            )?;
            offset += wn;
            let biases = Tensor::from_vec(
                layer.biases.shape().to_vec(),
                params[offset..offset + bn].to_vec(),
            )?;
            offset += bn;
            layers.push(Layer {
                weights,
                biases,
                activation: layer.activation,
            });
        }
        Ok(Self { layers })
    }

    /// Flatten gradient structures in the same order as [`flatten_params`].
    pub fn flatten_grads(&self, grads: &MlpGrads) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (l, _) in self.layers.iter().enumerate() {
            out.extend_from_slice(&grads.dw[l]);
            out.extend_from_slice(&grads.db[l]);
        }
        out
    }
}

/// The single-neuron leak demonstrator:
/// `f(x) = phi(w_rel · x_rel + w_irr · x_irr + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyModel {
    pub w_rel: f64,
    pub w_irr: f64,
    pub bias: f64,
    pub activation: Activation,
}

impl ToyModel {
    pub fn random(seed_value: u64) -> Self {
        let t = tensor::random_tensor(
            &[3],
            tensor::Dist::Gaussian {
                mean: 0.0,
                stddev: 1.0,
            },
            seed_value,
        )
        .expect("fixed shape");
        Self {
            w_rel: t.data()[0],
            w_irr: t.data()[1],
            bias: t.data()[2],
            activation: Activation::Sigmoid,
        }
    }

    pub fn pre_activation(&self, x_rel: f64, x_irr: f64) -> f64 {
        self.w_rel * x_rel + self.w_irr * x_irr + self.bias
    }

    pub fn forward(&self, x_rel: f64, x_irr: f64) -> f64 {
        self.activation.apply(self.pre_activation(x_rel, x_irr))
    }

    /// Gradients of a loss given `dL/d(output)`. The chain rule factors
    /// through a single scalar `t = phi'(pre) · dL/dout`, so
    /// `d/dW_irr = x_irr · d/db` holds exactly, to the last bit.
    pub fn gradients(&self, x_rel: f64, x_irr: f64, dloss_dout: f64) -> (f64, f64, f64) {
        let t = self.activation.derivative(self.pre_activation(x_rel, x_irr)) * dloss_dout;
        (x_rel * t, x_irr * t, t)
    }
}

/// Serialize an MLP: header `mlp <n_layers>` then per layer
/// `<activation> <weights tensor> <biases tensor>`.
pub fn write_mlp(m: &Mlp) -> String {
    let mut out = format!("mlp {}\n", m.layers().len());
    for layer in m.layers() {
        let act = match layer.activation {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
        };
        out.push_str(act);
        out.push('\n');
        tensor::write_tensor(&layer.weights, &mut out);
        tensor::write_tensor(&layer.biases, &mut out);
    }
    out
}

pub fn read_mlp(text: &str) -> Result<Mlp, NeuralError> {
    let mut tokens = text.split_whitespace();
    match tokens.next() {
        Some("mlp") => {}
        other => return Err(NeuralError::Parse(format!("bad magic {other:?}"))),
    }
    let n: usize = tokens
        .next()
        .ok_or_else(|| NeuralError::Parse("missing layer count".into()))?
        .parse()
        .map_err(|e| NeuralError::Parse(format!("layer count: {e}")))?;
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let activation = match tokens.next() {
            Some("relu") => Activation::Relu,
            Some("identity") => Activation::Identity,
            Some("sigmoid") => Activation::Sigmoid,
            other => return Err(NeuralError::Parse(format!("bad activation {other:?}"))),
        };
        let weights = tensor::read_tensor(&mut tokens)?;
        let biases = tensor::read_tensor(&mut tokens)?;
        layers.push(Layer {
            weights,
            biases,
            activation,
        });
    }
    if layers.is_empty() {
        return Err(NeuralError::NoLayers);
    }
    Ok(Mlp { layers })
}
