//! Minimal reverse-mode differentiable networks.
//!
//! A [`DiffNet`] is an ordered stack of affine layers and elementwise
//! activations, evaluated against a flat [`ParamVector`] whose layout the net
//! dictates. The same machinery backs both the bottom potential functions and
//! the top transformation; it supports exactly what those need: forward
//! evaluation and vector-Jacobian products, in `f64`.

mod pair;
mod params;

pub use pair::{PairTable, SymmetryMode};
pub use params::{ParamLayout, ParamVector};

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    /// Negative-side slope `alpha`.
    LeakyRelu(f64),
    Sigmoid,
    /// Clamp to `[-1, 1]`.
    HardTanh,
    Identity,
}

impl Activation {
    fn apply(&self, u: f64) -> f64 {
        match *self {
            Activation::Relu => u.max(0.0),
            Activation::LeakyRelu(alpha) => {
                if u > 0.0 {
                    u
                } else {
                    alpha * u
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-u).exp()),
            Activation::HardTanh => u.clamp(-1.0, 1.0),
            Activation::Identity => u,
        }
    }

    /// Derivative given the pre-activation input.
    fn derivative(&self, u: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(alpha) => {
                if u > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-u).exp());
                s * (1.0 - s)
            }
            Activation::HardTanh => {
                if u > -1.0 && u < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One layer descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layer {
    Affine { input: usize, output: usize },
    Activation(Activation),
}

/// Parameter initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    Zeros,
    /// Uniform in `[-sqrt(6/(fan_in+fan_out)), +...]`, zero biases.
    GlorotUniform { seed: u64 },
    /// First affine weight = identity, second affine weight = all ones, zero
    /// biases. Requires exactly two affine layers with a square first one.
    IdentityOnes,
}

/// An immutable network descriptor plus the parameter layout it consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffNet {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<Layer>,
    layout: Arc<ParamLayout>,
}

impl DiffNet {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::structure("network input dimension must be positive"));
        }
        let mut dim = input_dim;
        let mut blocks = Vec::new();
        let mut affine_idx = 0usize;
        for layer in &layers {
            match *layer {
                Layer::Affine { input, output } => {
                    if input != dim {
                        return Err(Error::structure(format!(
                            "affine layer expects input {input}, previous layer produces {dim}"
                        )));
                    }
                    if output == 0 {
                        return Err(Error::structure("affine output dimension must be positive"));
                    }
                    blocks.push((format!("w{affine_idx}"), vec![output, input]));
                    blocks.push((format!("b{affine_idx}"), vec![output]));
                    affine_idx += 1;
                    dim = output;
                }
                Layer::Activation(_) => {}
            }
        }
        let layout = Arc::new(ParamLayout::new(blocks)?);
        Ok(DiffNet { input_dim, output_dim: dim, layers, layout })
    }

    /// Affine -> activation -> affine ... convenience constructor.
    /// `dims = [in, h1, ..., out]`; `activation` is applied between affines.
    pub fn mlp(dims: &[usize], activation: Activation) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::structure("mlp needs at least input and output dims"));
        }
        let mut layers = Vec::new();
        for w in 0..dims.len() - 1 {
            layers.push(Layer::Affine { input: dims[w], output: dims[w + 1] });
            if w + 2 < dims.len() {
                layers.push(Layer::Activation(activation));
            }
        }
        DiffNet::new(dims[0], layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn param_len(&self) -> usize {
        self.layout.total_len()
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.layout() != &self.layout {
            // Same content counts even if the Arc differs.
            if **params.layout() != *self.layout {
                return Err(Error::structure("parameter layout does not match network"));
            }
        }
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::structure(format!(
                "input length {} does not match network input {}",
                input.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Evaluate the network.
    pub fn forward(&self, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
        self.check_params(params)?;
        self.check_input(input)?;
        let mut current = input.to_vec();
        let mut affine_idx = 0usize;
        for layer in &self.layers {
            match *layer {
                Layer::Affine { input: n_in, output: n_out } => {
                    let w = params.block(&format!("w{affine_idx}"))?;
                    let b = params.block(&format!("b{affine_idx}"))?;
                    let mut next = vec![0.0; n_out];
                    for o in 0..n_out {
                        next[o] = b[o] + crate::numeric::dot(&w[o * n_in..(o + 1) * n_in], &current);
                    }
                    current = next;
                    affine_idx += 1;
                }
                Layer::Activation(act) => {
                    for v in current.iter_mut() {
                        *v = act.apply(*v);
                    }
                }
            }
        }
        Ok(current)
    }

    /// Forward pass keeping each layer's input, for the backward sweep.
    fn forward_trace(&self, params: &ParamVector, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut stages = Vec::with_capacity(self.layers.len() + 1);
        stages.push(input.to_vec());
        let mut affine_idx = 0usize;
        for layer in &self.layers {
            let current = stages.last().unwrap();
            let next = match *layer {
                Layer::Affine { input: n_in, output: n_out } => {
                    let w = params.block(&format!("w{affine_idx}"))?;
                    let b = params.block(&format!("b{affine_idx}"))?;
                    affine_idx += 1;
                    (0..n_out)
                        .map(|o| b[o] + crate::numeric::dot(&w[o * n_in..(o + 1) * n_in], current))
                        .collect()
                }
                Layer::Activation(act) => current.iter().map(|&u| act.apply(u)).collect(),
            };
            stages.push(next);
        }
        Ok(stages)
    }

    /// Reverse-mode derivatives of `cotangent . forward(input)`.
    ///
    /// Returns the gradient with respect to the input and a parameter vector
    /// holding the gradient with respect to every weight and bias.
    pub fn vjp(
        &self,
        params: &ParamVector,
        input: &[f64],
        cotangent: &[f64],
    ) -> Result<(Vec<f64>, ParamVector)> {
        let (grad_input, grad_params) = self.vjp_impl(params, input, cotangent, true)?;
        Ok((grad_input, grad_params.unwrap()))
    }

    /// Gradient with respect to the input only; skips parameter gradients.
    pub fn grad_input(
        &self,
        params: &ParamVector,
        input: &[f64],
        cotangent: &[f64],
    ) -> Result<Vec<f64>> {
        let (grad_input, _) = self.vjp_impl(params, input, cotangent, false)?;
        Ok(grad_input)
    }

    fn vjp_impl(
        &self,
        params: &ParamVector,
        input: &[f64],
        cotangent: &[f64],
        with_params: bool,
    ) -> Result<(Vec<f64>, Option<ParamVector>)> {
        self.check_params(params)?;
        self.check_input(input)?;
        if cotangent.len() != self.output_dim {
            return Err(Error::structure(format!(
                "cotangent length {} does not match network output {}",
                cotangent.len(),
                self.output_dim
            )));
        }
        let stages = self.forward_trace(params, input)?;
        let mut grad_params = with_params.then(|| ParamVector::zeros(self.layout.clone()));
        let mut delta = cotangent.to_vec();
        let mut affine_idx = self.layers.iter().filter(|l| matches!(l, Layer::Affine { .. })).count();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let layer_input = &stages[li];
            match *layer {
                Layer::Affine { input: n_in, output: n_out } => {
                    affine_idx -= 1;
                    let w = params.block(&format!("w{affine_idx}"))?;
                    if let Some(gp) = grad_params.as_mut() {
                        {
                            let gw = gp.block_mut(&format!("w{affine_idx}"))?;
                            for o in 0..n_out {
                                crate::numeric::axpy(
                                    delta[o],
                                    layer_input,
                                    &mut gw[o * n_in..(o + 1) * n_in],
                                );
                            }
                        }
                        let gb = gp.block_mut(&format!("b{affine_idx}"))?;
                        crate::numeric::axpy(1.0, &delta, gb);
                    }
                    let mut prev = vec![0.0; n_in];
                    for o in 0..n_out {
                        crate::numeric::axpy(delta[o], &w[o * n_in..(o + 1) * n_in], &mut prev);
                    }
                    delta = prev;
                }
                Layer::Activation(act) => {
                    for (d, &u) in delta.iter_mut().zip(layer_input) {
                        *d *= act.derivative(u);
                    }
                }
            }
        }
        Ok((delta, grad_params))
    }

    /// Build parameters under an initialization scheme.
    pub fn init(&self, scheme: InitScheme) -> Result<ParamVector> {
        let mut params = ParamVector::zeros(self.layout.clone());
        match scheme {
            InitScheme::Zeros => {}
            InitScheme::GlorotUniform { seed } => {
                let mut affine_idx = 0usize;
                for layer in &self.layers {
                    if let Layer::Affine { input, output } = *layer {
                        let limit = (6.0 / (input + output) as f64).sqrt();
                        let mut r = rng::stream(seed, rng::ns::INIT, affine_idx as u64);
                        let w = params.block_mut(&format!("w{affine_idx}"))?;
                        for v in w.iter_mut() {
                            *v = r.gen_range(-limit..limit);
                        }
                        affine_idx += 1;
                    }
                }
            }
            InitScheme::IdentityOnes => {
                let affines: Vec<(usize, usize)> = self
                    .layers
                    .iter()
                    .filter_map(|l| match *l {
                        Layer::Affine { input, output } => Some((input, output)),
                        _ => None,
                    })
                    .collect();
                if affines.len() != 2 {
                    return Err(Error::structure(
                        "identity-ones initialization expects exactly two affine layers",
                    ));
                }
                let (in0, out0) = affines[0];
                if in0 != out0 {
                    return Err(Error::structure(format!(
                        "identity-ones requires a square first layer, got {in0}->{out0}"
                    )));
                }
                {
                    let w0 = params.block_mut("w0")?;
                    for i in 0..in0 {
                        w0[i * in0 + i] = 1.0;
                    }
                }
                let w1 = params.block_mut("w1")?;
                for v in w1.iter_mut() {
                    *v = 1.0;
                }
            }
        }
        Ok(params)
    }
}
