//! The top transformation `T`: a differentiable map from a potential-layout
//! vector (and whatever conditioning data the implementor captured) to a
//! scalar score.

use crate::diffnet::{DiffNet, ParamVector};
use crate::error::{Error, Result};

/// Scalar-valued differentiable transformation of a slot vector.
///
/// Implementations close over their conditioning input and parameters; the
/// inference loops only ever need values and input gradients.
pub trait TopTransform: Sync {
    /// Expected input length.
    fn dim(&self) -> usize;

    fn value(&self, y: &[f64]) -> Result<f64>;

    /// Gradient of `value` with respect to `y`.
    fn grad_y(&self, y: &[f64]) -> Result<Vec<f64>>;

    fn value_and_grad(&self, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(y)?, self.grad_y(y)?))
    }
}

/// `T(y) = 1' y`, the classical summed score.
pub struct SumTop {
    pub dim: usize,
}

impl TopTransform for SumTop {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim, y)?;
        Ok(y.iter().sum())
    }

    fn grad_y(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, y)?;
        Ok(vec![1.0; self.dim])
    }
}

/// `T(y) = w' y`.
pub struct WeightedSumTop<'a> {
    pub weights: &'a [f64],
}

impl TopTransform for WeightedSumTop<'_> {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), y)?;
        Ok(crate::numeric::dot(self.weights, y))
    }

    fn grad_y(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.weights.len(), y)?;
        Ok(self.weights.to_vec())
    }
}

/// `T(y) = -1/2 ||y - anchor||^2`; strongly concave, with a closed-form prox.
/// Used by tests and diagnostics fixtures.
pub struct QuadraticAnchorTop {
    pub anchor: Vec<f64>,
}

impl TopTransform for QuadraticAnchorTop {
    fn dim(&self) -> usize {
        self.anchor.len()
    }

    fn value(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.anchor.len(), y)?;
        Ok(-0.5 * y.iter().zip(&self.anchor).map(|(v, a)| (v - a) * (v - a)).sum::<f64>())
    }

    fn grad_y(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.anchor.len(), y)?;
        Ok(y.iter().zip(&self.anchor).map(|(v, a)| a - v).collect())
    }
}

/// A [`DiffNet`] with scalar output, applied to `input_scale * y`.
///
/// The scale mirrors the practice of taming potential magnitudes before a
/// saturating transformation.
pub struct NetTop<'a> {
    pub net: &'a DiffNet,
    pub params: &'a ParamVector,
    pub input_scale: f64,
}

impl<'a> NetTop<'a> {
    pub fn new(net: &'a DiffNet, params: &'a ParamVector, input_scale: f64) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::structure(format!(
                "top network must produce a scalar, got output dim {}",
                net.output_dim()
            )));
        }
        Ok(NetTop { net, params, input_scale })
    }

    fn scaled(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| v * self.input_scale).collect()
    }
}

impl TopTransform for NetTop<'_> {
    fn dim(&self) -> usize {
        self.net.input_dim()
    }

    fn value(&self, y: &[f64]) -> Result<f64> {
        Ok(self.net.forward(self.params, &self.scaled(y))?[0])
    }

    fn grad_y(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.net.grad_input(self.params, &self.scaled(y), &[1.0])?;
        for v in g.iter_mut() {
            *v *= self.input_scale;
        }
        Ok(g)
    }
}

fn check_dim(expected: usize, y: &[f64]) -> Result<()> {
    if y.len() != expected {
        return Err(Error::structure(format!(
            "transformation expects input of length {expected}, got {}",
            y.len()
        )));
    }
    Ok(())
}
