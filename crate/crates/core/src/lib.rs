//! Structured prediction with a nonlinear transformation applied to a
//! decomposed potential vector.
//!
//! The score of a configuration `x` is `T(H(x, c, w))`, where `H` is the
//! masked potential vector (one slot per region/assignment pair, nonzero only
//! at the slots `x` selects) and `T` is a differentiable transformation.
//! Inference couples a discrete MAP subproblem, handled through the dual of
//! its LP relaxation, to backpropagation through `T` via a primal-dual
//! saddle-point loop. Learning drives everything with a structured max-margin
//! objective and loss-augmented inference.
//!
//! Module map:
//! - [`regiongraph`]: variables, domains, regions, flat slot layout, masking.
//! - [`diffnet`]: minimal reverse-mode networks for potentials and `T`.
//! - [`mapsolver`]: LP-relaxation dual, message passing, decoding, oracles.
//! - [`saddle`]: the primal-dual inference loop over `(y, lambda, mu)`.
//! - [`learn`]: potentials assembly, margin gradients, minibatch training.
//! - [`tasks`]: synthetic benchmark tasks, metrics, dataset files.

pub mod diffnet;
pub mod error;
pub mod learn;
pub mod mapsolver;
pub mod numeric;
pub mod regiongraph;
pub mod rng;
pub mod saddle;
pub mod tasks;
pub mod top;

pub use error::{Error, Result};
pub use regiongraph::{Assignment, PotentialVector, RegionGraph};
