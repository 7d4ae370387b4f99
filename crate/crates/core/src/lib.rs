//! Exact analysis of the L² loss of one-hidden-layer networks with ReLU,
//! leaky ReLU and quadratic activation fitted to an affine target on an
//! interval.
//!
//! The loss and its right-hand generalized gradient are evaluated in closed
//! form from a piecewise-polynomial representation of the realization. All
//! routines are generic over [`Scalar`], so the same code runs in `f64` and in
//! exact rational arithmetic.

pub mod classifier;
pub mod construct;
pub mod descent;
pub mod error;
pub mod exactcalc;
pub mod model;
pub mod poly;
pub mod scalar;
pub mod taxonomy;
pub mod verify;
pub mod wire;

pub use classifier::{classify, ClassificationResult, Verdict};
pub use error::{LandscapeError, Result};
pub use exactcalc::{generalized_gradient, loss, restricted_hessian, Coord, GradientVector, HessianBlock};
pub use model::{realize, Activation, NetworkParams, PiecewiseForm, TargetSpec};
pub use poly::Poly;
pub use scalar::{Rational, Scalar, Tolerances};
pub use taxonomy::{centeredness, classify_neuron, NeuronKind, NeuronReport};
