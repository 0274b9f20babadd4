//! Reverse-mode differentiation over dense row-major `f64` arrays.
//!
//! A [`Graph`] is an append-only arena: every operation pushes a node holding
//! its forward result and enough saved state to run its backward rule. Node
//! order is a topological order, so [`Graph::backward`] is a single reverse
//! sweep. Learnable arrays live in a [`ParamStore`] outside the graph and enter
//! it as leaves through [`Graph::param`].

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport, SlotSelection};
pub use graph::{Graph, Value};
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
