//! Reverse-mode automatic differentiation on dense f64 tensors.
//!
//! Small by design: only the ops the keyword-spotting model uses, each with
//! a finite-difference-verified backward pass (see [`check::grad_check`]).
//! Graphs are built per forward pass out of reference-counted nodes and torn
//! down when the last handle drops.

pub mod adam;
pub mod check;
pub mod ops;
pub mod tensor;

pub use adam::Adam;
pub use check::grad_check;
pub use ops::GruCell;
pub use tensor::Tensor;
