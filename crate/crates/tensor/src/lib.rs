//! Dense `f64` arrays and a reverse-mode automatic differentiation engine.
//!
//! Graphs are built from [`Expr`] nodes and evaluated against named leaf
//! [`Bindings`]. [`gradient`] returns gradient *expressions* rather than
//! values, so gradients can be differentiated again (double backprop), which
//! is what a gradient penalty on a discriminator's input needs:
//!
//! ```
//! use genboot_tensor::{gradient, Bindings, Expr, Tensor};
//!
//! let x = Expr::leaf("x", &[]);
//! let y = x.square().mul(&x).unwrap(); // x^3
//! let dy = gradient(&y, &[x.clone()]).unwrap().remove(0);
//! let d2y = gradient(&dy, &[x.clone()]).unwrap().remove(0);
//!
//! let two = Tensor::scalar(2.0);
//! let b = Bindings::new().with("x", &two);
//! assert_eq!(dy.eval(&b).unwrap().item(), 12.0);
//! assert_eq!(d2y.eval(&b).unwrap().item(), 12.0);
//! ```
//!
//! A graph lives on one thread (`Expr` is reference counted, not `Send`);
//! independent graphs can be built and evaluated on separate threads.

mod alloc;
mod array;
mod error;
mod eval;
mod expr;
mod grad;
mod kernels;

pub use array::Tensor;
pub use error::{Result, TensorError};
pub use eval::{evaluate, Bindings};
pub use expr::Expr;
pub use grad::gradient;
pub use kernels::segment_bounds;
