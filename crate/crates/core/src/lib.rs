//! Optimal-transport maps, multivariate CDF level-set geometry and
//! identification diagnostics for nonseparable triangular models
//! `Y = m(X, ε)`, `X = h(Z, U)`.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs; file formats, configuration and the command line
//! live in the companion `tri-ident` crate.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`measure`] | grids, gridded CDFs, analytic densities, level sets, partial order |
//! | [`transport`] | exact / entropic solvers, barycentric maps, rearrangement, verifiers |
//! | [`manifold`] | intersection manifolds of two CDFs and the assumption checks on them |
//! | [`dynamics`] | the `T` / `T⁻¹` orbit iteration and fixed-set / stability checks |
//! | [`experiments`] | synthetic triangular and hedonic models, end-to-end verdicts |

#![no_std]
#![forbid(unsafe_code)]
// `!(a < b)` is how NaN is rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod manifold;
pub mod measure;
pub mod quadrature;
pub mod quasi;
pub mod special;
pub mod transport;

pub use error::{Error, Result};
