//! Desk-scale coarse geometry and operator numerics.
//!
//! Finite metric spaces and Cayley graphs, covering maps with injectivity
//! radii, finite-propagation operators, localised lifting maps, operator norm
//! localisation estimates, quantitative K-theory element checks, Sobolev
//! norms and small cancellation schedulers.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bandops;
pub mod coverings;
pub mod error;
pub mod lifting;
pub mod linalg;
pub mod onl;
pub mod quantk;
pub mod scalar;
pub mod smallcancel;
pub mod sobolev;
pub mod spaces;

pub use error::{Error, ErrorKind, Result};
pub use scalar::{Entry, Real};
pub use spaces::{Cover, Dist, FiniteSpace};

/// Double-precision complex matrix.
pub type Matrix = linalg::Matrix<f64>;

/// Double-precision band operator.
pub type Operator = bandops::BandOperator<f64>;
/// Double-precision group-ring element.
pub type GroupElement = bandops::GroupRingElement<f64>;
