//! Product life cycle modelling for durable goods.
//!
//! First purchase follows Bass and Gompertz diffusion, repurchase adds
//! replacement echoes and multiple purchase, and brand competition is a
//! replicator system whose selection pressure drives the mean price down.
//! The [`fit`] module estimates the model parameters from sales, price and
//! penetration series.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod competition;
pub mod config;
pub mod diffusion;
pub mod error;
pub mod fit;
pub mod io;
pub mod market;
pub mod ode;
pub mod repurchase;
pub mod scenario;
pub mod series;
pub mod sizes;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{PlcError, Result};
pub use series::SalesSeries;
