//! Experience operators, perception measures, typicalities and posterior
//! inference over finite-dimensional quantum states.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hypotheses;
pub mod manyworlds;
pub mod measure;
pub mod operator;
pub mod quad;
pub mod reproduce;
pub mod sqmn;
pub mod toy;

pub use error::{Result, SqmError};
