//! File formats, experiment runner and command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod class;
pub mod doc;
pub mod env;
pub mod experiment;
pub mod lowerbound;
pub mod plot;
