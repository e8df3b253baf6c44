//! Library surface of the command-line driver: configuration parsing and
//! artifact writers, shared by the binary and its tests.

// negated comparisons keep NaN rejection in configuration validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
