//! Core algorithms for epidemic-correlated synthetic transaction data and
//! the differentially private analyses built on top of it.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.
//! File formats, configuration and the command-line front end live in the
//! `epidp` companion crate; everything here is pure computation over
//! in-memory values and explicit random number generators.
//!
//! Module map:
//!
//! * [`grid`] - the weekly date grid every series is aligned to.
//! * [`epi`] - daily to weekly aggregation of death/case counts and
//!   mobility reference data.
//! * [`geo`], [`category`], [`record`] - domain vocabulary of the dataset.
//! * [`datagen`] - the synthetic merchant-week generator and its baseline
//!   privacy template.
//! * [`dp`] - noise calibration, the Gaussian mechanism and the budget ledger.
//! * [`analytics`] - hotspot, mobility and adherence releases.
//! * [`contact`] - contact-matrix estimation and consumption-matrix training.
//! * [`rt`] - renewal-equation reproduction number estimation and covariates.
//! * [`validation`] - correlation diagnostics and dataset conformance checks.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analytics;
pub mod category;
pub mod contact;
pub mod datagen;
pub mod dp;
pub mod epi;
mod error;
pub mod geo;
pub mod grid;
pub(crate) mod math;
pub mod record;
pub mod rt;
pub mod special;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
