//! Detection and causal attribution of word-usage shifts in time-stamped
//! text corpora.
//!
//! The pipeline runs in four stages:
//!
//! - [`corpus`]: preprocess documents into stem sets and monthly
//!   Laplace-smoothed log10 document-frequency series.
//! - [`gptscore`]: log-odds ratios between human and LLM-edited contrastive
//!   corpora, aggregated into a Dirichlet-weighted score per word.
//! - [`syncontrol`]: donor pools, simplex-constrained synthetic controls and
//!   MSPE-ratio placebo inference.
//! - [`didreg`]: a Bayesian piecewise-linear difference-in-differences
//!   regression of a word against its synthetic control.
//!
//! [`simharness`] generates series with known injected effects for
//! end-to-end validation.

pub mod corpus;
pub mod didreg;
pub mod error;
pub mod gptscore;
pub mod month;
pub mod rng;
pub mod simharness;
pub mod stats;
pub mod syncontrol;

pub use error::{Error, Result};
pub use month::{MonthWindow, YearMonth};
