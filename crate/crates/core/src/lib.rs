//! Corpus delineation and scientometrics over citation-index exports.
//!
//! The crate covers the whole workflow: parsing exports into [`Record`]s and
//! storing them ([`store`]), boolean strategy search ([`query`]), the staged
//! admission pipeline ([`pipeline`]), classifier backends and the labeling
//! loop ([`classifier`]), evaluation metrics ([`eval`]) and landscape
//! analytics ([`analytics`]).

pub mod analytics;
pub mod classifier;
pub mod cli;
pub mod eval;
pub mod formats;
pub mod pipeline;
pub mod query;
pub mod record;
pub mod store;

pub use record::Record;
