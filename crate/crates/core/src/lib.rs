//! Hyper-sparse aggregation over finite dictionaries of predictors.
//!
//! Given a dictionary of M predictors represented by their values on a
//! sample, this crate implements:
//!
//! - sample splitting and threshold preselection of the dictionary,
//! - the star, segment, and convex-hull ERM aggregates (the first two put
//!   weight on at most two predictors), plus exponential-weights baselines,
//! - a closed-form segment risk minimizer underlying all of the above,
//! - an adversarial dyadic construction on which plain ERM selection is
//!   provably slow, with Monte Carlo harnesses measuring its excess risk,
//! - a lasso-modified LARS path and Mallows-Cp selection for building
//!   dictionaries of linear predictors,
//! - a simulation study comparing Cp selection, exponential weights, and
//!   the star aggregate on correlated Gaussian designs.

pub mod adversarial;
pub mod aggregate;
pub mod data;
pub mod error;
pub mod experiments;
pub mod lars;
pub mod linalg;
pub mod preselect;
pub mod risk;
pub mod rng;

pub use data::{
    read_dictionary_csv, split_sample, write_dictionary_csv, Dictionary, DictionaryCsv, Regime,
    Sample, SimplexWeights, SplitMode, SplitSample,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
