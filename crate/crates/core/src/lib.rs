//! Token-based typology toolkit.
//!
//! The crate turns verse-aligned parallel texts into probabilistic semantic
//! maps of a pivot token: word alignment ([`align`]), a usage matrix with
//! Hamming distances and classical MDS ([`matrix`], [`mds`]), indicator
//! kriging surfaces with contour polygons ([`surface`]), Gaussian mixture
//! clustering with ball-tree core points ([`mixture`]) and coexpression
//! pattern classification ([`typology`]). Treebank construction extraction
//! ([`treebank`]), corpus metrics ([`corpstats`]) and the statistical tests
//! they rely on ([`stats`]) live alongside.

pub mod align;
pub mod corpstats;
pub mod corpus;
pub mod error;
pub mod matrix;
pub mod mds;
pub mod mixture;
pub mod stats;
pub mod surface;
pub mod treebank;
pub mod typology;

pub use error::{Error, Result};
