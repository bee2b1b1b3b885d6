//! Data-stream mining toolkit.
//!
//! The crate is organised around a pull-based [`StreamSource`] of
//! [`Instance`]s, an incremental [`learners::Learner`] contract, the four
//! classic concept-drift detectors, stream evaluation protocols, grid-search
//! CASH over a buffered prefix, and online meta-learning model selection.
//!
//! Data-parallel inner loops (ensemble members, meta base learners, CASH
//! configuration sweeps, forest construction) go through [`par`], which uses
//! rayon when the `parallel` feature is enabled and falls back to plain
//! sequential iteration otherwise.

pub mod cash;
pub mod drift;
mod error;
pub mod eval;
pub mod generators;
pub mod io;
pub mod learners;
pub mod meta;
pub mod par;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    accuracy, cohen_kappa, validate_instance, ConfusionMatrix, Feature, FeatureKind,
    FeatureSchema, Instance, PredictorStatus, StreamSource,
};

/// Derives a named, independent 64-bit seed from a root seed.
///
/// Every random component of an experiment draws from its own sub-seed so
/// that reordering components never perturbs the others.
pub fn sub_seed(root: u64, name: &str) -> u64 {
    // FNV-1a over the name, then a splitmix64 finaliser over the mix.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = root ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
