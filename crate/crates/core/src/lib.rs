//! Selection- and popularity-bias toolkit for conversational recommendation
//! corpora.
//!
//! * [`corpus`]: catalog, dialogues, episode segmentation, file I/O.
//! * [`popularity`]: item frequency, normalised popularity, popular set.
//! * [`metrics`]: initial item coverage, popularity bias, cross-episode and
//!   intent-oriented popularity, Hit/NDCG/MRR, run evaluation.
//! * [`augment`]: Once-Aug and PopNudge augmentation plans, materialisation
//!   and long-tail comparison.
//! * [`synthgen`]: prompt templates, generation backends and synthetic pool
//!   construction.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default); see [`par::Exec`].

pub mod augment;
pub mod corpus;
pub mod error;
pub mod fixture;
pub mod metrics;
pub mod par;
pub mod popularity;
pub mod synthgen;

pub use error::{Error, Result};
pub use par::Exec;
