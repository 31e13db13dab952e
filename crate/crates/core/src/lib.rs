//! Active-learning workbench for entity matching.
//!
//! The crate is organised the way an active-learning run flows:
//!
//! * [`corpus`] loads two record tables and a gold mapping, runs the offline
//!   Jaccard blocking pass and splits the surviving candidate pairs.
//! * [`features`] turns a candidate pair into 21 similarity values per aligned
//!   attribute pair, plus thresholded Boolean atoms for the rule learner.
//! * [`learners`] trains linear SVMs, random forests, a one-hidden-layer
//!   network and monotone DNF rules.
//! * [`selectors`] picks the next batch to label (query-by-committee, margin,
//!   LFP/LFN) and implements blocking dimensions and the active ensemble.
//! * [`oracle`], [`session`] and [`evaluator`] drive and score the loop.
//! * [`experiment`] runs whole experiment configs and renders reports.

pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod experiment;
pub mod features;
pub mod learners;
pub mod oracle;
pub mod rng;
pub(crate) mod timing;
pub mod selectors;
pub mod session;
pub mod synthetic;
pub mod task;

pub use error::{Error, Result};
pub use task::MatchingTask;


/// Binary match label: 1 = match, 0 = non-match.
pub type Label = u8;
