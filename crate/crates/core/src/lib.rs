//! One-shot aggregation of collective decisions.
//!
//! A decision case is a set of responses (vote, confidence, predicted
//! support per answer) to one problem. This crate provides the rule-based
//! aggregators, a 27-value feature representation of a case, two learned
//! aggregation pipelines (predict the best method, or predict the answer
//! directly), and the harness used to select and evaluate them.

pub mod aggregators;
pub mod case_model;
pub mod evaluation;
pub mod features;
pub mod io;
pub mod learners;
pub mod pipelines;
pub mod seeds;
pub mod synth;

pub use aggregators::{AggregationResult, MethodId};
pub use case_model::{validate_case, DecisionCase, RawCase, RawResponse, Response};
pub use features::{CaseInstance, FeatureGroup, FeatureMask, SubgroupPlan};
