//! Extracts propositional rules from a trained feed-forward network.
//!
//! The network is trained with a steep sigmoid so that every unit behaves
//! almost like a step function. Each unit's binarised behaviour is learned by
//! a pruned decision tree, the trees become DNF rules, and hidden-unit symbols
//! are substituted away layer by layer until the class rules mention only the
//! inputs. A two-level minimiser then shortens the result.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod extract;
pub mod minimizer;
pub mod network;
pub mod pipeline;
pub mod rules;
pub mod sampler;
pub mod tree;

pub use dataset::{Dataset, Encoder, FeatureKind, FeatureSpec};
pub use error::{Error, ErrorClass, Result};
pub use eval::{Method, Report, RunRecord};
pub use extract::{extract, ExtractConfig, Extraction, TreeCascade};
pub use minimizer::Mode;
pub use network::{Network, NetworkConfig};
pub use pipeline::{ExperimentConfig, Model};
pub use rules::{Dnf, Literal, Ruleset, Term, Var};
pub use sampler::NeuronId;
pub use tree::DecisionTree;
