//! Out-of-core probabilistic model checking for Markov decision processes.
//!
//! A model written in a small guarded-command language is explored one
//! partition at a time, with each partition's transition matrix streamed to
//! disk in an inverse-sequential record format. Reachability probabilities
//! and expected rewards are then computed by block-iterative value
//! iteration that holds a single partition, plus the value vectors of its
//! successor partitions, in memory at once.

pub mod analyze;
pub mod compile;
pub mod corpus;
pub mod error;
pub mod explore;
pub mod lang;
pub mod semantics;
pub mod store;

pub use error::{Error, Result};
pub use semantics::{ExpandedBranch, ExpandedTransition, ExplicitState, ModelError, PartitionId};
pub use compile::{compile, Compiled};
pub use explore::{explore, ExplorationConfig, ExplorationReport, IndexedStateSet};
pub use analyze::{analyze, check, AnalysisReport, CheckReport, ConvergenceConfig};
pub use lang::{Direction, PropertyKind};
pub use store::{FileKind, Meta, PartitionStore, RandomAccessPartition, IsqRecord};
