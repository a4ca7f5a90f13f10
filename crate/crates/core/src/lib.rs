//! Cooperative-perception filtering toolkit.
//!
//! Senders broadcast [`vdu_codec::Vdu`]s describing the objects they detect.
//! Receivers filter frames at the network layer with [`cmr`], score objects
//! with a learned [`metric_learn::FitnessMatrix`], rank them with [`sorting`]
//! and keep the top few via [`informativeness::select_top_l`]. [`netsim`]
//! compares the routing filters in a deterministic V2V broadcast simulation.

pub mod cli;
pub mod cmr;
pub mod informativeness;
pub mod metric_learn;
pub mod netsim;
pub mod sorting;
pub mod vdu_codec;

pub use cmr::{CmrConfig, FilterKind, RoutingDecision};
pub use informativeness::{FeatureTuple, ScoredMessage, ScoredObject};
pub use metric_learn::{CategoryCode, FitnessMatrix, LabeledTuple};
pub use vdu_codec::{CmrPacket, DetectedObject, Vdu};
