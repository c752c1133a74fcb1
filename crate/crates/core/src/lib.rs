//! Streaming transaction-graph engine for phishing-node detection.
//!
//! The crate ingests a timestamp-ordered stream of Ethereum-style
//! transaction records, coalesces internal (contract-call) records into
//! single events, extracts per-event edge features, and maintains a
//! per-node embedding that is updated online: every event generates a
//! broadcast content delivered into fixed-capacity per-node storage
//! queues, and each endpoint refreshes its embedding by attending over
//! its own decay-weighted storage. A linear head on top of the
//! embedding scores nodes as phishing / non-phishing.
//!
//! Modules mirror the pipeline stages:
//!
//! * [`ingest`] — record parsing, internal-transaction coalescing,
//!   ordered event streams, label files.
//! * [`features`] — the 16-dimensional edge feature vector and causal
//!   (no-lookahead) streaming normalization.
//! * [`state`] — per-node state: embedding, FIFO storage queue, decay
//!   profile, neighbor index, broadcast delivery.
//! * [`model`] — learnable parameters, three-head scaled dot-product
//!   attention, MLP fusion, classifier, and the hand-rolled backward
//!   pass.
//! * [`engine`] — the event loop tying features + state + model
//!   together for one pass over a stream.
//! * [`train`] — chronological 70/15/15 split, online training loop,
//!   AUC/TPR/FPR metrics, ablation runner.
//! * [`datagen`] — seeded synthetic streams with planted phishing
//!   motifs, used for end-to-end verification.
//! * [`checkpoint`] / [`snapshot`] — binary model checkpoints and JSON
//!   node-state snapshots.

pub mod checkpoint;
pub mod datagen;
pub mod engine;
pub mod features;
pub mod ingest;
pub mod model;
pub mod snapshot;
pub mod state;
pub mod train;

pub use engine::{EngineConfig, StreamEngine};
pub use features::{EdgeFeatureVector, RunningStats, FEATURE_DIM};
pub use ingest::{Label, LabelSet, NodeId, RawTransaction, TransactionEvent};
pub use model::ModelParams;
pub use state::{BroadcastContent, DecayProfile, NodeState, StorageQueue};
pub use train::{EvalReport, SplitPlan, TrainConfig};
