//! Temporal knowledge-graph question answering.
//!
//! The pipeline grounds a natural-language temporal question in a quadruple
//! store, decomposes it into a tree of typed sub-questions, retrieves
//! evidence with operator-aware toolkits and time-monotone path search,
//! prunes temporally first and re-ranks semantically, and feeds verified
//! traces back into a self-evolving experience memory. The language model
//! sits behind a pluggable reasoner interface with a deterministic scripted
//! backend, so everything here runs and tests offline.
//!
//! Start with the runnable programs under `examples/`:
//!
//! * `load_graph` — ingest a TSV quadruple file and inspect indexes
//! * `temporal_toolkits` — the eight retrieval operators and aliases
//! * `path_retrieval` — hybrid monotone path search, pruning, re-ranking
//! * `experience_memory` — the exemplar pool, buffer, and persistence
//! * `ask_question` — one question end to end with a trace
//! * `batch_eval` — Hits@1 over a question file
//! * `ablations` — the pipeline with individual stages disabled

pub mod config;
pub mod controller;
pub mod embedding;
pub mod eval;
pub mod indicator;
pub mod memory;
pub mod reasoner;
pub mod retrieval;
pub mod store;
pub mod toolkits;
pub mod trace;

pub use config::Config;
pub use embedding::{cosine, Embedder, HashEmbedder, Vector};
pub use indicator::{Indicator, TemporalType};
pub use store::{Fact, Subgraph, TemporalPath, TemporalReasoningPath, Timestamp, Tkg};
