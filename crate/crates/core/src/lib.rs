//! Multi-hop question answering under knowledge edits by step-level
//! constrained decoding over a black-box generator.
//!
//! Each reasoning step is proposed from two sources: the generator's own
//! greedy continuation and the edited facts nearest to it. Candidates are
//! filtered by four constraints, ranked (edits before parametric, closer
//! edits first) and explored depth-first with backtracking, stopping at the
//! first answer. The [`bench`] module rebuilds conflict-free and hard
//! evaluation subsets and scores methods for accuracy and cost.

pub mod bench;
pub mod constraints;
pub mod example;
mod http;
pub mod knowledge;
pub mod llm;
pub mod search;
pub mod text;

pub use constraints::{ConstraintKind, RuleVerifier, Verdict, Verifier, VerifierContext};
pub use knowledge::{EditedFact, Embedder, Embedding, HashingEmbedder, KnowledgeStore, Triple};
pub use llm::{FactGraph, Generator, OracleGenerator};
pub use search::{Candidate, Method, Outcome, SearchLimits, SearchTrace, Termination};
