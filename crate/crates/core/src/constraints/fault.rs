use std::collections::HashSet;

use super::{ConstraintKind, Verdict, Verifier, VerifierContext};
use crate::text::normalize;

/// Test double that wrongly admits chosen candidates at one chain depth and
/// defers to the wrapped verifier everywhere else.
pub struct FaultInjectingVerifier<V> {
    inner: V,
    depth: usize,
    admitted: HashSet<String>,
    id: String,
}

impl<V: Verifier> FaultInjectingVerifier<V> {
    pub fn new(inner: V, depth: usize, admitted: impl IntoIterator<Item = String>) -> Self {
        let id = format!("{}+fault@{depth}", inner.id());
        Self {
            inner,
            depth,
            admitted: admitted.into_iter().map(|s| normalize(&s)).collect(),
            id,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn admits(&self, chain_len: usize, candidate: &str) -> bool {
        chain_len == self.depth && self.admitted.contains(&normalize(candidate))
    }
}

impl<V: Verifier> Verifier for FaultInjectingVerifier<V> {
    fn verify(&self, kind: ConstraintKind, ctx: &VerifierContext<'_>, candidate: &str) -> Verdict {
        if self.admits(ctx.chain.len(), candidate) {
            return Verdict::pass(kind, &self.id, "fault-injected");
        }
        self.inner.verify(kind, ctx, candidate)
    }

    fn id(&self) -> &str {
        &self.id
    }
}
