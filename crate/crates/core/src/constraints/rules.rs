use std::sync::Arc;

use super::{ConstraintKind, Verdict, Verifier, VerifierContext};
use crate::text::{contains_phrase, normalize, StepForm, TemplateCatalog};

/// Deterministic verifiers over template-parsable steps.
///
/// Steps the templates cannot read fail Coherence and Receptiveness.
#[derive(Debug, Clone)]
pub struct RuleVerifier {
    catalog: Arc<TemplateCatalog>,
}

const ID: &str = "rules";

impl RuleVerifier {
    pub fn new(catalog: Arc<TemplateCatalog>) -> Self {
        Self { catalog }
    }

    pub fn standard() -> Self {
        Self::new(Arc::new(TemplateCatalog::standard()))
    }

    pub fn catalog(&self) -> &TemplateCatalog {
        &self.catalog
    }

    fn conciseness(&self, ctx: &VerifierContext<'_>, candidate: &str) -> Verdict {
        let norm = normalize(candidate);
        match ctx.chain.iter().position(|s| normalize(s) == norm) {
            Some(i) => Verdict::fail(ConstraintKind::Conciseness, ID, format!("repeats step {}", i + 1)),
            None => Verdict::pass(ConstraintKind::Conciseness, ID, ""),
        }
    }

    fn receptiveness(&self, ctx: &VerifierContext<'_>, candidate: &str) -> Verdict {
        const K: ConstraintKind = ConstraintKind::Receptiveness;
        match self.catalog.parse_step(candidate) {
            StepForm::Fact(triple) => match ctx.store.conflicts_with(&triple).next() {
                Some(edit) => Verdict::fail(K, ID, format!("contradicts edit: {}", edit.text)),
                None => Verdict::pass(K, ID, ""),
            },
            StepForm::Answer(_) => Verdict::pass(K, ID, ""),
            StepForm::Unknown => Verdict::fail(K, ID, "unparsable step"),
        }
    }

    fn coherence(&self, ctx: &VerifierContext<'_>, candidate: &str) -> Verdict {
        const K: ConstraintKind = ConstraintKind::Coherence;
        let form = self.catalog.parse_step(candidate);
        let previous_object = match ctx.chain.last() {
            None => None,
            Some(last) => match self.catalog.parse_step(last) {
                StepForm::Fact(t) => Some(t.object),
                _ => return Verdict::fail(K, ID, "previous step unparsable"),
            },
        };
        match (form, previous_object) {
            (StepForm::Unknown, _) => Verdict::fail(K, ID, "unparsable step"),
            (StepForm::Fact(t), None) => {
                if contains_phrase(ctx.question, &t.subject) {
                    Verdict::pass(K, ID, "")
                } else {
                    Verdict::fail(K, ID, format!("`{}` is not in the question", t.subject))
                }
            }
            (StepForm::Answer(_), None) => Verdict::fail(K, ID, "answer without reasoning"),
            (StepForm::Fact(t), Some(prev)) => {
                if normalize(&t.subject) == normalize(&prev) {
                    Verdict::pass(K, ID, "")
                } else {
                    Verdict::fail(K, ID, format!("`{}` does not continue from `{prev}`", t.subject))
                }
            }
            (StepForm::Answer(a), Some(prev)) => {
                if normalize(&a) == normalize(&prev) {
                    Verdict::pass(K, ID, "")
                } else {
                    Verdict::fail(K, ID, format!("answer `{a}` is not the last entity `{prev}`"))
                }
            }
        }
    }

    fn pertinence(&self, ctx: &VerifierContext<'_>, candidate: &str) -> Verdict {
        const K: ConstraintKind = ConstraintKind::Pertinence;
        let form = self.catalog.parse_step(candidate);
        let shared = form
            .entities()
            .into_iter()
            .find(|e| contains_phrase(ctx.question, e) || ctx.chain.iter().any(|step| contains_phrase(step, e)));
        match shared {
            Some(e) => Verdict::pass(K, ID, format!("mentions `{e}`")),
            None => Verdict::fail(K, ID, "shares no entity with the question or chain"),
        }
    }
}

impl Verifier for RuleVerifier {
    fn verify(&self, kind: ConstraintKind, ctx: &VerifierContext<'_>, candidate: &str) -> Verdict {
        match kind {
            ConstraintKind::Conciseness => self.conciseness(ctx, candidate),
            ConstraintKind::Coherence => self.coherence(ctx, candidate),
            ConstraintKind::Receptiveness => self.receptiveness(ctx, candidate),
            ConstraintKind::Pertinence => self.pertinence(ctx, candidate),
        }
    }

    fn id(&self) -> &str {
        ID
    }
}
