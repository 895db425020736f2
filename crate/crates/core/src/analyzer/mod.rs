//! Best-fit constructional analysis.
//!
//! [`tokenize`] splits an utterance, [`analyze`] runs a bottom-up chart
//! parser whose edges carry [`SemSpec`] fragments built by unification, and
//! [`resolve_anaphora`] binds pronouns and one-anaphora inside the winning
//! analysis.

mod anaphora;
mod chart;
mod semspec;
mod token;
mod unify;

pub use anaphora::resolve_anaphora;
pub use chart::{analyze, score_candidate, AnalysisCandidate, PartialEdge, Score};
pub use semspec::{Instance, InstanceId, SemSpec, SlotId, SlotValue};
pub use token::{tokenize, Token};
pub use unify::{compose, UnifyFailure};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyzerError {
    #[error("empty utterance")]
    EmptyInput,
    #[error("unknown word {token:?} at position {index}")]
    UnknownToken { token: String, index: usize },
    #[error("no analysis{}", describe_partial(.partial))]
    NoParse { partial: Vec<PartialEdge> },
    #[error("no antecedent for {pronoun:?} at position {index}")]
    UnresolvedPronoun { pronoun: String, index: usize },
}

fn describe_partial(partial: &[PartialEdge]) -> String {
    if partial.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = partial
        .iter()
        .map(|p| format!("{} [{}..{})", p.construction, p.span.start, p.span.end))
        .collect();
    format!("; longest partial edges: {}", parts.join(", "))
}
