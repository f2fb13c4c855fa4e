//! Data model: program trees, traces, corpora and expert annotations.

pub mod annotation;
pub mod ast;
pub mod trace;

pub use annotation::{
    expand_annotation, parse_annotation_docs, serialize_annotation_docs, AnnotationDoc,
    ExpertAnnotation, FinalOutcome, ImpactType, ObjectiveTruth,
};
pub use ast::{anonymize_identifiers, ast_equal, parse_ast, serialize_ast, AstNode};
pub use trace::{
    parse_corpus, parse_trace, parse_traces, serialize_corpus, serialize_traces, Snapshot,
    SolutionCorpus, StudentTrace, TraceRecord,
};
