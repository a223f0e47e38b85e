//! Accessible chart engine: chart grammar model, navigable access tree,
//! keyboard wayfinding, color naming, and a replayable question-answering
//! pipeline with its evaluation harness.

pub mod bins;
pub mod chart;
pub mod color;
pub mod eval;
pub mod gateway;
pub mod nav;
pub mod pipeline;
pub mod prompts;
pub mod tree;
pub mod value;
