//! Lexicon acquisition with lexical rules: typed feature structures, an
//! ontology, a sense-level lexicon store, derivational morphology, lexical
//! rule application, candidate validation and the acquisition pipeline.

pub mod bank;
pub mod lexicon;
pub mod morphgen;
pub mod ontology;
pub mod pipeline;
pub mod review;
pub mod rules;
pub mod shipped;
pub mod text;
pub mod tfs;
pub mod validator;
