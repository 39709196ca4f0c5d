//! Conversational literature exploration over a bibliographic knowledge
//! graph: query language, corpus store, graph construction, embeddings,
//! mining tools and the two conversational agents.

pub mod corpus;
pub mod querylang;
pub mod text;
pub mod bkg;
pub mod embed;
pub mod mining;
pub mod agent;
pub mod client;
