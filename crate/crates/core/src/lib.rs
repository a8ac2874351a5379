//! Spatial corpus construction: extract geometrically verified relations from
//! vector datasets into a knowledge base, then instantiate synchronized
//! natural-language / executable query pairs from it.

pub mod config;
pub mod dataset;
pub mod extract;
pub mod fsutil;
pub mod geometry;
pub mod index;
pub mod kb;
pub mod pipeline;
pub mod quality;
pub mod query;
pub mod relation;
pub mod sampler;
pub mod template;
