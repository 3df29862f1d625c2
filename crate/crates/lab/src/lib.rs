pub mod challenger;
pub mod defense;
pub mod embeddings;
pub mod experiment;
pub mod parallel;
pub mod planted;
pub mod rates;
pub mod stats;
