//! Desk-scale experiments for derandomization by shortest-seed search:
//! random coding over discrete memoryless channels, the local lemma and
//! its resampling solver, three combinatorial problem families, seed
//! search against a fixed expansion function, and hitting sets.

pub mod bits;
pub mod channel;
pub mod codebook;
pub mod elsearch;
pub mod rng;
pub mod lll;
pub mod problems;
pub mod hitting;
