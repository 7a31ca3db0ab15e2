//! Smooth topologically mixing interval maps with a countable Markov
//! partition, together with their graph, symbolic coding and entropy tools.

pub mod entropy;
pub mod error;
pub mod map;
pub mod markov_graph;
pub mod oscillators;
pub mod params;
pub mod poly;
pub mod scalar;
pub mod symbolic;

pub use error::{Error, Result};
pub use params::{ExtraOscillations, LevelConstants, MapParams};
pub use map::{build_map, Map, Map32, PiecewiseMap};
