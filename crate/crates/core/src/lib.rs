//! Visual-language grid maps: fuse per-pixel embeddings into a top-down grid,
//! index landmarks by name, derive per-robot obstacle maps, and run
//! navigation scripts in a grid-world simulator.

pub mod config;
pub mod embedding;
pub mod frames;
pub mod geometry;
pub mod index;
pub mod map;
pub mod nav;
pub mod obstacle;
pub mod script;
pub mod sim;
