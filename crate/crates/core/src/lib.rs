//! Compressed arc-flow graphs for multiple-choice vector bin packing.
//!
//! The pipeline is: parse and [`instance::normalize`] an instance, build the
//! graph with [`builder::build_graph`], turn it into an integer program with
//! [`model`], and solve small models with [`miplite`]. [`oracle`] holds
//! brute-force references used to check all of the above.

pub mod builder;
pub mod gen;
pub mod graph;
pub mod instance;
pub mod miplite;
pub mod model;
pub mod oracle;
pub mod postprocess;
