//! Genetic-algorithm benchmarking on generated problems.

pub mod ga;
pub mod reference;
pub mod study;

pub use ga::{run_ga, BenchmarkResult, CountingObjective, GaConfig, GeneticAlgorithm, Objective};
pub use reference::{reference_best, ReferenceBest, ReferenceMethod};
