//! Exact rational computation of recombination dynamics on finite site sets.
//!
//! The crate covers subset and partition algebra, recombination
//! distributions with their coefficient tables, dense measures and the
//! recombination operator, the dyadic tree expansion of iterated
//! operators, the absorbing Markov chain on partitions, the decay analysis
//! of the chain before absorption, and a reproducible Monte Carlo sampler.

pub mod chain;
pub mod error;
pub mod exec;
pub mod mc;
pub mod measures;
pub mod qsd;
pub mod rational;
pub mod report;
pub mod rho;
pub mod subsets;
pub mod trees;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
pub use measures::{AlphabetSpec, DenseMeasure};
pub use rational::Rational;
pub use report::CheckReport;
pub use rho::{coefficient_table, CoefficientTable, DyadicChoice, RecombDistribution};
pub use subsets::{Partition, SiteSet, Subset};
