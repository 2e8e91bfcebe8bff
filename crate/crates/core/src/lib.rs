//! Unsupervised anomaly detection over source-code syntax trees and JVM
//! bytecode.
//!
//! The pipeline parses functions into syntax trees, vectorizes them as
//! software-metric vectors or N-gram count vectors, scores them with Local
//! Outlier Factor, Isolation Forest or an autoencoder, and reports both
//! syntax-tree anomalies and compiler-induced anomalies, where the source
//! and bytecode representations of the same code disagree.

pub mod corpus;
pub mod detect;
pub mod features;
pub mod parser;
pub mod preprocess;
pub mod report;
pub mod synth;
