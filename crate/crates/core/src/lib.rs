//! Usage-based reengineering of online courses.
//!
//! Reading logs are cleaned, cut into reading sessions with per-element
//! thresholds, summarized as twenty indicators per element, screened for
//! anomalies, and turned into issues with concrete revision suggestions.

pub mod advisor;
pub mod analysis;
pub mod config;
pub mod detector;
pub mod error;
pub mod evaluator;
pub mod indicators;
pub mod ingest;
pub mod report;
pub mod sessionizer;
pub mod store;
pub mod tasks;

pub use analysis::{analyze, Snapshot};
pub use config::AnalysisConfig;
pub use error::{Error, Result};
pub use ingest::{CleanReport, CourseStructure, LogEvent};
pub use store::Store;
