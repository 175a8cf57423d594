//! Validation harness for `maxent-core`.
//!
//! The library holds the reference solvers the acceptance suite compares
//! against; the suite itself lives in `tests/acceptance.rs` and prints one
//! line per criterion.

pub mod oracle;
pub mod reference;
