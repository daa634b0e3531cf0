//! Acceptance suite for the workspace; the checks live in `tests/acceptance.rs`.
//!
//! Kept in its own package so that `cargo test --workspace` runs it after
//! every other test target.
