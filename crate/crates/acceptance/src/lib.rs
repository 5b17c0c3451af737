//! Holds the `acceptance` test target, which runs every criterion and prints
//! one PASS/FAIL line each:
//!
//! ```text
//! cargo test -p fer-acceptance --test acceptance
//! cargo test -p fer-acceptance --test acceptance -- detector
//! ```
