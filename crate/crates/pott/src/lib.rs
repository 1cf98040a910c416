//! IO, CLI, and benchmark harness around the `pott-core` pipeline.
//!
//! `pott-core` holds the math: records, attacks, the staged verifier, and
//! the information probe, all allocator-only. This crate adds everything
//! that touches an operating system: wall clocks, archive directories,
//! JSON configs and reports, CSV tables, and the `pott` command-line tool.

pub mod archive;
pub mod bench;
pub mod clock;
pub mod cli;
pub mod configs;
pub mod par;
pub mod report;

pub use pott_core as core;
