//! Projection-based reduced-order models with hyper-reduction.
//!
//! The crate covers the full pipeline: full-order benchmark models, time
//! integrators, snapshot compression, sampling and oblique projectors, spatial
//! and space-time reduced solvers, and an experiment harness that writes error
//! and offline-cost tables.

pub mod fom;
pub mod linalg;
pub mod par;
pub mod integrators;
pub mod compression;
pub mod hyper;
pub mod rom;
pub mod strom;
pub mod io;
pub mod bench;
