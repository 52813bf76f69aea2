//! Database-driven generation of multi-floor game levels.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`database`] loads facilities, room templates and mechanic components.
//! 2. [`arrangement`] grows the multi-floor room skeleton depth-first and
//!    assigns every room its topological order `tau`.
//! 3. [`layout`] anneals the facility layout inside every room against the
//!    penalties evaluated by [`constraints`].
//! 4. [`mechanics`] and [`strategies`] decide where progression keys go.
//! 5. [`navsim`] repairs navigability and measures traversal with a
//!    deterministic grid agent.
//! 6. [`harness`] drives batches of levels and aggregates the metrics;
//!    [`export`] writes levels as JSON and Valve Map Format.

pub mod anneal;
pub mod arrangement;
pub mod constraints;
pub mod database;
pub mod export;
pub mod geometry;
pub mod harness;
pub mod layout;
pub mod level;
pub mod mechanics;
pub mod navsim;
pub mod par;
pub mod rng;
pub mod strategies;

pub use database::{load_database, validate_database, Database};
pub use harness::{generate_level, run_experiment, ExperimentConfig, Group};
pub use level::Level;
