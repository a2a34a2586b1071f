//! Adaptive geometric modeling and gait optimization for planar viscous
//! swimmers.
//!
//! The crate simulates an N-link chain swimmer whose body velocity is a
//! shape-dependent linear function of its joint rates, learns that map
//! online with a bank of forgetting-factor recursive least-squares filters
//! organized by phase window, scores the model against a phase-averaged
//! baseline, and refines gaits with a confidence-gated gradient loop.
//!
//! Module map:
//! - [`se2`]: pose algebra and exact constant-twist integration
//! - [`swimmer`]: drag physics, the shape-to-velocity map, simulation
//! - [`gait`]: Fourier gaits, phase windows, the shape-noise process
//! - [`adaptive`]: the recursive filter bank (ingest / predict / rebase)
//! - [`batch`]: stored-data comparators and the phase-average baseline
//! - [`metrics`]: model-confidence scoring
//! - [`optimizer`]: the confidence-gated optimization loop
//! - [`smoothing`]: Fourier smoothing across phase windows

pub mod adaptive;
pub mod batch;
pub mod error;
pub mod gait;
pub mod metrics;
pub mod optimizer;
pub mod se2;
pub mod smoothing;
pub mod swimmer;

pub use error::{Error, Result};
