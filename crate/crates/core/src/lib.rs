//! Touch-based 6-DOF localization of a known mesh from contact position and
//! normal measurements.
//!
//! The pieces, bottom up:
//!
//! - [`geometry`]: meshes, poses, point-triangle distance, rotation metrics.
//! - [`measurement`]: the proximity likelihood over position + normal contacts.
//! - [`face_index`]: a sorted normal-angle dictionary that prunes the faces a
//!   measurement has to be compared against.
//! - [`estimator`]: annealed Monte-Carlo (Scaling Series) pose estimation.
//! - [`ransac`]: hypothesize-and-verify outlier classification on top of the
//!   estimator.
//! - [`simkit`]: synthetic measurements, ray casting and shipped fixtures.

pub mod error;
pub mod estimator;
pub mod face_index;
pub mod geometry;
pub mod measurement;
pub mod ransac;
pub mod simkit;

pub use error::{Error, Result};

/// Seeded random stream used everywhere a pipeline consumes randomness.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Derives an independent substream of `seed`, e.g. one per trial or per
/// RANSAC iteration.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    use rand::SeedableRng;
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
