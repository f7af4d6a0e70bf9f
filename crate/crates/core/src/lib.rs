//! Option discovery with successor representations on tabular grid worlds.
//!
//! The pipeline, bottom to top:
//!
//! - [`grid`]: deterministic 5-action grid MDPs parsed from ASCII maps.
//! - [`sr`]: TD learning of the successor representation, plus the closed form
//!   `(I - γP)⁻¹` used as an oracle.
//! - [`cluster`]: k-means++ over SR rows, cosine mapping of centroids to
//!   landmark states, and L1-norm candidate filtering.
//! - [`options`]: intra-option Q-learning on the SR-difference pseudo-reward,
//!   terminating where the option value is nonpositive.
//! - [`smdp`]: SMDP Q-learning over primitives and options with intra-option
//!   updates and the uniform / non-uniform / adaptive exploration schemes.
//! - [`incremental`]: alternating option-assisted SR learning and option
//!   reconstruction for finite-horizon tasks.
//! - [`eigen`]: the Laplacian eigen-option baseline.
//! - [`harness`] and [`heatmap`]: configuration-driven experiments, learning
//!   curves and PGM renderings.
//!
//! Runnable walkthroughs for each stage live in this crate's `examples/`.

pub mod cluster;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod harness;
pub mod heatmap;
pub mod incremental;
pub mod options;
pub mod rng;
pub mod smdp;
pub mod sr;

pub use error::{Error, Result};
pub use grid::{Action, Choice, GridMap, Start, TaskSpec};
pub use sr::SrMatrix;

/// Directory holding the map files shipped with this crate.
pub fn maps_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("maps")
}
