//! Learning group-level treatment regimens from heterogeneous medical records.
//!
//! The pipeline runs in stages:
//!
//! 1. [`cohort`] turns demographic, laboratory and symptom features into
//!    typed visible states.
//! 2. [`mvrbm`] trains a mixed-variate restricted Boltzmann machine on those
//!    states and encodes every patient as a binary latent code.
//! 3. [`cluster`] groups the codes by complete-linkage agglomerative
//!    clustering under the Hamming distance.
//! 4. [`drugkb`] and [`periods`] classify drugs by indication and split each
//!    prescription history into treatment periods using accumulated
//!    indication-change scores.
//! 5. [`regimen`] builds a regimen tree for every (cluster, period) cell.
//! 6. [`recommend`] recommends drug sets for held-out patients through their
//!    nearest training neighbour and scores them.
//!
//! [`synthgen`] produces seeded synthetic cohorts with planted structure and
//! [`pipeline`] wires every stage to files on disk.

pub mod cluster;
pub mod cohort;
pub mod drugkb;
mod error;
pub mod mvrbm;
pub mod periods;
pub mod pipeline;
pub mod recommend;
pub mod regimen;
pub mod synthgen;

pub use error::{Error, Result};

pub(crate) mod rng {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// The one random source used across the crate; portable and seedable.
    pub type SeededRng = ChaCha8Rng;

    pub fn seeded(seed: u64) -> SeededRng {
        ChaCha8Rng::seed_from_u64(seed)
    }
}

pub use rng::SeededRng;
