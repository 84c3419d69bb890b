//! One-shelf and m-shelf card shuffles: exact position probabilities,
//! optimal guessing strategies with and without feedback, and seeded
//! simulation.
//!
//! Positions are 1-based with position 1 the top of the deck. A
//! one-shelf shuffle draws cards from the bottom of the ordered deck
//! (card `n` first) and puts each on the top or bottom of a growing pile.

pub mod combin;
pub mod dyadic;
pub mod error;
pub mod feedback;
pub mod matrix;
pub mod nofeedback;
pub mod pile;
pub mod rng;
pub mod shuffle;
pub mod simulate;

pub use dyadic::Dyadic;
pub use error::{Error, Result};
pub use matrix::{position_matrix, ExactMatrix, ExactVector};
pub use rng::RngStream;
pub use shuffle::{PermDistribution, Permutation, Shuffler};
