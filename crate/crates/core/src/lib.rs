//! Priced survey experiments and revealed-preference analysis.
//!
//! The crate covers the whole pipeline around a priced survey: building the
//! 161-round experiment ([`design`]), administering it to chat-completion
//! endpoints or synthetic agents ([`survey`]), checking the collected choices
//! for cyclical consistency and measuring how far they are from it
//! ([`revealed`]), testing them against uniformly random behaviour
//! ([`rationality`]), fitting a quadratic single-peaked utility
//! ([`utility`]) and grouping models into jointly consistent types
//! ([`heterogeneity`]). [`report`] writes the CSV and DOT exports.
//!
//! Monte-Carlo loops (random datasets, permutation draws, optimizer restarts)
//! run on rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise. Results are identical either way: every task draws
//! from its own seeded substream and reductions are order independent.

pub mod dataset;
pub mod design;
pub mod heterogeneity;
pub mod par;
pub mod rationality;
pub mod report;
pub mod revealed;
pub mod rng;
pub mod survey;
pub mod utility;

mod bitmatrix;
mod lp;

pub use bitmatrix::BitMatrix;
pub use dataset::{Dataset, DatasetError, Observation};
pub use design::{Answer, Corner, Design, DesignConfig, DesignError, OptionMode, PriceVector, RoundSpec};
pub use revealed::{ccei, check_garp, CceiResult, Efficiency};

/// Number of survey questions.
pub const N_QUESTIONS: usize = 5;
/// Highest Likert point; answers range over `0..=SCALE_MAX`.
pub const SCALE_MAX: u8 = 5;
/// Budget used by every constrained round.
pub const BUDGET: u32 = 12;
/// Number of constrained rounds in a full design.
pub const N_CONSTRAINED_ROUNDS: usize = 160;
