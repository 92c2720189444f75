//! Droplet growth: v-strips, quasi-stable half-rings and the restricted
//! closures that check they advance.

mod ring;
mod spread;
mod strip;
mod supercritical;

pub use ring::{build_half_ring, HalfRing, RingKind, RingSpec};
pub use spread::{
    find_voracious, helping_sets_upto, translate_shifts, verify_generalized_advance, verify_spread, voracious_for_ring,
    HelpingSet, SpreadMode, SpreadReport, Verdict, Voracious, MAX_WITNESSES,
};
pub use strip::{q, qf, ExternalBoundary, VStrip, Q};
pub use supercritical::{verify_supercritical_rectangle, RectangleReport};

use crate::difficulty::DifficultyError;
use crate::geometry::{Direction, GeometryError};

#[derive(Debug, thiserror::Error)]
pub enum DropletError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Difficulty(#[from] DifficultyError),
    #[error("invalid ring sizes: {0}")]
    Sizes(String),
    #[error("no set of at most {1} sites grows the half-plane of {0} in both directions")]
    NoVoraciousSet(Direction, u32),
    #[error("no neighbourhood radius up to {cap} works for direction {direction}")]
    UndeterminedAtCap { direction: Direction, cap: i64 },
    #[error("family is not supercritical")]
    NotSupercritical,
}
