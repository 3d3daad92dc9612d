//! Projective prepositions as fuzzy sets over centroid displacements, and
//! the crisp relation derived from them.

use crate::frames::FrameInstance;
use crate::geometry::Vec2;
use crate::scene::MIN_SEPARATION;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Degrees closer than this count as a tie in [`relation`].
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preposition {
    Front,
    Behind,
    Left,
    Right,
}

/// How the landmark of a prepositional phrase is voiced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LandmarkVoice {
    /// An object named by its own noun phrase.
    Object,
    /// The speaker ("me").
    Speaker,
    /// The listener ("you").
    Listener,
}

impl Preposition {
    pub const ALL: [Preposition; 4] = [
        Preposition::Front,
        Preposition::Behind,
        Preposition::Left,
        Preposition::Right,
    ];

    /// Canonical direction of this preposition in `frame`.
    pub fn direction(self, frame: &FrameInstance) -> Vec2 {
        match self {
            Preposition::Front => frame.front,
            Preposition::Behind => frame.behind(),
            Preposition::Left => frame.left(),
            Preposition::Right => frame.right(),
        }
    }

    /// Label the same displacement receives once the frame is turned a quarter
    /// counterclockwise.
    pub fn quarter_turn(self) -> Preposition {
        match self {
            Preposition::Front => Preposition::Right,
            Preposition::Right => Preposition::Behind,
            Preposition::Behind => Preposition::Left,
            Preposition::Left => Preposition::Front,
        }
    }

    /// Surface string. For person landmarks the pronoun is included.
    pub fn surface(self, voice: LandmarkVoice) -> &'static str {
        use LandmarkVoice::*;
        use Preposition::*;
        match (voice, self) {
            (Object, Front) => "in front of",
            (Object, Behind) => "behind",
            (Object, Left) => "to the left of",
            (Object, Right) => "to the right of",
            (Speaker, Front) => "in front of me",
            (Speaker, Behind) => "behind me",
            (Speaker, Left) => "on my left",
            (Speaker, Right) => "on my right",
            (Listener, Front) => "in front of you",
            (Listener, Behind) => "behind you",
            (Listener, Left) => "on your left",
            (Listener, Right) => "on your right",
        }
    }
}

impl fmt::Display for Preposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preposition::Front => "front",
            Preposition::Behind => "behind",
            Preposition::Left => "left",
            Preposition::Right => "right",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("target and landmark centroids coincide (distance {distance:e} m)")]
pub struct CoincidentPoints {
    pub distance: f64,
}

fn displacement(target: Vec2, landmark: Vec2) -> Result<Vec2, CoincidentPoints> {
    let d = target - landmark;
    let distance = d.norm();
    if distance < MIN_SEPARATION {
        return Err(CoincidentPoints { distance });
    }
    Ok(d * (1.0 / distance))
}

/// Degree in `[0, 1]` to which `target` lies in direction `prep` of
/// `landmark` under `frame`: the clamped cosine of the angular deviation.
pub fn membership(
    target: Vec2,
    landmark: Vec2,
    prep: Preposition,
    frame: &FrameInstance,
) -> Result<f64, CoincidentPoints> {
    let d = displacement(target, landmark)?;
    Ok(d.dot(prep.direction(frame)).clamp(0.0, 1.0))
}

/// All four degrees, indexed by [`Preposition::ALL`].
pub fn memberships(target: Vec2, landmark: Vec2, frame: &FrameInstance) -> Result<[f64; 4], CoincidentPoints> {
    let d = displacement(target, landmark)?;
    Ok(Preposition::ALL.map(|p| d.dot(p.direction(frame)).clamp(0.0, 1.0)))
}

/// The preposition of maximal membership. Near-equal degrees resolve to the
/// earliest preposition in canonical order.
pub fn relation(target: Vec2, landmark: Vec2, frame: &FrameInstance) -> Result<Preposition, CoincidentPoints> {
    let degrees = memberships(target, landmark, frame)?;
    let mut best = 0;
    for i in 1..4 {
        if degrees[i] > degrees[best] + TIE_TOLERANCE {
            best = i;
        }
    }
    Ok(Preposition::ALL[best])
}

/// Like [`relation`], but `None` when the winning degree is below `min_degree`.
pub fn relation_with_min_degree(
    target: Vec2,
    landmark: Vec2,
    frame: &FrameInstance,
    min_degree: f64,
) -> Result<Option<Preposition>, CoincidentPoints> {
    let prep = relation(target, landmark, frame)?;
    let degree = membership(target, landmark, prep, frame)?;
    Ok((degree >= min_degree).then_some(prep))
}
