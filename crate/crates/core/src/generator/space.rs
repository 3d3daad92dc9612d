//! Expression space over frame strategies, and template realization.

use super::LandmarkChain;
use crate::frames::{frame_instance, FrameKind};
use crate::optimizer::{FrameAssignment, Strategy};
use crate::prepositions::{relation, LandmarkVoice};
use crate::resolver::{AttributePhrase, ExpressionTree, Person};
use crate::scene::Scene;
use serde::Serialize;

/// One realizable expression and the frame strategy that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateExpression {
    pub tree: ExpressionTree,
    pub strategy: Strategy,
    pub surface: String,
}

/// Builds the expression for one frame kind per relation unit, or `None`
/// when some kind cannot be instantiated for its unit's landmark.
pub fn candidate_for(chain: &LandmarkChain, scene: &Scene, kinds: &[FrameKind]) -> Option<CandidateExpression> {
    assert_eq!(kinds.len(), chain.k(), "one frame kind per relation unit");
    let landmarks = chain.landmarks();
    let mut assignments = Vec::with_capacity(kinds.len());
    let mut preps = Vec::with_capacity(kinds.len());
    for (unit, (&kind, &landmark)) in kinds.iter().zip(&landmarks).enumerate() {
        let frame = frame_instance(kind, scene, Some(landmark)).ok()?;
        let located = scene.entity(chain.unit_target(unit)).pos;
        let prep = relation(located, scene.entity(landmark).pos, &frame).expect("scene centroids are separated");
        preps.push(prep);
        assignments.push(FrameAssignment {
            kind,
            origin: frame.origin.map(|o| scene.entity(o).id.clone()),
        });
    }

    let descriptions = chain.descriptions();
    let mut tree = ExpressionTree::Leaf(descriptions[chain.k()].attrs.clone());
    for unit in (0..chain.k()).rev() {
        tree = ExpressionTree::compound(descriptions[unit].attrs.clone(), preps[unit], tree);
    }
    let surface = realize(&tree);
    Some(CandidateExpression {
        tree,
        strategy: Strategy { assignments },
        surface,
    })
}

/// Every applicable strategy over `frames`, in lexicographic order of the
/// strategy (first unit most significant). Identical trees reached through
/// different strategies are all kept.
pub fn expression_space(chain: &LandmarkChain, scene: &Scene, frames: &[FrameKind]) -> Vec<CandidateExpression> {
    let k = chain.k();
    let mut out = Vec::new();
    if k == 0 {
        out.extend(candidate_for(chain, scene, &[]));
        return out;
    }
    if frames.is_empty() {
        return out;
    }
    let mut digits = vec![0usize; k];
    loop {
        let kinds: Vec<FrameKind> = digits.iter().map(|&d| frames[d]).collect();
        out.extend(candidate_for(chain, scene, &kinds));
        // Odometer increment, last unit fastest.
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < frames.len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

fn attribute_words(p: &AttributePhrase) -> String {
    [&p.color, &p.shape, &p.category]
        .into_iter()
        .flatten()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

fn noun_phrase(p: &AttributePhrase) -> String {
    match p.person {
        Some(Person::Speaker) => "me".to_string(),
        Some(Person::Listener) => "you".to_string(),
        None => format!("the {}", attribute_words(p)),
    }
}

/// Renders `tree` with the fixed template
/// `the {color} {shape} {category} {preposition} {landmark}`.
pub fn realize(tree: &ExpressionTree) -> String {
    match tree {
        ExpressionTree::Leaf(p) => noun_phrase(p),
        ExpressionTree::Compound { head, prep, landmark } => {
            let head = noun_phrase(head);
            match &**landmark {
                ExpressionTree::Leaf(AttributePhrase {
                    person: Some(person), ..
                }) => {
                    let voice = match person {
                        Person::Speaker => LandmarkVoice::Speaker,
                        Person::Listener => LandmarkVoice::Listener,
                    };
                    format!("{head} {}", prep.surface(voice))
                }
                other => format!("{head} {} {}", prep.surface(LandmarkVoice::Object), realize(other)),
            }
        }
    }
}
