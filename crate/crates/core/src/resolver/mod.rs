//! Probabilistic resolution of referring expressions.
//!
//! A basic noun phrase denotes the uniform distribution over the entities
//! consistent with it. A prepositional phrase spreads its landmark's
//! distribution through every frame kind, weighted by how likely a listener
//! is to adopt that frame for that kind of landmark. A noun phrase with a
//! prepositional modifier multiplies the two and renormalizes.

mod expression;
mod parse;

pub use expression::{
    consistent_set, AttributePhrase, ExpressionDocument, ExpressionError, ExpressionTree, Person, GENERIC_CATEGORY,
};
pub use parse::{parse_expression, Lexicon, ParseError};

use crate::frames::{frame_instance, FrameInstance, FrameKind, PreferenceTable};
use crate::prepositions::{membership, relation_with_min_degree, Preposition};
use crate::scene::Scene;
use serde::Serialize;

/// How a single (target, landmark, frame) triple supports a preposition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseCase {
    /// 1 if the preposition is the crisp relation, else 0.
    #[default]
    Crisp,
    /// The fuzzy membership degree.
    Fuzzy,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ResolverConfig {
    pub base_case: BaseCase,
    /// Relations whose winning degree falls below this do not hold.
    pub min_degree: f64,
}

/// Distribution over scene entities (indexed like `Scene::entities`), or a
/// marker that the expression picks out nothing.
#[derive(Clone, Debug, PartialEq)]
pub enum Denotation {
    Distribution(Vec<f64>),
    Unresolvable,
}

impl Denotation {
    fn from_weights(weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            Denotation::Distribution(weights.into_iter().map(|w| w / total).collect())
        } else {
            Denotation::Unresolvable
        }
    }

    pub fn probs(&self) -> Option<&[f64]> {
        match self {
            Denotation::Distribution(p) => Some(p),
            Denotation::Unresolvable => None,
        }
    }

    pub fn is_resolvable(&self) -> bool {
        matches!(self, Denotation::Distribution(_))
    }

    /// Probability of entity `idx`; zero when unresolvable.
    pub fn prob(&self, idx: usize) -> f64 {
        self.probs().map_or(0.0, |p| p[idx])
    }

    pub fn max_prob(&self) -> f64 {
        self.probs().map_or(0.0, |p| p.iter().copied().fold(0.0, f64::max))
    }

    /// Most probable entity; exact ties go to the lexicographically smallest id.
    pub fn argmax(&self, scene: &Scene) -> Option<usize> {
        let p = self.probs()?;
        (0..p.len()).reduce(|best, i| {
            let better = p[i] > p[best] || (p[i] == p[best] && scene.entity(i).id < scene.entity(best).id);
            if better {
                i
            } else {
                best
            }
        })
    }
}

/// Frame instances shared by every node of one resolution.
pub(crate) struct SceneFrames {
    ego: FrameInstance,
    addressee: FrameInstance,
    extrinsic: FrameInstance,
}

impl SceneFrames {
    pub(crate) fn new(scene: &Scene) -> Self {
        let get = |k| frame_instance(k, scene, None).expect("relative and extrinsic frames always exist");
        Self {
            ego: get(FrameKind::Egocentric),
            addressee: get(FrameKind::AddresseeCentered),
            extrinsic: get(FrameKind::Extrinsic),
        }
    }

    /// The frame of `kind` for a relation anchored at `landmark`, if it applies.
    pub(crate) fn for_landmark(&self, kind: FrameKind, scene: &Scene, landmark: usize) -> Option<FrameInstance> {
        match kind {
            FrameKind::Egocentric => Some(self.ego),
            FrameKind::AddresseeCentered => Some(self.addressee),
            FrameKind::Extrinsic => Some(self.extrinsic),
            FrameKind::Intrinsic => frame_instance(kind, scene, Some(landmark)).ok(),
        }
    }
}

/// Resolves `tree` with crisp relations.
pub fn denote(tree: &ExpressionTree, scene: &Scene, prefs: &PreferenceTable) -> Denotation {
    denote_with(tree, scene, prefs, &ResolverConfig::default())
}

pub fn denote_with(
    tree: &ExpressionTree,
    scene: &Scene,
    prefs: &PreferenceTable,
    config: &ResolverConfig,
) -> Denotation {
    let frames = SceneFrames::new(scene);
    denote_node(tree, scene, prefs, config, &frames)
}

fn leaf_weights(phrase: &AttributePhrase, scene: &Scene) -> Vec<f64> {
    (0..scene.len())
        .map(|i| if phrase.matches(scene, i) { 1.0 } else { 0.0 })
        .collect()
}

fn denote_node(
    tree: &ExpressionTree,
    scene: &Scene,
    prefs: &PreferenceTable,
    config: &ResolverConfig,
    frames: &SceneFrames,
) -> Denotation {
    match tree {
        ExpressionTree::Leaf(phrase) => Denotation::from_weights(leaf_weights(phrase, scene)),
        ExpressionTree::Compound { head, prep, landmark } => {
            let Denotation::Distribution(child) = denote_node(landmark, scene, prefs, config, frames) else {
                return Denotation::Unresolvable;
            };
            let Denotation::Distribution(pp) = prepositional(*prep, &child, scene, prefs, config, frames) else {
                return Denotation::Unresolvable;
            };
            let Denotation::Distribution(head) = Denotation::from_weights(leaf_weights(head, scene)) else {
                return Denotation::Unresolvable;
            };
            Denotation::from_weights(head.iter().zip(&pp).map(|(h, p)| h * p).collect())
        }
    }
}

/// Distribution over referable entities related by `prep` to a landmark
/// drawn from `landmark`.
fn prepositional(
    prep: Preposition,
    landmark: &[f64],
    scene: &Scene,
    prefs: &PreferenceTable,
    config: &ResolverConfig,
    frames: &SceneFrames,
) -> Denotation {
    let mut weights = vec![0.0; scene.len()];
    for (lm, &p_lm) in landmark.iter().enumerate() {
        if p_lm == 0.0 {
            continue;
        }
        let row = prefs.row(scene.landmark_type_of(lm));
        for kind in FrameKind::ALL {
            let p_frame = row[kind.index()];
            if p_frame == 0.0 {
                continue;
            }
            let Some(frame) = frames.for_landmark(kind, scene, lm) else {
                continue;
            };
            let lm_pos = scene.entity(lm).pos;
            for (o, w) in weights.iter_mut().enumerate() {
                if o == lm || !scene.entity(o).referable_as_target() {
                    continue;
                }
                let support = base_case(scene.entity(o).pos, lm_pos, prep, &frame, config);
                *w += support * p_frame * p_lm;
            }
        }
    }
    Denotation::from_weights(weights)
}

pub(crate) fn base_case(
    target: crate::geometry::Vec2,
    landmark: crate::geometry::Vec2,
    prep: Preposition,
    frame: &FrameInstance,
    config: &ResolverConfig,
) -> f64 {
    let holds =
        relation_with_min_degree(target, landmark, frame, config.min_degree).expect("scene centroids are separated");
    match config.base_case {
        BaseCase::Crisp => {
            if holds == Some(prep) {
                1.0
            } else {
                0.0
            }
        }
        BaseCase::Fuzzy => {
            let degree = membership(target, landmark, prep, frame).expect("scene centroids are separated");
            if degree >= config.min_degree {
                degree
            } else {
                0.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn split_prefs() -> PreferenceTable {
        PreferenceTable::uniform_rows([0.4, 0.6, 0.0, 0.0]).unwrap()
    }

    fn parse(scene: &Scene, text: &str) -> ExpressionTree {
        parse_expression(text, &Lexicon::for_scene(scene)).unwrap()
    }

    fn assert_dist(d: &Denotation, expected: &[f64]) {
        let p = d.probs().expect("resolvable");
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() <= 1e-9, "{p:?} vs {expected:?}");
        }
    }

    #[test]
    fn split_distribution() {
        let scene = fixtures::square_scene();
        let tree = parse(&scene, "the object in front of the square");
        let d = denote(&tree, &scene, &split_prefs());
        assert_dist(&d, &[0.6, 0.0, 0.0, 0.4, 0.0, 0.0]);
        assert_eq!(d.argmax(&scene), scene.index_of("A"));

        let square = parse(&scene, "the square");
        assert_dist(
            &denote(&square, &scene, &split_prefs()),
            &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        );
        let object = parse(&scene, "the object");
        assert_dist(
            &denote(&object, &scene, &split_prefs()),
            &[0.25, 0.25, 0.25, 0.25, 0.0, 0.0],
        );
    }

    #[test]
    fn missing_landmark_is_unresolvable() {
        let scene = fixtures::square_scene();
        let tree = ExpressionTree::compound(
            AttributePhrase::category("block").with_color("red"),
            Preposition::Left,
            ExpressionTree::Leaf(AttributePhrase::category("car")),
        );
        assert_eq!(denote(&tree, &scene, &split_prefs()), Denotation::Unresolvable);
        assert_eq!(
            denote(&parse(&scene, "the blue sphere"), &scene, &split_prefs()),
            Denotation::Unresolvable
        );
    }

    #[test]
    fn person_landmark_uses_speaker_row() {
        let scene = fixtures::twin_blocks_scene();
        let tree = parse(&scene, "the yellow block on my left");
        let d = denote(&tree, &scene, &PreferenceTable::default());
        // Both blocks are ahead of the speaker under its own frame.
        assert!(!d.is_resolvable());
        let tree = parse(&scene, "the yellow block in front of me");
        assert_dist(
            &denote(&tree, &scene, &PreferenceTable::default()),
            &[0.5, 0.5, 0.0, 0.0, 0.0],
        );
    }

    #[test]
    fn fuzzy_base_case_spreads_mass() {
        let scene = fixtures::square_scene();
        let tree = parse(&scene, "the object to the right of the square");
        let cfg = ResolverConfig {
            base_case: BaseCase::Fuzzy,
            min_degree: 0.0,
        };
        let d = denote_with(&tree, &scene, &split_prefs(), &cfg);
        let crisp = denote(&tree, &scene, &split_prefs());
        // B sits exactly right of C for the speaker only.
        assert_dist(&crisp, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_dist(&d, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
