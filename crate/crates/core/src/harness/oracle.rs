//! Brute-force resolution by joint enumeration, written without the
//! resolver's recursion so the two can check each other.

use super::HarnessError;
use crate::frames::{FrameKind, PreferenceTable};
use crate::geometry::Vec2;
use crate::prepositions::Preposition;
use crate::resolver::{AttributePhrase, Denotation, ExpressionTree};
use crate::scene::{EntityKind, LandmarkType, Scene};

pub const ORACLE_MAX_DEPTH: usize = 3;
pub const ORACLE_MAX_ENTITIES: usize = 8;

/// Heads from the outermost noun phrase inwards, and the preposition
/// linking each head to the next.
pub(crate) fn flatten(tree: &ExpressionTree) -> (Vec<&AttributePhrase>, Vec<Preposition>) {
    let mut heads = Vec::new();
    let mut preps = Vec::new();
    let mut node = tree;
    loop {
        match node {
            ExpressionTree::Leaf(p) => {
                heads.push(p);
                return (heads, preps);
            }
            ExpressionTree::Compound { head, prep, landmark } => {
                heads.push(head);
                preps.push(*prep);
                node = landmark;
            }
        }
    }
}

/// Front direction of `kind` anchored at `landmark`, if that frame exists.
fn front(kind: FrameKind, scene: &Scene, landmark: usize) -> Option<Vec2> {
    let facing_of = |k: EntityKind| scene.entities().iter().find(|e| e.kind == k).and_then(|e| e.facing());
    match kind {
        FrameKind::Egocentric => facing_of(EntityKind::Speaker),
        FrameKind::AddresseeCentered => facing_of(EntityKind::Listener),
        FrameKind::Intrinsic => {
            let e = scene.entity(landmark);
            (e.kind == EntityKind::Object).then(|| e.facing()).flatten()
        }
        FrameKind::Extrinsic => Some(scene.north()),
    }
}

/// Crisp relation: the axis closest in angle, earlier prepositions winning
/// near-ties.
fn crisp(target: Vec2, landmark: Vec2, front: Vec2) -> Preposition {
    let d = target - landmark;
    let n = d.norm();
    let f = front * (1.0 / front.norm());
    let right = Vec2::new(f.y, -f.x);
    let scores = [
        (Preposition::Front, d.dot(f) / n),
        (Preposition::Behind, -d.dot(f) / n),
        (Preposition::Left, -d.dot(right) / n),
        (Preposition::Right, d.dot(right) / n),
    ];
    let mut best = scores[0];
    for s in &scores[1..] {
        if s.1 > best.1 + 1e-12 {
            best = *s;
        }
    }
    best.0
}

fn check_size(tree: &ExpressionTree, scene: &Scene) -> Result<(), HarnessError> {
    let depth = flatten(tree).1.len();
    if depth > ORACLE_MAX_DEPTH || scene.len() > ORACLE_MAX_ENTITIES {
        return Err(HarnessError::OracleTooLarge {
            depth,
            entities: scene.len(),
        });
    }
    Ok(())
}

/// Sums, over every choice of one entity per noun phrase and one frame kind
/// per preposition, the product of leaf probabilities, frame preferences
/// and relation indicators; then normalizes over the outermost entity.
pub fn oracle_denote(
    tree: &ExpressionTree,
    scene: &Scene,
    prefs: &PreferenceTable,
) -> Result<Denotation, HarnessError> {
    check_size(tree, scene)?;
    let (heads, preps) = flatten(tree);
    let n = scene.len();
    let units = preps.len();
    let matches: Vec<Vec<bool>> = heads
        .iter()
        .map(|h| (0..n).map(|i| h.matches(scene, i)).collect())
        .collect();
    let uniform: Vec<f64> = matches
        .iter()
        .map(|m| {
            let c = m.iter().filter(|&&b| b).count();
            if c == 0 {
                0.0
            } else {
                1.0 / c as f64
            }
        })
        .collect();

    let mut totals = vec![0.0; n];
    let entity_choices = n.pow(units as u32 + 1);
    let frame_choices = 4usize.pow(units as u32);
    for e_code in 0..entity_choices {
        let chosen: Vec<usize> = (0..=units).map(|i| (e_code / n.pow(i as u32)) % n).collect();
        if (0..=units).any(|i| !matches[i][chosen[i]]) {
            continue;
        }
        let leaves: f64 = (0..=units).map(|i| uniform[i]).product();
        for f_code in 0..frame_choices {
            let mut w = leaves;
            for u in 0..units {
                let kind = FrameKind::ALL[(f_code / 4usize.pow(u as u32)) % 4];
                let (located, landmark) = (chosen[u], chosen[u + 1]);
                let ty: LandmarkType = scene.landmark_type_of(landmark);
                let p = prefs.prob(ty, kind);
                let ok = located != landmark
                    && scene.entity(located).kind == EntityKind::Object
                    && front(kind, scene, landmark)
                        .is_some_and(|f| crisp(scene.entity(located).pos, scene.entity(landmark).pos, f) == preps[u]);
                if !ok || p == 0.0 {
                    w = 0.0;
                    break;
                }
                w *= p;
            }
            totals[chosen[0]] += w;
        }
    }
    let z: f64 = totals.iter().sum();
    Ok(if z > 0.0 {
        Denotation::Distribution(totals.into_iter().map(|t| t / z).collect())
    } else {
        Denotation::Unresolvable
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::resolver::{denote, parse_expression, Lexicon};

    #[test]
    fn square_scene_by_enumeration() {
        let scene = fixtures::square_scene();
        let prefs = PreferenceTable::uniform_rows([0.4, 0.6, 0.0, 0.0]).unwrap();
        let tree = parse_expression("the object in front of the square", &Lexicon::for_scene(&scene)).unwrap();
        let d = oracle_denote(&tree, &scene, &prefs).unwrap();
        let expected = [0.6, 0.0, 0.0, 0.4, 0.0, 0.0];
        for (a, b) in d.probs().unwrap().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn leaves_agree_with_resolver() {
        let scene = fixtures::twin_blocks_scene();
        let prefs = PreferenceTable::default();
        for text in ["the block", "the car", "the yellow block", "the sphere"] {
            let tree = parse_expression(text, &Lexicon::for_scene(&scene)).unwrap();
            assert_eq!(
                oracle_denote(&tree, &scene, &prefs).unwrap(),
                denote(&tree, &scene, &prefs)
            );
        }
    }

    #[test]
    fn size_limits() {
        let scene = fixtures::twin_blocks_scene();
        let mut tree = ExpressionTree::Leaf(AttributePhrase::category("car"));
        for _ in 0..4 {
            tree = ExpressionTree::compound(AttributePhrase::category("block"), Preposition::Left, tree);
        }
        assert!(matches!(
            oracle_denote(&tree, &scene, &PreferenceTable::default()),
            Err(HarnessError::OracleTooLarge { depth: 4, .. })
        ));
    }
}
