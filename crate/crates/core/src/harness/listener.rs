//! A simulated listener that commits to one frame per relation unit.
//!
//! Working from the innermost noun phrase outwards, the listener settles on
//! a single landmark entity, samples a frame kind for it from the true
//! preference row (restricted to frames that exist for that landmark),
//! keeps the head candidates standing in the crisp relation, and commits to
//! the first of them by id.

use super::oracle::flatten;
use crate::frames::{frame_instance, FrameKind, PreferenceTable};
use crate::prepositions::{relation, Preposition};
use crate::resolver::{AttributePhrase, ExpressionTree};
use crate::scene::Scene;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListenerModel {
    /// Only frames under which some head candidate fits are sampled, so the
    /// listener is confused only when no frame makes the phrase true. This
    /// matches the resolver, which renormalizes over consistent readings.
    #[default]
    Consistent,
    /// Every frame is sampled by preference; a frame under which nothing
    /// fits leaves the listener confused.
    Strict,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ListenerConfig {
    pub model: ListenerModel,
    /// Chance of reusing the previous (inner) unit's frame when it exists
    /// for the current landmark.
    pub coupling: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "outcome", content = "entity")]
pub enum ListenerOutcome {
    Identified(usize),
    /// Nothing fits at some step.
    Confused,
}

impl ListenerOutcome {
    pub fn is(&self, target: usize) -> bool {
        *self == ListenerOutcome::Identified(target)
    }
}

/// Candidates for `head`, ordered by id.
fn candidates(head: &AttributePhrase, scene: &Scene) -> Vec<usize> {
    let mut c: Vec<usize> = (0..scene.len()).filter(|&i| head.matches(scene, i)).collect();
    c.sort_by(|&a, &b| scene.entity(a).id.cmp(&scene.entity(b).id));
    c
}

/// Frame distribution from the true row restricted to frames that exist
/// for `landmark`, renormalized, before any consistency filtering.
pub fn frame_distribution(
    landmark: usize,
    scene: &Scene,
    prefs: &PreferenceTable,
    prev: Option<FrameKind>,
    coupling: f64,
) -> [f64; 4] {
    let row = prefs.row(scene.landmark_type_of(landmark));
    let exists = |k: FrameKind| frame_instance(k, scene, Some(landmark)).is_ok();
    let mut dist = [0.0; 4];
    let mass: f64 = FrameKind::ALL
        .iter()
        .filter(|&&k| exists(k))
        .map(|k| row[k.index()])
        .sum();
    if mass > 0.0 {
        for k in FrameKind::ALL.into_iter().filter(|&k| exists(k)) {
            dist[k.index()] = row[k.index()] / mass;
        }
    }
    if let Some(p) = prev.filter(|&p| exists(p) && coupling > 0.0) {
        for v in dist.iter_mut() {
            *v *= 1.0 - coupling;
        }
        dist[p.index()] += coupling;
    }
    dist
}

/// One relation step under a committed landmark and frame.
fn step(head: &AttributePhrase, prep: Preposition, landmark: usize, kind: FrameKind, scene: &Scene) -> Option<usize> {
    let frame = frame_instance(kind, scene, Some(landmark)).ok()?;
    let lm_pos = scene.entity(landmark).pos;
    candidates(head, scene).into_iter().find(|&o| {
        o != landmark
            && scene.entity(o).referable_as_target()
            && relation(scene.entity(o).pos, lm_pos, &frame).expect("scene centroids are separated") == prep
    })
}

/// Per frame kind: its sampling weight and where it leads. Weights sum to
/// one unless the listener is sure to be confused, in which case all are 0
/// for the consistent model.
fn unit_options(
    head: &AttributePhrase,
    prep: Preposition,
    landmark: usize,
    scene: &Scene,
    prefs: &PreferenceTable,
    prev: Option<FrameKind>,
    listener: &ListenerConfig,
) -> [(f64, Option<usize>); 4] {
    let dist = frame_distribution(landmark, scene, prefs, prev, listener.coupling);
    let mut options = FrameKind::ALL.map(|k| {
        let p = dist[k.index()];
        (
            p,
            if p > 0.0 {
                step(head, prep, landmark, k, scene)
            } else {
                None
            },
        )
    });
    if listener.model == ListenerModel::Consistent {
        let live: f64 = options.iter().filter(|o| o.1.is_some()).map(|o| o.0).sum();
        for o in options.iter_mut() {
            o.0 = if o.1.is_some() { o.0 / live } else { 0.0 };
        }
    }
    options
}

fn sample<R: Rng + ?Sized>(options: &[(f64, Option<usize>); 4], rng: &mut R) -> (FrameKind, Option<usize>) {
    let mut u = rng.gen::<f64>() * options.iter().map(|o| o.0).sum::<f64>();
    let mut last = None;
    for (k, &(p, next)) in FrameKind::ALL.into_iter().zip(options) {
        if p > 0.0 {
            last = Some((k, next));
            if u < p {
                return (k, next);
            }
            u -= p;
        }
    }
    last.expect("some frame has weight")
}

/// One simulated listener trial.
pub fn simulate_listener<R: Rng + ?Sized>(
    tree: &ExpressionTree,
    scene: &Scene,
    true_prefs: &PreferenceTable,
    rng: &mut R,
    listener: &ListenerConfig,
) -> ListenerOutcome {
    let (heads, preps) = flatten(tree);
    let Some(&first) = candidates(heads[heads.len() - 1], scene).first() else {
        return ListenerOutcome::Confused;
    };
    let mut current = first;
    let mut prev = None;
    for u in (0..preps.len()).rev() {
        let options = unit_options(heads[u], preps[u], current, scene, true_prefs, prev, listener);
        if options.iter().all(|o| o.0 == 0.0) {
            return ListenerOutcome::Confused;
        }
        match sample(&options, rng) {
            (kind, Some(next)) => {
                current = next;
                prev = Some(kind);
            }
            (_, None) => return ListenerOutcome::Confused,
        }
    }
    ListenerOutcome::Identified(current)
}

/// Exact probability that a simulated listener identifies `target`.
pub fn listener_expectation(
    tree: &ExpressionTree,
    scene: &Scene,
    true_prefs: &PreferenceTable,
    target: usize,
    listener: &ListenerConfig,
) -> f64 {
    let (heads, preps) = flatten(tree);
    let Some(&first) = candidates(heads[heads.len() - 1], scene).first() else {
        return 0.0;
    };

    struct Ctx<'a> {
        heads: &'a [&'a AttributePhrase],
        preps: &'a [Preposition],
        scene: &'a Scene,
        prefs: &'a PreferenceTable,
        target: usize,
        listener: &'a ListenerConfig,
    }

    fn go(u: usize, current: usize, prev: Option<FrameKind>, ctx: &Ctx) -> f64 {
        if u == 0 {
            return if current == ctx.target { 1.0 } else { 0.0 };
        }
        let unit = u - 1;
        let options = unit_options(
            ctx.heads[unit],
            ctx.preps[unit],
            current,
            ctx.scene,
            ctx.prefs,
            prev,
            ctx.listener,
        );
        FrameKind::ALL
            .into_iter()
            .zip(options)
            .map(|(k, (p, next))| match next {
                Some(next) if p > 0.0 => p * go(unit, next, Some(k), ctx),
                _ => 0.0,
            })
            .sum()
    }

    let ctx = Ctx {
        heads: &heads,
        preps: &preps,
        scene,
        prefs: true_prefs,
        target,
        listener,
    };
    go(preps.len(), first, None, &ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::resolver::{parse_expression, Lexicon};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const STRICT: ListenerConfig = ListenerConfig {
        model: ListenerModel::Strict,
        coupling: 0.0,
    };
    const CONSISTENT: ListenerConfig = ListenerConfig {
        model: ListenerModel::Consistent,
        coupling: 0.0,
    };

    fn front_of_square(scene: &Scene) -> ExpressionTree {
        parse_expression("the object in front of the square", &Lexicon::for_scene(scene)).unwrap()
    }

    #[test]
    fn square_outcomes_follow_the_sampled_frame() {
        let scene = fixtures::square_scene();
        let tree = front_of_square(&scene);
        let (a, d) = (scene.index_of("A").unwrap(), scene.index_of("D").unwrap());
        let ego = PreferenceTable::uniform_rows([1.0, 0.0, 0.0, 0.0]).unwrap();
        let addr = PreferenceTable::uniform_rows([0.0, 1.0, 0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for listener in [STRICT, CONSISTENT] {
            for _ in 0..10 {
                assert!(simulate_listener(&tree, &scene, &ego, &mut rng, &listener).is(d));
                assert!(simulate_listener(&tree, &scene, &addr, &mut rng, &listener).is(a));
            }
            let mixed = PreferenceTable::uniform_rows([0.4, 0.6, 0.0, 0.0]).unwrap();
            assert!((listener_expectation(&tree, &scene, &mixed, a, &listener) - 0.6).abs() < 1e-12);
            assert!((listener_expectation(&tree, &scene, &mixed, d, &listener) - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_landmark_confuses() {
        let scene = fixtures::square_scene();
        let tree = parse_expression("the block to the left of the car", &Lexicon::builtin()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for listener in [STRICT, CONSISTENT] {
            let out = simulate_listener(&tree, &scene, &PreferenceTable::default(), &mut rng, &listener);
            assert_eq!(out, ListenerOutcome::Confused);
            assert_eq!(
                listener_expectation(&tree, &scene, &PreferenceTable::default(), 0, &listener),
                0.0
            );
        }
    }

    #[test]
    fn strict_listeners_can_miss_a_reading_that_fits() {
        // Under the speaker's frame B is right of C; under the listener's
        // nothing is, so a strict listener leaning on its own view misses.
        let scene = fixtures::square_scene();
        let tree = parse_expression("the object to the right of the square", &Lexicon::for_scene(&scene)).unwrap();
        let prefs = PreferenceTable::uniform_rows([0.4, 0.6, 0.0, 0.0]).unwrap();
        let b = scene.index_of("B").unwrap();
        assert!((listener_expectation(&tree, &scene, &prefs, b, &STRICT) - 0.4).abs() < 1e-12);
        assert!((listener_expectation(&tree, &scene, &prefs, b, &CONSISTENT) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intrinsic_mass_is_dropped_for_unoriented_landmarks() {
        let scene = fixtures::square_scene();
        let c = scene.index_of("C").unwrap();
        let dist = frame_distribution(c, &scene, &PreferenceTable::default(), None, 0.0);
        assert_eq!(dist[FrameKind::Intrinsic.index()], 0.0);
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let coupled = frame_distribution(c, &scene, &PreferenceTable::default(), Some(FrameKind::Extrinsic), 0.5);
        assert!((coupled[FrameKind::Extrinsic.index()] - (0.5 + 0.5 * dist[3])).abs() < 1e-12);
    }

    #[test]
    fn empirical_rate_matches_expectation() {
        let scene = fixtures::square_scene();
        let tree = front_of_square(&scene);
        let prefs = PreferenceTable::uniform_rows([0.4, 0.6, 0.0, 0.0]).unwrap();
        let a = scene.index_of("A").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| simulate_listener(&tree, &scene, &prefs, &mut rng, &CONSISTENT).is(a))
            .count();
        let p = listener_expectation(&tree, &scene, &prefs, a, &CONSISTENT);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() <= 3.0 * se);
    }
}
