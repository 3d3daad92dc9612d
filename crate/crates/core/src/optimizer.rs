//! Scoring candidate expressions against the listener model and choosing
//! among them: exhaustive search, the greedy per-unit variant, and the
//! fixed-perspective baselines.

use crate::frames::{FrameKind, PreferenceTable};
use crate::generator::{
    build_landmark_chain, candidate_for, expression_space, CandidateExpression, GenerationError, GeneratorConfig,
    LandmarkChain,
};
use crate::resolver::{denote, Denotation, ExpressionTree};
use crate::scene::Scene;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Probabilities this close to the maximum count as maximal.
pub const APPROPRIATENESS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FrameAssignment {
    pub kind: FrameKind,
    /// Id of the entity anchoring the frame; `None` for extrinsic.
    pub origin: Option<String>,
}

/// One frame per relation unit, outermost unit first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Strategy {
    pub assignments: Vec<FrameAssignment>,
}

impl Strategy {
    pub fn kinds(&self) -> Vec<FrameKind> {
        self.assignments.iter().map(|a| a.kind).collect()
    }

    /// Same frame kind at every unit.
    pub fn is_consistent(&self) -> bool {
        self.assignments.windows(2).all(|w| w[0].kind == w[1].kind)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.assignments.iter().map(|a| a.kind.to_string()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Score {
    /// 1 when the target is (one of) the most probable referents, else 0.
    pub appropriateness: f64,
    /// Probability the listener resolves to the target.
    pub effectiveness: f64,
    pub total: f64,
}

impl Score {
    pub const ZERO: Score = Score {
        appropriateness: 0.0,
        effectiveness: 0.0,
        total: 0.0,
    };

    pub fn from_denotation(d: &Denotation, target: usize) -> Score {
        if !d.is_resolvable() {
            return Score::ZERO;
        }
        let effectiveness = d.prob(target);
        let appropriateness = if effectiveness > 0.0 && d.max_prob() - effectiveness <= APPROPRIATENESS_TOLERANCE {
            1.0
        } else {
            0.0
        };
        Score {
            appropriateness,
            effectiveness,
            total: appropriateness + effectiveness,
        }
    }
}

pub fn score_tree(tree: &ExpressionTree, target: usize, scene: &Scene, prefs: &PreferenceTable) -> (Score, Denotation) {
    let d = denote(tree, scene, prefs);
    (Score::from_denotation(&d, target), d)
}

pub fn score(candidate: &CandidateExpression, target: usize, scene: &Scene, prefs: &PreferenceTable) -> Score {
    score_tree(&candidate.tree, target, scene, prefs).0
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OptimizerError {
    #[error("no candidate expressions to choose from")]
    EmptySpace,
}

/// A candidate with its score and full denotation.
#[derive(Clone, Debug)]
pub struct ScoredCandidate {
    pub candidate: CandidateExpression,
    pub score: Score,
    pub denotation: Denotation,
}

/// Scores every candidate; identical trees are resolved once.
pub fn score_space(
    candidates: &[CandidateExpression],
    target: usize,
    scene: &Scene,
    prefs: &PreferenceTable,
) -> Vec<ScoredCandidate> {
    let mut cache: HashMap<&ExpressionTree, (Score, Denotation)> = HashMap::new();
    candidates
        .iter()
        .map(|c| {
            let (score, denotation) = cache
                .entry(&c.tree)
                .or_insert_with(|| score_tree(&c.tree, target, scene, prefs))
                .clone();
            ScoredCandidate {
                candidate: c.clone(),
                score,
                denotation,
            }
        })
        .collect()
}

/// Ordering used to break exact score ties: frame-consistent strategies,
/// then canonical frame order over the strategy, then shorter surfaces.
fn tie_break(a: &CandidateExpression, b: &CandidateExpression) -> Ordering {
    b.strategy
        .is_consistent()
        .cmp(&a.strategy.is_consistent())
        .then_with(|| a.strategy.kinds().cmp(&b.strategy.kinds()))
        .then_with(|| a.surface.len().cmp(&b.surface.len()))
}

/// Index of the best scored candidate.
pub fn best_index(scored: &[ScoredCandidate]) -> Result<usize, OptimizerError> {
    (0..scored.len())
        .reduce(|best, i| {
            let (a, b) = (&scored[i], &scored[best]);
            let better = match a.score.total.total_cmp(&b.score.total) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => tie_break(&a.candidate, &b.candidate) == Ordering::Less,
            };
            if better {
                i
            } else {
                best
            }
        })
        .ok_or(OptimizerError::EmptySpace)
}

/// Exhaustive argmax of appropriateness + effectiveness.
pub fn select_best(
    candidates: &[CandidateExpression],
    target: usize,
    scene: &Scene,
    prefs: &PreferenceTable,
) -> Result<(CandidateExpression, Score), OptimizerError> {
    let scored = score_space(candidates, target, scene, prefs);
    let i = best_index(&scored)?;
    let best = scored.into_iter().nth(i).expect("index in range");
    Ok((best.candidate, best.score))
}

/// Per unit, the most preferred applicable frame for that unit's landmark
/// type, ignoring how the whole expression would be resolved.
pub fn select_greedy_max(chain: &LandmarkChain, scene: &Scene, prefs: &PreferenceTable) -> CandidateExpression {
    let landmarks = chain.landmarks();
    let kinds: Vec<FrameKind> = landmarks
        .iter()
        .map(|&l| {
            let row = prefs.row(scene.landmark_type_of(l));
            FrameKind::ALL
                .into_iter()
                .filter(|&k| {
                    k != FrameKind::Intrinsic || scene.landmark_type_of(l) == crate::scene::LandmarkType::OrientedObject
                })
                .reduce(|best, k| if row[k.index()] > row[best.index()] { k } else { best })
                .expect("egocentric always applies")
        })
        .collect();
    candidate_for(chain, scene, &kinds).expect("chosen frames are applicable")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Always the speaker's perspective.
    Robot,
    /// Always the listener's perspective.
    Human,
    /// A uniformly drawn applicable strategy.
    Random,
}

pub fn select_baseline(kind: Baseline, chain: &LandmarkChain, scene: &Scene, seed: u64) -> CandidateExpression {
    let fixed =
        |frame: FrameKind| candidate_for(chain, scene, &vec![frame; chain.k()]).expect("relative frames always apply");
    match kind {
        Baseline::Robot => fixed(FrameKind::Egocentric),
        Baseline::Human => fixed(FrameKind::AddresseeCentered),
        Baseline::Random => {
            let space = expression_space(chain, scene, &FrameKind::ALL);
            space
                .choose(&mut ChaCha8Rng::seed_from_u64(seed))
                .expect("the space is never empty")
                .clone()
        }
    }
}

/// Generation methods: exhaustive search, its greedy variant, and baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pcsreg,
    Max,
    Robot,
    Human,
    Random,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Pcsreg,
        Method::Max,
        Method::Robot,
        Method::Human,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pcsreg => "pcsreg",
            Method::Max => "max",
            Method::Robot => "robot",
            Method::Human => "human",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// A generated expression with its chain and score under the generator's
/// preference table.
#[derive(Clone, Debug)]
pub struct Generation {
    pub method: Method,
    pub chain: LandmarkChain,
    pub space: Vec<CandidateExpression>,
    pub selected: CandidateExpression,
    pub score: Score,
}

/// Picks one expression from an existing chain with `method`.
pub fn choose(
    method: Method,
    chain: &LandmarkChain,
    space: &[CandidateExpression],
    scene: &Scene,
    prefs: &PreferenceTable,
    seed: u64,
) -> CandidateExpression {
    match method {
        Method::Pcsreg => {
            select_best(space, chain.target, scene, prefs)
                .expect("the space is never empty")
                .0
        }
        Method::Max => select_greedy_max(chain, scene, prefs),
        Method::Robot => select_baseline(Baseline::Robot, chain, scene, seed),
        Method::Human => select_baseline(Baseline::Human, chain, scene, seed),
        Method::Random => select_baseline(Baseline::Random, chain, scene, seed),
    }
}

/// End to end: chain, expression space, and the method's choice.
pub fn generate(
    scene: &Scene,
    target: usize,
    prefs: &PreferenceTable,
    method: Method,
    seed: u64,
    config: &GeneratorConfig,
) -> Result<Generation, GenerationError> {
    let chain = build_landmark_chain(target, scene, prefs, config)?;
    let space = expression_space(&chain, scene, &FrameKind::ALL);
    let selected = choose(method, &chain, &space, scene, prefs, seed);
    let score = score(&selected, target, scene, prefs);
    Ok(Generation {
        method,
        chain,
        space,
        selected,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::frames::default_preferences;
    use crate::geometry::Vec2;
    use crate::prepositions::Preposition;
    use crate::resolver::{parse_expression, AttributePhrase, Lexicon};
    use crate::scene::{Entity, EntityKind, Extent, LandmarkType};

    fn square() -> (Scene, PreferenceTable, ExpressionTree) {
        let scene = fixtures::square_scene();
        let prefs = PreferenceTable::uniform_rows([0.4, 0.6, 0.0, 0.0]).unwrap();
        let tree = parse_expression("the object in front of the square", &Lexicon::for_scene(&scene)).unwrap();
        (scene, prefs, tree)
    }

    fn candidate(tree: ExpressionTree, kinds: &[FrameKind]) -> CandidateExpression {
        CandidateExpression {
            surface: crate::generator::realize(&tree),
            tree,
            strategy: Strategy {
                assignments: kinds
                    .iter()
                    .map(|&kind| FrameAssignment { kind, origin: None })
                    .collect(),
            },
        }
    }

    #[test]
    fn square_scene_scores() {
        let (scene, prefs, tree) = square();
        let (a, _) = score_tree(&tree, scene.index_of("A").unwrap(), &scene, &prefs);
        assert_eq!(a.appropriateness, 1.0);
        assert!((a.effectiveness - 0.6).abs() < 1e-12 && (a.total - 1.6).abs() < 1e-12);
        let (d, _) = score_tree(&tree, scene.index_of("D").unwrap(), &scene, &prefs);
        assert_eq!(d.appropriateness, 0.0);
        assert!((d.total - 0.4).abs() < 1e-12);

        let missing = ExpressionTree::Leaf(AttributePhrase::category("car"));
        assert_eq!(score_tree(&missing, 0, &scene, &prefs).0, Score::ZERO);
    }

    #[test]
    fn tied_maximum_is_appropriate() {
        let scene = fixtures::twin_blocks_scene();
        let tree = ExpressionTree::Leaf(AttributePhrase::category("block"));
        let (s, _) = score_tree(&tree, 0, &scene, &default_preferences());
        assert_eq!(s.appropriateness, 1.0);
        assert_eq!(s.effectiveness, 0.5);
    }

    #[test]
    fn strict_argmax_and_empty_space() {
        // Targets A (1.6), D (0.4), and a leaf "the round block" for A (A and D
        // both round: 0.5 each, tied max -> 1.5).
        let (scene, prefs, tree) = square();
        let round = ExpressionTree::Leaf(AttributePhrase::category("block").with_shape("round"));
        let cands = vec![
            candidate(round, &[]),
            candidate(tree.clone(), &[FrameKind::AddresseeCentered]),
            candidate(ExpressionTree::Leaf(AttributePhrase::category("object")), &[]),
        ];
        let a = scene.index_of("A").unwrap();
        let (best, s) = select_best(&cands, a, &scene, &prefs).unwrap();
        assert_eq!(best.tree, tree);
        assert!((s.total - 1.6).abs() < 1e-12);
        assert_eq!(select_best(&[], a, &scene, &prefs), Err(OptimizerError::EmptySpace));
    }

    #[test]
    fn exact_ties_prefer_consistent_strategies() {
        let (scene, prefs, tree) = square();
        let a = scene.index_of("A").unwrap();
        let mixed = candidate(tree.clone(), &[FrameKind::AddresseeCentered, FrameKind::Egocentric]);
        let consistent = candidate(
            tree.clone(),
            &[FrameKind::AddresseeCentered, FrameKind::AddresseeCentered],
        );
        let (best, _) = select_best(&[mixed.clone(), consistent.clone()], a, &scene, &prefs).unwrap();
        assert_eq!(best.strategy, consistent.strategy);
        let (best, _) = select_best(&[consistent.clone(), mixed], a, &scene, &prefs).unwrap();
        assert_eq!(best.strategy, consistent.strategy);
    }

    #[test]
    fn greedy_picks_row_maxima() {
        let base = default_preferences();
        let table = Extent {
            min: Vec2::new(-1.0, -1.0),
            max: Vec2::new(1.0, 1.0),
        };
        let chain_kinds = |scene: &Scene, target: usize| {
            let chain = build_landmark_chain(target, scene, &base, &GeneratorConfig::default()).unwrap();
            (
                chain.landmark_types(scene),
                select_greedy_max(&chain, scene, &base).strategy.kinds(),
            )
        };

        // Oriented landmark: the car in the two-block scene.
        let scene = fixtures::twin_blocks_scene();
        assert_eq!(
            chain_kinds(&scene, 0),
            (vec![LandmarkType::OrientedObject], vec![FrameKind::Intrinsic])
        );

        // Listener landmark: two blocks on either side of the listener only.
        let scene = Scene::new(
            vec![
                Entity::object("a", "block", Vec2::new(-0.3, 0.9)),
                Entity::object("b", "block", Vec2::new(0.3, 0.9)),
                Entity::agent(
                    "speaker",
                    EntityKind::Speaker,
                    Vec2::new(0.0, -1.0),
                    std::f64::consts::FRAC_PI_2,
                ),
                Entity::agent(
                    "listener",
                    EntityKind::Listener,
                    Vec2::new(0.0, 0.9),
                    -std::f64::consts::FRAC_PI_2,
                ),
            ],
            Vec2::new(0.0, 1.0),
            table,
        )
        .unwrap();
        assert_eq!(
            chain_kinds(&scene, 0),
            (vec![LandmarkType::Listener], vec![FrameKind::AddresseeCentered])
        );

        // Unoriented landmark.
        let scene = Scene::new(
            vec![
                Entity::object("a", "block", Vec2::new(-0.3, 0.0)),
                Entity::object("b", "block", Vec2::new(0.3, 0.0)),
                Entity::object("c", "cuboid", Vec2::new(0.0, 0.0)),
                Entity::agent(
                    "speaker",
                    EntityKind::Speaker,
                    Vec2::new(0.0, -1.0),
                    std::f64::consts::FRAC_PI_2,
                ),
                Entity::agent(
                    "listener",
                    EntityKind::Listener,
                    Vec2::new(0.0, 1.0),
                    -std::f64::consts::FRAC_PI_2,
                ),
            ],
            Vec2::new(0.0, 1.0),
            table,
        )
        .unwrap();
        assert_eq!(
            chain_kinds(&scene, 0),
            (vec![LandmarkType::UnorientedObject], vec![FrameKind::Egocentric])
        );
    }

    #[test]
    fn baselines_on_twin_blocks() {
        let scene = fixtures::twin_blocks_scene();
        let chain = build_landmark_chain(0, &scene, &default_preferences(), &GeneratorConfig::default()).unwrap();
        let robot = select_baseline(Baseline::Robot, &chain, &scene, 0);
        assert_eq!(robot.surface, "the yellow block to the left of the car");
        let human = select_baseline(Baseline::Human, &chain, &scene, 0);
        assert_eq!(human.surface, "the yellow block to the right of the car");
        assert!(matches!(
            human.tree,
            ExpressionTree::Compound {
                prep: Preposition::Right,
                ..
            }
        ));
        let r1 = select_baseline(Baseline::Random, &chain, &scene, 17);
        let r2 = select_baseline(Baseline::Random, &chain, &scene, 17);
        assert_eq!(r1, r2);
    }

    #[test]
    fn twin_blocks_pcsreg_picks_the_max_over_four() {
        let scene = fixtures::twin_blocks_scene();
        let prefs = default_preferences();
        let g = generate(&scene, 0, &prefs, Method::Pcsreg, 0, &GeneratorConfig::default()).unwrap();
        assert_eq!(g.space.len(), 4);
        let scored = score_space(&g.space, 0, &scene, &prefs);
        let max = scored.iter().map(|s| s.score.total).fold(f64::MIN, f64::max);
        assert_eq!(g.score.total, max);
        assert_eq!(g.selected.surface, "the yellow block to the left of the car");
    }
}
